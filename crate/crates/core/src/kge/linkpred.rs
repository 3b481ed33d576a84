use std::collections::HashSet;

use crate::kge::KgeModel;
use crate::par::{self, ExecMode};

/// Predict `gold` from a bag of input tokens.
#[derive(Debug, Clone)]
pub struct LinkQuery {
    pub features: Vec<String>,
    pub gold: String,
}

/// Fraction of queries whose gold label ranks in the top `k` among
/// `candidates` by classifier probability. Ties rank against the gold label.
pub fn hits_at_k(model: &KgeModel, queries: &[LinkQuery], candidates: &[String], k: usize, mode: ExecMode) -> f64 {
    if queries.is_empty() {
        return 0.0;
    }
    let allowed: HashSet<&str> = candidates.iter().map(String::as_str).collect();
    let labels = model.labels();
    let hits = par::map(mode, queries, |q| {
        let feats: Vec<&str> = q.features.iter().map(String::as_str).collect();
        let Some(lp) = model.label_log_probs(&feats) else {
            return 0usize;
        };
        let Some(gold_leaf) = model.label_leaf(&q.gold) else {
            return 0;
        };
        let gold = lp[gold_leaf];
        let better = labels
            .iter()
            .zip(&lp)
            .enumerate()
            .filter(|(i, (l, s))| *i != gold_leaf && allowed.contains(l.as_str()) && **s >= gold)
            .count();
        usize::from(better < k)
    });
    hits.iter().sum::<usize>() as f64 / queries.len() as f64
}
