//! Greedy and beam decoding over any incremental step model.

use kgnmt_core::tokenize::{BOS_ID, EOS_ID};

/// Next-token log-probabilities, attention over the source and the new
/// decoder state for one hypothesis.
#[derive(Debug, Clone)]
pub struct StepOutput<S> {
    pub log_probs: Vec<f64>,
    pub attention: Vec<f64>,
    pub state: S,
}

impl<S> StepOutput<S> {
    pub fn map_state<T>(self, f: impl FnOnce(S) -> T) -> StepOutput<T> {
        StepOutput { log_probs: self.log_probs, attention: self.attention, state: f(self.state) }
    }
}

pub trait StepModel {
    type Context;
    type State: Clone;

    fn start(&self, src: &[usize]) -> (Self::Context, Self::State);

    /// Advances several hypotheses sharing one source at once.
    fn step(&self, ctx: &Self::Context, states: &[&Self::State], prev: &[usize]) -> Vec<StepOutput<Self::State>>;

    fn source_len(ctx: &Self::Context) -> usize;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Output ids without BOS and EOS.
    pub tokens: Vec<usize>,
    /// One entry per scored step, including the EOS step when finished.
    pub step_log_probs: Vec<f64>,
    /// Source attention for each emitted token (and the EOS step).
    pub attention: Vec<Vec<f64>>,
    pub log_prob: f64,
    pub finished: bool,
}

impl Hypothesis {
    /// Log-probability divided by the number of scored steps.
    pub fn normalized_score(&self) -> f64 {
        if self.step_log_probs.is_empty() {
            self.log_prob
        } else {
            self.log_prob / self.step_log_probs.len() as f64
        }
    }
}

struct Live<S> {
    hyp: Hypothesis,
    state: S,
    prev: usize,
}

/// Highest-scoring token; ties go to the lowest id.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn greedy<M: StepModel>(model: &M, src: &[usize], max_len: usize) -> Hypothesis {
    let (ctx, mut state) = model.start(src);
    let mut hyp = Hypothesis { tokens: vec![], step_log_probs: vec![], attention: vec![], log_prob: 0.0, finished: false };
    let mut prev = BOS_ID;
    for _ in 0..max_len {
        let out = model.step(&ctx, &[&state], &[prev]).pop().expect("one output");
        let tok = argmax(&out.log_probs);
        let lp = out.log_probs[tok];
        hyp.step_log_probs.push(lp);
        hyp.log_prob += lp;
        hyp.attention.push(out.attention);
        if tok == EOS_ID {
            hyp.finished = true;
            break;
        }
        hyp.tokens.push(tok);
        state = out.state;
        prev = tok;
    }
    hyp
}

/// Length-normalized beam search. Each step keeps the `beam` best
/// extensions; those ending in EOS are set aside, and decoding stops once
/// `beam` hypotheses have finished or `max_len` steps have run. Results are
/// sorted by normalized score.
pub fn beam_search<M: StepModel>(model: &M, src: &[usize], beam: usize, max_len: usize) -> Vec<Hypothesis> {
    assert!(beam >= 1, "beam must be at least 1");
    let (ctx, state) = model.start(src);
    let empty = Hypothesis { tokens: vec![], step_log_probs: vec![], attention: vec![], log_prob: 0.0, finished: false };
    let mut live = vec![Live { hyp: empty, state, prev: BOS_ID }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    for _ in 0..max_len {
        if live.is_empty() || finished.len() >= beam {
            break;
        }
        let states: Vec<&M::State> = live.iter().map(|l| &l.state).collect();
        let prevs: Vec<usize> = live.iter().map(|l| l.prev).collect();
        let outs = model.step(&ctx, &states, &prevs);
        let mut cands: Vec<(f64, usize, usize)> = Vec::new();
        for (i, (l, o)) in live.iter().zip(&outs).enumerate() {
            for (tok, &lp) in o.log_probs.iter().enumerate() {
                if lp == f64::NEG_INFINITY {
                    continue;
                }
                cands.push((l.hyp.log_prob + lp, i, tok));
            }
        }
        cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        cands.truncate(beam);
        let mut next = Vec::with_capacity(beam);
        for (score, i, tok) in cands {
            let parent = &live[i];
            let out = &outs[i];
            let mut hyp = parent.hyp.clone();
            hyp.step_log_probs.push(out.log_probs[tok]);
            hyp.log_prob = score;
            hyp.attention.push(out.attention.clone());
            if tok == EOS_ID {
                hyp.finished = true;
                finished.push(hyp);
            } else {
                hyp.tokens.push(tok);
                next.push(Live { hyp, state: out.state.clone(), prev: tok });
            }
        }
        live = next;
    }
    finished.extend(live.into_iter().map(|l| l.hyp));
    finished.sort_by(|a, b| b.normalized_score().total_cmp(&a.normalized_score()));
    finished
}
