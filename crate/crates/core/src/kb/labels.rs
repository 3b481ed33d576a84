use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::kb::TripleSet;
use crate::text::normalize_label;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub iri: String,
    /// Number of triples the entity takes part in.
    pub prior: u64,
}

/// Normalized surface form to ranked entity candidates.
#[derive(Debug, Clone, Default)]
pub struct LabelIndex {
    entries: BTreeMap<String, Vec<Candidate>>,
    max_words: usize,
}

impl LabelIndex {
    /// Looks up a surface; the key is normalized before lookup.
    pub fn get(&self, surface: &str) -> Option<&[Candidate]> {
        self.entries.get(&normalize_label(surface)).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Longest label length in words.
    pub fn max_words(&self) -> usize {
        self.max_words
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[Candidate])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

/// Indexes every label literal under `label_relations` by its normalized text.
pub fn build_label_index(kb: &TripleSet, label_relations: &BTreeSet<String>) -> LabelIndex {
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for t in kb.iter() {
        *freq.entry(t.subject_id()).or_default() += 1;
        if let Some(o) = t.object.resource() {
            if o != t.subject_id() {
                *freq.entry(o).or_default() += 1;
            }
        }
    }
    let mut grouped: BTreeMap<String, BTreeSet<&str>> = BTreeMap::new();
    for t in kb.iter() {
        if !label_relations.contains(&t.relation) {
            continue;
        }
        if let Some(lit) = t.object.as_literal() {
            let key = normalize_label(&lit.text);
            if !key.is_empty() {
                grouped.entry(key).or_default().insert(t.subject_id());
            }
        }
    }
    let mut max_words = 0;
    let entries = grouped
        .into_iter()
        .map(|(key, iris)| {
            max_words = max_words.max(key.split(' ').count());
            let mut cands: Vec<Candidate> = iris
                .into_iter()
                .map(|iri| Candidate { iri: iri.to_string(), prior: freq[iri] })
                .collect();
            cands.sort_by(|a, b| b.prior.cmp(&a.prior).then_with(|| a.iri.cmp(&b.iri)));
            (key, cands)
        })
        .collect();
    LabelIndex { entries, max_words }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{parse_ntriples, ParseLimits};
    use crate::text::RDFS_LABEL;

    fn labels() -> BTreeSet<String> {
        [RDFS_LABEL.to_string()].into()
    }

    fn kb(doc: &str) -> TripleSet {
        parse_ntriples(doc.as_bytes(), ParseLimits::default()).unwrap()
    }

    #[test]
    fn indexes_cancer() {
        let kb = kb(&format!(
            "<http://dbpedia.org/resource/Cancer> <{RDFS_LABEL}> \"cancer\"@en .\n\
             <http://dbpedia.org/resource/Cancer> <http://dbpedia.org/ontology/field> <http://dbpedia.org/resource/Oncology> .\n"
        ));
        let idx = build_label_index(&kb, &labels());
        let c = idx.get("Cancer").unwrap();
        assert_eq!(c, &[Candidate { iri: "http://dbpedia.org/resource/Cancer".into(), prior: 2 }]);
    }

    #[test]
    fn no_labels_empty_index() {
        let idx = build_label_index(&kb("<a> <b> <c> .\n"), &labels());
        assert!(idx.is_empty());
    }

    #[test]
    fn ambiguous_kiwi_ordering() {
        // Hand-counted priors: Kiwi_(people) appears in 3 triples, Kiwi in 3,
        // Kiwi_fruit in 2. Ties on prior fall back to IRI order.
        let doc = format!(
            "<Kiwi> <{RDFS_LABEL}> \"Kiwi\"@en .\n\
             <Kiwi> <type> <Bird> .\n\
             <Kiwi> <livesIn> <NZ> .\n\
             <Kiwi_(people)> <{RDFS_LABEL}> \"kiwi\"@en .\n\
             <Kiwi_(people)> <type> <Nation> .\n\
             <Kiwi_(people)> <livesIn> <NZ> .\n\
             <Kiwi_fruit> <{RDFS_LABEL}> \"KIWI\"@en .\n\
             <Kiwi_fruit> <type> <Fruit> .\n\
             <NZ> <{RDFS_LABEL}> \"new zealand\"@en .\n"
        );
        let idx = build_label_index(&kb(&doc), &labels());
        let iris: Vec<(&str, u64)> =
            idx.get("kiwi").unwrap().iter().map(|c| (c.iri.as_str(), c.prior)).collect();
        assert_eq!(iris, vec![("Kiwi", 3), ("Kiwi_(people)", 3), ("Kiwi_fruit", 2)]);
        assert_eq!(idx.get("New  Zealand").unwrap()[0].prior, 3);
        assert_eq!(idx.max_words(), 2);
    }
}
