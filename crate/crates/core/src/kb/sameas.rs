//! owl:sameAs entailment: equivalent resources share every statement.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::kb::{Term, Triple, TripleSet};

fn find(parent: &mut BTreeMap<String, String>, x: &str) -> String {
    let mut root = x.to_string();
    while let Some(p) = parent.get(&root) {
        if *p == root {
            break;
        }
        root = p.clone();
    }
    let mut cur = x.to_string();
    while cur != root {
        let next = parent.insert(cur, root.clone()).expect("visited node");
        cur = next;
    }
    root
}

/// Equivalence classes induced by `sameas_relation`, as sorted member lists.
pub fn sameas_classes(kb: &TripleSet, sameas_relation: &str) -> Vec<Vec<String>> {
    let mut parent: BTreeMap<String, String> = BTreeMap::new();
    for t in kb.iter() {
        if t.relation != sameas_relation {
            continue;
        }
        let (a, Some(b)) = (t.subject_id(), t.object.resource()) else {
            continue;
        };
        for x in [a, b] {
            parent.entry(x.to_string()).or_insert_with(|| x.to_string());
        }
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent.insert(hi, lo);
        }
    }
    let keys: Vec<String> = parent.keys().cloned().collect();
    let mut classes: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for k in keys {
        let r = find(&mut parent, &k);
        classes.entry(r).or_default().insert(k);
    }
    classes.into_values().map(|c| c.into_iter().collect()).collect()
}

/// Adds the triples entailed by replacing a subject or resource object with
/// any resource in its sameAs class. The input triples come first, in order,
/// followed by the new ones; duplicates are never emitted.
pub fn materialize_sameas(kb: &TripleSet, sameas_relation: &str) -> TripleSet {
    let mut class_of: BTreeMap<&str, usize> = BTreeMap::new();
    let classes = sameas_classes(kb, sameas_relation);
    for (i, c) in classes.iter().enumerate() {
        for m in c {
            class_of.insert(m.as_str(), i);
        }
    }
    let members = |x: &str| -> Vec<String> {
        match class_of.get(x) {
            Some(&i) => classes[i].clone(),
            None => vec![x.to_string()],
        }
    };
    let rebuild = |old: &Term, id: &str| -> Term {
        match old {
            Term::Blank(_) => Term::Blank(id.to_string()),
            _ => Term::Iri(id.to_string()),
        }
    };
    let mut seen: HashSet<Triple> = kb.iter().cloned().collect();
    let mut out: Vec<Triple> = kb.triples().to_vec();
    for t in kb.iter() {
        if t.relation == sameas_relation {
            continue;
        }
        let subjects = members(t.subject_id());
        let objects: Vec<Term> = match t.object.resource() {
            Some(o) => members(o).iter().map(|m| rebuild(&t.object, m)).collect(),
            None => vec![t.object.clone()],
        };
        for s in &subjects {
            for o in &objects {
                let new = Triple { subject: rebuild(&t.subject, s), relation: t.relation.clone(), object: o.clone() };
                if seen.insert(new.clone()) {
                    out.push(new);
                }
            }
        }
    }
    TripleSet::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{parse_ntriples, ParseLimits};

    const SAME: &str = "http://www.w3.org/2002/07/owl#sameAs";

    fn kb(text: &str) -> TripleSet {
        parse_ntriples(text.as_bytes(), ParseLimits::default()).unwrap()
    }

    #[test]
    fn copies_statements_across_the_link() {
        let k = kb("<a> <r> <b> .\n<a> <http://www.w3.org/2002/07/owl#sameAs> <a2> .\n<b2> <http://www.w3.org/2002/07/owl#sameAs> <b> .\n");
        let m = materialize_sameas(&k, SAME);
        let lines: BTreeSet<String> = m.iter().map(crate::kb::format_triple).collect();
        for want in ["<a> <r> <b2> .", "<a2> <r> <b> .", "<a2> <r> <b2> ."] {
            assert!(lines.contains(want), "{want} missing from {lines:?}");
        }
        assert_eq!(m.len(), 3 + 3);
    }

    #[test]
    fn classes_are_transitive() {
        let k = kb("<a> <s> <b> .\n<c> <s> <b> .\n<x> <s> <y> .\n");
        assert_eq!(sameas_classes(&k, "s"), vec![vec!["a", "b", "c"], vec!["x", "y"]]);
    }

    #[test]
    fn literals_follow_subjects() {
        let k = kb("<a> <l> \"A\"@en .\n<a> <s> <b> .\n");
        let m = materialize_sameas(&k, "s");
        assert!(m.iter().any(|t| t.subject_id() == "b" && t.object.as_literal().is_some()));
    }

    #[test]
    fn no_links_is_identity() {
        let k = kb("<a> <r> <b> .\n");
        assert_eq!(materialize_sameas(&k, SAME), k);
    }
}
