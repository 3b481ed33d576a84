//! Small text utilities shared across modules.

use unicode_normalization::UnicodeNormalization;

/// NFC, lowercase, internal whitespace collapsed to single spaces, trimmed.
pub fn normalize_label(s: &str) -> String {
    let lowered: String = s.nfc().collect::<String>().to_lowercase();
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits a label into lowercase word tokens on any non-alphanumeric character.
///
/// The returned tokens never contain whitespace or `_`.
pub fn label_words(s: &str) -> Vec<String> {
    normalize_label(s)
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

/// Percent-encodes every byte outside `[A-Za-z0-9_()]`.
pub fn encode_uri_component(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'_' | b'(' | b')') {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

/// The local name of an IRI: the part after the last `/` or `#`.
pub fn local_name(iri: &str) -> &str {
    match iri.rfind(['/', '#']) {
        Some(i) if i + 1 < iri.len() => &iri[i + 1..],
        _ => iri,
    }
}

/// Maps IRIs to whitespace-free discrete tokens by namespace.
///
/// A rule `(namespace, prefix)` turns `namespace + local` into
/// `prefix + encode(local)`. IRIs without a matching rule become
/// `iri_ + encode(local_name)`. Blank nodes keep their `_:` label as an
/// opaque token `bn_<label>`. Every produced token contains `_`, which keeps
/// graph tokens apart from plain label words.
#[derive(Debug, Clone)]
pub struct IriTokenizer {
    rules: Vec<(String, String)>,
}

pub const DBR: &str = "http://dbpedia.org/resource/";
pub const DBR_DE: &str = "http://de.dbpedia.org/resource/";
pub const DBO: &str = "http://dbpedia.org/ontology/";
pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
pub const OWL_SAMEAS: &str = "http://www.w3.org/2002/07/owl#sameAs";

impl Default for IriTokenizer {
    fn default() -> Self {
        IriTokenizer::new(vec![
            (DBR_DE.to_string(), "dbr_de_".to_string()),
            (DBR.to_string(), "dbr_".to_string()),
            (DBO.to_string(), "dbo_".to_string()),
            ("http://www.w3.org/2002/07/owl#".to_string(), "owl_".to_string()),
            ("http://www.w3.org/2000/01/rdf-schema#".to_string(), "rdfs_".to_string()),
        ])
    }
}

impl IriTokenizer {
    /// Longer namespaces are tried first.
    pub fn new(mut rules: Vec<(String, String)>) -> Self {
        rules.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        IriTokenizer { rules }
    }

    pub fn token(&self, iri: &str) -> String {
        if let Some(label) = iri.strip_prefix("_:") {
            return format!("bn_{}", encode_uri_component(label));
        }
        for (ns, prefix) in &self.rules {
            if let Some(local) = iri.strip_prefix(ns.as_str()) {
                if !local.is_empty() {
                    return format!("{prefix}{}", encode_uri_component(local));
                }
            }
        }
        format!("iri_{}", encode_uri_component(local_name(iri)))
    }
}
