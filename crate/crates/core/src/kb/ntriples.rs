//! A line-oriented N-Triples reader and writer.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::kb::KbError;
use crate::par::{self, ExecMode};

/// An RDF term. Blank nodes are kept as opaque labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Iri(String),
    Blank(String),
    Literal(Literal),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub text: String,
    /// Lowercased primary subtag, e.g. `en`.
    pub lang: Option<String>,
    pub datatype: Option<String>,
}

impl Term {
    /// The IRI or `_:label` identity of a non-literal term.
    pub fn resource(&self) -> Option<&str> {
        match self {
            Term::Iri(s) => Some(s),
            Term::Blank(s) => Some(s),
            Term::Literal(_) => None,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            Term::Literal(l) => Some(l),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Triple {
    pub subject: Term,
    pub relation: String,
    pub object: Term,
}

impl Triple {
    pub fn subject_id(&self) -> &str {
        self.subject.resource().expect("subject is never a literal")
    }
}

/// An ordered multiset of triples with cached cardinalities.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TripleSet {
    triples: Vec<Triple>,
    entity_count: usize,
    relation_count: usize,
}

impl TripleSet {
    pub fn new(triples: Vec<Triple>) -> Self {
        let mut entities = HashSet::new();
        let mut relations = HashSet::new();
        for t in &triples {
            entities.insert(t.subject_id());
            if let Some(o) = t.object.resource() {
                entities.insert(o);
            }
            relations.insert(t.relation.as_str());
        }
        let (entity_count, relation_count) = (entities.len(), relations.len());
        TripleSet { triples, entity_count, relation_count }
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn entity_count(&self) -> usize {
        self.entity_count
    }

    pub fn relation_count(&self) -> usize {
        self.relation_count
    }

    /// Concatenation preserving the order of `self` then `other`.
    pub fn merged(&self, other: &TripleSet) -> TripleSet {
        let mut all = self.triples.clone();
        all.extend(other.triples.iter().cloned());
        TripleSet::new(all)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Triple> {
        self.triples.iter()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParseLimits {
    pub max_line_len: usize,
}

impl Default for ParseLimits {
    fn default() -> Self {
        ParseLimits { max_line_len: 1 << 20 }
    }
}

/// Parses an N-Triples document held in memory.
pub fn parse_ntriples(input: &[u8], limits: ParseLimits) -> Result<TripleSet, KbError> {
    parse_ntriples_with(input, limits, ExecMode::Sequential)
}

/// Like [`parse_ntriples`], parsing lines in parallel when `mode` allows.
/// The first error in file order wins.
pub fn parse_ntriples_with(
    input: &[u8],
    limits: ParseLimits,
    mode: ExecMode,
) -> Result<TripleSet, KbError> {
    let lines: Vec<&[u8]> = input.split(|&b| b == b'\n').collect();
    let parsed = par::map_range(mode, lines.len(), |i| parse_raw_line(lines[i], i + 1, limits));
    let mut triples = Vec::with_capacity(lines.len());
    for r in parsed {
        if let Some(t) = r? {
            triples.push(t);
        }
    }
    Ok(TripleSet::new(triples))
}

pub fn parse_ntriples_reader<R: std::io::Read>(
    mut reader: R,
    limits: ParseLimits,
) -> Result<TripleSet, KbError> {
    let mut buf = Vec::new();
    reader.read_to_end(&mut buf)?;
    parse_ntriples(&buf, limits)
}

fn parse_raw_line(raw: &[u8], line: usize, limits: ParseLimits) -> Result<Option<Triple>, KbError> {
    let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
    if raw.len() > limits.max_line_len {
        return Err(KbError::Parse {
            line,
            column: limits.max_line_len + 1,
            message: format!("line exceeds {} bytes", limits.max_line_len),
        });
    }
    let text = std::str::from_utf8(raw).map_err(|e| KbError::Encoding {
        line,
        byte: e.valid_up_to() + 1,
    })?;
    parse_line(text, line)
}

/// Parses one statement. Blank lines and comments yield `None`.
pub fn parse_line(text: &str, line: usize) -> Result<Option<Triple>, KbError> {
    let mut p = LineParser { chars: text.chars().collect(), pos: 0, line };
    p.skip_ws();
    if p.at_end() || p.peek() == Some('#') {
        return Ok(None);
    }
    let subject = match p.peek() {
        Some('<') => Term::Iri(p.iri()?),
        Some('_') => Term::Blank(p.blank()?),
        _ => return Err(p.err("expected IRI or blank node as subject")),
    };
    p.require_ws()?;
    let relation = match p.peek() {
        Some('<') => p.iri()?,
        _ => return Err(p.err("expected IRI as relation")),
    };
    p.require_ws()?;
    let object = match p.peek() {
        Some('<') => Term::Iri(p.iri()?),
        Some('_') => Term::Blank(p.blank()?),
        Some('"') => Term::Literal(p.literal()?),
        _ => return Err(p.err("expected IRI, blank node or literal as object")),
    };
    p.skip_ws();
    if p.peek() != Some('.') {
        return Err(p.err("expected terminating '.'"));
    }
    p.pos += 1;
    p.skip_ws();
    if !p.at_end() && p.peek() != Some('#') {
        return Err(p.err("unexpected content after '.'"));
    }
    Ok(Some(Triple { subject, relation, object }))
}

struct LineParser {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl LineParser {
    fn err(&self, message: &str) -> KbError {
        KbError::Parse { line: self.line, column: self.pos + 1, message: message.to_string() }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t')) {
            self.pos += 1;
        }
    }

    fn require_ws(&mut self) -> Result<(), KbError> {
        if !matches!(self.peek(), Some(' ' | '\t')) {
            return Err(self.err("expected whitespace"));
        }
        self.skip_ws();
        Ok(())
    }

    fn iri(&mut self) -> Result<String, KbError> {
        self.pos += 1; // '<'
        let mut out = String::new();
        loop {
            match self.peek() {
                None => return Err(self.err("unterminated IRI")),
                Some('>') => {
                    self.pos += 1;
                    break;
                }
                Some('\\') => {
                    self.pos += 1;
                    out.push(self.unicode_escape()?);
                }
                Some(c) if c == ' ' || c == '<' || c == '"' => {
                    return Err(self.err("invalid character in IRI"));
                }
                Some(c) => {
                    out.push(c);
                    self.pos += 1;
                }
            }
        }
        if out.is_empty() {
            return Err(self.err("empty IRI"));
        }
        Ok(out)
    }

    fn blank(&mut self) -> Result<String, KbError> {
        if self.chars.get(self.pos + 1) != Some(&':') {
            return Err(self.err("expected '_:' blank node"));
        }
        let start = self.pos;
        self.pos += 2;
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || matches!(c, '_' | '-' | '.') {
                self.pos += 1;
            } else {
                break;
            }
        }
        // a trailing '.' belongs to the statement terminator
        while self.pos > start + 2 && self.chars[self.pos - 1] == '.' {
            self.pos -= 1;
        }
        if self.pos == start + 2 {
            return Err(self.err("empty blank node label"));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn unicode_escape(&mut self) -> Result<char, KbError> {
        let width = match self.peek() {
            Some('u') => 4,
            Some('U') => 8,
            _ => return Err(self.err("invalid escape")),
        };
        self.pos += 1;
        if self.pos + width > self.chars.len() {
            return Err(self.err("truncated unicode escape"));
        }
        let hex: String = self.chars[self.pos..self.pos + width].iter().collect();
        let code = u32::from_str_radix(&hex, 16).map_err(|_| self.err("invalid unicode escape"))?;
        let c = char::from_u32(code).ok_or_else(|| self.err("invalid code point"))?;
        self.pos += width;
        Ok(c)
    }

    fn literal(&mut self) -> Result<Literal, KbError> {
        self.pos += 1; // opening quote
        let mut text = String::new();
        loop {
            match self.peek() {
                None => return Err(self.err("unterminated literal")),
                Some('"') => {
                    self.pos += 1;
                    break;
                }
                Some('\\') => {
                    self.pos += 1;
                    let c = match self.peek() {
                        Some('"') => '"',
                        Some('\\') => '\\',
                        Some('n') => '\n',
                        Some('t') => '\t',
                        Some('r') => '\r',
                        Some('b') => '\u{8}',
                        Some('f') => '\u{c}',
                        Some('\'') => '\'',
                        Some('u' | 'U') => {
                            text.push(self.unicode_escape()?);
                            continue;
                        }
                        _ => return Err(self.err("invalid escape in literal")),
                    };
                    self.pos += 1;
                    text.push(c);
                }
                Some(c) => {
                    text.push(c);
                    self.pos += 1;
                }
            }
        }
        let mut lang = None;
        let mut datatype = None;
        match self.peek() {
            Some('@') => {
                self.pos += 1;
                let start = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '-') {
                    self.pos += 1;
                }
                let tag: String = self.chars[start..self.pos].iter().collect();
                let primary = tag.split('-').next().unwrap_or("").to_ascii_lowercase();
                if primary.is_empty() || !primary.chars().all(|c| c.is_ascii_alphabetic()) {
                    return Err(self.err("invalid language tag"));
                }
                lang = Some(primary);
            }
            Some('^') => {
                if self.chars.get(self.pos + 1) != Some(&'^') {
                    return Err(self.err("expected '^^'"));
                }
                self.pos += 2;
                if self.peek() != Some('<') {
                    return Err(self.err("expected datatype IRI"));
                }
                datatype = Some(self.iri()?);
            }
            _ => {}
        }
        Ok(Literal { text, lang, datatype })
    }
}

fn escape_literal(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
}

fn write_term(t: &Term, out: &mut String) {
    match t {
        Term::Iri(s) => {
            out.push('<');
            for c in s.chars() {
                match c {
                    '>' | '\\' | ' ' | '<' | '"' => {
                        let _ = write!(out, "\\u{:04X}", c as u32);
                    }
                    c => out.push(c),
                }
            }
            out.push('>');
        }
        Term::Blank(s) => out.push_str(s),
        Term::Literal(l) => {
            out.push('"');
            escape_literal(&l.text, out);
            out.push('"');
            if let Some(lang) = &l.lang {
                out.push('@');
                out.push_str(lang);
            } else if let Some(dt) = &l.datatype {
                out.push_str("^^");
                write_term(&Term::Iri(dt.clone()), out);
            }
        }
    }
}

/// Serializes one triple as an N-Triples line (without newline).
pub fn format_triple(t: &Triple) -> String {
    let mut out = String::new();
    write_term(&t.subject, &mut out);
    out.push(' ');
    write_term(&Term::Iri(t.relation.clone()), &mut out);
    out.push(' ');
    write_term(&t.object, &mut out);
    out.push_str(" .");
    out
}

pub fn serialize_ntriples(set: &TripleSet) -> String {
    let mut out = String::new();
    for t in set.iter() {
        out.push_str(&format_triple(t));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<TripleSet, KbError> {
        parse_ntriples(s.as_bytes(), ParseLimits::default())
    }

    #[test]
    fn parses_naacl_triple() {
        let kb = parse("<http://dbpedia.org/resource/NAACL> <http://dbpedia.org/ontology/areaServed> <http://dbpedia.org/resource/North_America> .\n").unwrap();
        assert_eq!(kb.len(), 1);
        let t = &kb.triples()[0];
        assert_eq!(t.subject, Term::Iri("http://dbpedia.org/resource/NAACL".into()));
        assert_eq!(t.relation, "http://dbpedia.org/ontology/areaServed");
        assert_eq!(t.object, Term::Iri("http://dbpedia.org/resource/North_America".into()));
        assert_eq!((kb.entity_count(), kb.relation_count()), (2, 1));
    }

    #[test]
    fn empty_input() {
        let kb = parse("").unwrap();
        assert_eq!((kb.len(), kb.entity_count(), kb.relation_count()), (0, 0, 0));
    }

    #[test]
    fn missing_dot_reports_line() {
        let doc = "<a> <b> <c> .\n\n<a> <b> <d>\n";
        match parse(doc) {
            Err(KbError::Parse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(column, 12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn decodes_literal_escapes_and_lang() {
        let kb = parse(r#"<a> <l> "say \"hi\"\\\n\tx"@EN-gb ."#).unwrap();
        let lit = kb.triples()[0].object.as_literal().unwrap();
        assert_eq!(lit.text, "say \"hi\"\\\n\tx");
        assert_eq!(lit.lang.as_deref(), Some("en"));
    }

    #[test]
    fn datatype_blank_and_comments() {
        let doc = "# header\n_:b1 <p> \"5\"^^<http://www.w3.org/2001/XMLSchema#int> . # trailing\n<s> <p> _:b1.\n";
        let kb = parse(doc).unwrap();
        assert_eq!(kb.len(), 2);
        assert_eq!(kb.triples()[0].subject, Term::Blank("_:b1".into()));
        assert_eq!(kb.triples()[1].object, Term::Blank("_:b1".into()));
        assert_eq!(kb.entity_count(), 2);
    }

    #[test]
    fn rejects_non_utf8_with_line() {
        let mut bytes = b"<a> <b> <c> .\n<a> <b> \"".to_vec();
        bytes.extend_from_slice(&[0xff, 0xfe]);
        bytes.extend_from_slice(b"\" .\n");
        match parse_ntriples(&bytes, ParseLimits::default()) {
            Err(KbError::Encoding { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn enforces_line_limit() {
        let err = parse_ntriples(b"<a> <b> <c> .", ParseLimits { max_line_len: 5 }).unwrap_err();
        assert!(matches!(err, KbError::Parse { line: 1, .. }));
    }

    #[test]
    fn literal_subject_rejected() {
        assert!(parse("\"x\" <p> <o> .").is_err());
        assert!(parse("<s> \"p\" <o> .").is_err());
    }

    #[test]
    fn parallel_parse_matches_sequential() {
        let doc: String = (0..500).map(|i| format!("<s{i}> <p{}> \"v{i}\"@de .\n", i % 7)).collect();
        let a = parse_ntriples_with(doc.as_bytes(), ParseLimits::default(), ExecMode::Sequential).unwrap();
        let b = parse_ntriples_with(doc.as_bytes(), ParseLimits::default(), ExecMode::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.relation_count(), 7);
    }
}
