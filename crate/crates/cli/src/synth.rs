//! Synthetic bilingual KB and template corpus with held-out entities.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kgnmt_core::text::{DBO, DBR, DBR_DE, OWL_SAMEAS, RDFS_LABEL};

const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Kind {
    Country,
    City,
    Org,
    Person,
}

impl Kind {
    fn class(self) -> &'static str {
        match self {
            Kind::Country => "Country",
            Kind::City => "City",
            Kind::Org => "Organisation",
            Kind::Person => "Person",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub kind: Kind,
    pub en: String,
    pub de: String,
    pub held_out: bool,
}

impl Entity {
    pub fn en_iri(&self) -> String {
        format!("{DBR}{}", self.en.replace(' ', "_"))
    }

    pub fn de_iri(&self) -> String {
        format!("{DBR_DE}{}", self.de.replace(' ', "_"))
    }
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub countries: usize,
    pub cities: usize,
    pub orgs: usize,
    pub persons: usize,
    pub held_out: usize,
    pub train_pairs: usize,
    pub test_pairs: usize,
    /// Probability that a non-person name differs between languages.
    pub rename_prob: f64,
    /// Zipf exponent of entity frequencies in training sentences.
    pub zipf: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            countries: 24,
            cities: 200,
            orgs: 96,
            persons: 180,
            held_out: 50,
            train_pairs: 5000,
            test_pairs: 400,
            rename_prob: 0.6,
            zipf: 1.1,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SynthData {
    pub entities: Vec<Entity>,
    pub kb_en: String,
    pub kb_de: String,
    pub train_src: Vec<String>,
    pub train_tgt: Vec<String>,
    pub test_src: Vec<String>,
    pub test_tgt: Vec<String>,
    /// `(test line, German surface)` for every held-out entity mention.
    pub entity_testset: Vec<(usize, String)>,
}

impl SynthData {
    pub fn entity_testset_tsv(&self) -> String {
        self.entity_testset.iter().map(|(i, s)| format!("{i}\t{s}\n")).collect()
    }

    /// Writes `kb.en.nt`, `kb.de.nt`, `train.en|de`, `test.en|de` and
    /// `entities.tsv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let lines = |v: &[String]| v.iter().map(|l| format!("{l}\n")).collect::<String>();
        std::fs::write(dir.join("kb.en.nt"), &self.kb_en)?;
        std::fs::write(dir.join("kb.de.nt"), &self.kb_de)?;
        std::fs::write(dir.join("train.en"), lines(&self.train_src))?;
        std::fs::write(dir.join("train.de"), lines(&self.train_tgt))?;
        std::fs::write(dir.join("test.en"), lines(&self.test_src))?;
        std::fs::write(dir.join("test.de"), lines(&self.test_tgt))?;
        std::fs::write(dir.join("entities.tsv"), self.entity_testset_tsv())?;
        Ok(())
    }
}

const SYLLABLES: [&str; 24] = [
    "ka", "lo", "ren", "vi", "tar", "mo", "sel", "du", "ber", "an", "ri", "gos", "fel", "mi", "nor", "ta", "ul",
    "zen", "pra", "hol", "cav", "ys", "dor", "le",
];

const FIRST_NAMES: [&str; 30] = [
    "Anna", "Boris", "Clara", "David", "Elena", "Felix", "Greta", "Hugo", "Ines", "Jonas", "Karla", "Lukas", "Mira",
    "Niko", "Olga", "Paul", "Rosa", "Simon", "Tara", "Ugo", "Vera", "Willi", "Xenia", "Yann", "Zora", "Emil",
    "Lena", "Oskar", "Petra", "Theo",
];

/// (English, German) templates; `{C}` city, `{N}` country, `{O}`
/// organisation, `{P}` person.
const TEMPLATES: [(&str, &str); 16] = [
    ("{P} was born in {C} .", "{P} wurde in {C} geboren ."),
    ("{C} is a city in {N} .", "{C} ist eine Stadt in {N} ."),
    ("{P} works for {O} .", "{P} arbeitet für {O} ."),
    ("{O} is based in {C} .", "{O} hat seinen Sitz in {C} ."),
    ("yesterday {P} visited {C} .", "gestern besuchte {P} {C} ."),
    ("{N} borders {N} .", "{N} grenzt an {N} ."),
    ("the mayor of {C} met {P} .", "der Bürgermeister von {C} traf {P} ."),
    ("{P} and {P} founded {O} in {C} .", "{P} und {P} gründeten {O} in {C} ."),
    ("many people live in {C} .", "viele Menschen leben in {C} ."),
    ("{O} opened an office in {N} .", "{O} eröffnete ein Büro in {N} ."),
    ("the president of {N} spoke about {O} .", "der Präsident von {N} sprach über {O} ."),
    ("{P} moved from {C} to {C} .", "{P} zog von {C} nach {C} ."),
    ("the weather in {C} was good today .", "das Wetter in {C} war heute gut ."),
    ("{P} is the new director of {O} .", "{P} ist der neue Direktor von {O} ."),
    ("the museum of {C} is very old .", "das Museum von {C} ist sehr alt ."),
    ("{O} sold its factory in {C} .", "{O} verkaufte seine Fabrik in {C} ."),
];

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Systematic German spelling of a coined name.
pub fn germanize(en: &str) -> String {
    let mut s: String = en
        .chars()
        .map(|c| match c {
            'v' => 'w',
            'c' => 'k',
            'y' => 'i',
            'C' => 'K',
            'V' => 'W',
            'Y' => 'I',
            c => c,
        })
        .collect();
    if s.ends_with(['a', 'e', 'i', 'o', 'u']) {
        s.push('n');
    } else {
        s.push('e');
    }
    s
}

fn template_words() -> BTreeSet<String> {
    TEMPLATES
        .iter()
        .flat_map(|(a, b)| a.split_whitespace().chain(b.split_whitespace()))
        .filter(|w| !w.starts_with('{'))
        .map(str::to_lowercase)
        .collect()
}

struct Names {
    used: BTreeSet<String>,
}

impl Names {
    fn fresh<R: Rng>(&mut self, r: &mut R, syllables: usize) -> String {
        loop {
            let raw: String = (0..syllables).map(|_| *SYLLABLES.choose(r).expect("nonempty")).collect();
            let name = capitalize(&raw);
            let de = germanize(&name);
            let keys = [name.to_lowercase(), de.to_lowercase()];
            if keys.iter().all(|k| !self.used.contains(k)) {
                self.used.extend(keys);
                return name;
            }
        }
    }
}

fn make_entities(cfg: &SynthConfig, r: &mut ChaCha8Rng) -> Vec<Entity> {
    let mut names = Names { used: template_words() };
    names.used.extend(FIRST_NAMES.iter().map(|f| f.to_lowercase()));
    let mut out = Vec::new();
    for (kind, n) in [(Kind::Country, cfg.countries), (Kind::City, cfg.cities), (Kind::Org, cfg.orgs)] {
        for _ in 0..n {
            let syl = if kind == Kind::Country { 2 } else { r.random_range(2..4) };
            let en = names.fresh(r, syl);
            let de = if r.random_bool(cfg.rename_prob) { germanize(&en) } else { en.clone() };
            out.push(Entity { kind, en, de, held_out: false });
        }
    }
    for _ in 0..cfg.persons {
        let first = *FIRST_NAMES.choose(r).expect("nonempty");
        let syl = r.random_range(2..4);
        let last = names.fresh(r, syl);
        let full = format!("{first} {last}");
        out.push(Entity { kind: Kind::Person, en: full.clone(), de: full, held_out: false });
    }
    let mut pool: Vec<usize> = (0..out.len()).filter(|&i| out[i].kind != Kind::Country).collect();
    pool.shuffle(r);
    for &i in pool.iter().take(cfg.held_out) {
        out[i].held_out = true;
    }
    out
}

fn iri(s: &str) -> String {
    format!("<{s}>")
}

fn literal(text: &str, lang: &str) -> String {
    format!("\"{}\"@{lang}", text.replace('\\', "\\\\").replace('"', "\\\""))
}

fn facts(entities: &[Entity], r: &mut ChaCha8Rng) -> Vec<(usize, &'static str, usize)> {
    let of = |k: Kind| -> Vec<usize> { (0..entities.len()).filter(|&i| entities[i].kind == k).collect() };
    let (countries, cities, orgs) = (of(Kind::Country), of(Kind::City), of(Kind::Org));
    let mut out = Vec::new();
    for (i, e) in entities.iter().enumerate() {
        match e.kind {
            Kind::Country => {
                let n = *countries.choose(r).expect("countries");
                if n != i {
                    out.push((i, "borders", n));
                }
            }
            Kind::City => out.push((i, "country", *countries.choose(r).expect("countries"))),
            Kind::Org => out.push((i, "location", *cities.choose(r).expect("cities"))),
            Kind::Person => {
                out.push((i, "birthPlace", *cities.choose(r).expect("cities")));
                out.push((i, "employer", *orgs.choose(r).expect("orgs")));
            }
        }
    }
    out
}

/// The English KB carries English and German labels; the German KB carries
/// German labels and sameAs links to the English resources.
fn write_kbs(entities: &[Entity], facts: &[(usize, &str, usize)]) -> (String, String) {
    let (mut en, mut de) = (String::new(), String::new());
    let label = iri(RDFS_LABEL);
    for e in entities {
        let (a, b) = (iri(&e.en_iri()), iri(&e.de_iri()));
        let class = iri(&format!("{DBO}{}", e.kind.class()));
        let _ = writeln!(en, "{a} {} {class} .", iri(RDF_TYPE));
        let _ = writeln!(en, "{a} {label} {} .", literal(&e.en, "en"));
        let _ = writeln!(en, "{a} {label} {} .", literal(&e.de, "de"));
        let _ = writeln!(de, "{b} {} {class} .", iri(RDF_TYPE));
        let _ = writeln!(de, "{b} {label} {} .", literal(&e.de, "de"));
        let _ = writeln!(de, "{b} {} {a} .", iri(OWL_SAMEAS));
    }
    for &(h, rel, t) in facts {
        let r = iri(&format!("{DBO}{rel}"));
        let _ = writeln!(en, "{} {r} {} .", iri(&entities[h].en_iri()), iri(&entities[t].en_iri()));
        let _ = writeln!(de, "{} {r} {} .", iri(&entities[h].de_iri()), iri(&entities[t].de_iri()));
    }
    (en, de)
}

struct Sampler {
    by_kind: BTreeMap<Kind, (Vec<usize>, WeightedIndex<f64>)>,
}

impl Sampler {
    fn new(entities: &[Entity], zipf: f64, r: &mut ChaCha8Rng, keep: impl Fn(&Entity) -> bool) -> Self {
        let mut by_kind = BTreeMap::new();
        for k in [Kind::Country, Kind::City, Kind::Org, Kind::Person] {
            let mut ids: Vec<usize> = (0..entities.len()).filter(|&i| entities[i].kind == k && keep(&entities[i])).collect();
            if ids.is_empty() {
                continue;
            }
            ids.shuffle(r);
            let w: Vec<f64> = (1..=ids.len()).map(|rank| (rank as f64).powf(-zipf)).collect();
            by_kind.insert(k, (ids, WeightedIndex::new(w).expect("positive weights")));
        }
        Sampler { by_kind }
    }

    fn draw(&self, k: Kind, r: &mut ChaCha8Rng) -> usize {
        let (ids, w) = &self.by_kind[&k];
        ids[w.sample(r)]
    }
}

fn slot_kind(slot: &str) -> Kind {
    match slot {
        "{C}" => Kind::City,
        "{N}" => Kind::Country,
        "{O}" => Kind::Org,
        _ => Kind::Person,
    }
}

/// Fills one template; the closure picks the entity for each slot index.
fn realize(
    t: &(&str, &str),
    entities: &[Entity],
    mut pick: impl FnMut(usize, Kind) -> usize,
) -> (String, String, Vec<usize>) {
    let slots: Vec<&str> = t.0.split_whitespace().filter(|w| w.starts_with('{')).collect();
    let chosen: Vec<usize> = slots.iter().enumerate().map(|(i, s)| pick(i, slot_kind(s))).collect();
    let fill = |text: &str, de: bool| -> String {
        let mut counters: BTreeMap<&str, usize> = BTreeMap::new();
        let mut order: BTreeMap<(String, usize), usize> = BTreeMap::new();
        for (i, s) in slots.iter().enumerate() {
            let c = counters.entry(s).or_default();
            order.insert((s.to_string(), *c), i);
            *c += 1;
        }
        let mut counters: BTreeMap<&str, usize> = BTreeMap::new();
        let words: Vec<String> = text
            .split_whitespace()
            .map(|w| {
                if w.starts_with('{') {
                    let c = counters.entry(w).or_default();
                    let slot = order[&(w.to_string(), *c)];
                    *c += 1;
                    let e = &entities[chosen[slot]];
                    if de { e.de.clone() } else { e.en.clone() }
                } else {
                    w.to_string()
                }
            })
            .collect();
        words.join(" ")
    };
    (fill(t.0, false), fill(t.1, true), chosen)
}

pub fn generate(cfg: &SynthConfig) -> SynthData {
    let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
    let entities = make_entities(cfg, &mut r);
    let fs = facts(&entities, &mut r);
    let (kb_en, kb_de) = write_kbs(&entities, &fs);
    let seen = Sampler::new(&entities, cfg.zipf, &mut r, |e| !e.held_out);
    let uniform = Sampler::new(&entities, 0.0, &mut r, |e| !e.held_out);
    let held = Sampler::new(&entities, 0.0, &mut r, |e| e.held_out);

    let mut data = SynthData { entities: entities.clone(), kb_en, kb_de, ..SynthData::default() };
    for _ in 0..cfg.train_pairs {
        let t = TEMPLATES.choose(&mut r).expect("templates");
        let (s, g, _) = realize(t, &entities, |_, k| seen.draw(k, &mut r));
        data.train_src.push(s);
        data.train_tgt.push(g);
    }
    // Every test sentence mentions one held-out entity when its template has
    // a slot of a held-out kind; other slots draw uniformly from seen ones.
    while data.test_src.len() < cfg.test_pairs {
        let t = TEMPLATES.choose(&mut r).expect("templates");
        let kinds: Vec<Kind> = t.0.split_whitespace().filter(|w| w.starts_with('{')).map(slot_kind).collect();
        let open: Vec<usize> = (0..kinds.len()).filter(|&i| held.by_kind.contains_key(&kinds[i])).collect();
        let Some(&target) = open.choose(&mut r) else {
            continue;
        };
        let (s, g, chosen) =
            realize(t, &entities, |i, k| if i == target { held.draw(k, &mut r) } else { uniform.draw(k, &mut r) });
        let line = data.test_src.len();
        for &c in &chosen {
            if entities[c].held_out {
                data.entity_testset.push((line, entities[c].de.clone()));
            }
        }
        data.test_src.push(s);
        data.test_tgt.push(g);
    }
    data
}
