use kgnmt_core::fusion::{fuse_concat, fuse_init, EmbeddingTable, INIT_RANGE};
use kgnmt_core::kge::KgEmbedding;
use kgnmt_core::tokenize::Vocabulary;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn fasttext_fixture_parses() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/sample.vec")).unwrap();
    // independent count: one header then one row per line with 1 + dim fields
    let mut lines = text.lines();
    let header: Vec<usize> = lines.next().unwrap().split_whitespace().map(|x| x.parse().unwrap()).collect();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split_whitespace().collect()).collect();
    assert_eq!(rows.len(), header[0]);
    assert!(rows.iter().all(|r| r.len() == header[1] + 1));
    let table = EmbeddingTable::parse_word2vec(&text).unwrap();
    let want: Vec<&str> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(table.tokens(), want.as_slice());
    assert_eq!(table.dim(), header[1]);
}

fn random_setup(seed: u64) -> (EmbeddingTable, KgEmbedding, Vocabulary) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, d) = (3, 4);
    let vocab = Vocabulary::from_tokens((0..30).map(|i| {
        if i % 3 == 0 {
            format!("w{i}|dbr_E{i}")
        } else {
            format!("w{i}")
        }
    }));
    let mut e = EmbeddingTable::new(m);
    for t in vocab.tokens() {
        let v: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        e.insert(t, &v).unwrap();
    }
    let kge_tokens: Vec<String> = (0..30).filter(|i| i % 2 == 0).flat_map(|i| [format!("dbr_E{i}"), format!("w{i}")]).collect();
    let vectors: Vec<f64> = (0..kge_tokens.len() * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    (e, KgEmbedding::from_parts(kge_tokens, vectors, d, None).unwrap(), vocab)
}

#[test]
fn concat_slices_exact() {
    let (e, kge, vocab) = random_setup(1);
    let f = fuse_concat(&e, &kge, &vocab);
    assert_eq!(f.dim, e.dim() + kge.dim());
    let mut covered = 0;
    for (i, tok) in vocab.tokens().iter().enumerate() {
        assert_eq!(&f.row(i)[..3], e.get(tok).unwrap());
        let key = tok.split_once('|').map_or(tok.as_str(), |(_, u)| u);
        match kge.get(key) {
            Some(v) => {
                covered += 1;
                assert_eq!(f.kge_slice(i), v);
            }
            None => assert!(f.kge_slice(i).iter().all(|&x| x == 0.0)),
        }
    }
    assert_eq!(f.coverage.covered, covered);
    assert_eq!(f.coverage.total(), vocab.len());
}

#[test]
fn init_rows_exact_or_bounded() {
    let (_, kge, vocab) = random_setup(2);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let f = fuse_init(&kge, &vocab, 4, &mut rng).unwrap();
    let mut covered = 0;
    for (i, tok) in vocab.tokens().iter().enumerate() {
        let key = tok.split_once('|').map_or(tok.as_str(), |(_, u)| u);
        match kge.get(key) {
            Some(v) => {
                covered += 1;
                assert_eq!(f.row(i), v);
            }
            None => assert!(f.row(i).iter().all(|x| x.abs() <= INIT_RANGE)),
        }
    }
    assert_eq!(f.coverage.covered, covered);
    assert!(fuse_init(&kge, &vocab, 5, &mut rng).is_err());
}
