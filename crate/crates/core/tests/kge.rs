use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kgnmt_core::kb::{parse_ntriples, triples_to_records, ParseLimits, RecordMode, RecordOptions};
use kgnmt_core::kge::{hits_at_k, train_kge, KgeConfig, LinkQuery};
use kgnmt_core::par::ExecMode;

const ENTITIES: usize = 200;
const BLOCKS: usize = 4;

/// Entities fall into blocks; every edge stays inside its block.
fn block_kb(seed: u64) -> String {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let size = ENTITIES / BLOCKS;
    let mut nt = String::new();
    for e in 0..ENTITIES {
        let block = e / size;
        for rel in 0..3 {
            for _ in 0..2 {
                let t = block * size + r.random_range(0..size);
                if t != e {
                    nt.push_str(&format!("<http://x.org/e{e}> <http://x.org/r{rel}> <http://x.org/e{t}> .\n"));
                }
            }
        }
    }
    nt
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

#[test]
fn link_prediction_and_block_structure() {
    let kb = parse_ntriples(block_kb(7).as_bytes(), ParseLimits::default()).unwrap();
    let out = triples_to_records(&kb, RecordMode::Structure, 50, &RecordOptions::default()).unwrap();
    let cfg = KgeConfig { dim: 32, epochs: 25, lr: 0.1, threads: 1, seed: 3, bucket_count: 1 << 10, ..KgeConfig::default() };
    let model = train_kge(&out.records, &cfg).unwrap();

    let tok = &RecordOptions::default().tokenizer;
    let entities: Vec<String> = (0..ENTITIES).map(|e| tok.token(&format!("http://x.org/e{e}"))).collect();
    let queries: Vec<LinkQuery> = kb
        .iter()
        .map(|t| LinkQuery {
            features: vec![tok.token(t.subject_id()), tok.token(&t.relation)],
            gold: tok.token(t.object.resource().unwrap()),
        })
        .collect();
    let hits = hits_at_k(&model, &queries, &entities, 10, ExecMode::Sequential);
    let random = 10.0 / ENTITIES as f64;
    assert!(hits >= 5.0 * random, "hits@10 {hits} vs random {random}");

    let emb = model.embedding();
    let size = ENTITIES / BLOCKS;
    let (mut intra, mut inter) = ((0.0, 0usize), (0.0, 0usize));
    for i in 0..ENTITIES {
        for j in i + 1..ENTITIES {
            let c = cosine(emb.get(&entities[i]).unwrap(), emb.get(&entities[j]).unwrap());
            let acc = if i / size == j / size { &mut intra } else { &mut inter };
            acc.0 += c;
            acc.1 += 1;
        }
    }
    let (intra, inter) = (intra.0 / intra.1 as f64, inter.0 / inter.1 as f64);
    assert!(intra > inter, "intra {intra} inter {inter}");
}
