use kgnmt_core::eval::{bleu, chrf, BleuStats, Smoothing};
use proptest::prelude::*;

pub const FIXTURE: [(&str, &str); 20] = [
    ("fast house ran a tree dog cat river a", "sat ran a cat tree dog green river a"),
    ("river a river river ran a house a tree sat small fast sat tree", "river a river river ran a house a tree sat small fast sat tree"),
    ("small tree on dog river small river tree river green dog on cat river a", "small tree on dog river river mat green dog tree cat river a"),
    ("river fast under over red slowly", "cat river small under over red slowly"),
    ("sat over fast a cat tree river red", "sat over fast a cat tree river red red"),
    ("cat a small river slowly small ran the slowly green", "cat a small river slowly small ran green the slowly green"),
    ("over small ran tree house", "mat small sat house"),
    ("green ran house sat cat on sat", "fast green ran house sat cat on sat"),
    ("river on big small the sat fast tree green bank a river under", "river on big small the sat fast tree green bank river"),
    ("tree ran ran ran dog over ran a mat cat", "tree ran ran ran ran dog over ran a mat cat"),
    ("bank a dog the river big mat over", "bank a dog the river sat tree dog green"),
    ("over small cat sat dog red big over green on under the", "over small cat sat dog red big over on under the"),
    ("tree the on tree house cat big", "tree the under small cat big"),
    ("ran house mat under over green the", "ran house mat under over green the"),
    ("over big mat bank green slowly green green", "over big mat bank green slowly green green"),
    ("over ran dog over house over mat cat red mat over", "dog house over mat red mat over"),
    ("fast red cat ran slowly ran", "fast red cat ran slowly ran"),
    ("on sat the sat slowly", "on sat the sat river slowly"),
    ("green sat tree the tree sat the the dog under sat fast", "green sat tree tree sat the the dog under sat fast"),
    ("green mat small under house river red big under", "mat small under house river red big tree"),
];

// sacrebleu 2.6.0, tokenize="none"; CHRF(char_order=6, word_order=0)
const SACREBLEU_BLEU: f64 = 69.81247694826088;
const SACREBLEU_CHRF3: f64 = 81.7070792440304;
const SACREBLEU_CHRF1: f64 = 80.58434817213214;
const SACREBLEU_CHRF10: f64 = 81.96430225525337;

fn split() -> (Vec<&'static str>, Vec<&'static str>) {
    FIXTURE.iter().copied().unzip()
}

/// Brute force: enumerate every substring of length n on both sides and
/// pair them off one by one.
fn brute_chrf(hyp: &str, reference: &str, beta: f64) -> f64 {
    let h: Vec<char> = hyp.chars().filter(|c| !c.is_whitespace()).collect();
    let r: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    let (mut p, mut rc, mut k) = (0.0, 0.0, 0);
    for n in 1..=6 {
        let hg: Vec<&[char]> = (0..h.len().saturating_sub(n - 1)).map(|i| &h[i..i + n]).collect();
        let mut rg: Vec<Option<&[char]>> = (0..r.len().saturating_sub(n - 1)).map(|i| Some(&r[i..i + n])).collect();
        if hg.is_empty() || rg.is_empty() {
            continue;
        }
        let mut m = 0;
        for g in &hg {
            if let Some(slot) = rg.iter_mut().find(|x| **x == Some(*g)) {
                *slot = None;
                m += 1;
            }
        }
        p += m as f64 / hg.len() as f64;
        rc += m as f64 / rg.len() as f64;
        k += 1;
    }
    if k == 0 {
        return 0.0;
    }
    let (p, r) = (p / k as f64, rc / k as f64);
    if p + r == 0.0 {
        0.0
    } else {
        100.0 * (1.0 + beta * beta) * p * r / (beta * beta * p + r)
    }
}

#[test]
fn bleu_matches_sacrebleu() {
    let (h, r) = split();
    let b = bleu(&h, &r, 4, Smoothing::None).unwrap();
    assert!((b - SACREBLEU_BLEU).abs() < 1e-9, "{b}");
}

#[test]
fn chrf_matches_sacrebleu() {
    let (h, r) = split();
    for (beta, want) in [(3.0, SACREBLEU_CHRF3), (1.0, SACREBLEU_CHRF1), (10.0, SACREBLEU_CHRF10)] {
        let c = chrf(&h, &r, beta, 6).unwrap();
        assert!((c - want).abs() < 1e-9, "beta {beta}: {c}");
    }
}

#[test]
fn chrf_abcd_abce() {
    // orders 1..4: P = R = (3/4 + 2/3 + 1/2 + 0) / 4
    let want = 100.0 * (0.75 + 2.0 / 3.0 + 0.5) / 4.0;
    let got = chrf(&["abcd"], &["abce"], 3.0, 6).unwrap();
    assert!((got - want).abs() < 1e-9);
    assert!((got - brute_chrf("abcd", "abce", 3.0)).abs() < 1e-9);
}

#[test]
fn chrf_recall_weighting() {
    // hyp "ab" vs ref "abcdef": precision 1 on every order, recall below 1
    let pure_recall = 100.0 * (2.0 / 6.0 + 1.0 / 5.0) / 2.0;
    let scores: Vec<f64> = [1.0, 3.0, 10.0, 1000.0].iter().map(|&b| chrf(&["a b"], &["abc def"], b, 6).unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] > w[1]));
    assert!((scores[3] - pure_recall).abs() < 1e-3);
}

#[test]
fn bleu_hand_counts() {
    let s = BleuStats::sentence("the cat sat", "the cat sat on the mat", 4);
    assert_eq!(s.correct, vec![3, 2, 1, 0]);
    assert_eq!(s.total, vec![3, 2, 1, 0]);
}

fn sentence() -> impl Strategy<Value = String> {
    proptest::collection::vec("[a-e]{1,3}", 1..10).prop_map(|w| w.join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn identity_is_exactly_100(corpus in proptest::collection::vec(sentence(), 1..8)) {
        prop_assert_eq!(chrf(&corpus, &corpus, 3.0, 6).unwrap(), 100.0);
        let long: Vec<String> = corpus.iter().map(|s| format!("{s} x y z w")).collect();
        prop_assert_eq!(bleu(&long, &long, 4, Smoothing::None).unwrap(), 100.0);
    }

    #[test]
    fn scores_in_range(pairs in proptest::collection::vec((sentence(), sentence()), 1..8)) {
        let (h, r): (Vec<String>, Vec<String>) = pairs.into_iter().unzip();
        for s in [Smoothing::None, Smoothing::AddOne] {
            let b = bleu(&h, &r, 4, s).unwrap();
            prop_assert!((0.0..=100.0).contains(&b));
        }
        let c = chrf(&h, &r, 3.0, 6).unwrap();
        prop_assert!((0.0..=100.0).contains(&c));
    }

    #[test]
    fn permutation_invariant(pairs in proptest::collection::vec((sentence(), sentence()), 1..8), rot in 0usize..8) {
        let (h, r): (Vec<String>, Vec<String>) = pairs.iter().cloned().unzip();
        let mut p = pairs.clone();
        let k = rot % p.len();
        p.rotate_left(k);
        let (h2, r2): (Vec<String>, Vec<String>) = p.into_iter().unzip();
        prop_assert_eq!(bleu(&h, &r, 4, Smoothing::AddOne).unwrap(), bleu(&h2, &r2, 4, Smoothing::AddOne).unwrap());
        prop_assert!((chrf(&h, &r, 3.0, 6).unwrap() - chrf(&h2, &r2, 3.0, 6).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn single_sentence_chrf_matches_brute(h in "[a-c ]{0,12}", r in "[a-c ]{0,12}") {
        let got = chrf(&[h.as_str()], &[r.as_str()], 3.0, 6).unwrap();
        prop_assert!((got - brute_chrf(&h, &r, 3.0)).abs() < 1e-9);
    }
}
