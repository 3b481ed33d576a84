use kgnmt_core::linker::{annotation_token, is_annotation_token};
use kgnmt_core::par::ExecMode;
use kgnmt_core::tokenize::{apply_bpe, build_vocab, de_bpe, learn_bpe, Bpe, Vocabulary, UNK_ID};
use proptest::prelude::*;

fn word() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => "[a-fäö]{1,8}",
        1 => ("[A-Z][a-z]{1,5}", "[A-Z][a-z]{1,5}").prop_map(|(a, b)| annotation_token(&[a.as_str()], &format!("dbr_{b}"))),
    ]
}

fn corpus() -> impl Strategy<Value = Vec<Vec<String>>> {
    proptest::collection::vec(proptest::collection::vec(word(), 1..10), 1..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn de_bpe_inverts_apply(c in corpus(), merges in 0usize..60) {
        let table = learn_bpe(c.iter().flatten().map(String::as_str), merges, is_annotation_token);
        for s in &c {
            let seg = apply_bpe(s, &table, is_annotation_token);
            prop_assert_eq!(&de_bpe(&seg, is_annotation_token), s);
            let protected_in = s.iter().filter(|t| is_annotation_token(t)).count();
            let protected_out = seg.iter().filter(|t| is_annotation_token(t)).count();
            prop_assert_eq!(protected_in, protected_out);
            for t in s.iter().filter(|t| is_annotation_token(t)) {
                prop_assert!(seg.contains(t));
            }
        }
    }
}

#[test]
fn corpus_apply_modes_agree() {
    let c: Vec<Vec<String>> = (0..200).map(|i| vec![format!("w{}", i % 17), "Kiwi|dbr_Kiwi".into(), format!("x{i}")]).collect();
    let table = learn_bpe(c.iter().flatten().map(String::as_str), 40, is_annotation_token);
    let bpe = Bpe::new(&table);
    assert_eq!(
        bpe.apply_corpus(&c, is_annotation_token, ExecMode::Sequential),
        bpe.apply_corpus(&c, is_annotation_token, ExecMode::Parallel)
    );
}

#[test]
fn vocab_file_roundtrip() {
    let v = build_vocab("b a b c b a".split(' '), 6).unwrap();
    let text = v.to_text();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines, ["<pad>", "<unk>", "<s>", "</s>", "b", "a"]);
    assert_eq!(Vocabulary::from_text(&text).unwrap(), v);
    assert_eq!(v.numericalize(&["c"]), vec![UNK_ID]);
}
