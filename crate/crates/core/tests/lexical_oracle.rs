mod common;

use std::collections::BTreeSet;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_brute_force_with_required_terms(
        seed in any::<u64>(),
        query in prop::collection::vec(0usize..120, 0..5),
        required in prop::collection::vec(0usize..40, 0..3),
        n in 1usize..40,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spans = random_spans(&mut rng, 300, 120, 12);
        let engine = hash_engine(spans.clone(), 8, false);
        let oracle = BruteBm25::new(&spans);
        let text = query.into_iter().map(word).collect::<Vec<_>>().join(" ");
        let required: BTreeSet<String> = required.into_iter().map(word).collect();
        match engine.lexical().search(&text, n, &required) {
            Ok(got) => {
                let want = oracle.top(&text, n, &required);
                let got: Vec<(u64, f64)> = got.iter().map(|h| (h.span_id, h.score)).collect();
                prop_assert_eq!(got.len(), want.len());
                for (g, w) in got.iter().zip(&want) {
                    prop_assert_eq!(g.0, w.0);
                    prop_assert!((g.1 - w.1).abs() <= 1e-9);
                }
            }
            Err(_) => prop_assert!(text.is_empty() && required.is_empty()),
        }
    }

    #[test]
    fn ranks_are_one_based_and_contiguous(seed in any::<u64>(), n in 1usize..50) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let engine = hash_engine(random_spans(&mut rng, 200, 60, 10), 8, false);
        let hits = engine.lexical().search("w0 w1 w5 w9", n, &BTreeSet::new()).unwrap();
        for (i, h) in hits.iter().enumerate() {
            prop_assert_eq!(h.rank as usize, i + 1);
            prop_assert!(h.score > 0.0);
        }
    }
}

#[test]
fn df_and_length_statistics() {
    let spans = vec![span(0, "a b a".into()), span(1, "b c".into()), span(2, "d".into())];
    let engine = hash_engine(spans, 8, false);
    let ix = engine.lexical();
    assert_eq!((ix.len(), ix.term_count()), (3, 4));
    assert_eq!(ix.avgdl(), 2.0);
    assert_eq!((ix.doc_frequency("a"), ix.doc_frequency("b"), ix.doc_frequency("z")), (1, 2, 0));
    assert_eq!(ix.term_frequency("a", 0), 2);
    assert_eq!(ix.doc_length(1), Some(2));
}
