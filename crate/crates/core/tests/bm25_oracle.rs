mod common;

use common::{brute_force, compare_ranked, random_instance, random_params, rng};
use taxlink::normalize::tokenize;
use taxlink::InvertedIndex;

#[test]
fn top_k_agrees_with_brute_force() {
    let mut r = rng(11);
    for case in 0..300 {
        let (entries, query) = random_instance(&mut r, 50);
        let params = random_params(&mut r);
        let index = InvertedIndex::build(&entries).unwrap();
        for k in [1, 3, 10, 60] {
            let got = index.top_k(&params, &query, k).candidates;
            let want = brute_force(&entries, &query, &params, k);
            compare_ranked(&got, &want, 1e-9).unwrap_or_else(|e| panic!("case {case} k={k}: {e}"));
        }
    }
}

#[test]
fn score_agrees_with_top_k() {
    let mut r = rng(12);
    for _ in 0..100 {
        let (entries, query) = random_instance(&mut r, 30);
        let params = random_params(&mut r);
        let index = InvertedIndex::build(&entries).unwrap();
        for c in index.top_k(&params, &query, entries.len()).candidates {
            let ord = index.doc_ids().iter().position(|&id| id == c.tax_id).unwrap();
            assert_eq!(index.score(&params, &query, ord).unwrap(), c.score);
        }
    }
}

#[test]
fn reloaded_index_ranks_identically() {
    let mut r = rng(13);
    for _ in 0..50 {
        let (entries, query) = random_instance(&mut r, 40);
        let params = random_params(&mut r);
        let index = InvertedIndex::build(&entries).unwrap();
        let mut buf = Vec::new();
        index.write_to(&mut buf).unwrap();
        let back = InvertedIndex::read_from(buf.as_slice()).unwrap();
        assert_eq!(back.top_k(&params, &query, 10), index.top_k(&params, &query, 10));
    }
}

#[test]
fn unknown_terms_retrieve_nothing() {
    let (entries, _) = random_instance(&mut rng(14), 20);
    let index = InvertedIndex::build(&entries).unwrap();
    assert!(index.top_k(&Default::default(), &tokenize("qqq www"), 10).is_empty());
}

mod properties {
    use super::common::{random_instance, random_params, rng};
    use proptest::prelude::*;
    use taxlink::InvertedIndex;

    proptest! {
        #[test]
        fn smaller_k_is_a_prefix(seed in any::<u64>(), k1 in 0usize..15, extra in 0usize..15) {
            let mut r = rng(seed);
            let (entries, query) = random_instance(&mut r, 40);
            let params = random_params(&mut r);
            let index = InvertedIndex::build(&entries).unwrap();
            let short = index.top_k(&params, &query, k1).candidates;
            let long = index.top_k(&params, &query, k1 + extra).candidates;
            prop_assert!(short.len() <= long.len());
            prop_assert_eq!(&long[..short.len()], &short[..]);
        }

        #[test]
        fn idf_is_never_negative(seed in any::<u64>()) {
            let (entries, _) = random_instance(&mut rng(seed), 60);
            let index = InvertedIndex::build(&entries).unwrap();
            for e in &entries {
                for t in &e.tokens {
                    prop_assert!(index.idf(t) >= 0.0);
                }
            }
        }

        #[test]
        fn rebuilding_gives_identical_lists(seed in any::<u64>()) {
            let mut r = rng(seed);
            let (entries, query) = random_instance(&mut r, 40);
            let params = random_params(&mut r);
            let a = InvertedIndex::build(&entries).unwrap().top_k(&params, &query, 10);
            let b = InvertedIndex::build(&entries).unwrap().top_k(&params, &query, 10);
            prop_assert_eq!(
                a.candidates.iter().map(|c| (c.tax_id, c.score.to_bits())).collect::<Vec<_>>(),
                b.candidates.iter().map(|c| (c.tax_id, c.score.to_bits())).collect::<Vec<_>>()
            );
        }

        #[test]
        fn scores_are_positive_and_sorted(seed in any::<u64>()) {
            let mut r = rng(seed);
            let (entries, query) = random_instance(&mut r, 40);
            let params = random_params(&mut r);
            let list = InvertedIndex::build(&entries).unwrap().top_k(&params, &query, 20).candidates;
            for w in list.windows(2) {
                prop_assert!(w[0].score > w[1].score || (w[0].score == w[1].score && w[0].tax_id < w[1].tax_id));
            }
            prop_assert!(list.iter().all(|c| c.score > 0.0));
        }
    }
}
