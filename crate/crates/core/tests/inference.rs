mod common;

use common::*;
use kcrf::crf::{forward_backward, score_sequence, viterbi, Lattice};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn marginals_and_partition_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..150 {
        let t = rng.gen_range(2..=3);
        let m = random_model(&mut rng, 6, t, 3.0);
        let n = rng.gen_range(1..=7);
        let x = random_seq(&mut rng, n, 6);
        let e = enumerate(&m, &x);
        let fb = forward_backward(&m, &x).unwrap();
        assert!((fb.log_partition - e.log_z).abs() < 1e-9);
        for (a, b) in fb.marginals.iter().flatten().zip(e.marginals.iter().flatten()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}

#[test]
fn viterbi_matches_enumeration_with_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for i in 0..300 {
        let t = rng.gen_range(2..=3);
        let m = if i % 2 == 0 {
            tie_heavy_model(&mut rng, 4, t)
        } else {
            random_model(&mut rng, 4, t, 3.0)
        };
        let n = rng.gen_range(1..=6);
        let x = random_seq(&mut rng, n, 4);
        assert_eq!(viterbi(&m, &x).unwrap(), enumerate(&m, &x).best, "model {i}");
    }
}

#[test]
fn edge_marginals_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let m = random_model(&mut rng, 5, 3, 2.0);
    let x = random_seq(&mut rng, 5, 5);
    let lattice = Lattice::new(&m, &x).unwrap();
    let log_z = enumerate(&m, &x).log_z;
    for pos in 1..5 {
        for a in 0..3 {
            for b in 0..3 {
                let oracle: f64 = all_paths(5, 3)
                    .iter()
                    .filter(|y| y[pos - 1] == a && y[pos] == b)
                    .map(|y| (path_score(&m, &x, y) - log_z).exp())
                    .sum();
                assert!((lattice.edge_marginal(&m, pos, a, b) - oracle).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn empty_sequence() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let m = random_model(&mut rng, 3, 2, 1.0);
    let x = random_seq(&mut rng, 0, 3);
    assert!(viterbi(&m, &x).unwrap().is_empty());
    let fb = forward_backward(&m, &x).unwrap();
    assert!(fb.marginals.is_empty());
}

proptest! {
    #[test]
    fn marginal_rows_sum_to_one(seed in any::<u64>(), n in 1usize..40, t in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, 8, t, 5.0);
        let x = random_seq(&mut rng, n, 8);
        let fb = forward_backward(&m, &x).unwrap();
        for row in &fb.marginals {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(row.iter().all(|p| (0.0..=1.0 + 1e-12).contains(p)));
        }
    }

    #[test]
    fn score_matches_direct_sum(seed in any::<u64>(), n in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, 6, 3, 3.0);
        let x = random_seq(&mut rng, n, 6);
        let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        prop_assert!((score_sequence(&m, &x, &y).unwrap() - path_score(&m, &x, &y)).abs() < 1e-9);
    }

    /// Adding the same constant to every tag's weight for one feature, or to
    /// every start weight, leaves the best path unchanged up to rounding, so
    /// a near-tie may flip to an equally scored path.
    #[test]
    fn viterbi_is_shift_invariant(seed in any::<u64>(), n in 1usize..15, c in -10.0f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, 6, 3, 3.0);
        let x = random_seq(&mut rng, n, 6);
        let before = viterbi(&m, &x).unwrap();
        let mut shifted = m.clone();
        let r = rng.gen_range(0..6u32);
        shifted.state_row_mut(r).iter_mut().for_each(|w| *w += c);
        shifted.start_weights.iter_mut().for_each(|w| *w += c);
        let after = viterbi(&shifted, &x).unwrap();
        if after != before {
            let (a, b) = (path_score(&m, &x, &after), path_score(&m, &x, &before));
            prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn viterbi_path_is_optimal_under_marginal_ranking(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, 5, 2, 3.0);
        let x = random_seq(&mut rng, n, 5);
        let best = viterbi(&m, &x).unwrap();
        let s = path_score(&m, &x, &best);
        for y in all_paths(n, 2) {
            prop_assert!(path_score(&m, &x, &y) <= s + 1e-9);
        }
    }
}
