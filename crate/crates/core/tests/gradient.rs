mod common;

use common::*;
use kcrf::crf::{nll_and_gradient, Trainer, TrainConfig};
use kcrf::features::{FeatureConfig, Preset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let h = 1e-5;
    for _ in 0..25 {
        let t = rng.gen_range(2..=3);
        let mut m = random_model(&mut rng, 5, t, 1.5);
        m.sigma2 = rng.gen_range(0.5..4.0);
        let batch = random_batch(&mut rng, &m, 4, 6);
        let (_, grad) = nll_and_gradient(&m, &batch).unwrap();
        let p = m.parameters();
        for i in 0..p.len() {
            let mut plus = p.clone();
            plus[i] += h;
            let mut minus = p.clone();
            minus[i] -= h;
            let mut mp = m.clone();
            mp.set_parameters(&plus);
            let mut mm = m.clone();
            mm.set_parameters(&minus);
            let fd = (nll_and_gradient(&mp, &batch).unwrap().0 - nll_and_gradient(&mm, &batch).unwrap().0) / (2.0 * h);
            let diff = (fd - grad[i]).abs();
            assert!(diff < 1e-7 || diff / fd.abs().max(grad[i].abs()) < 1e-5, "coordinate {i}: {fd} vs {}", grad[i]);
        }
    }
}

#[test]
fn training_reaches_a_stationary_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let m = random_model(&mut rng, 6, 3, 1.0);
    let batch = random_batch(&mut rng, &m, 10, 6);
    let trained = Trainer::new(TrainConfig::default())
        .train(m.tagset.clone(), m.vocabulary.clone(), FeatureConfig::new(Preset::Basic), &batch)
        .unwrap();
    assert!(trained.metadata.converged);
    let (_, grad) = nll_and_gradient(&trained, &batch).unwrap();
    assert!(grad.iter().all(|g| g.abs() <= 1e-4));
}
