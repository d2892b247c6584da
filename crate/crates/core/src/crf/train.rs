use serde::{Deserialize, Serialize};

use crate::corpus::TagSet;
use crate::crf::inference::{score_sequence, Lattice};
use crate::crf::lbfgs::{minimize, LbfgsConfig};
use crate::crf::{Model, TrainingMetadata};
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureVectorSeq, FeatureVocabulary};

/// A vectorized sentence with gold tag ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSeq {
    pub x: FeatureVectorSeq,
    pub y: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Gaussian prior variance.
    pub sigma2: f64,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub memory: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            sigma2: 1.0,
            max_iterations: 500,
            gradient_tolerance: 1e-4,
            memory: 10,
        }
    }
}

/// Penalized negative log-likelihood `sum(log Z - score) + |w|^2 / (2 sigma^2)`
/// and its gradient in [`Model::parameters`] layout.
pub fn nll_and_gradient(m: &Model, batch: &[LabeledSeq]) -> Result<(f64, Vec<f64>)> {
    let t = m.num_tags();
    let state_len = m.state_weights.len();
    let trans_off = state_len;
    let start_off = state_len + t * t;
    let mut grad = vec![0.0; m.num_parameters()];
    let mut value = 0.0;

    for seq in batch {
        let (x, y) = (&seq.x, &seq.y);
        value += -score_sequence(m, x, y)?;
        if x.is_empty() {
            continue;
        }
        let lattice = Lattice::new(m, x)?;
        value += lattice.log_partition();

        // empirical counts
        for (n, ids) in x.positions.iter().enumerate() {
            for &r in ids {
                grad[r as usize * t + y[n]] -= 1.0;
            }
            if n == 0 {
                grad[start_off + y[0]] -= 1.0;
            } else {
                grad[trans_off + y[n - 1] * t + y[n]] -= 1.0;
            }
        }
        // expected counts
        let mut node = vec![0.0; t];
        for (n, ids) in x.positions.iter().enumerate() {
            for (j, p) in node.iter_mut().enumerate() {
                *p = lattice.node_marginal(n, j);
            }
            for &r in ids {
                let row = &mut grad[r as usize * t..(r as usize + 1) * t];
                for (gj, p) in row.iter_mut().zip(&node) {
                    *gj += p;
                }
            }
            if n == 0 {
                for (j, p) in node.iter().enumerate() {
                    grad[start_off + j] += p;
                }
            } else {
                for s in 0..t {
                    for j in 0..t {
                        grad[trans_off + s * t + j] += lattice.edge_marginal(m, n, s, j);
                    }
                }
            }
        }
    }

    let inv = 1.0 / m.sigma2;
    let params = m.parameters();
    let mut penalty = 0.0;
    for (gi, w) in grad.iter_mut().zip(&params) {
        penalty += w * w;
        *gi += w * inv;
    }
    value += 0.5 * penalty * inv;
    Ok((value, grad))
}

/// Full-batch L-BFGS trainer. Deterministic given the data order.
#[derive(Debug, Clone, Default)]
pub struct Trainer {
    pub config: TrainConfig,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Self {
        Self { config }
    }

    pub fn train(
        &self,
        tagset: TagSet,
        vocabulary: FeatureVocabulary,
        features: FeatureConfig,
        data: &[LabeledSeq],
    ) -> Result<Model> {
        if data.is_empty() {
            return Err(Error::invalid("cannot train on an empty corpus"));
        }
        let mut model = Model::new(tagset, vocabulary, features, self.config.sigma2);
        model.validate()?;
        let t = model.num_tags();
        let nf = model.num_features() as u32;
        for (i, seq) in data.iter().enumerate() {
            if seq.x.len() != seq.y.len() {
                return Err(Error::invalid(format!("training sequence {i}: positions and tags differ in length")));
            }
            if seq.y.iter().any(|&l| l >= t) || seq.x.positions.iter().flatten().any(|&r| r >= nf) {
                return Err(Error::invalid(format!("training sequence {i}: tag or feature id out of range")));
            }
        }

        let lbfgs = LbfgsConfig {
            memory: self.config.memory,
            max_iterations: self.config.max_iterations,
            gradient_tolerance: self.config.gradient_tolerance,
            ..Default::default()
        };
        let x0 = model.parameters();
        let mut work = model.clone();
        let min = minimize(
            |p| {
                work.set_parameters(p);
                nll_and_gradient(&work, data)
            },
            x0,
            &lbfgs,
        )?;
        model.set_parameters(&min.x);
        model.metadata = TrainingMetadata {
            iterations: min.iterations,
            final_gradient_norm: min.gradient_norm,
            final_objective: min.value,
            converged: min.converged,
        };
        Ok(model)
    }
}
