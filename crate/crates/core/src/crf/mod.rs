//! Linear-chain CRF: model, exact inference and penalized likelihood
//! training.

mod inference;
mod lbfgs;
mod train;

use serde::{Deserialize, Serialize};

use crate::corpus::TagSet;
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureVocabulary};

pub use inference::{forward_backward, score_sequence, viterbi, Lattice, MarginalTable};
pub use lbfgs::{minimize, LbfgsConfig, Minimum};
pub use train::{nll_and_gradient, LabeledSeq, TrainConfig, Trainer};

const MODEL_FORMAT: &str = "kcrf-model";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub final_objective: f64,
    pub converged: bool,
}

/// Weights of a first-order linear-chain CRF.
///
/// `state_weights` is row-major `M x T` (feature id, tag);
/// `transition_weights` is `T x T` (previous tag, tag) and `start_weights`
/// is the begin-of-sequence row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub tagset: TagSet,
    pub vocabulary: FeatureVocabulary,
    pub features: FeatureConfig,
    pub state_weights: Vec<f64>,
    pub transition_weights: Vec<f64>,
    pub start_weights: Vec<f64>,
    pub sigma2: f64,
    pub metadata: TrainingMetadata,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: Model,
}

impl Model {
    /// A zero-weight model.
    pub fn new(tagset: TagSet, vocabulary: FeatureVocabulary, features: FeatureConfig, sigma2: f64) -> Self {
        let t = tagset.len();
        let m = vocabulary.len();
        Self {
            tagset,
            vocabulary,
            features,
            state_weights: vec![0.0; m * t],
            transition_weights: vec![0.0; t * t],
            start_weights: vec![0.0; t],
            sigma2,
            metadata: TrainingMetadata::default(),
        }
    }

    pub fn num_tags(&self) -> usize {
        self.tagset.len()
    }

    pub fn num_features(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn state_row(&self, id: u32) -> &[f64] {
        let t = self.num_tags();
        let i = id as usize * t;
        &self.state_weights[i..i + t]
    }

    pub fn state_row_mut(&mut self, id: u32) -> &mut [f64] {
        let t = self.num_tags();
        let i = id as usize * t;
        &mut self.state_weights[i..i + t]
    }

    pub fn transition(&self, prev: usize, cur: usize) -> f64 {
        self.transition_weights[prev * self.num_tags() + cur]
    }

    pub fn num_parameters(&self) -> usize {
        let t = self.num_tags();
        self.num_features() * t + t * t + t
    }

    /// Flat parameter vector: state, then transition, then start weights.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.num_parameters());
        p.extend_from_slice(&self.state_weights);
        p.extend_from_slice(&self.transition_weights);
        p.extend_from_slice(&self.start_weights);
        p
    }

    pub fn set_parameters(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.num_parameters(), "parameter vector length");
        let s = self.state_weights.len();
        let tr = self.transition_weights.len();
        self.state_weights.copy_from_slice(&p[..s]);
        self.transition_weights.copy_from_slice(&p[s..s + tr]);
        self.start_weights.copy_from_slice(&p[s + tr..]);
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.num_tags();
        if self.state_weights.len() != self.num_features() * t
            || self.transition_weights.len() != t * t
            || self.start_weights.len() != t
        {
            return Err(Error::invalid("model weight dimensions do not match vocabulary and tag set"));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::invalid(format!("regularization variance must be positive, got {}", self.sigma2)));
        }
        if self
            .state_weights
            .iter()
            .chain(&self.transition_weights)
            .chain(&self.start_weights)
            .any(|w| !w.is_finite())
        {
            return Err(Error::invalid("model contains non-finite weights"));
        }
        Ok(())
    }

    /// Versioned JSON container. Floats are written in shortest round-trip
    /// form, so [`Model::from_json`] restores every weight bit for bit.
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            model: self.clone(),
        };
        let mut s = serde_json::to_string(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::invalid(format!("not a model file (format {:?})", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::invalid(format!("unsupported model version {}", file.version)));
        }
        file.model.validate()?;
        Ok(file.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Preset;

    #[test]
    fn json_round_trip_is_exact() {
        let vocab = FeatureVocabulary::from(vec!["a".to_string(), "b".to_string()]);
        let mut m = Model::new(TagSet::default(), vocab, FeatureConfig::new(Preset::Basic), 1.0);
        let p: Vec<f64> = (0..m.num_parameters()).map(|i| (i as f64 * 0.1).sin() / 3.0).collect();
        m.set_parameters(&p);
        let back = Model::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        for (a, b) in back.parameters().iter().zip(&p) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_foreign_documents() {
        assert!(Model::from_json("{}").is_err());
        let vocab = FeatureVocabulary::from(vec!["a".to_string()]);
        let m = Model::new(TagSet::default(), vocab, FeatureConfig::new(Preset::Basic), 1.0);
        let text = m.to_json().replace("\"version\":1", "\"version\":7");
        assert!(Model::from_json(&text).is_err());
        let text = m.to_json().replace("\"sigma2\":1.0", "\"sigma2\":-1.0");
        assert!(Model::from_json(&text).is_err());
    }
}
