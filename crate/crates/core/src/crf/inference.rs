use crate::crf::Model;
use crate::error::{Error, Result};
use crate::features::FeatureVectorSeq;
use crate::math::logsumexp;

/// Per-position tag marginals and the log-partition of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTable {
    pub marginals: Vec<Vec<f64>>,
    pub log_partition: f64,
}

impl MarginalTable {
    /// Most probable tag at `n` (0-based) and its probability; ties go to the
    /// earlier tag.
    pub fn best(&self, n: usize) -> (usize, f64) {
        let row = &self.marginals[n];
        let mut best = 0;
        for t in 1..row.len() {
            if row[t] > row[best] {
                best = t;
            }
        }
        (best, row[best])
    }
}

/// Forward and backward log-potentials for one sequence.
pub struct Lattice {
    num_tags: usize,
    /// `N x T` state scores.
    emissions: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    log_z: f64,
}

fn emissions(m: &Model, x: &FeatureVectorSeq) -> Result<Vec<f64>> {
    let t = m.num_tags();
    let nf = m.num_features() as u32;
    let mut em = vec![0.0; x.len() * t];
    for (n, ids) in x.positions.iter().enumerate() {
        let row = &mut em[n * t..(n + 1) * t];
        for &r in ids {
            if r >= nf {
                return Err(Error::invalid(format!("feature id {r} outside a vocabulary of {nf}")));
            }
            for (e, w) in row.iter_mut().zip(m.state_row(r)) {
                *e += w;
            }
        }
    }
    Ok(em)
}

impl Lattice {
    pub fn new(m: &Model, x: &FeatureVectorSeq) -> Result<Self> {
        let t = m.num_tags();
        let n = x.len();
        let em = emissions(m, x)?;
        let mut alpha = vec![0.0; n * t];
        let mut beta = vec![0.0; n * t];
        let mut scratch = vec![0.0; t];

        if n > 0 {
            for j in 0..t {
                alpha[j] = m.start_weights[j] + em[j];
            }
        }
        for i in 1..n {
            for j in 0..t {
                for s in 0..t {
                    scratch[s] = alpha[(i - 1) * t + s] + m.transition(s, j);
                }
                alpha[i * t + j] = logsumexp(&scratch) + em[i * t + j];
            }
        }
        for i in (0..n.saturating_sub(1)).rev() {
            for s in 0..t {
                for j in 0..t {
                    scratch[j] = m.transition(s, j) + em[(i + 1) * t + j] + beta[(i + 1) * t + j];
                }
                beta[i * t + s] = logsumexp(&scratch);
            }
        }
        let log_z = if n == 0 { 0.0 } else { logsumexp(&alpha[(n - 1) * t..]) };
        Ok(Self {
            num_tags: t,
            emissions: em,
            alpha,
            beta,
            log_z,
        })
    }

    pub fn len(&self) -> usize {
        self.emissions.len() / self.num_tags
    }

    pub fn is_empty(&self) -> bool {
        self.emissions.is_empty()
    }

    pub fn log_partition(&self) -> f64 {
        self.log_z
    }

    /// `p(y_n = tag | x)`, `n` 0-based.
    pub fn node_marginal(&self, n: usize, tag: usize) -> f64 {
        let i = n * self.num_tags + tag;
        (self.alpha[i] + self.beta[i] - self.log_z).exp()
    }

    /// `p(y_{n-1} = prev, y_n = tag | x)` for `n >= 1`.
    pub fn edge_marginal(&self, m: &Model, n: usize, prev: usize, tag: usize) -> f64 {
        let t = self.num_tags;
        (self.alpha[(n - 1) * t + prev] + m.transition(prev, tag) + self.emissions[n * t + tag] + self.beta[n * t + tag]
            - self.log_z)
            .exp()
    }

    pub fn marginals(&self) -> MarginalTable {
        let t = self.num_tags;
        let marginals = (0..self.len())
            .map(|n| (0..t).map(|j| self.node_marginal(n, j)).collect())
            .collect();
        MarginalTable {
            marginals,
            log_partition: self.log_z,
        }
    }
}

/// Unnormalized log-score of a tag sequence.
pub fn score_sequence(m: &Model, x: &FeatureVectorSeq, y: &[usize]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("{} positions but {} tags", x.len(), y.len())));
    }
    let t = m.num_tags();
    if let Some(&bad) = y.iter().find(|&&tag| tag >= t) {
        return Err(Error::invalid(format!("tag id {bad} outside a tag set of {t}")));
    }
    let nf = m.num_features() as u32;
    let mut score = 0.0;
    for (n, ids) in x.positions.iter().enumerate() {
        for &r in ids {
            if r >= nf {
                return Err(Error::invalid(format!("feature id {r} outside a vocabulary of {nf}")));
            }
            score += m.state_row(r)[y[n]];
        }
        score += if n == 0 {
            m.start_weights[y[0]]
        } else {
            m.transition(y[n - 1], y[n])
        };
    }
    Ok(score)
}

pub fn forward_backward(m: &Model, x: &FeatureVectorSeq) -> Result<MarginalTable> {
    Ok(Lattice::new(m, x)?.marginals())
}

/// Highest-scoring tag sequence. Ties go to the earlier tag in the tag set,
/// both at the last position and at every backpointer.
pub fn viterbi(m: &Model, x: &FeatureVectorSeq) -> Result<Vec<usize>> {
    let t = m.num_tags();
    let n = x.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let em = emissions(m, x)?;
    let mut delta: Vec<f64> = (0..t).map(|j| m.start_weights[j] + em[j]).collect();
    let mut back = vec![0usize; n * t];
    let mut next = vec![0.0; t];
    for i in 1..n {
        for j in 0..t {
            let mut best = 0;
            let mut best_score = delta[0] + m.transition(0, j);
            for (s, &d) in delta.iter().enumerate().skip(1) {
                let v = d + m.transition(s, j);
                if v > best_score {
                    best = s;
                    best_score = v;
                }
            }
            back[i * t + j] = best;
            next[j] = best_score + em[i * t + j];
        }
        std::mem::swap(&mut delta, &mut next);
    }
    let mut last = 0;
    for j in 1..t {
        if delta[j] > delta[last] {
            last = j;
        }
    }
    let mut path = vec![0; n];
    path[n - 1] = last;
    for i in (1..n).rev() {
        path[i - 1] = back[i * t + path[i]];
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TagSet;
    use crate::features::{FeatureConfig, FeatureVocabulary, Preset};

    fn model(num_features: usize) -> Model {
        let vocab = FeatureVocabulary::from((0..num_features).map(|i| format!("f{i}")).collect::<Vec<_>>());
        Model::new(TagSet::default(), vocab, FeatureConfig::new(Preset::Basic), 1.0)
    }

    fn seq(ids: &[&[u32]]) -> FeatureVectorSeq {
        FeatureVectorSeq::new(ids.iter().map(|v| v.to_vec()).collect())
    }

    #[test]
    fn zero_model_scores_zero() {
        let m = model(3);
        let x = seq(&[&[0, 1], &[2], &[]]);
        for y in [[0, 0, 0], [1, 0, 1], [1, 1, 1]] {
            assert_eq!(score_sequence(&m, &x, &y).unwrap(), 0.0);
        }
    }

    #[test]
    fn single_position_score() {
        let mut m = model(1);
        m.state_row_mut(0)[0] = 2.0;
        m.start_weights = vec![0.25, -0.5];
        let x = seq(&[&[0]]);
        assert_eq!(score_sequence(&m, &x, &[0]).unwrap(), 2.25);
        assert_eq!(score_sequence(&m, &x, &[1]).unwrap(), -0.5);
    }

    #[test]
    fn hand_built_three_positions() {
        let mut m = model(2);
        m.state_weights = vec![1.0, -1.0, 0.5, 2.0];
        m.transition_weights = vec![0.1, 0.2, 0.3, 0.4];
        m.start_weights = vec![-0.7, 0.9];
        let x = seq(&[&[0], &[0, 1], &[1]]);
        // y = ENT, O, O
        let expected = (-0.7 + 1.0) + (0.2 + (-1.0 + 2.0)) + (0.4 + 2.0);
        assert!((score_sequence(&m, &x, &[0, 1, 1]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn dimension_errors() {
        let m = model(1);
        assert!(score_sequence(&m, &seq(&[&[0]]), &[0, 1]).is_err());
        assert!(score_sequence(&m, &seq(&[&[0]]), &[2]).is_err());
        assert!(score_sequence(&m, &seq(&[&[5]]), &[0]).is_err());
        assert!(forward_backward(&m, &seq(&[&[5]])).is_err());
    }

    #[test]
    fn uniform_model() {
        let m = model(1);
        let table = forward_backward(&m, &seq(&[&[0], &[], &[0]])).unwrap();
        assert!((table.log_partition - 3.0 * 2f64.ln()).abs() < 1e-12);
        for row in &table.marginals {
            for &p in row {
                assert!((p - 0.5).abs() < 1e-12);
            }
        }
        assert_eq!(viterbi(&m, &seq(&[&[0], &[], &[0]])).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn single_position_is_softmax() {
        let mut m = model(1);
        m.state_row_mut(0).copy_from_slice(&[1.5, -0.25]);
        m.start_weights = vec![0.3, 0.1];
        let table = forward_backward(&m, &seq(&[&[0]])).unwrap();
        let a = (1.5f64 + 0.3).exp();
        let b = (-0.25f64 + 0.1).exp();
        assert!((table.marginals[0][0] - a / (a + b)).abs() < 1e-12);
        assert!((table.log_partition - (a + b).ln()).abs() < 1e-12);
    }

    #[test]
    fn strong_middle_position() {
        let mut m = model(2);
        // f0 favors O everywhere, f1 strongly favors ENT
        m.state_weights = vec![-1.0, 1.0, 5.0, -5.0];
        let x = seq(&[&[0], &[0, 1], &[0]]);
        assert_eq!(viterbi(&m, &x).unwrap(), vec![1, 0, 1]);
    }

    #[test]
    fn empty_sequence() {
        let m = model(1);
        let x = FeatureVectorSeq::default();
        assert!(viterbi(&m, &x).unwrap().is_empty());
        let t = forward_backward(&m, &x).unwrap();
        assert!(t.marginals.is_empty());
    }

    #[test]
    fn large_weights_stay_finite() {
        let mut m = model(1);
        m.state_row_mut(0).copy_from_slice(&[50.0, -50.0]);
        m.transition_weights = vec![50.0, -50.0, -50.0, 50.0];
        let x = FeatureVectorSeq::new(vec![vec![0]; 10_000]);
        let t = forward_backward(&m, &x).unwrap();
        assert!(t.log_partition.is_finite());
        for row in t.marginals.iter().step_by(997) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
