//! Brute-force oracles and random generators shared by the integration and
//! acceptance tests. Nothing here calls the inference code under test.

#![allow(dead_code)]

use std::collections::BTreeSet;

use kcrf::corpus::{DependencyArc, Role, Sentence, TagSet, Token};
use kcrf::crf::{LabeledSeq, Model};
use kcrf::features::{FeatureConfig, FeatureVectorSeq, FeatureVocabulary, KnowledgeType, Preset};
use kcrf::knowledge::KnowledgeBase;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn tagset(t: usize) -> TagSet {
    let names = ["ENT", "O", "X", "Y"];
    TagSet::new(names[..t].iter().copied()).unwrap()
}

pub fn vocabulary(m: usize) -> FeatureVocabulary {
    let mut v = FeatureVocabulary::new();
    for i in 0..m {
        v.intern(&format!("f{i}"));
    }
    v.freeze();
    v
}

/// Weights uniform in `[-scale, scale]`.
pub fn random_model(rng: &mut impl Rng, features: usize, tags: usize, scale: f64) -> Model {
    let mut m = Model::new(tagset(tags), vocabulary(features), FeatureConfig::new(Preset::Basic), 1.0);
    let mut draw = |w: &mut Vec<f64>| w.iter_mut().for_each(|x| *x = rng.gen_range(-scale..=scale));
    draw(&mut m.state_weights);
    draw(&mut m.transition_weights);
    draw(&mut m.start_weights);
    m
}

/// Small integer weights, so many sequences tie exactly.
pub fn tie_heavy_model(rng: &mut impl Rng, features: usize, tags: usize) -> Model {
    let mut m = Model::new(tagset(tags), vocabulary(features), FeatureConfig::new(Preset::Basic), 1.0);
    let mut draw = |w: &mut Vec<f64>| w.iter_mut().for_each(|x| *x = rng.gen_range(-1i32..=1) as f64);
    draw(&mut m.state_weights);
    draw(&mut m.transition_weights);
    draw(&mut m.start_weights);
    m
}

pub fn random_seq(rng: &mut impl Rng, len: usize, features: usize) -> FeatureVectorSeq {
    let positions = (0..len)
        .map(|_| {
            let k = rng.gen_range(0..=features.min(4));
            (0..k).map(|_| rng.gen_range(0..features as u32)).collect()
        })
        .collect();
    FeatureVectorSeq::new(positions)
}

pub fn random_batch(rng: &mut impl Rng, m: &Model, size: usize, max_len: usize) -> Vec<LabeledSeq> {
    (0..size)
        .map(|_| {
            let n = rng.gen_range(1..=max_len);
            let x = random_seq(rng, n, m.num_features());
            let y = (0..n).map(|_| rng.gen_range(0..m.num_tags())).collect();
            LabeledSeq { x, y }
        })
        .collect()
}

/// Unnormalized log score computed straight from the weight arrays.
pub fn path_score(m: &Model, x: &FeatureVectorSeq, y: &[usize]) -> f64 {
    let t = m.num_tags();
    let mut s = 0.0;
    for (n, ids) in x.positions.iter().enumerate() {
        for &r in ids {
            s += m.state_weights[r as usize * t + y[n]];
        }
        s += if n == 0 {
            m.start_weights[y[0]]
        } else {
            m.transition_weights[y[n - 1] * t + y[n]]
        };
    }
    s
}

/// Every tag sequence of length `n` over `t` tags, in odometer order.
pub fn all_paths(n: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(t.pow(n as u32));
    let mut y = vec![0; n];
    loop {
        out.push(y.clone());
        let mut i = 0;
        loop {
            if i == n {
                return out;
            }
            y[i] += 1;
            if y[i] < t {
                break;
            }
            y[i] = 0;
            i += 1;
        }
    }
}

pub struct Enumerated {
    pub log_z: f64,
    pub marginals: Vec<Vec<f64>>,
    /// Highest-scoring path; among ties the one with the smallest last tag,
    /// then the smallest second-to-last tag, and so on.
    pub best: Vec<usize>,
}

pub fn enumerate(m: &Model, x: &FeatureVectorSeq) -> Enumerated {
    let (n, t) = (x.len(), m.num_tags());
    let paths = all_paths(n, t);
    let scores: Vec<f64> = paths.iter().map(|y| path_score(m, x, y)).collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = scores.iter().map(|s| (s - max).exp()).sum();
    let log_z = max + z.ln();
    let mut marginals = vec![vec![0.0; t]; n];
    for (y, s) in paths.iter().zip(&scores) {
        let p = (s - log_z).exp();
        for (pos, &tag) in y.iter().enumerate() {
            marginals[pos][tag] += p;
        }
    }
    let best = paths
        .iter()
        .zip(&scores)
        .filter(|(_, &s)| s == max)
        .map(|(y, _)| y)
        .min_by(|a, b| a.iter().rev().cmp(b.iter().rev()))
        .unwrap()
        .clone();
    Enumerated { log_z, marginals, best }
}

const FORMS: [&str; 10] = ["This", "stand", "works", "with", "my", "iPhone", "Galaxy", "holds", "box", "."];
const POS: [&str; 5] = ["DT", "NN", "VBZ", "IN", "PRP$"];
const RELS: [&str; 5] = ["det", "nsubj", "nmod:with", "case", "amod"];

/// A random sentence with one root and one head per token. The arcs may
/// contain cycles, which feature extraction does not care about.
pub fn random_sentence(rng: &mut impl Rng, len: usize) -> Sentence {
    let tokens: Vec<Token> = (1..=len)
        .map(|i| Token {
            index: i,
            form: FORMS.choose(rng).unwrap().to_string(),
            pos: POS.choose(rng).unwrap().to_string(),
        })
        .collect();
    let root = rng.gen_range(1..=len);
    let arcs = (1..=len)
        .map(|i| {
            let (gov, rel) = if i == root {
                (0, "root")
            } else {
                let mut g = rng.gen_range(1..=len);
                while g == i {
                    g = rng.gen_range(1..=len);
                }
                (g, *RELS.choose(rng).unwrap())
            };
            DependencyArc {
                dep_type: rel.to_string(),
                gov_index: gov,
                dep_index: i,
            }
        })
        .collect();
    Sentence {
        tokens,
        arcs,
        labels: None,
    }
}

/// The token's `(type, value)` pairs, read directly from the arcs.
pub fn token_pairs(s: &Sentence, n: usize) -> BTreeSet<(KnowledgeType, String)> {
    let mut out = BTreeSet::new();
    out.insert((KnowledgeType::Word, s.tokens[n - 1].form.to_lowercase()));
    for a in &s.arcs {
        if a.gov_index == 0 {
            continue;
        }
        let (role, other) = if a.dep_index == n {
            (Role::Dep, a.gov_index)
        } else if a.gov_index == n {
            (Role::Gov, a.dep_index)
        } else {
            continue;
        };
        let o = &s.tokens[other - 1];
        out.insert((
            KnowledgeType::DepPattern {
                role,
                dep_type: a.dep_type.clone(),
                other_pos: o.pos.clone(),
            },
            o.form.to_lowercase(),
        ));
    }
    out
}

/// Every `(tag, type)` with some KB entry `(tag, type, value)` matching the
/// token, found by scanning the whole base.
pub fn brute_knowledge_features(s: &Sentence, n: usize, kb: &KnowledgeBase) -> BTreeSet<(String, KnowledgeType)> {
    let pairs = token_pairs(s, n);
    kb.iter()
        .filter(|(_, k, v)| pairs.contains(&((*k).clone(), v.to_string())))
        .map(|(t, k, _)| (t.to_string(), k.clone()))
        .collect()
}

pub fn random_kb(rng: &mut impl Rng, tags: &[&str], entries: usize) -> KnowledgeBase {
    let mut kb = KnowledgeBase::new();
    for _ in 0..entries {
        let tag = tags.choose(rng).unwrap();
        let k = if rng.gen_bool(0.4) {
            KnowledgeType::Word
        } else {
            KnowledgeType::DepPattern {
                role: if rng.gen_bool(0.5) { Role::Gov } else { Role::Dep },
                dep_type: RELS.choose(rng).unwrap().to_string(),
                other_pos: POS.choose(rng).unwrap().to_string(),
            }
        };
        kb.insert(tag, k, FORMS.choose(rng).unwrap());
    }
    kb
}
