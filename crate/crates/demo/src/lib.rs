//! Browser demo. The page calls three operations: the entropy explorer, a
//! synthetic bootstrap run, and per-token marginals under the initial and
//! the expanded knowledge base. Results cross the boundary as JSON strings.

use kcrf::corpus::{DependencyArc, Sentence, Token};
use kcrf::crf::{forward_backward, Model, TrainConfig};
use kcrf::eval::experiment::{predicted_spans, score_both};
use kcrf::eval::synth::{generate_synthetic, SynthConfig};
use kcrf::eval::MatchMode;
use kcrf::expansion::{expand, ExpansionConfig};
use kcrf::features::{knowledge_features, vectorize, FeatureConfig, Preset};
use kcrf::knowledge::{feature_entropy, tag_distribution, unique_argmax, KnowledgeBase};
use kcrf::pipeline::{predict, select_initial_kb, train_model};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Softmax, entropy and the selection verdict for one weight row.
pub fn explore_entropy(weights: &[f64], delta: f64) -> Result<Value, String> {
    let p = tag_distribution(weights).map_err(|e| e.to_string())?;
    let h = feature_entropy(&p);
    let winner = unique_argmax(&p);
    Ok(json!({
        "distribution": p,
        "entropy": h,
        "max_entropy": (weights.len() as f64).ln(),
        "winner": winner,
        "selected": h < delta && winner.is_some(),
    }))
}

pub struct Demo {
    model: Model,
    initial: KnowledgeBase,
    expanded: KnowledgeBase,
    test: Vec<Sentence>,
    summary: Value,
}

fn kb_entries(kb: &KnowledgeBase) -> Value {
    kb.iter()
        .map(|(t, k, v)| json!({"tag": t, "type": k.to_string(), "value": v}))
        .collect()
}

impl Demo {
    pub fn run(seed: u64, delta: f64, delta_prime: f64) -> Result<Self, String> {
        let err = |e: kcrf::Error| e.to_string();
        let c = generate_synthetic(seed, &SynthConfig::default()).map_err(err)?;
        let train = TrainConfig::default();
        let prim = train_model(&c.tagset, &c.train, FeatureConfig::new(Preset::Primitive), None, &train).map_err(err)?;
        let (_, initial) = select_initial_kb(&prim, delta).map_err(err)?;
        let model = train_model(&c.tagset, &c.train, FeatureConfig::new(Preset::Knowledge), Some(&initial), &train)
            .map_err(err)?;
        let cfg = ExpansionConfig {
            delta_prime,
            ..ExpansionConfig::default()
        };
        let (expanded, trace) = expand(&model, &initial, &c.unlabeled, &cfg).map_err(err)?;

        let gold: Vec<Vec<usize>> = c.test.iter().map(|s| s.labels.clone().unwrap_or_default()).collect();
        let gold = predicted_spans(&gold, &c.tagset).map_err(err)?;
        let mut scores = serde_json::Map::new();
        for (name, kb) in [("CRF-Init", &initial), ("KCRF", &expanded)] {
            let pred = predict(&model, Some(kb), &c.test).map_err(err)?;
            let s = score_both(&gold, &predicted_spans(&pred, &c.tagset).map_err(err)?).map_err(err)?;
            let r = s.get(MatchMode::Exact);
            scores.insert(name.into(), json!({"precision": r.precision, "recall": r.recall, "f1": r.f1}));
        }
        let summary = json!({
            "seed": seed,
            "train": c.train.len(),
            "unlabeled": c.unlabeled.len(),
            "test": c.test.len(),
            "initial_kb": kb_entries(&initial),
            "added": initial
                .diff(&expanded)
                .iter()
                .map(|(t, k, v)| json!({"tag": t, "type": k.to_string(), "value": v}))
                .collect::<Value>(),
            "iterations": trace.iterations,
            "trace": trace.records,
            "scores": scores,
            "expansion_sentences": c.test_expansion,
        });
        Ok(Demo {
            model,
            initial,
            expanded,
            test: c.test,
            summary,
        })
    }

    pub fn summary(&self) -> &Value {
        &self.summary
    }

    pub fn test_len(&self) -> usize {
        self.test.len()
    }

    /// Marginals of every tag at every token of test sentence `index`.
    pub fn test_marginals(&self, index: usize) -> Result<Value, String> {
        let s = self.test.get(index).ok_or_else(|| format!("no test sentence {index}"))?;
        self.marginals(s)
    }

    /// Marginals for "This {product} {verb} with my {noun} ." parsed with
    /// the same template as the synthetic corpus.
    pub fn custom_marginals(&self, product: &str, verb: &str, noun: &str) -> Result<Value, String> {
        let words = [product, verb, noun];
        if words.iter().any(|w| w.is_empty() || w.chars().any(char::is_whitespace)) {
            return Err("product, verb and noun must be single words".into());
        }
        let rows = [
            ("This", "DT", 2, "det"),
            (product, "NN", 3, "nsubj"),
            (verb, "VBZ", 0, "root"),
            ("with", "IN", 6, "case"),
            ("my", "PRP$", 6, "nmod:poss"),
            (noun, "NN", 3, "nmod:with"),
            (".", ".", 3, "punct"),
        ];
        let tokens = rows
            .iter()
            .enumerate()
            .map(|(i, &(form, pos, _, _))| Token {
                index: i + 1,
                form: form.into(),
                pos: pos.into(),
            })
            .collect();
        let arcs = rows
            .iter()
            .enumerate()
            .map(|(i, &(_, _, gov, rel))| DependencyArc {
                dep_type: rel.into(),
                gov_index: gov,
                dep_index: i + 1,
            })
            .collect();
        let s = Sentence::new(tokens, arcs, None).map_err(|e| e.to_string())?;
        self.marginals(&s)
    }

    fn marginals(&self, s: &Sentence) -> Result<Value, String> {
        let err = |e: kcrf::Error| e.to_string();
        let mut runs = serde_json::Map::new();
        for (name, kb) in [("initial", &self.initial), ("expanded", &self.expanded)] {
            let x = vectorize(s, &self.model.vocabulary, Some(kb), &self.model.features).map_err(err)?;
            let table = forward_backward(&self.model, &x).map_err(err)?;
            let active: Vec<Vec<String>> = (1..=s.len())
                .map(|n| {
                    knowledge_features(s, n, kb)
                        .map(|f| f.into_iter().map(|(t, k)| format!("{t}:{k}")).collect())
                        .unwrap_or_default()
                })
                .collect();
            runs.insert(name.into(), json!({"marginals": table.marginals, "knowledge": active}));
        }
        Ok(json!({
            "tokens": s.tokens.iter().map(|t| &t.form).collect::<Vec<_>>(),
            "gold": s.labels,
            "tags": self.model.tagset.tags(),
            "runs": runs,
        }))
    }
}

#[wasm_bindgen]
pub fn entropy_explorer(weights: &[f64], delta: f64) -> Result<String, JsError> {
    explore_entropy(weights, delta)
        .map(|v| v.to_string())
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub struct Bootstrap {
    inner: Demo,
}

#[wasm_bindgen]
impl Bootstrap {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, delta: f64, delta_prime: f64) -> Result<Bootstrap, JsError> {
        Demo::run(seed.into(), delta, delta_prime)
            .map(|inner| Bootstrap { inner })
            .map_err(|e| JsError::new(&e))
    }

    pub fn summary(&self) -> String {
        self.inner.summary().to_string()
    }

    #[wasm_bindgen(js_name = testLen)]
    pub fn test_len(&self) -> usize {
        self.inner.test_len()
    }

    pub fn marginals(&self, index: usize) -> Result<String, JsError> {
        self.inner
            .test_marginals(index)
            .map(|v| v.to_string())
            .map_err(|e| JsError::new(&e))
    }

    pub fn custom(&self, product: &str, verb: &str, noun: &str) -> Result<String, JsError> {
        self.inner
            .custom_marginals(product, verb, noun)
            .map(|v| v.to_string())
            .map_err(|e| JsError::new(&e))
    }
}
