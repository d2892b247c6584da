//! Four-system comparison: basic-feature CRF, primitive-feature CRF, the
//! knowledge-based model with its initial knowledge base, and the same model
//! after knowledge expansion.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, TagSet};
use crate::crf::{Model, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::{extract_mentions, score, EvaluationReport, MatchMode, Span};
use crate::expansion::{expand, ExpansionConfig};
use crate::features::{FeatureConfig, KbMembership, Preset};
use crate::knowledge::{KnowledgeBase, DEFAULT_DELTA};
use crate::pipeline::{predict, select_initial_kb, train_model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum System {
    #[serde(rename = "CRF(-)DR")]
    CrfMinusDr,
    #[serde(rename = "CRF")]
    Crf,
    #[serde(rename = "CRF-Init")]
    CrfInit,
    #[serde(rename = "KCRF")]
    Kcrf,
}

impl System {
    pub const ALL: [System; 4] = [System::CrfMinusDr, System::Crf, System::CrfInit, System::Kcrf];

    pub fn name(self) -> &'static str {
        match self {
            System::CrfMinusDr => "CRF(-)DR",
            System::Crf => "CRF",
            System::CrfInit => "CRF-Init",
            System::Kcrf => "KCRF",
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct ProductSplit {
    pub name: String,
    /// Whether the product contributed training data.
    pub in_domain: bool,
    pub test: Vec<Sentence>,
    pub unlabeled: Vec<Sentence>,
}

#[derive(Debug, Clone)]
pub struct ExperimentInputs {
    pub tagset: TagSet,
    pub train: Vec<Sentence>,
    pub products: Vec<ProductSplit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSettings {
    pub delta: f64,
    pub expansion: ExpansionConfig,
    pub train: TrainConfig,
    pub kb_membership: KbMembership,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            delta: DEFAULT_DELTA,
            expansion: ExpansionConfig::default(),
            train: TrainConfig::default(),
            kb_membership: KbMembership::PerTag,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemScores {
    pub exact: EvaluationReport,
    pub containment: EvaluationReport,
}

impl SystemScores {
    pub fn get(&self, mode: MatchMode) -> &EvaluationReport {
        match mode {
            MatchMode::Exact => &self.exact,
            MatchMode::Containment => &self.containment,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductResult {
    pub product: String,
    pub in_domain: bool,
    pub systems: BTreeMap<System, SystemScores>,
    pub kb_initial_size: usize,
    pub kb_expanded_size: usize,
    pub expansion_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub products: Vec<ProductResult>,
}

/// Trained artifacts of one experiment run, kept for inspection.
pub struct ExperimentArtifacts {
    pub basic: Model,
    pub primitive: Model,
    pub knowledge: Model,
    pub initial_kb: KnowledgeBase,
    /// Expanded base per product, in input order.
    pub expanded_kbs: Vec<KnowledgeBase>,
}

fn gold_spans(sentences: &[Sentence], tagset: &TagSet) -> Result<Vec<Vec<Span>>> {
    sentences
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let labels = s
                .labels
                .as_ref()
                .ok_or_else(|| Error::invalid(format!("test sentence {i} is unlabeled")))?;
            extract_mentions(labels, tagset)
        })
        .collect()
}

pub fn predicted_spans(predictions: &[Vec<usize>], tagset: &TagSet) -> Result<Vec<Vec<Span>>> {
    predictions.iter().map(|p| extract_mentions(p, tagset)).collect()
}

pub fn score_both(gold: &[Vec<Span>], pred: &[Vec<Span>]) -> Result<SystemScores> {
    Ok(SystemScores {
        exact: score(gold, pred, MatchMode::Exact)?,
        containment: score(gold, pred, MatchMode::Containment)?,
    })
}

pub fn run_experiment(inputs: &ExperimentInputs, settings: &ExperimentSettings) -> Result<ExperimentReport> {
    Ok(run_experiment_with_artifacts(inputs, settings)?.0)
}

pub fn run_experiment_with_artifacts(
    inputs: &ExperimentInputs,
    settings: &ExperimentSettings,
) -> Result<(ExperimentReport, ExperimentArtifacts)> {
    let tagset = &inputs.tagset;
    for p in &inputs.products {
        for (i, s) in p.test.iter().enumerate() {
            s.validate(Some(tagset))
                .map_err(|e| Error::invalid(format!("{} test sentence {i}: {e}", p.name)))?;
        }
    }
    let cfg = |preset| FeatureConfig {
        preset,
        kb_membership: settings.kb_membership,
    };
    let basic = train_model(tagset, &inputs.train, cfg(Preset::Basic), None, &settings.train)?;
    let primitive = train_model(tagset, &inputs.train, cfg(Preset::Primitive), None, &settings.train)?;
    let (_, initial_kb) = select_initial_kb(&primitive, settings.delta)?;
    let knowledge = train_model(
        tagset,
        &inputs.train,
        cfg(Preset::Knowledge),
        Some(&initial_kb),
        &settings.train,
    )?;

    let mut products = Vec::new();
    let mut expanded_kbs = Vec::new();
    for p in &inputs.products {
        let gold = gold_spans(&p.test, tagset)?;
        let (expanded, trace) = expand(&knowledge, &initial_kb, &p.unlabeled, &settings.expansion)?;
        let runs: [(System, &Model, Option<&KnowledgeBase>); 4] = [
            (System::CrfMinusDr, &basic, None),
            (System::Crf, &primitive, None),
            (System::CrfInit, &knowledge, Some(&initial_kb)),
            (System::Kcrf, &knowledge, Some(&expanded)),
        ];
        let mut systems = BTreeMap::new();
        for (system, model, kb) in runs {
            let pred = predicted_spans(&predict(model, kb, &p.test)?, tagset)?;
            systems.insert(system, score_both(&gold, &pred)?);
        }
        products.push(ProductResult {
            product: p.name.clone(),
            in_domain: p.in_domain,
            systems,
            kb_initial_size: initial_kb.len(),
            kb_expanded_size: expanded.len(),
            expansion_iterations: trace.iterations,
        });
        expanded_kbs.push(expanded);
    }
    Ok((
        ExperimentReport { products },
        ExperimentArtifacts {
            basic,
            primitive,
            knowledge,
            initial_kb,
            expanded_kbs,
        },
    ))
}

/// Per-product outcome of the comparisons the harness checks against
/// published results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionalCheck {
    pub product: String,
    pub kcrf_recall_above_crf: bool,
    pub kcrf_f1_at_least_baselines: bool,
    /// Only evaluated for in-domain products.
    pub crf_f1_above_basic: Option<bool>,
}

impl DirectionalCheck {
    pub fn holds(&self) -> bool {
        self.kcrf_recall_above_crf && self.kcrf_f1_at_least_baselines && self.crf_f1_above_basic.unwrap_or(true)
    }
}

impl ExperimentReport {
    pub fn directional_checks(&self, mode: MatchMode) -> Vec<DirectionalCheck> {
        self.products
            .iter()
            .map(|p| {
                let r = |s: System| p.systems[&s].get(mode);
                let k = r(System::Kcrf);
                DirectionalCheck {
                    product: p.product.clone(),
                    kcrf_recall_above_crf: k.recall > r(System::Crf).recall,
                    kcrf_f1_at_least_baselines: [System::CrfMinusDr, System::Crf, System::CrfInit]
                        .iter()
                        .all(|&s| k.f1 >= r(s).f1),
                    crf_f1_above_basic: p.in_domain.then(|| r(System::Crf).f1 > r(System::CrfMinusDr).f1),
                }
            })
            .collect()
    }

    /// Aligned text table with P, R and F1 per system.
    pub fn render_table(&self, mode: MatchMode) -> String {
        let name_w = self.products.iter().map(|p| p.product.len()).max().unwrap_or(7).max(7);
        let mut out = String::new();
        write!(out, "{:<name_w$}", "Product").unwrap();
        for s in System::ALL {
            write!(out, " | {:^20}", s.name()).unwrap();
        }
        out.push('\n');
        write!(out, "{:<name_w$}", "").unwrap();
        for _ in System::ALL {
            write!(out, " | {:>6} {:>6} {:>6}", "P", "R", "F1").unwrap();
        }
        out.push('\n');
        out.push_str(&"-".repeat(name_w + 4 * 23));
        out.push('\n');
        for p in &self.products {
            write!(out, "{:<name_w$}", p.product).unwrap();
            for s in System::ALL {
                let r = p.systems[&s].get(mode);
                write!(out, " | {:>6.2} {:>6.2} {:>6.2}", r.precision, r.recall, r.f1).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Machine-readable results keyed by product, system and metric.
    pub fn to_json(&self) -> String {
        let mut root = serde_json::Map::new();
        for p in &self.products {
            let mut systems = serde_json::Map::new();
            for (s, scores) in &p.systems {
                systems.insert(s.name().to_string(), serde_json::to_value(scores).expect("scores serialize"));
            }
            root.insert(
                p.product.clone(),
                serde_json::json!({
                    "in_domain": p.in_domain,
                    "kb_initial_size": p.kb_initial_size,
                    "kb_expanded_size": p.kb_expanded_size,
                    "expansion_iterations": p.expansion_iterations,
                    "systems": systems,
                }),
            );
        }
        let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(root)).expect("report serializes");
        s.push('\n');
        s
    }
}
