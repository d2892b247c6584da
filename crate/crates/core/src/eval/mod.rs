//! Mention-level scoring, the four-system experiment and a synthetic corpus
//! generator.

pub mod experiment;
pub mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::TagSet;
use crate::error::{Error, Result};

pub use experiment::{run_experiment, ExperimentInputs, ExperimentReport, ExperimentSettings, ProductSplit, System};
pub use synth::{generate_synthetic, SynthConfig, SyntheticCorpus};

/// Inclusive 1-based token span of one mention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    fn within(&self, outer: &Span) -> bool {
        outer.start <= self.start && self.end <= outer.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Mention {
    pub sentence: usize,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Predicted span must equal a gold span.
    #[default]
    Exact,
    /// Predicted span must lie inside a gold span.
    Containment,
}

impl FromStr for MatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(MatchMode::Exact),
            "containment" => Ok(MatchMode::Containment),
            _ => Err(Error::invalid(format!("unknown scoring mode {s:?}"))),
        }
    }
}

impl fmt::Display for MatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchMode::Exact => "exact",
            MatchMode::Containment => "containment",
        })
    }
}

/// Maximal runs of entity tags. Every tag other than `O` counts as an
/// entity tag; a `B`/`B-*` tag always opens a new mention.
pub fn extract_mentions(tags: &[usize], tagset: &TagSet) -> Result<Vec<Span>> {
    let outside = tagset.outside();
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &t) in tags.iter().enumerate() {
        if t >= tagset.len() {
            return Err(Error::invalid(format!("tag id {t} outside the tag set")));
        }
        let pos = i + 1;
        let is_entity = Some(t) != outside;
        match (open, is_entity) {
            (Some(start), true) if tagset.begins_mention(t) => {
                spans.push(Span::new(start, pos - 1));
                open = Some(pos);
            }
            (Some(_), true) => {}
            (Some(start), false) => {
                spans.push(Span::new(start, pos - 1));
                open = None;
            }
            (None, true) => open = Some(pos),
            (None, false) => {}
        }
    }
    if let Some(start) = open {
        spans.push(Span::new(start, tags.len()));
    }
    Ok(spans)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct EvaluationReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl EvaluationReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }
}

fn check_side(side: &str, sentence: usize, spans: &[Span]) -> Result<Vec<Span>> {
    let mut sorted = spans.to_vec();
    sorted.sort();
    for s in &sorted {
        if s.start == 0 || s.start > s.end {
            return Err(Error::invalid(format!("{side} sentence {sentence}: invalid span {s:?}")));
        }
    }
    for w in sorted.windows(2) {
        if w[1].start <= w[0].end {
            return Err(Error::invalid(format!(
                "{side} sentence {sentence}: overlapping spans {:?} and {:?}",
                w[0], w[1]
            )));
        }
    }
    Ok(sorted)
}

/// Per-sentence greedy one-to-one matching, left to right over predictions.
pub fn score(gold: &[Vec<Span>], pred: &[Vec<Span>], mode: MatchMode) -> Result<EvaluationReport> {
    if gold.len() != pred.len() {
        return Err(Error::invalid(format!(
            "{} gold sentences but {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        let g = check_side("gold", i, g)?;
        let p = check_side("predicted", i, p)?;
        let mut used = vec![false; g.len()];
        for ps in &p {
            let hit = g.iter().enumerate().position(|(j, gs)| {
                !used[j]
                    && match mode {
                        MatchMode::Exact => ps == gs,
                        MatchMode::Containment => ps.within(gs),
                    }
            });
            match hit {
                Some(j) => {
                    used[j] = true;
                    tp += 1;
                }
                None => fp += 1,
            }
        }
        fn_ += used.iter().filter(|u| !**u).count();
    }
    Ok(EvaluationReport::from_counts(tp, fp, fn_))
}
