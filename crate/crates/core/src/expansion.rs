//! Knowledge expansion over unlabeled sentences.
//!
//! Each iteration vectorizes every sentence with the current knowledge base,
//! keeps positions whose best marginal exceeds `delta_prime`, harvests the
//! `(type, value)` pairs of those tokens for the predicted tag, drops pairs
//! proposed for more than one tag, and merges the rest into the base. The
//! loop ends when an iteration adds nothing. The model is only read.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::corpus::{Sentence, TagSet};
use crate::crf::{forward_backward, Model};
use crate::error::{Error, Result};
use crate::features::{extract_primitive, primitive_to_kv, vectorize, KnowledgeType, Preset};
use crate::knowledge::{KnowledgeBase, KnowledgeTypes};

pub const DEFAULT_DELTA_PRIME: f64 = 0.8;
pub const DEFAULT_MAX_ITERS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct ExpansionConfig {
    pub delta_prime: f64,
    pub max_iters: usize,
    /// Also drop candidates already present in another tag's base.
    pub strict_prune: bool,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        Self {
            delta_prime: DEFAULT_DELTA_PRIME,
            max_iters: DEFAULT_MAX_ITERS,
            strict_prune: false,
        }
    }
}

/// Candidate `(type, value)` pairs per tag.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CandidateKb {
    pub tags: BTreeMap<String, BTreeSet<(KnowledgeType, String)>>,
}

impl CandidateKb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, tag: &str, k: KnowledgeType, v: String) {
        self.tags.entry(tag.to_string()).or_default().insert((k, v));
    }

    pub fn len(&self) -> usize {
        self.tags.values().map(BTreeSet::len).sum()
    }

    pub fn len_for(&self, tag: &str) -> usize {
        self.tags.get(tag).map_or(0, BTreeSet::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn merge(&mut self, other: CandidateKb) {
        for (t, pairs) in other.tags {
            self.tags.entry(t).or_default().extend(pairs);
        }
    }
}

/// Positions (1-based) whose most probable tag has marginal above
/// `delta_prime`, with that tag.
pub fn reliable_positions(m: &Model, kb: &KnowledgeBase, s: &Sentence, delta_prime: f64) -> Result<Vec<(usize, usize)>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    let x = vectorize(s, &m.vocabulary, Some(kb), &m.features)?;
    let table = forward_backward(m, &x)?;
    Ok((0..s.len())
        .filter_map(|n| {
            let (tag, p) = table.best(n);
            (p > delta_prime).then_some((n + 1, tag))
        })
        .collect())
}

/// Harvests, for every reliable `(position, tag)`, the token's `(k, v)`
/// pairs with `k` among that tag's knowledge types, skipping pairs the tag
/// already knows.
pub fn collect_candidates(
    tagset: &TagSet,
    s: &Sentence,
    reliable: &[(usize, usize)],
    types: &KnowledgeTypes,
    kb: &KnowledgeBase,
) -> Result<CandidateKb> {
    let mut out = CandidateKb::new();
    for &(n, tag_id) in reliable {
        let tag = tagset.name(tag_id);
        let Some(allowed) = types.get(tag) else {
            continue;
        };
        for p in extract_primitive(s, n)? {
            let (k, v) = primitive_to_kv(&p);
            if allowed.contains(&k) && !kb.contains(tag, &k, &v) {
                out.insert(tag, k, v);
            }
        }
    }
    Ok(out)
}

/// Removes every pair proposed for two or more tags.
pub fn prune(c: &CandidateKb) -> CandidateKb {
    let mut seen: BTreeMap<&(KnowledgeType, String), usize> = BTreeMap::new();
    for pairs in c.tags.values() {
        for p in pairs {
            *seen.entry(p).or_default() += 1;
        }
    }
    let tags = c
        .tags
        .iter()
        .map(|(t, pairs)| {
            let kept = pairs.iter().filter(|p| seen[p] == 1).cloned().collect();
            (t.clone(), kept)
        })
        .collect();
    CandidateKb { tags }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub tag: String,
    pub reliable_count: usize,
    pub candidates_raw: usize,
    pub candidates_pruned: usize,
    pub kb_size: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExpansionTrace {
    pub records: Vec<TraceRecord>,
    pub iterations: usize,
    /// Set when the loop stopped at `max_iters` with candidates still coming.
    pub max_iters_reached: bool,
    /// Pairs merged into the base, one entry per iteration.
    #[serde(skip)]
    pub added: Vec<CandidateKb>,
}

impl ExpansionTrace {
    /// KB size summed over tags after each iteration.
    pub fn kb_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.iterations];
        for r in &self.records {
            sizes[r.iteration - 1] += r.kb_size;
        }
        sizes
    }

    /// One JSON object per line, plus a trailing warning line when the
    /// iteration cap was hit.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            writeln!(out, "{}", serde_json::to_string(r).expect("trace serializes")).unwrap();
        }
        if self.max_iters_reached {
            writeln!(
                out,
                "{}",
                serde_json::json!({"warning": "max_iters reached", "iterations": self.iterations})
            )
            .unwrap();
        }
        out
    }
}

/// Expands `kb0` over `unlabeled` until an iteration contributes nothing new
/// or `max_iters` iterations have run.
pub fn expand(
    m: &Model,
    kb0: &KnowledgeBase,
    unlabeled: &[Sentence],
    config: &ExpansionConfig,
) -> Result<(KnowledgeBase, ExpansionTrace)> {
    if m.features.preset != Preset::Knowledge {
        return Err(Error::invalid(format!(
            "expansion needs a model trained with the knowledge preset, found {}",
            m.features.preset
        )));
    }
    if config.max_iters == 0 {
        return Err(Error::invalid("max_iters must be at least 1"));
    }
    let types = kb0.knowledge_types();
    let mut kb = kb0.clone();
    let mut trace = ExpansionTrace::default();

    loop {
        trace.iterations += 1;
        let mut reliable_counts = vec![0usize; m.num_tags()];
        let mut raw = CandidateKb::new();
        for s in unlabeled {
            let reliable = reliable_positions(m, &kb, s, config.delta_prime)?;
            for &(_, t) in &reliable {
                reliable_counts[t] += 1;
            }
            raw.merge(collect_candidates(&m.tagset, s, &reliable, &types, &kb)?);
        }
        let mut pruned = prune(&raw);
        if config.strict_prune {
            for (t, pairs) in pruned.tags.iter_mut() {
                pairs.retain(|(k, v)| !kb.contains_elsewhere(t, k, v));
            }
        }
        for (t, pairs) in &pruned.tags {
            for (k, v) in pairs {
                kb.insert(t, k.clone(), v);
            }
        }
        for (t, tag) in m.tagset.tags().iter().enumerate() {
            trace.records.push(TraceRecord {
                iteration: trace.iterations,
                tag: tag.clone(),
                reliable_count: reliable_counts[t],
                candidates_raw: raw.len_for(tag),
                candidates_pruned: pruned.len_for(tag),
                kb_size: kb.len_for(tag),
            });
        }
        let done = pruned.is_empty();
        trace.added.push(pruned);
        if done {
            break;
        }
        if trace.iterations >= config.max_iters {
            trace.max_iters_reached = true;
            break;
        }
    }
    Ok((kb, trace))
}
