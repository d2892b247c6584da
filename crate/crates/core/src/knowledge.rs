//! Per-tag knowledge bases and entropy-based knowledge-type selection.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::Serialize;
use serde_json::Value;

use crate::crf::Model;
use crate::error::{Error, Result};
use crate::features::{primitive_to_kv, KnowledgeType, Preset, PrimitiveFeature};

pub const DEFAULT_DELTA: f64 = 0.3;
const KB_VERSION: u64 = 1;

/// For every tag, a map from knowledge type to a non-empty set of lowercased
/// values.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeBase {
    tags: BTreeMap<String, BTreeMap<KnowledgeType, BTreeSet<String>>>,
}

/// Knowledge types per tag.
pub type KnowledgeTypes = BTreeMap<String, BTreeSet<KnowledgeType>>;

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    /// Number of `(tag, type, value)` triples.
    pub fn len(&self) -> usize {
        self.tags.values().flat_map(|m| m.values()).map(BTreeSet::len).sum()
    }

    pub fn len_for(&self, tag: &str) -> usize {
        self.tags.get(tag).map_or(0, |m| m.values().map(BTreeSet::len).sum())
    }

    /// Tags with at least one entry.
    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.tags.keys().map(String::as_str)
    }

    pub fn types(&self, tag: &str) -> impl Iterator<Item = &KnowledgeType> {
        self.tags.get(tag).into_iter().flat_map(|m| m.keys())
    }

    pub fn values(&self, tag: &str, k: &KnowledgeType) -> Option<&BTreeSet<String>> {
        self.tags.get(tag)?.get(k)
    }

    pub fn contains(&self, tag: &str, k: &KnowledgeType, v: &str) -> bool {
        self.values(tag, k).is_some_and(|s| s.contains(v))
    }

    /// Whether `(k, v)` is in the base of any tag other than `tag`.
    pub fn contains_elsewhere(&self, tag: &str, k: &KnowledgeType, v: &str) -> bool {
        self.tags().any(|t| t != tag && self.contains(t, k, v))
    }

    /// Inserts a triple; returns whether it was new. Values are lowercased.
    pub fn insert(&mut self, tag: &str, k: KnowledgeType, v: &str) -> bool {
        self.tags
            .entry(tag.to_string())
            .or_default()
            .entry(k)
            .or_default()
            .insert(v.to_lowercase())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &KnowledgeType, &str)> {
        self.tags.iter().flat_map(|(t, m)| {
            m.iter()
                .flat_map(move |(k, vs)| vs.iter().map(move |v| (t.as_str(), k, v.as_str())))
        })
    }

    /// The knowledge types present per tag.
    pub fn knowledge_types(&self) -> KnowledgeTypes {
        self.tags
            .iter()
            .map(|(t, m)| (t.clone(), m.keys().cloned().collect()))
            .collect()
    }

    pub fn is_subset(&self, other: &KnowledgeBase) -> bool {
        self.iter().all(|(t, k, v)| other.contains(t, k, v))
    }

    /// Canonical JSON: tags, types and values sorted, two-space indent,
    /// trailing newline.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            version: u64,
            tags: BTreeMap<&'a str, BTreeMap<String, Vec<&'a str>>>,
        }
        let tags = self
            .tags
            .iter()
            .map(|(t, m)| {
                let types = m
                    .iter()
                    .map(|(k, vs)| (k.to_string(), vs.iter().map(String::as_str).collect()))
                    .collect();
                (t.as_str(), types)
            })
            .collect();
        let doc = Doc {
            version: KB_VERSION,
            tags,
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("knowledge base serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text)?;
        let doc = doc
            .as_object()
            .ok_or_else(|| Error::invalid("knowledge base: top level must be an object"))?;
        match doc.get("version").and_then(Value::as_u64) {
            Some(KB_VERSION) => {}
            other => {
                return Err(Error::invalid(format!(
                    "knowledge base: unsupported version {other:?}"
                )))
            }
        }
        let tags = doc
            .get("tags")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::invalid("knowledge base: missing \"tags\" object"))?;
        let mut kb = KnowledgeBase::new();
        for (tag, types) in tags {
            let types = types
                .as_object()
                .ok_or_else(|| Error::invalid(format!("knowledge base: tags.{tag} must be an object")))?;
            for (k, values) in types {
                let at = format!("tags.{tag}.{k}");
                let kt: KnowledgeType = k
                    .parse()
                    .map_err(|e| Error::invalid(format!("knowledge base: {at}: {e}")))?;
                let values = values
                    .as_array()
                    .ok_or_else(|| Error::invalid(format!("knowledge base: {at} must be an array")))?;
                if values.is_empty() {
                    return Err(Error::invalid(format!("knowledge base: {at} is empty")));
                }
                for (i, v) in values.iter().enumerate() {
                    let v = v
                        .as_str()
                        .filter(|s| !s.is_empty())
                        .ok_or_else(|| Error::invalid(format!("knowledge base: {at}[{i}] must be a non-empty string")))?;
                    kb.insert(tag, kt.clone(), v);
                }
            }
        }
        Ok(kb)
    }

    /// Triples in `other` that are not in `self`, sorted.
    pub fn diff(&self, other: &KnowledgeBase) -> Vec<(String, KnowledgeType, String)> {
        other
            .iter()
            .filter(|(t, k, v)| !self.contains(t, k, v))
            .map(|(t, k, v)| (t.to_string(), k.clone(), v.to_string()))
            .collect()
    }

    pub fn union_with(&mut self, other: &KnowledgeBase) {
        for (t, k, v) in other.iter() {
            self.insert(t, k.clone(), v);
        }
    }
}

/// Softmax over one feature's per-tag weights.
pub fn tag_distribution(weights: &[f64]) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(Error::invalid("tag distribution needs at least one weight"));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::invalid("tag distribution over non-finite weights"));
    }
    let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = weights.iter().map(|w| (w - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / z).collect())
}

/// Natural-log entropy with `0 ln 0 = 0`.
pub fn feature_entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// Index of the unique maximum, or `None` on an exact tie.
pub fn unique_argmax(p: &[f64]) -> Option<usize> {
    let mut best = 0;
    let mut tied = false;
    for i in 1..p.len() {
        if p[i] > p[best] {
            best = i;
            tied = false;
        } else if p[i] == p[best] {
            tied = true;
        }
    }
    (!tied && !p.is_empty()).then_some(best)
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionEntry {
    pub feature_id: u32,
    pub feature: String,
    pub distribution: Vec<f64>,
    pub entropy: f64,
    pub selected: bool,
    pub winning_tag: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionReport {
    pub delta: f64,
    /// `ln |T|`, the entropy upper bound.
    pub max_entropy: f64,
    pub tags: Vec<String>,
    /// Primitive features with all-zero weight rows, left out of selection.
    pub zero_rows: usize,
    pub entries: Vec<SelectionEntry>,
}

impl fmt::Display for SelectionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let selected = self.entries.iter().filter(|e| e.selected).count();
        writeln!(
            f,
            "delta = {}  ln|T| = {:.6}  primitive features = {}  selected = {}  zero rows = {}",
            self.delta,
            self.max_entropy,
            self.entries.len(),
            selected,
            self.zero_rows
        )?;
        let mut line = String::new();
        write!(line, "{:<8} {:>9}", "tag", "entropy").unwrap();
        for t in &self.tags {
            write!(line, " {:>9}", format!("p({t})")).unwrap();
        }
        writeln!(f, "{line}  feature")?;
        for e in self.entries.iter().filter(|e| e.selected) {
            let mut line = String::new();
            write!(line, "{:<8} {:>9.6}", e.winning_tag.as_deref().unwrap_or("-"), e.entropy).unwrap();
            for p in &e.distribution {
                write!(line, " {p:>9.6}").unwrap();
            }
            writeln!(f, "{line}  {}", e.feature)?;
        }
        Ok(())
    }
}

/// Output of [`select_knowledge_types`].
#[derive(Debug, Clone)]
pub struct Selection {
    /// Selected primitive feature ids per tag.
    pub features: BTreeMap<String, Vec<u32>>,
    /// Knowledge types per tag.
    pub types: KnowledgeTypes,
    /// The `(type, value)` pair of every selected feature, per tag.
    pub pairs: BTreeMap<String, Vec<(KnowledgeType, String)>>,
    pub report: SelectionReport,
}

/// Selects primitive features whose tag distribution has entropy below
/// `delta` and a unique most likely tag.
pub fn select_knowledge_types(model: &Model, delta: f64) -> Result<Selection> {
    if model.features.preset != Preset::Primitive {
        return Err(Error::invalid(format!(
            "knowledge selection needs a model trained with the primitive preset, found {}",
            model.features.preset
        )));
    }
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::invalid(format!("delta must be non-negative, got {delta}")));
    }
    let tagset = &model.tagset;
    let mut features: BTreeMap<String, Vec<u32>> = BTreeMap::new();
    let mut types: KnowledgeTypes = BTreeMap::new();
    let mut pairs: BTreeMap<String, Vec<(KnowledgeType, String)>> = BTreeMap::new();
    let mut entries = Vec::new();
    let mut zero_rows = 0;

    for (id, s) in model.vocabulary.iter() {
        let Some(prim) = PrimitiveFeature::parse_feature_string(s) else {
            continue;
        };
        let row = model.state_row(id);
        if row.iter().all(|&w| w == 0.0) {
            zero_rows += 1;
            continue;
        }
        let p = tag_distribution(row)?;
        let h = feature_entropy(&p);
        let winner = unique_argmax(&p);
        let selected = h < delta && winner.is_some();
        if selected {
            let tag = tagset.name(winner.unwrap()).to_string();
            let (k, v) = primitive_to_kv(&prim);
            features.entry(tag.clone()).or_default().push(id);
            types.entry(tag.clone()).or_default().insert(k.clone());
            pairs.entry(tag).or_default().push((k, v));
        }
        entries.push(SelectionEntry {
            feature_id: id,
            feature: s.to_string(),
            distribution: p,
            entropy: h,
            selected,
            winning_tag: winner.map(|w| tagset.name(w).to_string()),
        });
    }

    Ok(Selection {
        features,
        types,
        pairs,
        report: SelectionReport {
            delta,
            max_entropy: (tagset.len() as f64).ln(),
            tags: tagset.tags().to_vec(),
            zero_rows,
            entries,
        },
    })
}

/// The initial knowledge base: every selected feature's value under its
/// type, per tag.
pub fn build_initial_kb(selection: &Selection) -> KnowledgeBase {
    let mut kb = KnowledgeBase::new();
    for (tag, pairs) in &selection.pairs {
        for (k, v) in pairs {
            kb.insert(tag, k.clone(), v);
        }
    }
    kb
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TagSet;
    use crate::features::{FeatureConfig, FeatureVocabulary};

    fn scalar_softmax2(a: f64, b: f64) -> (f64, f64) {
        let ea = a.exp();
        let eb = b.exp();
        (ea / (ea + eb), eb / (ea + eb))
    }

    #[test]
    fn distribution_values() {
        assert_eq!(tag_distribution(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        let p = tag_distribution(&[2.0, -1.0]).unwrap();
        let (a, b) = scalar_softmax2(2.0, -1.0);
        assert!((p[0] - a).abs() < 1e-12 && (p[1] - b).abs() < 1e-12);
        assert!((p[0] - 0.95257).abs() < 1e-5);
        assert!((p[1] - 0.04743).abs() < 1e-5);
        let q = tag_distribution(&[2.0 + 7.5, -1.0 + 7.5]).unwrap();
        assert!((p[0] - q[0]).abs() < 1e-12);
        assert!(tag_distribution(&[f64::NAN, 0.0]).is_err());
        assert!(tag_distribution(&[f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn entropy_values() {
        assert!((feature_entropy(&[0.5, 0.5]) - 2f64.ln()).abs() < 1e-12);
        assert_eq!(feature_entropy(&[1.0, 0.0]), 0.0);
        let (a, b) = scalar_softmax2(2.0, -1.0);
        let h = -(a * a.ln() + b * b.ln());
        assert!((h - 0.1909).abs() < 1e-3);
        assert!((feature_entropy(&[0.95257, 0.04743]) - 0.1909).abs() < 1e-3);
    }

    #[test]
    fn argmax_ties() {
        assert_eq!(unique_argmax(&[0.5, 0.5]), None);
        assert_eq!(unique_argmax(&[0.2, 0.8]), Some(1));
        assert_eq!(unique_argmax(&[0.4, 0.2, 0.4]), None);
        assert_eq!(unique_argmax(&[0.4, 0.4, 0.2]), None);
        assert_eq!(unique_argmax(&[0.3, 0.3, 0.4]), Some(2));
    }

    fn model_with_rows(rows: &[(&str, [f64; 2])], preset: Preset) -> Model {
        let vocab = FeatureVocabulary::from(rows.iter().map(|(s, _)| s.to_string()).collect::<Vec<_>>());
        let mut m = Model::new(TagSet::default(), vocab, FeatureConfig::new(preset), 1.0);
        for (i, (_, w)) in rows.iter().enumerate() {
            m.state_row_mut(i as u32).copy_from_slice(w);
        }
        m
    }

    #[test]
    fn selection_rules() {
        let m = model_with_rows(
            &[
                ("PRIM:DEP|nmod:with|VBZ=works", [2.0, -1.0]),
                ("PRIM:WORD=the", [0.1, 0.1]),
                ("PRIM:WORD=tie", [-0.3, -0.3]),
                ("PRIM:WORD=stand", [-2.0, 1.5]),
                ("PRIM:WORD=never", [0.0, 0.0]),
                ("W0=works", [5.0, -5.0]),
            ],
            Preset::Primitive,
        );
        let sel = select_knowledge_types(&m, DEFAULT_DELTA).unwrap();
        assert_eq!(sel.features["ENT"], vec![0]);
        assert_eq!(sel.features["O"], vec![3]);
        assert_eq!(sel.report.zero_rows, 1);
        // basic features are not candidates
        assert!(sel.report.entries.iter().all(|e| e.feature.starts_with("PRIM:")));
        let kb = build_initial_kb(&sel);
        assert!(kb.contains("ENT", &"[DEP|nmod:with|VBZ]".parse().unwrap(), "works"));
        assert!(kb.contains("O", &KnowledgeType::Word, "stand"));
        assert_eq!(kb.len(), 2);
    }

    #[test]
    fn selection_thresholds() {
        let m = model_with_rows(
            &[("PRIM:WORD=a", [2.0, -1.0]), ("PRIM:WORD=b", [0.4, -0.4])],
            Preset::Primitive,
        );
        assert!(select_knowledge_types(&m, 0.0).unwrap().types.is_empty());
        let all = select_knowledge_types(&m, 2f64.ln() + 1e-12).unwrap();
        assert_eq!(all.features["ENT"], vec![0, 1]);
        assert!(select_knowledge_types(&model_with_rows(&[], Preset::Knowledge), 0.3).is_err());
    }

    #[test]
    fn shared_type_groups_values() {
        let m = model_with_rows(
            &[
                ("PRIM:DEP|nmod:with|VBZ=works", [3.0, -3.0]),
                ("PRIM:DEP|nmod:with|VBZ=fits", [3.0, -3.0]),
            ],
            Preset::Primitive,
        );
        let sel = select_knowledge_types(&m, DEFAULT_DELTA).unwrap();
        assert_eq!(sel.types["ENT"].len(), 1);
        let kb = build_initial_kb(&sel);
        let vs = kb.values("ENT", &"[DEP|nmod:with|VBZ]".parse().unwrap()).unwrap();
        assert_eq!(vs.iter().map(String::as_str).collect::<Vec<_>>(), vec!["fits", "works"]);
    }

    #[test]
    fn canonical_json() {
        assert_eq!(KnowledgeBase::new().to_json(), "{\n  \"version\": 1,\n  \"tags\": {}\n}\n");
        let mut kb = KnowledgeBase::new();
        kb.insert("ENT", "[DEP|nmod:with|VBZ]".parse().unwrap(), "works");
        kb.insert("ENT", KnowledgeType::Word, "Phone");
        let text = kb.to_json();
        let back = KnowledgeBase::from_json(&text).unwrap();
        assert_eq!(back, kb);
        assert_eq!(back.to_json(), text);
        assert!(kb.contains("ENT", &KnowledgeType::Word, "phone"));
    }

    #[test]
    fn malformed_json_reports_location() {
        let err = KnowledgeBase::from_json("{\"version\":1,\"tags\":{\"ENT\":{\"[WORD]\":[]}}}").unwrap_err();
        assert!(err.to_string().contains("tags.ENT.[WORD]"), "{err}");
        let err = KnowledgeBase::from_json("{\"version\":1,\"tags\":{\"ENT\":{\"WORD\":[\"a\"]}}}").unwrap_err();
        assert!(err.to_string().contains("tags.ENT.WORD"), "{err}");
        let err = KnowledgeBase::from_json("{\"version\":2,\"tags\":{}}").unwrap_err();
        assert!(err.to_string().contains("version"));
        let err = KnowledgeBase::from_json("{\"version\":1,\n\"tags\":{").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn diff_semantics() {
        let mut a = KnowledgeBase::new();
        a.insert("ENT", KnowledgeType::Word, "x");
        assert!(a.diff(&a).is_empty());
        let mut b = KnowledgeBase::new();
        b.insert("O", KnowledgeType::Word, "y");
        b.insert("ENT", KnowledgeType::Word, "z");
        b.insert("ENT", KnowledgeType::Word, "x");
        let mut b2 = KnowledgeBase::new();
        b2.insert("ENT", KnowledgeType::Word, "x");
        b2.insert("ENT", KnowledgeType::Word, "z");
        b2.insert("O", KnowledgeType::Word, "y");
        assert_eq!(b, b2);
        assert_eq!(a.diff(&b), a.diff(&b2));
        assert_eq!(
            a.diff(&b),
            vec![
                ("ENT".to_string(), KnowledgeType::Word, "z".to_string()),
                ("O".to_string(), KnowledgeType::Word, "y".to_string()),
            ]
        );
    }
}
