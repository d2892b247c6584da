//! Feature extraction and vectorization.
//!
//! Three families of string features are produced per token:
//!
//! * basic: a ±4 word/POS window, digit count and a slash/dash flag
//!   (`W0=stand`, `W[-2]=with`, `P[+1]=IN`, `DIGITS=0`, `SLASHDASH`);
//! * primitive: the lowercased current word and one simplified dependency
//!   feature per arc (`PRIM:WORD=iphone`, `PRIM:DEP|nmod:with|VBZ=works`);
//! * knowledge: one indicator per `(tag, knowledge type)` that fires when
//!   any of the token's primitive `(type, value)` pairs is in that tag's
//!   knowledge base (`KB:ENT:[DEP|nmod:with|VBZ]`).
//!
//! Strings are interned into a [`FeatureVocabulary`] and each sentence
//! becomes a [`FeatureVectorSeq`] of sorted, de-duplicated ids.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Role, Sentence};
use crate::error::{Error, Result};
use crate::knowledge::KnowledgeBase;

pub const WINDOW: i32 = 4;
const LEFT_BOUNDARY: &str = "<s>";
const RIGHT_BOUNDARY: &str = "</s>";
const PRIM_PREFIX: &str = "PRIM:";
const KB_PREFIX: &str = "KB:";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BasicFeature {
    WordAt(i32, String),
    PosAt(i32, String),
    DigitCount(usize),
    HasSlashOrDash(bool),
}

impl BasicFeature {
    /// Canonical feature string; `None` for the absent slash/dash flag.
    pub fn feature_string(&self) -> Option<String> {
        match self {
            BasicFeature::WordAt(o, w) => Some(format!("W{}={w}", offset_label(*o))),
            BasicFeature::PosAt(o, p) => Some(format!("P{}={p}", offset_label(*o))),
            BasicFeature::DigitCount(n) => Some(format!("DIGITS={n}")),
            BasicFeature::HasSlashOrDash(true) => Some("SLASHDASH".to_string()),
            BasicFeature::HasSlashOrDash(false) => None,
        }
    }
}

fn offset_label(o: i32) -> String {
    match o {
        0 => "0".to_string(),
        o if o > 0 => format!("[+{o}]"),
        o => format!("[{o}]"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PrimitiveFeature {
    CurrentWord(String),
    Dependency {
        role: Role,
        dep_type: String,
        other_form: String,
        other_pos: String,
    },
}

impl PrimitiveFeature {
    pub fn feature_string(&self) -> String {
        let (k, v) = primitive_to_kv(self);
        let key = match &k {
            KnowledgeType::Word => "WORD".to_string(),
            KnowledgeType::DepPattern { role, dep_type, other_pos } => format!("{role}|{dep_type}|{other_pos}"),
        };
        format!("{PRIM_PREFIX}{key}={v}")
    }

    /// Inverse of [`PrimitiveFeature::feature_string`]; `None` for strings of
    /// other families.
    pub fn parse_feature_string(s: &str) -> Option<Self> {
        let rest = s.strip_prefix(PRIM_PREFIX)?;
        let (key, value) = rest.split_once('=')?;
        if key == "WORD" {
            return Some(PrimitiveFeature::CurrentWord(value.to_string()));
        }
        let mut parts = key.splitn(3, '|');
        let role = Role::parse(parts.next()?)?;
        let dep_type = parts.next()?.to_string();
        let other_pos = parts.next()?.to_string();
        Some(PrimitiveFeature::Dependency {
            role,
            dep_type,
            other_form: value.to_string(),
            other_pos,
        })
    }
}

/// The pattern part of a primitive feature: `[WORD]` or
/// `[role|dep_type|other_pos]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KnowledgeType {
    Word,
    DepPattern {
        role: Role,
        dep_type: String,
        other_pos: String,
    },
}

impl fmt::Display for KnowledgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KnowledgeType::Word => f.write_str("[WORD]"),
            KnowledgeType::DepPattern { role, dep_type, other_pos } => {
                write!(f, "[{role}|{dep_type}|{other_pos}]")
            }
        }
    }
}

impl FromStr for KnowledgeType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("malformed knowledge type {s:?}"));
        let inner = s.strip_prefix('[').and_then(|s| s.strip_suffix(']')).ok_or_else(bad)?;
        if inner == "WORD" {
            return Ok(KnowledgeType::Word);
        }
        let parts: Vec<&str> = inner.splitn(3, '|').collect();
        if parts.len() != 3 || parts.iter().any(|p| p.is_empty()) {
            return Err(bad());
        }
        Ok(KnowledgeType::DepPattern {
            role: Role::parse(parts[0]).ok_or_else(bad)?,
            dep_type: parts[1].to_string(),
            other_pos: parts[2].to_string(),
        })
    }
}

impl Serialize for KnowledgeType {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for KnowledgeType {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Window, POS and word-shape features only.
    Basic,
    /// Basic plus primitive features; the pre-training model.
    #[default]
    Primitive,
    /// Basic plus knowledge-based indicators.
    Knowledge,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "basic" => Ok(Preset::Basic),
            "primitive" => Ok(Preset::Primitive),
            "knowledge" => Ok(Preset::Knowledge),
            _ => Err(Error::invalid(format!("unknown preset {s:?}"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Basic => "basic",
            Preset::Primitive => "primitive",
            Preset::Knowledge => "knowledge",
        })
    }
}

/// How knowledge-based features are keyed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KbMembership {
    /// One indicator per `(tag, type)`.
    #[default]
    PerTag,
    /// One indicator per type, firing on membership in any tag's base.
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct FeatureConfig {
    pub preset: Preset,
    #[serde(default)]
    pub kb_membership: KbMembership,
}

impl FeatureConfig {
    pub fn new(preset: Preset) -> Self {
        Self {
            preset,
            kb_membership: KbMembership::PerTag,
        }
    }
}

pub fn extract_basic(s: &Sentence, n: usize) -> Result<BTreeSet<BasicFeature>> {
    check_position(s, n)?;
    let mut out = BTreeSet::new();
    let len = s.len() as i64;
    for o in -WINDOW..=WINDOW {
        let p = n as i64 + o as i64;
        let (w, pos) = if p < 1 {
            (LEFT_BOUNDARY.to_string(), LEFT_BOUNDARY.to_string())
        } else if p > len {
            (RIGHT_BOUNDARY.to_string(), RIGHT_BOUNDARY.to_string())
        } else {
            let t = s.token(p as usize);
            (t.form.clone(), t.pos.clone())
        };
        out.insert(BasicFeature::WordAt(o, w));
        out.insert(BasicFeature::PosAt(o, pos));
    }
    let form = &s.token(n).form;
    out.insert(BasicFeature::DigitCount(form.chars().filter(char::is_ascii_digit).count()));
    out.insert(BasicFeature::HasSlashOrDash(form.contains(['/', '-'])));
    Ok(out)
}

pub fn extract_primitive(s: &Sentence, n: usize) -> Result<BTreeSet<PrimitiveFeature>> {
    let view = s.dependency_view(n)?;
    let mut out = BTreeSet::new();
    out.insert(PrimitiveFeature::CurrentWord(s.token(n).form.to_lowercase()));
    for v in view {
        out.insert(PrimitiveFeature::Dependency {
            role: v.role,
            dep_type: v.dep_type,
            other_form: v.other_form.to_lowercase(),
            other_pos: v.other_pos,
        });
    }
    Ok(out)
}

pub fn primitive_to_kv(p: &PrimitiveFeature) -> (KnowledgeType, String) {
    match p {
        PrimitiveFeature::CurrentWord(w) => (KnowledgeType::Word, w.clone()),
        PrimitiveFeature::Dependency {
            role,
            dep_type,
            other_form,
            other_pos,
        } => (
            KnowledgeType::DepPattern {
                role: *role,
                dep_type: dep_type.clone(),
                other_pos: other_pos.clone(),
            },
            other_form.clone(),
        ),
    }
}

/// The `(tag, type)` pairs for which token `n` has some primitive
/// `(type, value)` with `value` in that tag's knowledge base.
pub fn knowledge_features(s: &Sentence, n: usize, kb: &KnowledgeBase) -> Result<BTreeSet<(String, KnowledgeType)>> {
    let mut out = BTreeSet::new();
    if kb.is_empty() {
        check_position(s, n)?;
        return Ok(out);
    }
    for p in extract_primitive(s, n)? {
        let (k, v) = primitive_to_kv(&p);
        for tag in kb.tags() {
            if kb.contains(tag, &k, &v) {
                out.insert((tag.to_string(), k.clone()));
            }
        }
    }
    Ok(out)
}

fn check_position(s: &Sentence, n: usize) -> Result<()> {
    if n == 0 || n > s.len() {
        return Err(Error::invalid(format!("position {n} out of range 1..={}", s.len())));
    }
    Ok(())
}

pub fn knowledge_feature_string(tag: &str, k: &KnowledgeType) -> String {
    format!("{KB_PREFIX}{tag}:{k}")
}

fn flat_knowledge_feature_string(k: &KnowledgeType) -> String {
    format!("{KB_PREFIX}{k}")
}

/// All feature strings for token `n` under `config`.
pub fn feature_strings(s: &Sentence, n: usize, kb: Option<&KnowledgeBase>, config: &FeatureConfig) -> Result<Vec<String>> {
    let mut out: Vec<String> = extract_basic(s, n)?
        .iter()
        .filter_map(BasicFeature::feature_string)
        .collect();
    match config.preset {
        Preset::Basic => {}
        Preset::Primitive => out.extend(extract_primitive(s, n)?.iter().map(PrimitiveFeature::feature_string)),
        Preset::Knowledge => {
            if let Some(kb) = kb {
                let fired = knowledge_features(s, n, kb)?;
                match config.kb_membership {
                    KbMembership::PerTag => out.extend(fired.iter().map(|(t, k)| knowledge_feature_string(t, k))),
                    KbMembership::Flat => {
                        let types: BTreeSet<&KnowledgeType> = fired.iter().map(|(_, k)| k).collect();
                        out.extend(types.into_iter().map(flat_knowledge_feature_string));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Interned feature strings with dense ids `0..len`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct FeatureVocabulary {
    strings: Vec<String>,
    ids: HashMap<String, u32>,
    frozen: bool,
}

impl FeatureVocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Interns `s`, returning its id. Frozen vocabularies only look up.
    pub fn intern(&mut self, s: &str) -> Option<u32> {
        if let Some(&id) = self.ids.get(s) {
            return Some(id);
        }
        if self.frozen {
            return None;
        }
        let id = self.strings.len() as u32;
        self.strings.push(s.to_string());
        self.ids.insert(s.to_string(), id);
        Some(id)
    }

    pub fn get(&self, s: &str) -> Option<u32> {
        self.ids.get(s).copied()
    }

    pub fn string(&self, id: u32) -> &str {
        &self.strings[id as usize]
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.strings.iter().enumerate().map(|(i, s)| (i as u32, s.as_str()))
    }
}

impl From<Vec<String>> for FeatureVocabulary {
    fn from(strings: Vec<String>) -> Self {
        let ids = strings.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect();
        Self {
            strings,
            ids,
            frozen: true,
        }
    }
}

impl From<FeatureVocabulary> for Vec<String> {
    fn from(v: FeatureVocabulary) -> Self {
        v.strings
    }
}

/// Per-position sets of active feature ids, sorted and without duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureVectorSeq {
    pub positions: Vec<Vec<u32>>,
}

impl FeatureVectorSeq {
    pub fn new(mut positions: Vec<Vec<u32>>) -> Self {
        for p in &mut positions {
            p.sort_unstable();
            p.dedup();
        }
        Self { positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Builds a frozen vocabulary over a corpus. With the knowledge preset, the
/// `(tag, type)` indicators for every type present in `kb` are added too.
pub fn build_vocabulary(
    corpus: &[Sentence],
    config: &FeatureConfig,
    kb: Option<&KnowledgeBase>,
) -> Result<FeatureVocabulary> {
    if corpus.is_empty() {
        return Err(Error::invalid("cannot build a vocabulary from an empty corpus"));
    }
    let mut vocab = FeatureVocabulary::new();
    for s in corpus {
        for n in 1..=s.len() {
            for f in feature_strings(s, n, kb, config)? {
                vocab.intern(&f);
            }
        }
    }
    if let (Preset::Knowledge, Some(kb)) = (config.preset, kb) {
        for tag in kb.tags() {
            for k in kb.types(tag) {
                let f = match config.kb_membership {
                    KbMembership::PerTag => knowledge_feature_string(tag, k),
                    KbMembership::Flat => flat_knowledge_feature_string(k),
                };
                vocab.intern(&f);
            }
        }
    }
    vocab.freeze();
    Ok(vocab)
}

/// Maps a sentence through a frozen vocabulary; unknown strings are dropped.
pub fn vectorize(
    s: &Sentence,
    vocab: &FeatureVocabulary,
    kb: Option<&KnowledgeBase>,
    config: &FeatureConfig,
) -> Result<FeatureVectorSeq> {
    if !vocab.is_frozen() {
        return Err(Error::invalid("vectorize requires a frozen vocabulary"));
    }
    let mut positions = Vec::with_capacity(s.len());
    for n in 1..=s.len() {
        let ids = feature_strings(s, n, kb, config)?
            .iter()
            .filter_map(|f| vocab.get(f))
            .collect();
        positions.push(ids);
    }
    Ok(FeatureVectorSeq::new(positions))
}
