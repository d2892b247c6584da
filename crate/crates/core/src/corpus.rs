//! Dependency-parsed sentences and the tab-separated corpus format.
//!
//! One token per line with six tab-separated columns:
//!
//! ```text
//! INDEX  FORM  POS  HEAD  DEPREL  LABEL
//! ```
//!
//! A blank line ends a sentence and lines starting with `#` are comments.
//! `HEAD` is `0` for the artificial root and `_` (with `DEPREL` `_`) for a
//! token without a head. `LABEL` is a tag or `_`.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position.
    pub index: usize,
    pub form: String,
    pub pos: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyArc {
    pub dep_type: String,
    /// 0 is the artificial root.
    pub gov_index: usize,
    pub dep_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "GOV")]
    Gov,
    #[serde(rename = "DEP")]
    Dep,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Gov => "GOV",
            Role::Dep => "DEP",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "GOV" => Some(Role::Gov),
            "DEP" => Some(Role::Dep),
            _ => None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One arc seen from a token: the role the token plays and the word on the
/// other end.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DependencyView {
    pub role: Role,
    pub dep_type: String,
    pub other_form: String,
    pub other_pos: String,
}

/// Ordered list of output tags. The order is persisted and breaks every tie.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct TagSet {
    tags: Vec<String>,
}

impl TagSet {
    pub fn new<S: Into<String>>(tags: impl IntoIterator<Item = S>) -> Result<Self> {
        let tags: Vec<String> = tags.into_iter().map(Into::into).collect();
        if tags.len() < 2 {
            return Err(Error::invalid("a tag set needs at least two tags"));
        }
        for (i, t) in tags.iter().enumerate() {
            if t.is_empty() || t == "_" || t.chars().any(|c| c.is_whitespace() || c == ':') {
                return Err(Error::invalid(format!("invalid tag name {t:?}")));
            }
            if tags[..i].contains(t) {
                return Err(Error::invalid(format!("duplicate tag {t:?}")));
            }
        }
        Ok(Self { tags })
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn name(&self, id: usize) -> &str {
        &self.tags[id]
    }

    pub fn index_of(&self, tag: &str) -> Option<usize> {
        self.tags.iter().position(|t| t == tag)
    }

    /// Id of the outside tag `O`, if the set has one.
    pub fn outside(&self) -> Option<usize> {
        self.index_of("O")
    }

    /// Whether `id` starts a new mention even when it follows an entity tag
    /// (the `B` tags of a BIO scheme).
    pub fn begins_mention(&self, id: usize) -> bool {
        let t = &self.tags[id];
        t == "B" || t.starts_with("B-")
    }
}

impl Default for TagSet {
    fn default() -> Self {
        Self {
            tags: vec!["ENT".to_string(), "O".to_string()],
        }
    }
}

impl TryFrom<Vec<String>> for TagSet {
    type Error = Error;

    fn try_from(tags: Vec<String>) -> Result<Self> {
        TagSet::new(tags)
    }
}

impl From<TagSet> for Vec<String> {
    fn from(t: TagSet) -> Self {
        t.tags
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub arcs: Vec<DependencyArc>,
    /// Tag ids into the corpus [`TagSet`], one per token.
    pub labels: Option<Vec<usize>>,
}

impl Sentence {
    /// Builds a sentence and checks its structural invariants.
    pub fn new(tokens: Vec<Token>, arcs: Vec<DependencyArc>, labels: Option<Vec<usize>>) -> Result<Self> {
        let s = Self { tokens, arcs, labels };
        s.validate(None)?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token at 1-based position `n`.
    pub fn token(&self, n: usize) -> &Token {
        &self.tokens[n - 1]
    }

    pub fn validate(&self, tagset: Option<&TagSet>) -> Result<()> {
        let n = self.tokens.len();
        for (i, t) in self.tokens.iter().enumerate() {
            if t.index != i + 1 {
                return Err(Error::invalid(format!(
                    "token indices must be contiguous from 1, found {} at position {}",
                    t.index,
                    i + 1
                )));
            }
            if t.form.is_empty() || t.pos.is_empty() {
                return Err(Error::invalid(format!("token {} has an empty form or POS", t.index)));
            }
        }
        for a in &self.arcs {
            if a.dep_index == 0 || a.dep_index > n {
                return Err(Error::invalid(format!("arc dependent {} out of range 1..={n}", a.dep_index)));
            }
            if a.gov_index > n {
                return Err(Error::invalid(format!("arc governor {} out of range 0..={n}", a.gov_index)));
            }
            if a.gov_index == a.dep_index {
                return Err(Error::invalid(format!("arc on token {} points to itself", a.dep_index)));
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(Error::invalid(format!("{} labels for {n} tokens", labels.len())));
            }
            if let Some(ts) = tagset {
                if let Some(&bad) = labels.iter().find(|&&l| l >= ts.len()) {
                    return Err(Error::invalid(format!("label id {bad} outside the tag set")));
                }
            }
        }
        Ok(())
    }

    /// The arcs touching token `n`, seen from that token.
    ///
    /// Arcs whose other end is the artificial root produce no entry.
    pub fn dependency_view(&self, n: usize) -> Result<Vec<DependencyView>> {
        if n == 0 || n > self.len() {
            return Err(Error::invalid(format!("position {n} out of range 1..={}", self.len())));
        }
        let mut out = Vec::new();
        for a in &self.arcs {
            let (role, other) = if a.gov_index == n {
                (Role::Gov, a.dep_index)
            } else if a.dep_index == n {
                (Role::Dep, a.gov_index)
            } else {
                continue;
            };
            if other == 0 {
                continue;
            }
            let t = self.token(other);
            out.push(DependencyView {
                role,
                dep_type: a.dep_type.clone(),
                other_form: t.form.clone(),
                other_pos: t.pos.clone(),
            });
        }
        Ok(out)
    }
}

struct Row {
    line: usize,
    index: usize,
    form: String,
    pos: String,
    head: Option<usize>,
    deprel: String,
    label: Option<usize>,
}

/// Parses the tab-separated corpus format.
///
/// Labels are kept only when `expect_labels` is set and the sentence's
/// label column is filled in. A sentence with some but not all labels is an
/// error.
pub fn parse_corpus(text: &str, tagset: &TagSet, expect_labels: bool) -> Result<Vec<Sentence>> {
    let mut sentences = Vec::new();
    let mut rows: Vec<Row> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.starts_with('#') {
            continue;
        }
        if raw.trim().is_empty() {
            if !rows.is_empty() {
                sentences.push(finish_sentence(std::mem::take(&mut rows), expect_labels)?);
            }
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() != 6 {
            return Err(Error::parse(line, format!("expected 6 tab-separated columns, found {}", cols.len())));
        }
        let index: usize = cols[0]
            .parse()
            .map_err(|_| Error::parse(line, format!("bad token index {:?}", cols[0])))?;
        if index != rows.len() + 1 {
            return Err(Error::parse(
                line,
                format!("non-contiguous token index {index}, expected {}", rows.len() + 1),
            ));
        }
        if cols[1].is_empty() || cols[2].is_empty() {
            return Err(Error::parse(line, "empty FORM or POS"));
        }
        let head = match cols[3] {
            "_" => None,
            h => Some(h.parse::<usize>().map_err(|_| Error::parse(line, format!("bad head {h:?}")))?),
        };
        if head.is_some() == (cols[4] == "_") || cols[4].is_empty() {
            return Err(Error::parse(line, "HEAD and DEPREL must both be given or both be \"_\""));
        }
        if head == Some(index) {
            return Err(Error::parse(line, "token is its own head"));
        }
        let label = match cols[5] {
            "_" => None,
            l => Some(
                tagset
                    .index_of(l)
                    .ok_or_else(|| Error::parse(line, format!("unknown label {l:?}")))?,
            ),
        };
        rows.push(Row {
            line,
            index,
            form: cols[1].to_string(),
            pos: cols[2].to_string(),
            head,
            deprel: cols[4].to_string(),
            label,
        });
    }
    if !rows.is_empty() {
        sentences.push(finish_sentence(rows, expect_labels)?);
    }
    Ok(sentences)
}

fn finish_sentence(rows: Vec<Row>, expect_labels: bool) -> Result<Sentence> {
    let n = rows.len();
    let mut tokens = Vec::with_capacity(n);
    let mut arcs = Vec::new();
    for r in &rows {
        if let Some(h) = r.head {
            if h > n {
                return Err(Error::parse(r.line, format!("head {h} out of range for a {n}-token sentence")));
            }
            arcs.push(DependencyArc {
                dep_type: r.deprel.clone(),
                gov_index: h,
                dep_index: r.index,
            });
        }
    }
    let labeled = rows.iter().filter(|r| r.label.is_some()).count();
    let labels = if expect_labels && labeled > 0 {
        if labeled != n {
            let missing = rows.iter().find(|r| r.label.is_none()).map_or(0, |r| r.line);
            return Err(Error::parse(missing, "sentence is only partially labeled"));
        }
        Some(rows.iter().map(|r| r.label.unwrap()).collect())
    } else {
        None
    };
    for r in rows {
        tokens.push(Token {
            index: r.index,
            form: r.form,
            pos: r.pos,
        });
    }
    Ok(Sentence { tokens, arcs, labels })
}

/// Writes sentences in the corpus format with their own labels (`_` when
/// unlabeled).
pub fn write_corpus(sentences: &[Sentence], tagset: &TagSet) -> Result<String> {
    write_corpus_with(sentences, tagset, |s| s.labels.as_deref())
}

/// Writes sentences with `predictions` in the LABEL column.
pub fn write_predictions(sentences: &[Sentence], predictions: &[Vec<usize>], tagset: &TagSet) -> Result<String> {
    if sentences.len() != predictions.len() {
        return Err(Error::invalid("one prediction sequence is required per sentence"));
    }
    let mut it = predictions.iter();
    write_corpus_with(sentences, tagset, |_| it.next().map(Vec::as_slice))
}

fn write_corpus_with<'a>(
    sentences: &'a [Sentence],
    tagset: &TagSet,
    mut labels_of: impl FnMut(&'a Sentence) -> Option<&'a [usize]>,
) -> Result<String> {
    let mut out = String::new();
    for (si, s) in sentences.iter().enumerate() {
        let labels = labels_of(s);
        if let Some(l) = labels {
            if l.len() != s.len() {
                return Err(Error::invalid(format!("sentence {si}: label count mismatch")));
            }
        }
        let mut heads: Vec<Option<&DependencyArc>> = vec![None; s.len()];
        for a in &s.arcs {
            let slot = &mut heads[a.dep_index - 1];
            if slot.is_some() {
                return Err(Error::invalid(format!(
                    "sentence {si}: token {} has more than one head, which the corpus format cannot hold",
                    a.dep_index
                )));
            }
            *slot = Some(a);
        }
        for (i, t) in s.tokens.iter().enumerate() {
            let (head, rel) = match heads[i] {
                Some(a) => (a.gov_index.to_string(), a.dep_type.as_str()),
                None => ("_".to_string(), "_"),
            };
            let label = match labels {
                Some(l) => tagset.tags().get(l[i]).map(String::as_str).ok_or_else(|| {
                    Error::invalid(format!("sentence {si}: label id {} outside the tag set", l[i]))
                })?,
                None => "_",
            };
            writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}", t.index, t.form, t.pos, head, rel, label).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "# a comment\n\
1\tThis\tDT\t3\tdet\tO\n\
2\ttablet\tNN\t3\tcompound\tO\n\
3\tstand\tNN\t4\tnsubj\tO\n\
4\tworks\tVBZ\t0\troot\tO\n\
5\twith\tIN\t7\tcase\tO\n\
6\tmy\tPRP$\t7\tnmod:poss\tO\n\
7\tiPhone\tNN\t4\tnmod:with\tENT\n\
\n";

    fn parse(text: &str) -> Result<Vec<Sentence>> {
        parse_corpus(text, &TagSet::default(), true)
    }

    #[test]
    fn parses_block() {
        let c = parse(SAMPLE).unwrap();
        assert_eq!(c.len(), 1);
        let s = &c[0];
        assert_eq!(s.len(), 7);
        assert_eq!(s.token(7).form, "iPhone");
        assert_eq!(s.arcs.len(), 7);
        assert_eq!(s.labels.as_ref().unwrap()[6], 0);
    }

    #[test]
    fn empty_stream() {
        assert!(parse("").unwrap().is_empty());
        assert!(parse("\n\n# only comments\n").unwrap().is_empty());
    }

    #[test]
    fn head_out_of_range_names_line() {
        let text = "1\ta\tDT\t2\tdet\tO\n2\tb\tNN\t9\tnsubj\tO\n";
        match parse(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_rows() {
        let wrong_cols = "1\ta\tDT\t0\troot\n";
        assert!(matches!(parse(wrong_cols), Err(Error::Parse { line: 1, .. })));
        let gap = "1\ta\tDT\t0\troot\tO\n3\tb\tNN\t1\tdep\tO\n";
        assert!(matches!(parse(gap), Err(Error::Parse { line: 2, .. })));
        let bad_label = "1\ta\tDT\t0\troot\tX\n";
        assert!(matches!(parse(bad_label), Err(Error::Parse { line: 1, .. })));
        let partial = "1\ta\tDT\t0\troot\tO\n2\tb\tNN\t1\tdep\t_\n";
        assert!(matches!(parse(partial), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn labels_only_when_expected() {
        let c = parse_corpus(SAMPLE, &TagSet::default(), false).unwrap();
        assert!(c[0].labels.is_none());
        let unl = SAMPLE.replace("\tO\n", "\t_\n").replace("\tENT\n", "\t_\n");
        assert!(parse(&unl).unwrap()[0].labels.is_none());
    }

    #[test]
    fn root_yields_no_view() {
        let s = &parse(SAMPLE).unwrap()[0];
        let view = s.dependency_view(4).unwrap();
        // works governs stand and iPhone, its root arc is dropped
        assert_eq!(view.len(), 2);
        assert!(view.iter().all(|v| v.role == Role::Gov));
        assert!(s.dependency_view(0).is_err());
        assert!(s.dependency_view(8).is_err());
    }

    #[test]
    fn view_from_dependent() {
        let s = &parse(SAMPLE).unwrap()[0];
        let view = s.dependency_view(7).unwrap();
        assert!(view.contains(&DependencyView {
            role: Role::Dep,
            dep_type: "nmod:with".into(),
            other_form: "works".into(),
            other_pos: "VBZ".into(),
        }));
        // iPhone also governs "with" and "my"
        assert_eq!(view.len(), 3);
    }

    #[test]
    fn gov_and_dep_roles_on_one_token() {
        let s = &parse(SAMPLE).unwrap()[0];
        let view = s.dependency_view(3).unwrap();
        let roles: Vec<Role> = view.iter().map(|v| v.role).collect();
        assert_eq!(view.len(), 3);
        assert_eq!(roles.iter().filter(|&&r| r == Role::Gov).count(), 2);
        assert_eq!(roles.iter().filter(|&&r| r == Role::Dep).count(), 1);
    }

    #[test]
    fn round_trip() {
        let ts = TagSet::default();
        let c = parse(SAMPLE).unwrap();
        let text = write_corpus(&c, &ts).unwrap();
        assert_eq!(parse(&text).unwrap(), c);
    }

    #[test]
    fn headless_tokens_round_trip() {
        let text = "1\tHi\tUH\t_\t_\t_\n2\tthere\tRB\t1\tadvmod\t_\n\n";
        let ts = TagSet::default();
        let c = parse_corpus(text, &ts, false).unwrap();
        assert_eq!(c[0].arcs.len(), 1);
        assert_eq!(write_corpus(&c, &ts).unwrap(), text);
    }

    #[test]
    fn tagset_rules() {
        assert!(TagSet::new(["ENT"]).is_err());
        assert!(TagSet::new(["ENT", "ENT"]).is_err());
        assert!(TagSet::new(["B-X", "I-X", "O"]).is_ok());
        let ts = TagSet::default();
        assert_eq!(ts.outside(), Some(1));
        assert_eq!(ts.name(0), "ENT");
    }
}
