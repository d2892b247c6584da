//! Deterministic synthetic corpora with template parses.
//!
//! Every entity sentence has the shape
//!
//! ```text
//! This <product> <verb> [<adverb>] with [my|the] <noun> .
//! ```
//!
//! with `<verb>` governing `<noun>` through `nmod:with`. Distractor sentences
//! share the shape but pair some other verb with an accessory noun, so the
//! surface window alone cannot tell the two apart.
//!
//! Labeled entity sentences draw their verb and device from a small frequent
//! pool or coin a one-off word, so that the frequent words are the only
//! evidence worth selecting as knowledge. Labeled distractors are all
//! one-offs: a sentence with no known evidence reads as a distractor.
//! Unlabeled text mixes in expansion-only verbs and novel devices, and the
//! held-out expansion subset of the test set pairs expansion verbs with novel
//! devices only.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{DependencyArc, Sentence, TagSet, Token};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub products: Vec<String>,
    pub entity_verbs: Vec<String>,
    /// Verbs that only occur in unlabeled and test text.
    pub expansion_verbs: Vec<String>,
    pub distractor_verbs: Vec<String>,
    pub known_entities: Vec<String>,
    /// Devices that only occur in unlabeled and test text.
    pub novel_entities: Vec<String>,
    pub distractor_nouns: Vec<String>,
    pub adjectives: Vec<String>,
    pub adverbs: Vec<String>,
    pub n_train: usize,
    pub n_unlabeled: usize,
    pub n_test: usize,
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            products: strings(&["stand", "case", "mount", "holder", "dock"]),
            entity_verbs: strings(&["works", "fits"]),
            expansion_verbs: strings(&["holds", "supports", "grips"]),
            distractor_verbs: strings(&["comes", "ships"]),
            known_entities: strings(&["iPhone", "iPad", "Galaxy", "Kindle"]),
            novel_entities: strings(&["Xperia", "Lumia", "Nook", "ThinkPad", "Zenfone", "Chromebook", "OnePlus", "Moto"]),
            distractor_nouns: strings(&["box", "manual", "warranty"]),
            adjectives: strings(&["great", "sturdy", "cheap", "solid"]),
            adverbs: strings(&["well", "perfectly", "nicely", "fine"]),
            n_train: 200,
            n_unlabeled: 2000,
            n_test: 200,
        }
    }
}

impl SynthConfig {
    fn pools(&self) -> [(&'static str, &Vec<String>); 9] {
        [
            ("products", &self.products),
            ("entity_verbs", &self.entity_verbs),
            ("expansion_verbs", &self.expansion_verbs),
            ("distractor_verbs", &self.distractor_verbs),
            ("known_entities", &self.known_entities),
            ("novel_entities", &self.novel_entities),
            ("distractor_nouns", &self.distractor_nouns),
            ("adjectives", &self.adjectives),
            ("adverbs", &self.adverbs),
        ]
    }

    fn validate(&self) -> Result<()> {
        for (name, pool) in self.pools() {
            if pool.is_empty() {
                return Err(Error::invalid(format!("synthetic config: {name} is empty")));
            }
        }
        let lower = |pools: &[&Vec<String>]| -> Vec<String> {
            pools.iter().flat_map(|p| p.iter().map(|s| s.to_lowercase())).collect()
        };
        let labeled_words = lower(&[
            &self.products,
            &self.entity_verbs,
            &self.distractor_verbs,
            &self.known_entities,
            &self.distractor_nouns,
            &self.adjectives,
            &self.adverbs,
        ]);
        for (name, pool) in [("expansion_verbs", &self.expansion_verbs), ("novel_entities", &self.novel_entities)] {
            if let Some(w) = lower(&[pool]).into_iter().find(|w| labeled_words.contains(w)) {
                return Err(Error::invalid(format!("synthetic config: {name} entry {w:?} also occurs in labeled pools")));
            }
        }
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::invalid("synthetic config: train and test sizes must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub tagset: TagSet,
    pub train: Vec<Sentence>,
    /// Unlabeled; `labels` is `None`.
    pub unlabeled: Vec<Sentence>,
    pub test: Vec<Sentence>,
    /// Indices into `test` of sentences whose entity is reachable only
    /// through an expansion verb.
    pub test_expansion: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verb {
    Entity,
    TailEntity,
    Expansion,
    Distractor,
    TailDistractor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Noun {
    Known,
    TailEntity,
    Novel,
    Distractor,
    TailDistractor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    With(Verb, Noun),
    Filler,
}

impl Noun {
    fn is_entity(self) -> bool {
        matches!(self, Noun::Known | Noun::TailEntity | Noun::Novel)
    }
}

struct Generator<'a> {
    config: &'a SynthConfig,
    rng: ChaCha8Rng,
}

impl Generator<'_> {
    fn pick<'b>(&mut self, pool: &'b [String]) -> &'b str {
        pool.choose(&mut self.rng).expect("validated non-empty")
    }

    fn sentence(&mut self, kind: Kind, tagset: &TagSet) -> Sentence {
        let ent = tagset.index_of("ENT").unwrap_or(0);
        let o = tagset.outside().unwrap_or(1);
        let c = self.config;
        let (verb, noun) = match kind {
            Kind::Filler => {
                let product = self.pick(&c.products).to_string();
                let adj = self.pick(&c.adjectives).to_string();
                let rows = [
                    ("The", "DT", 2, "det"),
                    (product.as_str(), "NN", 4, "nsubj"),
                    ("is", "VBZ", 4, "cop"),
                    (adj.as_str(), "JJ", 0, "root"),
                    (".", ".", 4, "punct"),
                ];
                return build(&rows, vec![o; rows.len()]);
            }
            Kind::With(v, n) => (v, n),
        };
        let verb = match verb {
            Verb::Entity => self.pick(&c.entity_verbs).to_string(),
            Verb::Expansion => self.pick(&c.expansion_verbs).to_string(),
            Verb::Distractor => self.pick(&c.distractor_verbs).to_string(),
            Verb::TailEntity | Verb::TailDistractor => self.coin("s"),
        };
        let noun_form = match noun {
            Noun::Known => self.pick(&c.known_entities).to_string(),
            Noun::Novel => self.pick(&c.novel_entities).to_string(),
            Noun::Distractor => self.pick(&c.distractor_nouns).to_string(),
            Noun::TailEntity => {
                let w = self.coin("o");
                let mut chars = w.chars();
                let first = chars.next().expect("coined words are non-empty");
                first.to_uppercase().chain(chars).collect()
            }
            Noun::TailDistractor => self.coin("et"),
        };
        let product = self.pick(&c.products).to_string();
        let adverb = self.rng.gen_bool(0.5).then(|| self.pick(&c.adverbs).to_string());
        let det = match self.rng.gen_range(0..4) {
            0 | 1 => Some(("my", "PRP$", "nmod:poss")),
            2 => Some(("the", "DT", "det")),
            _ => None,
        };

        // verb at 3; the noun position depends on the optional words
        let prep = 4 + usize::from(adverb.is_some());
        let noun_at = prep + 1 + usize::from(det.is_some());
        let mut rows: Vec<(&str, &str, usize, &str)> = vec![
            ("This", "DT", 2, "det"),
            (product.as_str(), "NN", 3, "nsubj"),
            (verb.as_str(), "VBZ", 0, "root"),
        ];
        if let Some(adv) = &adverb {
            rows.push((adv.as_str(), "RB", 3, "advmod"));
        }
        rows.push(("with", "IN", noun_at, "case"));
        if let Some((d, pos, rel)) = det {
            rows.push((d, pos, noun_at, rel));
        }
        rows.push((noun_form.as_str(), "NN", 3, "nmod:with"));
        rows.push((".", ".", 3, "punct"));
        let mut labels = vec![o; rows.len()];
        if noun.is_entity() {
            labels[noun_at - 1] = ent;
        }
        build(&rows, labels)
    }

    /// A made-up word, practically unique within a corpus.
    fn coin(&mut self, suffix: &str) -> String {
        const SYLLABLES: [&str; 16] =
            ["ba", "ko", "ri", "tu", "me", "za", "lo", "vi", "pe", "ga", "nu", "shi", "dro", "fle", "qua", "zen"];
        let mut w: String = (0..3).map(|_| *SYLLABLES.choose(&mut self.rng).expect("non-empty")).collect();
        w.push_str(suffix);
        w
    }

    fn draw(&mut self, weights: &[(Kind, u32)]) -> Kind {
        let total: u32 = weights.iter().map(|(_, w)| w).sum();
        let mut r = self.rng.gen_range(0..total);
        for &(k, w) in weights {
            if r < w {
                return k;
            }
            r -= w;
        }
        unreachable!()
    }
}

fn build(rows: &[(&str, &str, usize, &str)], labels: Vec<usize>) -> Sentence {
    let tokens = rows
        .iter()
        .enumerate()
        .map(|(i, (form, pos, _, _))| Token {
            index: i + 1,
            form: form.to_string(),
            pos: pos.to_string(),
        })
        .collect();
    let arcs = rows
        .iter()
        .enumerate()
        .map(|(i, (_, _, head, rel))| DependencyArc {
            dep_type: rel.to_string(),
            gov_index: *head,
            dep_index: i + 1,
        })
        .collect();
    Sentence {
        tokens,
        arcs,
        labels: Some(labels),
    }
}

use Noun as N;
use Verb as V;

const fn with(v: Verb, n: Noun) -> Kind {
    Kind::With(v, n)
}

const TRAIN_MIX: [(Kind, u32); 6] = [
    (with(V::Entity, N::Known), 14),
    (with(V::Entity, N::TailEntity), 14),
    (with(V::TailEntity, N::Known), 18),
    (with(V::TailEntity, N::TailEntity), 6),
    (with(V::TailDistractor, N::TailDistractor), 40),
    (Kind::Filler, 8),
];

const UNLABELED_MIX: [(Kind, u32); 8] = [
    (with(V::Entity, N::Known), 10),
    (with(V::Entity, N::Novel), 15),
    (with(V::Expansion, N::Known), 15),
    (with(V::Expansion, N::Novel), 15),
    (with(V::Distractor, N::Distractor), 15),
    (with(V::Distractor, N::TailDistractor), 10),
    (with(V::TailDistractor, N::Distractor), 10),
    (Kind::Filler, 10),
];

const EXPANSION_TARGET: Kind = with(V::Expansion, N::Novel);

const TEST_MIX: [(Kind, u32); 5] = [
    (with(V::Entity, N::Known), 25),
    (EXPANSION_TARGET, 35),
    (with(V::Distractor, N::Distractor), 20),
    (with(V::TailDistractor, N::Distractor), 10),
    (Kind::Filler, 10),
];

/// Generates train, unlabeled and test corpora; identical for equal seeds.
pub fn generate_synthetic(seed: u64, config: &SynthConfig) -> Result<SyntheticCorpus> {
    config.validate()?;
    let tagset = TagSet::default();
    let mut g = Generator {
        config,
        rng: ChaCha8Rng::seed_from_u64(seed),
    };

    let train = (0..config.n_train)
        .map(|_| {
            let k = g.draw(&TRAIN_MIX);
            g.sentence(k, &tagset)
        })
        .collect();
    let unlabeled = (0..config.n_unlabeled)
        .map(|_| {
            let k = g.draw(&UNLABELED_MIX);
            let mut s = g.sentence(k, &tagset);
            s.labels = None;
            s
        })
        .collect();
    let mut test = Vec::with_capacity(config.n_test);
    let mut test_expansion = Vec::new();
    for i in 0..config.n_test {
        let k = g.draw(&TEST_MIX);
        if k == EXPANSION_TARGET {
            test_expansion.push(i);
        }
        test.push(g.sentence(k, &tagset));
    }
    Ok(SyntheticCorpus {
        tagset,
        train,
        unlabeled,
        test,
        test_expansion,
    })
}
