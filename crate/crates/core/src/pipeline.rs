//! Stage helpers shared by the experiment harness and the command line.

use crate::corpus::{Sentence, TagSet};
use crate::crf::{viterbi, LabeledSeq, Model, TrainConfig, Trainer};
use crate::error::{Error, Result};
use crate::features::{build_vocabulary, vectorize, FeatureConfig, FeatureVocabulary, Preset};
use crate::knowledge::{build_initial_kb, select_knowledge_types, KnowledgeBase, Selection};

pub fn labeled_sequences(
    corpus: &[Sentence],
    vocab: &FeatureVocabulary,
    features: &FeatureConfig,
    kb: Option<&KnowledgeBase>,
) -> Result<Vec<LabeledSeq>> {
    corpus
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let y = s
                .labels
                .clone()
                .ok_or_else(|| Error::invalid(format!("training sentence {i} is unlabeled")))?;
            Ok(LabeledSeq {
                x: vectorize(s, vocab, kb, features)?,
                y,
            })
        })
        .collect()
}

/// Builds the vocabulary for `features` over `corpus` and trains a model.
/// The knowledge preset requires `kb`.
pub fn train_model(
    tagset: &TagSet,
    corpus: &[Sentence],
    features: FeatureConfig,
    kb: Option<&KnowledgeBase>,
    config: &TrainConfig,
) -> Result<Model> {
    if corpus.is_empty() {
        return Err(Error::invalid("cannot train on an empty corpus"));
    }
    for (i, s) in corpus.iter().enumerate() {
        s.validate(Some(tagset))
            .map_err(|e| Error::invalid(format!("training sentence {i}: {e}")))?;
    }
    let kb = match features.preset {
        Preset::Knowledge => Some(kb.ok_or_else(|| Error::invalid("the knowledge preset needs a knowledge base"))?),
        _ => None,
    };
    if let Some(kb) = kb {
        if let Some(t) = kb.tags().find(|t| tagset.index_of(t).is_none()) {
            return Err(Error::invalid(format!("knowledge base tag {t:?} is not in the tag set")));
        }
    }
    let vocab = build_vocabulary(corpus, &features, kb)?;
    let data = labeled_sequences(corpus, &vocab, &features, kb)?;
    Trainer::new(*config).train(tagset.clone(), vocab, features, &data)
}

/// Viterbi tags for every sentence.
pub fn predict(model: &Model, kb: Option<&KnowledgeBase>, sentences: &[Sentence]) -> Result<Vec<Vec<usize>>> {
    sentences
        .iter()
        .map(|s| {
            let x = vectorize(s, &model.vocabulary, kb, &model.features)?;
            viterbi(model, &x)
        })
        .collect()
}

/// Runs knowledge selection and builds the initial knowledge base.
pub fn select_initial_kb(pretrained: &Model, delta: f64) -> Result<(Selection, KnowledgeBase)> {
    let selection = select_knowledge_types(pretrained, delta)?;
    let kb = build_initial_kb(&selection);
    Ok((selection, kb))
}
