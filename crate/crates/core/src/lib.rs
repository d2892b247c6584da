//! # kcrf
//!
//! Knowledge-based conditional random fields for complementary entity
//! recognition.
//!
//! The pipeline has four stages:
//!
//! 1. Train a linear-chain CRF on primitive features (current word plus
//!    simplified dependency features), see [`crf`].
//! 2. Select low-entropy primitive features from the trained weights and turn
//!    them into an initial per-tag knowledge base, see [`knowledge`].
//! 3. Retrain with knowledge-based indicator features, which fire when a
//!    token's `(type, value)` pair is present in the knowledge base.
//! 4. Grow the knowledge base over unlabeled sentences from confident
//!    marginal predictions, without touching the model, see [`expansion`].
//!
//! [`eval`] holds mention-level scoring, the four-system experiment harness
//! and a synthetic corpus generator.

pub mod corpus;
pub mod crf;
pub mod error;
pub mod eval;
pub mod expansion;
pub mod features;
pub mod knowledge;
pub mod math;
pub mod pipeline;

pub use corpus::{DependencyArc, Role, Sentence, TagSet, Token};
pub use crf::{MarginalTable, Model, TrainConfig, Trainer};
pub use error::{Error, Result};
pub use expansion::{ExpansionConfig, ExpansionTrace};
pub use features::{FeatureConfig, FeatureVectorSeq, FeatureVocabulary, KnowledgeType, Preset};
pub use knowledge::{KnowledgeBase, Selection, SelectionReport};
