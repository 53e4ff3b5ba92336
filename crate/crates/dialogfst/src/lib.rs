//! Interpretable probabilistic finite-state models of dialog structure.
//!
//! `dialogfst` turns raw negotiation and persuasion dialogs into symbolic
//! event streams (dialog acts and strategies), learns deterministic
//! probabilistic automata over those streams by greedy entropy-minimizing
//! state splitting, and evaluates the learned models as next-action and
//! strategy predictors against simple n-gram baselines.
//!
//! The pipeline has five stages, one module each:
//!
//! - [`corpus`]: the data model, JSONL ingestion/emission, reproducible
//!   splits, statistics.
//! - [`annotator`]: one dialog act per turn plus a strategy set, from
//!   versioned rule files and gold annotations; symbol sequences and their
//!   canonical alphabets.
//! - [`fst`]: the state-splitting learner itself.
//! - [`inference`]: traversal, state embeddings, next-symbol prediction,
//!   sequence scoring, model files, and DOT export.
//! - [`eval`]: next-act accuracy, strategy-set accuracy and macro F1,
//!   expanded-ground-truth bigram accuracy, perplexity, and baselines.
//!
//! ```
//! use dialogfst::fst::{train_fst, Alphabet, TrainConfig};
//!
//! // A strictly alternating corpus is perfectly predictable with two states.
//! let alphabet = Alphabet::new(["a", "b"])?;
//! let corpus: Vec<Vec<usize>> = (0..4).map(|_| {
//!     (0..40).map(|i| i % 2).collect()
//! }).collect();
//! let config = TrainConfig::new(2).with_lambda(0.0).with_guards(1, 1e-9);
//! let model = train_fst(&corpus, alphabet, &config)?;
//! assert_eq!(model.num_states(), 2);
//! let heldout: Vec<usize> = (0..20).map(|i| i % 2).collect();
//! assert!((model.perplexity(&[heldout])? - 1.0).abs() < 1e-9);
//! # Ok::<(), dialogfst::fst::FstError>(())
//! ```

pub mod annotator;
pub mod corpus;
pub mod eval;
pub mod fst;
pub mod inference;

pub use annotator::{AnnotatedDialog, Annotator, DialogAct, GoldPolicy, RuleSet, Strategy};
pub use corpus::{Dialog, Role, Scenario, Schema, SplitSpec, Turn};
pub use fst::{train_fst, Alphabet, Fst, TrainConfig};
pub use inference::Predictor;
