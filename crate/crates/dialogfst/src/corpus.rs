//! Dialog corpora: the canonical data model, JSONL ingestion and emission,
//! reproducible splits, and summary statistics.
//!
//! A corpus is a list of [`Dialog`]s. Each dialog pairs a [`Scenario`] (what
//! is being negotiated or discussed) with an ordered list of [`Turn`]s. Two
//! schemas are supported: `negotiation` (buyer/seller) and `persuasion`
//! (persuader/persuadee). The on-disk format is JSON Lines, one dialog object
//! per line; see [`load_corpus`] and [`write_corpus`].

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while loading, validating, or splitting a corpus.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed JSONL at line {line}: {source}")]
    MalformedLine {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("dialog {dialog_id}: unknown role {role:?} (schema {schema} allows {allowed})")]
    UnknownRole {
        dialog_id: String,
        role: String,
        schema: Schema,
        allowed: String,
    },
    #[error("dialog {dialog_id}: {reason}")]
    InvalidDialog { dialog_id: String, reason: String },
    #[error("duplicate dialog_id {0:?}")]
    DuplicateDialogId(String),
    #[error("invalid split spec: {0}")]
    InvalidSplitSpec(String),
}

/// Which role inventory a corpus uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schema {
    Negotiation,
    Persuasion,
}

impl Schema {
    /// The two roles of this schema, in canonical order.
    pub fn roles(self) -> [Role; 2] {
        match self {
            Schema::Negotiation => [Role::Buyer, Role::Seller],
            Schema::Persuasion => [Role::Persuader, Role::Persuadee],
        }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schema::Negotiation => write!(f, "negotiation"),
            Schema::Persuasion => write!(f, "persuasion"),
        }
    }
}

impl std::str::FromStr for Schema {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "negotiation" => Ok(Schema::Negotiation),
            "persuasion" => Ok(Schema::Persuasion),
            other => Err(format!("unknown schema {other:?} (expected negotiation or persuasion)")),
        }
    }
}

/// Speaker role of a turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Buyer,
    Seller,
    Persuader,
    Persuadee,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Buyer => "buyer",
            Role::Seller => "seller",
            Role::Persuader => "persuader",
            Role::Persuadee => "persuadee",
        }
    }

    /// The schema this role belongs to.
    pub fn schema(self) -> Schema {
        match self {
            Role::Buyer | Role::Seller => Schema::Negotiation,
            Role::Persuader | Role::Persuadee => Schema::Persuasion,
        }
    }

    fn parse(s: &str, schema: Schema) -> Option<Role> {
        let role = match s {
            "buyer" => Role::Buyer,
            "seller" => Role::Seller,
            "persuader" => Role::Persuader,
            "persuadee" => Role::Persuadee,
            _ => return None,
        };
        if role.schema() == schema {
            Some(role)
        } else {
            None
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The negotiation (or persuasion) context a dialog takes place in.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub title: String,
    pub description: String,
    /// Asking price; zero for corpora without one (e.g. persuasion).
    pub listing_price: f64,
    /// Private target the buyer aims for, at or below the listing price.
    pub buyer_target_price: Option<f64>,
}

impl Scenario {
    fn validate(&self, dialog_id: &str) -> Result<(), CorpusError> {
        if !(self.listing_price >= 0.0) {
            return Err(CorpusError::InvalidDialog {
                dialog_id: dialog_id.to_string(),
                reason: format!("listing_price must be non-negative, got {}", self.listing_price),
            });
        }
        if let Some(target) = self.buyer_target_price {
            if !(target >= 0.0) {
                return Err(CorpusError::InvalidDialog {
                    dialog_id: dialog_id.to_string(),
                    reason: format!("buyer_target_price must be non-negative, got {target}"),
                });
            }
            if target > self.listing_price {
                return Err(CorpusError::InvalidDialog {
                    dialog_id: dialog_id.to_string(),
                    reason: format!(
                        "buyer_target_price {target} exceeds listing_price {}",
                        self.listing_price
                    ),
                });
            }
            if target == self.listing_price {
                log::warn!("dialog {dialog_id}: buyer_target_price equals listing_price ({target})");
            }
        }
        Ok(())
    }
}

/// One utterance, optionally carrying gold annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub role: Role,
    pub text: String,
    /// Gold dialog-act labels, if the corpus ships them.
    pub gold_acts: Option<Vec<String>>,
    /// Gold strategy labels, if the corpus ships them.
    pub gold_strategies: Option<Vec<String>>,
}

impl Turn {
    pub fn new(role: Role, text: impl Into<String>) -> Self {
        Turn { role, text: text.into(), gold_acts: None, gold_strategies: None }
    }
}

/// A complete conversation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dialog {
    pub dialog_id: String,
    pub scenario: Scenario,
    pub turns: Vec<Turn>,
}

/// Train/validation/test fractions plus the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Result<Self, CorpusError> {
        let spec = SplitSpec { train_fraction: train, val_fraction: val, test_fraction: test, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        for (name, f) in [
            ("train_fraction", self.train_fraction),
            ("val_fraction", self.val_fraction),
            ("test_fraction", self.test_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(CorpusError::InvalidSplitSpec(format!("{name} {f} outside [0, 1]")));
            }
        }
        let sum = self.train_fraction + self.val_fraction + self.test_fraction;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::InvalidSplitSpec(format!("fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

/// Summary statistics over a corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub num_dialogs: usize,
    pub mean_turns: f64,
    /// Distinct whitespace-delimited, lowercased tokens over all turn texts.
    pub vocab_size: usize,
}

// Wire structs: field names and (alphabetical) order define the JSONL format.
// Serializing in declaration order yields sorted keys, so output is byte-stable.

#[derive(Serialize, Deserialize)]
struct WireScenario {
    buyer_target_price: Option<f64>,
    description: String,
    listing_price: f64,
    title: String,
}

#[derive(Serialize, Deserialize)]
struct WireTurn {
    acts: Option<Vec<String>>,
    role: String,
    strategies: Option<Vec<String>>,
    text: String,
}

#[derive(Serialize, Deserialize)]
struct WireDialog {
    dialog_id: String,
    scenario: WireScenario,
    turns: Vec<WireTurn>,
}

/// Parse a JSONL stream into dialogs, validating against `schema`.
///
/// Input order is preserved. A malformed line fails with its 1-based line
/// number; an unknown role fails with the offending dialog's id.
pub fn load_corpus(reader: impl BufRead, schema: Schema) -> Result<Vec<Dialog>, CorpusError> {
    let mut dialogs = Vec::new();
    let mut seen_ids = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: WireDialog = serde_json::from_str(&line)
            .map_err(|source| CorpusError::MalformedLine { line: idx + 1, source })?;
        let dialog = dialog_from_wire(wire, schema)?;
        if !seen_ids.insert(dialog.dialog_id.clone()) {
            return Err(CorpusError::DuplicateDialogId(dialog.dialog_id));
        }
        dialogs.push(dialog);
    }
    Ok(dialogs)
}

fn dialog_from_wire(wire: WireDialog, schema: Schema) -> Result<Dialog, CorpusError> {
    let dialog_id = wire.dialog_id;
    if wire.turns.is_empty() {
        return Err(CorpusError::InvalidDialog {
            dialog_id,
            reason: "dialog has no turns".to_string(),
        });
    }
    let scenario = Scenario {
        title: wire.scenario.title,
        description: wire.scenario.description,
        listing_price: wire.scenario.listing_price,
        buyer_target_price: wire.scenario.buyer_target_price,
    };
    scenario.validate(&dialog_id)?;
    let mut turns = Vec::with_capacity(wire.turns.len());
    for turn in wire.turns {
        let role = Role::parse(&turn.role, schema).ok_or_else(|| CorpusError::UnknownRole {
            dialog_id: dialog_id.clone(),
            role: turn.role.clone(),
            schema,
            allowed: schema.roles().map(|r| r.as_str()).join("/"),
        })?;
        for (field, labels) in [("acts", &turn.acts), ("strategies", &turn.strategies)] {
            if let Some(labels) = labels {
                let mut seen = BTreeSet::new();
                for label in labels {
                    if !seen.insert(label.as_str()) {
                        return Err(CorpusError::InvalidDialog {
                            dialog_id: dialog_id.clone(),
                            reason: format!("duplicate {field} label {label:?}"),
                        });
                    }
                }
            }
        }
        turns.push(Turn {
            role,
            text: turn.text,
            gold_acts: turn.acts,
            gold_strategies: turn.strategies,
        });
    }
    Ok(Dialog { dialog_id, scenario, turns })
}

/// Emit dialogs as JSONL, byte-stably: sorted keys, UTF-8, `\n` terminators.
pub fn write_corpus(dialogs: &[Dialog], mut writer: impl Write) -> Result<(), CorpusError> {
    for dialog in dialogs {
        let wire = WireDialog {
            dialog_id: dialog.dialog_id.clone(),
            scenario: WireScenario {
                buyer_target_price: dialog.scenario.buyer_target_price,
                description: dialog.scenario.description.clone(),
                listing_price: dialog.scenario.listing_price,
                title: dialog.scenario.title.clone(),
            },
            turns: dialog
                .turns
                .iter()
                .map(|t| WireTurn {
                    acts: t.gold_acts.clone(),
                    role: t.role.as_str().to_string(),
                    strategies: t.gold_strategies.clone(),
                    text: t.text.clone(),
                })
                .collect(),
        };
        let json = serde_json::to_string(&wire).expect("wire dialog serializes");
        writer.write_all(json.as_bytes())?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Deterministically partition dialogs into (train, val, test).
///
/// Dialogs are shuffled with a seeded generator, then cut at
/// `floor(n * fraction)` for val and test, with the remainder going to train.
pub fn split_corpus(
    dialogs: Vec<Dialog>,
    spec: &SplitSpec,
) -> Result<(Vec<Dialog>, Vec<Dialog>, Vec<Dialog>), CorpusError> {
    spec.validate()?;
    let n = dialogs.len();
    let n_val = (n as f64 * spec.val_fraction).floor() as usize;
    let n_test = (n as f64 * spec.test_fraction).floor() as usize;
    let n_train = n - n_val - n_test;

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);

    let mut slots: Vec<Option<Dialog>> = dialogs.into_iter().map(Some).collect();
    let mut take = |ids: &[usize]| -> Vec<Dialog> {
        ids.iter().map(|&i| slots[i].take().expect("each index taken once")).collect()
    };
    let train = take(&order[..n_train]);
    let val = take(&order[n_train..n_train + n_val]);
    let test = take(&order[n_train + n_val..]);
    Ok((train, val, test))
}

/// Count dialogs, mean turns per dialog, and vocabulary size.
pub fn corpus_stats(dialogs: &[Dialog]) -> CorpusStats {
    if dialogs.is_empty() {
        return CorpusStats { num_dialogs: 0, mean_turns: 0.0, vocab_size: 0 };
    }
    let total_turns: usize = dialogs.iter().map(|d| d.turns.len()).sum();
    let mut vocab = BTreeSet::new();
    for dialog in dialogs {
        for turn in &dialog.turns {
            for token in turn.text.split_whitespace() {
                vocab.insert(token.to_lowercase());
            }
        }
    }
    CorpusStats {
        num_dialogs: dialogs.len(),
        mean_turns: total_turns as f64 / dialogs.len() as f64,
        vocab_size: vocab.len(),
    }
}
