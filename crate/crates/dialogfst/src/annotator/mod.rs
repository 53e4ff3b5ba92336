//! Turn-level annotation: dialog acts, negotiation/persuasion strategies,
//! and the symbol sequences that train the state-split models.
//!
//! Every turn receives exactly one [`DialogAct`] from a fixed first-match
//! cascade, plus a set of strategy labels. Strategy rows fall into two
//! detector families: rule-detected rows fire from lexicons in a [`RuleSet`]
//! (or from price bookkeeping), while classifier-detected rows are ingested
//! from a corpus's gold annotations when [`GoldPolicy::PreferGold`] is in
//! effect.
//!
//! Annotated dialogs are flattened into role-prefixed symbol streams by
//! [`act_sequence`] and [`strategy_sequence`]; the matching canonical
//! alphabets come from [`act_alphabet`] and [`strategy_alphabet`].

mod price;
mod rules;

pub use price::extract_prices;
pub use rules::{PatternKind, RuleSet, RulesError, RULES_FORMAT_VERSION};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dialog, Role, Scenario, Schema, Turn};
use crate::fst::Alphabet;

/// Marker emitted for a turn with no active strategies.
pub const NONE_MARKER: &str = "none";
/// End-of-turn marker closing each turn's strategy run.
pub const EOT_MARKER: &str = "eot";

macro_rules! fmt_as_str {
    () => {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str(self.as_str())
        }
    };
}

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("dialog {dialog_id}: turn {turn} has no gold dialog act")]
    MissingAct { dialog_id: String, turn: usize },
    #[error("dialog {dialog_id}: turn {turn} has {count} gold dialog acts, expected exactly one")]
    MultipleActs { dialog_id: String, turn: usize, count: usize },
    #[error("dialog {dialog_id}: unknown dialog act label {label:?}")]
    UnknownAct { dialog_id: String, label: String },
    #[error("dialog {dialog_id}: turn {turn} has no gold strategies")]
    MissingStrategies { dialog_id: String, turn: usize },
    #[error("dialog {dialog_id}: unknown strategy label {label:?} for schema {schema}")]
    UnknownStrategy { dialog_id: String, label: String, schema: Schema },
}

/// The seven dialog acts, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DialogAct {
    Intro,
    InitPrice,
    Insist,
    Agree,
    Disagree,
    Inform,
    Inquire,
}

impl DialogAct {
    pub const ALL: [DialogAct; 7] = [
        DialogAct::Intro,
        DialogAct::InitPrice,
        DialogAct::Insist,
        DialogAct::Agree,
        DialogAct::Disagree,
        DialogAct::Inform,
        DialogAct::Inquire,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DialogAct::Intro => "intro",
            DialogAct::InitPrice => "init-price",
            DialogAct::Insist => "insist",
            DialogAct::Agree => "agree",
            DialogAct::Disagree => "disagree",
            DialogAct::Inform => "inform",
            DialogAct::Inquire => "inquire",
        }
    }

    pub fn from_label(label: &str) -> Option<DialogAct> {
        DialogAct::ALL.into_iter().find(|a| a.as_str() == label)
    }
}

impl fmt::Display for DialogAct {
    fmt_as_str!();
}

/// Whether a strategy row is fired by rules or read from gold annotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detector {
    Rule,
    Classifier,
}

/// The fifteen negotiation strategies, in canonical table-row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NegotiationStrategy {
    DescribeProduct,
    RephraseProduct,
    EmbellishProduct,
    AddressConcerns,
    CommunicateInterests,
    ProposePrice,
    DoNotProposeFirst,
    NegotiateSideOffers,
    Hedge,
    CommunicatePolitely,
    BuildRapport,
    TalkInformally,
    ShowDominance,
    NegativeSentiment,
    CertaintyWords,
}

impl NegotiationStrategy {
    pub const ALL: [NegotiationStrategy; 15] = [
        NegotiationStrategy::DescribeProduct,
        NegotiationStrategy::RephraseProduct,
        NegotiationStrategy::EmbellishProduct,
        NegotiationStrategy::AddressConcerns,
        NegotiationStrategy::CommunicateInterests,
        NegotiationStrategy::ProposePrice,
        NegotiationStrategy::DoNotProposeFirst,
        NegotiationStrategy::NegotiateSideOffers,
        NegotiationStrategy::Hedge,
        NegotiationStrategy::CommunicatePolitely,
        NegotiationStrategy::BuildRapport,
        NegotiationStrategy::TalkInformally,
        NegotiationStrategy::ShowDominance,
        NegotiationStrategy::NegativeSentiment,
        NegotiationStrategy::CertaintyWords,
    ];

    /// Rows detected by lexicon patterns, i.e. the rule rows minus the two
    /// price-bookkeeping rows handled structurally.
    const LEXICON_ROWS: [NegotiationStrategy; 8] = [
        NegotiationStrategy::NegotiateSideOffers,
        NegotiationStrategy::Hedge,
        NegotiationStrategy::CommunicatePolitely,
        NegotiationStrategy::BuildRapport,
        NegotiationStrategy::TalkInformally,
        NegotiationStrategy::ShowDominance,
        NegotiationStrategy::NegativeSentiment,
        NegotiationStrategy::CertaintyWords,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NegotiationStrategy::DescribeProduct => "describe_product",
            NegotiationStrategy::RephraseProduct => "rephrase_product",
            NegotiationStrategy::EmbellishProduct => "embellish_product",
            NegotiationStrategy::AddressConcerns => "address_concerns",
            NegotiationStrategy::CommunicateInterests => "communicate_interests",
            NegotiationStrategy::ProposePrice => "propose_price",
            NegotiationStrategy::DoNotProposeFirst => "do_not_propose_first",
            NegotiationStrategy::NegotiateSideOffers => "negotiate_side_offers",
            NegotiationStrategy::Hedge => "hedge",
            NegotiationStrategy::CommunicatePolitely => "communicate_politely",
            NegotiationStrategy::BuildRapport => "build_rapport",
            NegotiationStrategy::TalkInformally => "talk_informally",
            NegotiationStrategy::ShowDominance => "show_dominance",
            NegotiationStrategy::NegativeSentiment => "negative_sentiment",
            NegotiationStrategy::CertaintyWords => "certainty_words",
        }
    }

    pub fn from_label(label: &str) -> Option<NegotiationStrategy> {
        NegotiationStrategy::ALL.into_iter().find(|s| s.as_str() == label)
    }

    pub fn detector(self) -> Detector {
        match self {
            NegotiationStrategy::DescribeProduct
            | NegotiationStrategy::RephraseProduct
            | NegotiationStrategy::EmbellishProduct
            | NegotiationStrategy::AddressConcerns
            | NegotiationStrategy::CommunicateInterests => Detector::Classifier,
            _ => Detector::Rule,
        }
    }
}

impl fmt::Display for NegotiationStrategy {
    fmt_as_str!();
}

/// The ten persuasion strategies, in canonical table-row order. All of them
/// are classifier-detected, so their labels only ever enter via gold
/// annotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PersuasionStrategy {
    LogicalAppeal,
    EmotionAppeal,
    CredibilityAppeal,
    FootInTheDoor,
    SelfModeling,
    PersonalStory,
    DonationInformation,
    SourceRelatedInquiry,
    TaskRelatedInquiry,
    PersonalRelatedInquiry,
}

impl PersuasionStrategy {
    pub const ALL: [PersuasionStrategy; 10] = [
        PersuasionStrategy::LogicalAppeal,
        PersuasionStrategy::EmotionAppeal,
        PersuasionStrategy::CredibilityAppeal,
        PersuasionStrategy::FootInTheDoor,
        PersuasionStrategy::SelfModeling,
        PersuasionStrategy::PersonalStory,
        PersuasionStrategy::DonationInformation,
        PersuasionStrategy::SourceRelatedInquiry,
        PersuasionStrategy::TaskRelatedInquiry,
        PersuasionStrategy::PersonalRelatedInquiry,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PersuasionStrategy::LogicalAppeal => "logical_appeal",
            PersuasionStrategy::EmotionAppeal => "emotion_appeal",
            PersuasionStrategy::CredibilityAppeal => "credibility_appeal",
            PersuasionStrategy::FootInTheDoor => "foot_in_the_door",
            PersuasionStrategy::SelfModeling => "self_modeling",
            PersuasionStrategy::PersonalStory => "personal_story",
            PersuasionStrategy::DonationInformation => "donation_information",
            PersuasionStrategy::SourceRelatedInquiry => "source_related_inquiry",
            PersuasionStrategy::TaskRelatedInquiry => "task_related_inquiry",
            PersuasionStrategy::PersonalRelatedInquiry => "personal_related_inquiry",
        }
    }

    pub fn from_label(label: &str) -> Option<PersuasionStrategy> {
        PersuasionStrategy::ALL.into_iter().find(|s| s.as_str() == label)
    }

    pub fn detector(self) -> Detector {
        Detector::Classifier
    }
}

impl fmt::Display for PersuasionStrategy {
    fmt_as_str!();
}

/// A strategy label from either inventory. Ordering follows the canonical
/// table-row order, which fixes the symbol order within a turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    Negotiation(NegotiationStrategy),
    Persuasion(PersuasionStrategy),
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Negotiation(s) => s.as_str(),
            Strategy::Persuasion(s) => s.as_str(),
        }
    }

    pub fn from_label(label: &str, schema: Schema) -> Option<Strategy> {
        match schema {
            Schema::Negotiation => NegotiationStrategy::from_label(label).map(Strategy::Negotiation),
            Schema::Persuasion => PersuasionStrategy::from_label(label).map(Strategy::Persuasion),
        }
    }

    pub fn detector(self) -> Detector {
        match self {
            Strategy::Negotiation(s) => s.detector(),
            Strategy::Persuasion(s) => s.detector(),
        }
    }

    /// The full inventory for a schema, in canonical row order.
    pub fn inventory(schema: Schema) -> Vec<Strategy> {
        match schema {
            Schema::Negotiation => {
                NegotiationStrategy::ALL.into_iter().map(Strategy::Negotiation).collect()
            }
            Schema::Persuasion => {
                PersuasionStrategy::ALL.into_iter().map(Strategy::Persuasion).collect()
            }
        }
    }
}

impl fmt::Display for Strategy {
    fmt_as_str!();
}

/// Whether classifier-detected strategy rows are read from gold annotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldPolicy {
    /// Classifier rows come from each turn's gold strategies; a turn without
    /// gold annotations gets a recorded warning.
    PreferGold,
    /// Classifier rows are omitted entirely.
    RulesOnly,
}

impl std::str::FromStr for GoldPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "prefer-gold" | "prefer_gold" => Ok(GoldPolicy::PreferGold),
            "rules-only" | "rules_only" => Ok(GoldPolicy::RulesOnly),
            other => Err(format!("unknown gold policy {other:?}")),
        }
    }
}

/// A turn plus everything the annotator derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedTurn {
    pub turn: Turn,
    pub act: DialogAct,
    pub strategies: BTreeSet<Strategy>,
    pub prices_mentioned: Vec<f64>,
}

impl AnnotatedTurn {
    pub fn role(&self) -> Role {
        self.turn.role
    }

    pub fn text(&self) -> &str {
        &self.turn.text
    }
}

/// A fully annotated dialog, plus any warnings raised while annotating.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedDialog {
    pub dialog_id: String,
    pub schema: Schema,
    pub scenario: Scenario,
    pub turns: Vec<AnnotatedTurn>,
    pub warnings: Vec<String>,
}

impl AnnotatedDialog {
    /// Convert back into a [`Dialog`] with the gold fields populated, ready
    /// for the byte-stable JSONL writer.
    pub fn to_dialog(&self) -> Dialog {
        Dialog {
            dialog_id: self.dialog_id.clone(),
            scenario: self.scenario.clone(),
            turns: self
                .turns
                .iter()
                .map(|t| Turn {
                    role: t.turn.role,
                    text: t.turn.text.clone(),
                    gold_acts: Some(vec![t.act.as_str().to_string()]),
                    gold_strategies: Some(
                        t.strategies.iter().map(|s| s.as_str().to_string()).collect(),
                    ),
                })
                .collect(),
        }
    }

    /// Rebuild an annotated dialog from a corpus that already carries gold
    /// acts (and, when `require_strategies`, gold strategies) per turn.
    pub fn from_gold(
        dialog: &Dialog,
        schema: Schema,
        require_strategies: bool,
    ) -> Result<AnnotatedDialog, AnnotateError> {
        let mut turns = Vec::with_capacity(dialog.turns.len());
        for (idx, turn) in dialog.turns.iter().enumerate() {
            let acts = turn.gold_acts.as_deref().unwrap_or(&[]);
            let act = match acts {
                [] => {
                    return Err(AnnotateError::MissingAct {
                        dialog_id: dialog.dialog_id.clone(),
                        turn: idx,
                    })
                }
                [label] => DialogAct::from_label(label).ok_or_else(|| AnnotateError::UnknownAct {
                    dialog_id: dialog.dialog_id.clone(),
                    label: label.clone(),
                })?,
                many => {
                    return Err(AnnotateError::MultipleActs {
                        dialog_id: dialog.dialog_id.clone(),
                        turn: idx,
                        count: many.len(),
                    })
                }
            };
            let mut strategies = BTreeSet::new();
            match &turn.gold_strategies {
                Some(labels) => {
                    for label in labels {
                        let strategy = Strategy::from_label(label, schema).ok_or_else(|| {
                            AnnotateError::UnknownStrategy {
                                dialog_id: dialog.dialog_id.clone(),
                                label: label.clone(),
                                schema,
                            }
                        })?;
                        strategies.insert(strategy);
                    }
                }
                None if require_strategies => {
                    return Err(AnnotateError::MissingStrategies {
                        dialog_id: dialog.dialog_id.clone(),
                        turn: idx,
                    })
                }
                None => {}
            }
            turns.push(AnnotatedTurn {
                turn: turn.clone(),
                act,
                strategies,
                prices_mentioned: extract_prices(&turn.text),
            });
        }
        Ok(AnnotatedDialog {
            dialog_id: dialog.dialog_id.clone(),
            schema,
            scenario: dialog.scenario.clone(),
            turns,
            warnings: Vec::new(),
        })
    }
}

/// Strategy labels detected for one turn, plus any warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub strategies: BTreeSet<Strategy>,
    pub warnings: Vec<String>,
}

/// Rule-driven annotator for one schema.
pub struct Annotator<'r> {
    schema: Schema,
    rules: &'r RuleSet,
}

impl Annotator<'static> {
    /// An annotator over the embedded default rules.
    pub fn new(schema: Schema) -> Self {
        Annotator { schema, rules: RuleSet::embedded() }
    }
}

impl<'r> Annotator<'r> {
    pub fn with_rules(schema: Schema, rules: &'r RuleSet) -> Self {
        Annotator { schema, rules }
    }

    pub fn schema(&self) -> Schema {
        self.schema
    }

    /// Annotate every turn of a dialog in order. Deterministic: equal inputs
    /// produce equal output.
    pub fn annotate(&self, dialog: &Dialog, policy: GoldPolicy) -> AnnotatedDialog {
        let mut turns: Vec<AnnotatedTurn> = Vec::with_capacity(dialog.turns.len());
        let mut warnings = Vec::new();
        for (idx, turn) in dialog.turns.iter().enumerate() {
            let prices = extract_prices(&turn.text);
            let act = self.classify_with_prices(turn, &turns, &prices);
            let detection = self.detect_with_prices(turn, &turns, &prices, policy);
            for w in detection.warnings {
                warnings.push(format!("turn {idx}: {w}"));
            }
            turns.push(AnnotatedTurn {
                turn: turn.clone(),
                act,
                strategies: detection.strategies,
                prices_mentioned: prices,
            });
        }
        AnnotatedDialog {
            dialog_id: dialog.dialog_id.clone(),
            schema: self.schema,
            scenario: dialog.scenario.clone(),
            turns,
            warnings,
        }
    }

    pub fn annotate_corpus(&self, dialogs: &[Dialog], policy: GoldPolicy) -> Vec<AnnotatedDialog> {
        dialogs.iter().map(|d| self.annotate(d, policy)).collect()
    }

    /// Assign exactly one dialog act via the first-match cascade:
    /// intro, init-price, insist, agree, disagree, inquire, inform.
    pub fn classify_dialog_act(&self, turn: &Turn, context: &[AnnotatedTurn]) -> DialogAct {
        self.classify_with_prices(turn, context, &extract_prices(&turn.text))
    }

    fn classify_with_prices(
        &self,
        turn: &Turn,
        context: &[AnnotatedTurn],
        prices: &[f64],
    ) -> DialogAct {
        let text = &turn.text;
        if prices.is_empty() && self.rules.act_matches(DialogAct::Intro, text) {
            return DialogAct::Intro;
        }
        let prior_price = context.iter().any(|t| !t.prices_mentioned.is_empty());
        if (!prices.is_empty() && !prior_price)
            || self.rules.act_matches(DialogAct::InitPrice, text)
        {
            return DialogAct::InitPrice;
        }
        if let Some(own) = last_own_price(context, turn.role) {
            if prices.contains(&own) {
                return DialogAct::Insist;
            }
        }
        if self.rules.act_matches(DialogAct::Agree, text) {
            return DialogAct::Agree;
        }
        if self.rules.act_matches(DialogAct::Disagree, text) {
            return DialogAct::Disagree;
        }
        if text.contains('?') || self.rules.act_matches(DialogAct::Inquire, text) {
            return DialogAct::Inquire;
        }
        DialogAct::Inform
    }

    /// Detect the strategy set for one turn given the annotated prefix.
    pub fn detect_strategies(
        &self,
        turn: &Turn,
        context: &[AnnotatedTurn],
        policy: GoldPolicy,
    ) -> Detection {
        self.detect_with_prices(turn, context, &extract_prices(&turn.text), policy)
    }

    fn detect_with_prices(
        &self,
        turn: &Turn,
        context: &[AnnotatedTurn],
        prices: &[f64],
        policy: GoldPolicy,
    ) -> Detection {
        let mut strategies = BTreeSet::new();
        let mut warnings = Vec::new();

        if self.schema == Schema::Negotiation {
            let prior_price = context.iter().any(|t| !t.prices_mentioned.is_empty());
            if !prices.is_empty() && prior_price {
                strategies.insert(Strategy::Negotiation(NegotiationStrategy::ProposePrice));
            }
            if turn.role == Role::Seller && buyer_proposed_first_unclaimed(context) {
                strategies.insert(Strategy::Negotiation(NegotiationStrategy::DoNotProposeFirst));
            }
            for row in NegotiationStrategy::LEXICON_ROWS {
                if self.rules.strategy_matches(row, &turn.text) {
                    strategies.insert(Strategy::Negotiation(row));
                }
            }
        }

        if policy == GoldPolicy::PreferGold {
            match &turn.gold_strategies {
                None => warnings.push(
                    "no gold strategies; classifier-detected rows omitted".to_string(),
                ),
                Some(labels) => {
                    for label in labels {
                        match Strategy::from_label(label, self.schema) {
                            Some(s) if s.detector() == Detector::Classifier => {
                                strategies.insert(s);
                            }
                            // Rule rows are always re-derived by the rules.
                            Some(_) => {}
                            None => warnings.push(format!(
                                "unknown gold strategy label {label:?}; skipped"
                            )),
                        }
                    }
                }
            }
        }

        Detection { strategies, warnings }
    }
}

fn last_own_price(context: &[AnnotatedTurn], role: Role) -> Option<f64> {
    context
        .iter()
        .rev()
        .find(|t| t.turn.role == role && !t.prices_mentioned.is_empty())
        .and_then(|t| t.prices_mentioned.last().copied())
}

/// True when the first price in the dialog so far came from the buyer and no
/// earlier turn has claimed the corresponding seller-side credit yet.
fn buyer_proposed_first_unclaimed(context: &[AnnotatedTurn]) -> bool {
    let first_price_turn = context.iter().find(|t| !t.prices_mentioned.is_empty());
    match first_price_turn {
        Some(t) if t.turn.role == Role::Buyer => !context.iter().any(|t| {
            t.strategies.contains(&Strategy::Negotiation(NegotiationStrategy::DoNotProposeFirst))
        }),
        _ => false,
    }
}

/// Role-prefixed symbol name, e.g. `buyer:intro` or `seller:eot`.
pub fn symbol(role: Role, label: &str) -> String {
    format!("{}:{}", role.as_str(), label)
}

/// One role-prefixed act symbol per turn.
pub fn act_sequence(dialog: &AnnotatedDialog) -> Vec<String> {
    dialog.turns.iter().map(|t| symbol(t.turn.role, t.act.as_str())).collect()
}

/// The strategy symbols one turn contributes: one role-prefixed symbol per
/// active strategy in canonical row order (or `role:none` when the set is
/// empty), closed by the end-of-turn marker.
pub fn turn_strategy_symbols(turn: &AnnotatedTurn) -> Vec<String> {
    let role = turn.turn.role;
    let mut symbols = Vec::with_capacity(turn.strategies.len().max(1) + 1);
    if turn.strategies.is_empty() {
        symbols.push(symbol(role, NONE_MARKER));
    } else {
        for strategy in &turn.strategies {
            symbols.push(symbol(role, strategy.as_str()));
        }
    }
    symbols.push(symbol(role, EOT_MARKER));
    symbols
}

/// Concatenation of [`turn_strategy_symbols`] over the whole dialog.
pub fn strategy_sequence(dialog: &AnnotatedDialog) -> Vec<String> {
    dialog.turns.iter().flat_map(turn_strategy_symbols).collect()
}

/// Canonical act alphabet for a schema: both roles crossed with the seven
/// acts, role-major.
pub fn act_alphabet(schema: Schema) -> Alphabet {
    let mut names = Vec::new();
    for role in schema.roles() {
        for act in DialogAct::ALL {
            names.push(symbol(role, act.as_str()));
        }
    }
    Alphabet::new(names).expect("canonical act alphabet is duplicate-free")
}

/// Canonical strategy alphabet: both roles crossed with the schema's strategy
/// inventory plus the `none` and `eot` markers, role-major.
pub fn strategy_alphabet(schema: Schema) -> Alphabet {
    let mut names = Vec::new();
    for role in schema.roles() {
        for strategy in Strategy::inventory(schema) {
            names.push(symbol(role, strategy.as_str()));
        }
        names.push(symbol(role, NONE_MARKER));
        names.push(symbol(role, EOT_MARKER));
    }
    Alphabet::new(names).expect("canonical strategy alphabet is duplicate-free")
}
