//! Evaluation of next-action and strategy prediction: accuracies, macro F1,
//! expanded-ground-truth bigram accuracy, perplexity, and non-neural
//! baselines sharing the model's prediction interface.

use std::collections::hash_map::Entry;
use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotator::{self, AnnotatedDialog, DialogAct, Strategy};
use crate::corpus::Role;
use crate::fst::{Alphabet, Fst, FstError, StateEmbedding, SymbolId};
use crate::inference::{perplexity_with, rank_masked, Predictor, Trace};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction and gold lists differ in length ({predictions} vs {gold})")]
    LengthMismatch { predictions: usize, gold: usize },
    #[error("no positions to evaluate")]
    EmptyTestSet,
    #[error("training sequences must contain at least one token")]
    EmptyTrain,
    #[error("alphabet mismatch: symbol {symbol:?} missing from the model alphabet")]
    AlphabetMismatch { symbol: String },
    #[error("trace was not produced by this model: {0}")]
    TraceMismatch(String),
    #[error(transparent)]
    Fst(#[from] FstError),
}

/// Non-neural reference predictors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Uniform,
    Unigram,
    Markov1,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] =
        [BaselineKind::Uniform, BaselineKind::Unigram, BaselineKind::Markov1];

    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::Uniform => "uniform",
            BaselineKind::Unigram => "unigram",
            BaselineKind::Markov1 => "markov1",
        }
    }
}

impl std::fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A counts-backed baseline exposing the same walk-and-emit interface as a
/// trained model.
///
/// `uniform` has one context with no counts; `unigram` one context with
/// global next-symbol counts; `markov1` a start context (uniform, since no
/// previous symbol exists) plus one context per symbol holding the
/// conditional counts, all smoothed with `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    kind: BaselineKind,
    alphabet: Alphabet,
    rows: Vec<Vec<u64>>,
    lambda: f64,
}

impl Baseline {
    pub fn kind(&self) -> BaselineKind {
        self.kind
    }
}

/// Build a baseline from training sequences. `unigram` and `markov1` require
/// at least one training token.
pub fn baseline_predictor(
    kind: BaselineKind,
    train: &[Vec<SymbolId>],
    alphabet: &Alphabet,
    lambda: f64,
) -> Result<Baseline, EvalError> {
    let a = alphabet.len();
    let tokens: usize = train.iter().map(Vec::len).sum();
    if kind != BaselineKind::Uniform && tokens == 0 {
        return Err(EvalError::EmptyTrain);
    }
    for (sequence, seq) in train.iter().enumerate() {
        if let Some(&bad) = seq.iter().find(|&&x| x >= a) {
            return Err(EvalError::Fst(FstError::SymbolOutOfRange {
                sequence,
                symbol: bad,
                alphabet_len: a,
            }));
        }
    }
    let rows = match kind {
        BaselineKind::Uniform => vec![vec![0; a]],
        BaselineKind::Unigram => {
            let mut row = vec![0u64; a];
            for seq in train {
                for &x in seq {
                    row[x] += 1;
                }
            }
            vec![row]
        }
        BaselineKind::Markov1 => {
            let mut rows = vec![vec![0u64; a]; a + 1];
            for seq in train {
                let mut prev: Option<SymbolId> = None;
                for &x in seq {
                    if let Some(p) = prev {
                        rows[p + 1][x] += 1;
                    }
                    prev = Some(x);
                }
            }
            rows
        }
    };
    Ok(Baseline { kind, alphabet: alphabet.clone(), rows, lambda })
}

impl Predictor for Baseline {
    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn start_state(&self) -> usize {
        0
    }

    fn next_state(&self, _state: usize, symbol: SymbolId) -> usize {
        match self.kind {
            BaselineKind::Uniform | BaselineKind::Unigram => 0,
            BaselineKind::Markov1 => symbol + 1,
        }
    }

    fn state_pdf(&self, state: usize) -> StateEmbedding {
        StateEmbedding::from_probs(crate::fst::smoothed_pdf(&self.rows[state], self.lambda))
    }
}

/// How a strategy set is read off a renormalized strategy distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetRule {
    /// Keep the k most probable labels (ties towards the earlier table row).
    TopK(usize),
    /// Keep labels whose renormalized probability reaches the threshold.
    Threshold(f64),
}

impl std::fmt::Display for SetRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SetRule::TopK(k) => write!(f, "top_{k}"),
            SetRule::Threshold(t) => write!(f, "threshold_{t}"),
        }
    }
}

/// Mean gold strategy-set size over all turns, rounded: the default `k` for
/// [`SetRule::TopK`].
pub fn auto_top_k(train: &[AnnotatedDialog]) -> usize {
    let mut turns = 0usize;
    let mut labels = 0usize;
    for dialog in train {
        for turn in &dialog.turns {
            turns += 1;
            labels += turn.strategies.len();
        }
    }
    if turns == 0 {
        return 1;
    }
    (labels as f64 / turns as f64).round() as usize
}

/// Predict the upcoming turn's strategy set from the model state reached at
/// the end of the previous turn.
///
/// The state's next-symbol distribution is restricted to the upcoming role's
/// strategy symbols (markers excluded), renormalized, and thresholded or
/// truncated per `rule`.
pub fn predict_strategy_set<P: Predictor + ?Sized>(
    model: &P,
    state: usize,
    upcoming_role: Role,
    rule: SetRule,
) -> Result<BTreeSet<Strategy>, EvalError> {
    let schema = upcoming_role.schema();
    let inventory = Strategy::inventory(schema);
    let pdf = model.state_pdf(state);
    let mut scored: Vec<(Strategy, f64)> = Vec::with_capacity(inventory.len());
    for strategy in inventory {
        let name = annotator::symbol(upcoming_role, strategy.as_str());
        let id = model
            .alphabet()
            .id(&name)
            .ok_or(EvalError::AlphabetMismatch { symbol: name })?;
        scored.push((strategy, pdf.probs()[id]));
    }
    let total: f64 = scored.iter().map(|&(_, p)| p).sum();
    if total > 0.0 {
        for entry in &mut scored {
            entry.1 /= total;
        }
    } else {
        let uniform = 1.0 / scored.len() as f64;
        for entry in &mut scored {
            entry.1 = uniform;
        }
    }
    let set = match rule {
        SetRule::TopK(k) => {
            // Inventory order is table-row order, so a stable sort on the
            // probability alone breaks ties towards earlier rows.
            let mut ranked = scored;
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
            ranked.into_iter().take(k).map(|(s, _)| s).collect()
        }
        SetRule::Threshold(tau) => {
            scored.into_iter().filter(|&(_, p)| p >= tau).map(|(s, _)| s).collect()
        }
    };
    Ok(set)
}

/// As [`predict_strategy_set`], reading the state off the end of a trace
/// after checking the trace plausibly belongs to `fst`.
pub fn predict_strategy_set_from_trace(
    fst: &Fst,
    trace: &Trace,
    upcoming_role: Role,
    rule: SetRule,
) -> Result<BTreeSet<Strategy>, EvalError> {
    if trace.states.is_empty() || trace.states.len() != trace.embeddings.len() {
        return Err(EvalError::TraceMismatch("empty or ragged trace".into()));
    }
    if trace.states[0] != fst.start_state() {
        return Err(EvalError::TraceMismatch("trace does not begin at the start state".into()));
    }
    if let Some(&bad) = trace.states.iter().find(|&&s| s >= fst.num_states()) {
        return Err(EvalError::TraceMismatch(format!("state {bad} out of range")));
    }
    if trace.embeddings.iter().any(|e| e.len() != fst.alphabet().len()) {
        return Err(EvalError::TraceMismatch("embedding width differs from alphabet".into()));
    }
    let last = *trace.states.last().expect("nonempty");
    predict_strategy_set(fst, last, upcoming_role, rule)
}

/// Next-act accuracy over annotated test dialogs.
///
/// For every turn after the first, the model walks the acts so far, ranks the
/// next symbol masked to the true upcoming role, and its argmax is compared
/// with the annotated act.
pub fn next_act_accuracy<P: Predictor + ?Sized>(
    model: &P,
    test: &[AnnotatedDialog],
) -> Result<f64, EvalError> {
    let alphabet = model.alphabet();
    let mut correct = 0usize;
    let mut total = 0usize;
    for dialog in test {
        let mut state = model.start_state();
        for (t, turn) in dialog.turns.iter().enumerate() {
            let name = annotator::symbol(turn.role(), turn.act.as_str());
            let id = alphabet
                .id(&name)
                .ok_or(EvalError::AlphabetMismatch { symbol: name })?;
            if t >= 1 {
                let mask = role_act_mask(alphabet, turn.role())?;
                let prediction = rank_masked(&model.state_pdf(state), Some(&mask))?;
                if prediction.top() == Some(id) {
                    correct += 1;
                }
                total += 1;
            }
            state = model.next_state(state, id);
        }
    }
    if total == 0 {
        return Err(EvalError::EmptyTestSet);
    }
    Ok(correct as f64 / total as f64)
}

fn role_act_mask(alphabet: &Alphabet, role: Role) -> Result<Vec<SymbolId>, EvalError> {
    DialogAct::ALL
        .into_iter()
        .map(|act| {
            let name = annotator::symbol(role, act.as_str());
            alphabet.id(&name).ok_or(EvalError::AlphabetMismatch { symbol: name })
        })
        .collect()
}

/// Exact-set accuracy and macro F1 with the inventory taken as the union of
/// labels observed in `predictions` and `gold`.
pub fn strategy_metrics(
    predictions: &[BTreeSet<Strategy>],
    gold: &[BTreeSet<Strategy>],
) -> Result<(f64, f64), EvalError> {
    let observed: BTreeSet<Strategy> =
        predictions.iter().chain(gold).flatten().copied().collect();
    let inventory: Vec<Strategy> = observed.into_iter().collect();
    strategy_metrics_with_inventory(predictions, gold, &inventory)
}

/// Exact-set accuracy and macro F1 over a fixed label inventory.
///
/// Macro F1 averages per-label F1 over every inventory label; a label that
/// never occurs in predictions or gold contributes an F1 of 0. An empty
/// inventory yields a vacuous 1.0.
pub fn strategy_metrics_with_inventory(
    predictions: &[BTreeSet<Strategy>],
    gold: &[BTreeSet<Strategy>],
    inventory: &[Strategy],
) -> Result<(f64, f64), EvalError> {
    if predictions.len() != gold.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            gold: gold.len(),
        });
    }
    if predictions.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let exact = predictions.iter().zip(gold).filter(|(p, g)| p == g).count() as f64
        / predictions.len() as f64;

    if inventory.is_empty() {
        return Ok((exact, 1.0));
    }
    let mut f1_sum = 0.0;
    for &label in inventory {
        let mut tp = 0u64;
        let mut fp = 0u64;
        let mut fn_ = 0u64;
        for (p, g) in predictions.iter().zip(gold) {
            match (p.contains(&label), g.contains(&label)) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        let denom = 2 * tp + fp + fn_;
        if denom > 0 {
            f1_sum += 2.0 * tp as f64 / denom as f64;
        }
    }
    Ok((exact, f1_sum / inventory.len() as f64))
}

/// Signature of the (up to) two turns preceding a prediction point: role,
/// act, and strategy set of each.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HistoryKey {
    turns: Vec<(Role, DialogAct, BTreeSet<Strategy>)>,
}

impl HistoryKey {
    /// Key for predicting turn `t` of `dialog` (requires `t >= 1`).
    pub fn for_position(dialog: &AnnotatedDialog, t: usize) -> HistoryKey {
        let from = t.saturating_sub(2);
        HistoryKey {
            turns: dialog.turns[from..t]
                .iter()
                .map(|turn| (turn.role(), turn.act, turn.strategies.clone()))
                .collect(),
        }
    }
}

/// Training positions indexed by their previous-two-turn signature, each
/// holding the gold strategy set that followed.
#[derive(Debug, Default)]
pub struct HistoryIndex {
    next_sets: HashMap<HistoryKey, Vec<BTreeSet<Strategy>>>,
}

impl HistoryIndex {
    pub fn build(train: &[AnnotatedDialog]) -> HistoryIndex {
        let mut next_sets: HashMap<HistoryKey, Vec<BTreeSet<Strategy>>> = HashMap::new();
        for dialog in train {
            for t in 1..dialog.turns.len() {
                let key = HistoryKey::for_position(dialog, t);
                let set = dialog.turns[t].strategies.clone();
                match next_sets.entry(key) {
                    Entry::Occupied(mut e) => e.get_mut().push(set),
                    Entry::Vacant(e) => {
                        e.insert(vec![set]);
                    }
                }
            }
        }
        HistoryIndex { next_sets }
    }

    /// Union of every matching training position's next-turn gold set, always
    /// including the prediction point's own gold set.
    pub fn expand_ground_truth(
        &self,
        key: &HistoryKey,
        own_gold: &BTreeSet<Strategy>,
    ) -> BTreeSet<Strategy> {
        let mut expanded = own_gold.clone();
        if let Some(sets) = self.next_sets.get(key) {
            for set in sets {
                expanded.extend(set.iter().copied());
            }
        }
        expanded
    }
}

/// How a predicted set is judged against the expanded ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BigramRule {
    /// Correct when the nonempty prediction is a subset of the expanded set,
    /// or the prediction is empty at a position whose own gold set is empty.
    Subset,
    /// Correct when the prediction equals the expanded set exactly.
    Exact,
}

impl std::fmt::Display for BigramRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BigramRule::Subset => "subset",
            BigramRule::Exact => "exact",
        })
    }
}

/// Predicted and gold strategy sets at every prediction point of `test`,
/// in order.
pub fn strategy_set_predictions<P: Predictor + ?Sized>(
    model: &P,
    test: &[AnnotatedDialog],
    rule: SetRule,
) -> Result<(Vec<BTreeSet<Strategy>>, Vec<BTreeSet<Strategy>>), EvalError> {
    let mut predictions = Vec::new();
    let mut gold = Vec::new();
    walk_strategy_stream(model, test, |_dialog, _t, state, turn_role, turn_gold| {
        predictions.push(predict_strategy_set(model, state, turn_role, rule)?);
        gold.push(turn_gold.clone());
        Ok(())
    })?;
    Ok((predictions, gold))
}

/// Accuracy of predicted strategy sets against the expanded ground truth
/// built from `train`.
pub fn bigram_accuracy<P: Predictor + ?Sized>(
    model: &P,
    train: &[AnnotatedDialog],
    test: &[AnnotatedDialog],
    set_rule: SetRule,
    bigram_rule: BigramRule,
) -> Result<f64, EvalError> {
    let index = HistoryIndex::build(train);
    let mut correct = 0usize;
    let mut total = 0usize;
    walk_strategy_stream(model, test, |dialog, t, state, turn_role, turn_gold| {
        let predicted = predict_strategy_set(model, state, turn_role, set_rule)?;
        let key = HistoryKey::for_position(dialog, t);
        let expanded = index.expand_ground_truth(&key, turn_gold);
        let ok = match bigram_rule {
            BigramRule::Subset => {
                (!predicted.is_empty() && predicted.is_subset(&expanded))
                    || (predicted.is_empty() && turn_gold.is_empty())
            }
            BigramRule::Exact => predicted == expanded,
        };
        if ok {
            correct += 1;
        }
        total += 1;
        Ok(())
    })?;
    if total == 0 {
        return Err(EvalError::EmptyTestSet);
    }
    Ok(correct as f64 / total as f64)
}

/// Walk each dialog's strategy symbol stream, invoking `visit` at every
/// prediction point (turn index >= 1) with the model state reached at the end
/// of the previous turn.
fn walk_strategy_stream<P, F>(
    model: &P,
    test: &[AnnotatedDialog],
    mut visit: F,
) -> Result<(), EvalError>
where
    P: Predictor + ?Sized,
    F: FnMut(&AnnotatedDialog, usize, usize, Role, &BTreeSet<Strategy>) -> Result<(), EvalError>,
{
    let alphabet = model.alphabet();
    for dialog in test {
        let mut state = model.start_state();
        for (t, turn) in dialog.turns.iter().enumerate() {
            if t >= 1 {
                visit(dialog, t, state, turn.role(), &turn.strategies)?;
            }
            for name in annotator::turn_strategy_symbols(turn) {
                let id = alphabet
                    .id(&name)
                    .ok_or(EvalError::AlphabetMismatch { symbol: name })?;
                state = model.next_state(state, id);
            }
        }
    }
    Ok(())
}

/// Fraction of positions where the model's argmax equals the next symbol.
pub fn next_symbol_accuracy<P: Predictor + ?Sized>(
    model: &P,
    sequences: &[Vec<SymbolId>],
) -> Result<f64, EvalError> {
    let a = model.alphabet().len();
    let mut correct = 0usize;
    let mut total = 0usize;
    for (sequence, seq) in sequences.iter().enumerate() {
        let mut state = model.start_state();
        for &x in seq {
            if x >= a {
                return Err(EvalError::Fst(FstError::SymbolOutOfRange {
                    sequence,
                    symbol: x,
                    alphabet_len: a,
                }));
            }
            let prediction = rank_masked(&model.state_pdf(state), None)?;
            if prediction.top() == Some(x) {
                correct += 1;
            }
            total += 1;
            state = model.next_state(state, x);
        }
    }
    if total == 0 {
        return Err(EvalError::EmptyTestSet);
    }
    Ok(correct as f64 / total as f64)
}

/// Strategy-set rule selection for reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetRuleChoice {
    /// `top_k` with `k` derived from the train gold mean set size.
    Auto,
    Fixed(SetRule),
}

/// Options for [`compare_report`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub baselines: Vec<BaselineKind>,
    pub set_rule: SetRuleChoice,
    pub bigram_rule: BigramRule,
    /// Smoothing for baseline distributions.
    pub baseline_lambda: f64,
    pub seed: Option<u64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            baselines: BaselineKind::ALL.to_vec(),
            set_rule: SetRuleChoice::Auto,
            bigram_rule: BigramRule::Subset,
            baseline_lambda: 0.1,
            seed: None,
        }
    }
}

/// One model's metrics. Perplexity is measured on the act stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub next_act_accuracy: f64,
    pub strategy_exact_accuracy: f64,
    pub strategy_macro_f1: f64,
    pub bigram_accuracy: f64,
    pub perplexity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    #[serde(flatten)]
    pub metrics: MetricRow,
}

/// Metrics for the trained models and every requested baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: Option<u64>,
    pub set_rule: String,
    pub bigram_rule: String,
    pub rows: Vec<ReportRow>,
}

impl EvalReport {
    /// Aligned plain-text table: one row per model, one column per metric.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<10} {:>12} {:>8} {:>8} {:>8} {:>10}\n",
            "model", "next_act_acc", "s_acc", "s_f1", "bi_acc", "ppl"
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:<10} {:>12.4} {:>8.4} {:>8.4} {:>8.4} {:>10.4}\n",
                row.model,
                row.metrics.next_act_accuracy,
                row.metrics.strategy_exact_accuracy,
                row.metrics.strategy_macro_f1,
                row.metrics.bigram_accuracy,
                row.metrics.perplexity,
            ));
        }
        out
    }
}

fn encode_streams(
    alphabet: &Alphabet,
    dialogs: &[AnnotatedDialog],
    stream: fn(&AnnotatedDialog) -> Vec<String>,
) -> Result<Vec<Vec<SymbolId>>, EvalError> {
    dialogs
        .iter()
        .map(|d| {
            stream(d)
                .iter()
                .map(|name| {
                    alphabet
                        .id(name)
                        .ok_or_else(|| EvalError::AlphabetMismatch { symbol: name.clone() })
                })
                .collect()
        })
        .collect()
}

fn metric_row<A, S>(
    act_model: &A,
    strategy_model: &S,
    train: &[AnnotatedDialog],
    test: &[AnnotatedDialog],
    test_act_seqs: &[Vec<SymbolId>],
    set_rule: SetRule,
    bigram_rule: BigramRule,
    inventory: &[Strategy],
) -> Result<MetricRow, EvalError>
where
    A: Predictor + ?Sized,
    S: Predictor + ?Sized,
{
    let (predictions, gold) = strategy_set_predictions(strategy_model, test, set_rule)?;
    let (s_acc, s_f1) = strategy_metrics_with_inventory(&predictions, &gold, inventory)?;
    Ok(MetricRow {
        next_act_accuracy: next_act_accuracy(act_model, test)?,
        strategy_exact_accuracy: s_acc,
        strategy_macro_f1: s_f1,
        bigram_accuracy: bigram_accuracy(strategy_model, train, test, set_rule, bigram_rule)?,
        perplexity: perplexity_with(act_model, test_act_seqs)?,
    })
}

/// Evaluate a trained act model and strategy model against the configured
/// baselines on annotated train/test dialogs.
pub fn compare_report(
    da_model: &Fst,
    strategy_model: &Fst,
    train: &[AnnotatedDialog],
    test: &[AnnotatedDialog],
    config: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let schema = test[0].schema;
    let inventory = Strategy::inventory(schema);
    let set_rule = match config.set_rule {
        SetRuleChoice::Auto => SetRule::TopK(auto_top_k(train)),
        SetRuleChoice::Fixed(rule) => rule,
    };

    let train_act = encode_streams(da_model.alphabet(), train, annotator::act_sequence)?;
    let test_act = encode_streams(da_model.alphabet(), test, annotator::act_sequence)?;
    let train_strategy =
        encode_streams(strategy_model.alphabet(), train, annotator::strategy_sequence)?;

    let mut rows = vec![ReportRow {
        model: "fst".to_string(),
        metrics: metric_row(
            da_model,
            strategy_model,
            train,
            test,
            &test_act,
            set_rule,
            config.bigram_rule,
            &inventory,
        )?,
    }];
    for &kind in &config.baselines {
        let act_baseline =
            baseline_predictor(kind, &train_act, da_model.alphabet(), config.baseline_lambda)?;
        let strategy_baseline = baseline_predictor(
            kind,
            &train_strategy,
            strategy_model.alphabet(),
            config.baseline_lambda,
        )?;
        rows.push(ReportRow {
            model: kind.as_str().to_string(),
            metrics: metric_row(
                &act_baseline,
                &strategy_baseline,
                train,
                test,
                &test_act,
                set_rule,
                config.bigram_rule,
                &inventory,
            )?,
        });
    }
    Ok(EvalReport {
        seed: config.seed,
        set_rule: set_rule.to_string(),
        bigram_rule: config.bigram_rule.to_string(),
        rows,
    })
}
