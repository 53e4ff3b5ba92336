//! Deterministic probabilistic finite-state models learned by greedy
//! entropy-minimizing state splitting.
//!
//! A model starts as a single ergodic state whose every edge loops back to
//! itself. Training repeatedly refines it: for every state `t` and incoming
//! symbol `a`, the visits to `t` are hypothetically partitioned into those
//! entered via `a` and all the rest (entries via other symbols, plus
//! sequence-initial visits when `t` is the start state). The split whose
//! count-weighted average child entropy is lowest wins, provided it clears
//! the configured gain and support guards. Splitting redirects every
//! `a`-labeled edge into `t` towards a freshly allocated child, so the
//! transition function stays total and deterministic by construction.
//! Counts are re-estimated from the full corpus after every split.
//!
//! The number of states `K` is the main hyperparameter; splitting also stops
//! on its own once no admissible candidate remains. Each state's smoothed
//! next-symbol distribution (see [`Fst::emission_pdf`]) doubles as that
//! state's embedding for downstream consumers.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type StateId = usize;
pub type SymbolId = usize;

#[derive(Debug, Error)]
pub enum FstError {
    #[error("alphabet must not be empty")]
    EmptyAlphabet,
    #[error("duplicate symbol {0:?} in alphabet")]
    DuplicateSymbol(String),
    #[error("invalid state id {state} (model has {num_states} states)")]
    InvalidState { state: StateId, num_states: usize },
    #[error("symbol id {symbol} out of range for alphabet of size {alphabet_len} (sequence {sequence})")]
    SymbolOutOfRange { sequence: usize, symbol: SymbolId, alphabet_len: usize },
    #[error("symbol id {symbol} at position {position} out of range for alphabet of size {alphabet_len}")]
    InvalidSymbolAt { position: usize, symbol: SymbolId, alphabet_len: usize },
    #[error("stale split candidate: built for a {expected}-state model, applied to {actual} states")]
    StaleCandidate { expected: usize, actual: usize },
    #[error("target_states must be at least 1")]
    InvalidTargetStates,
    #[error("smoothing lambda must be non-negative, got {0}")]
    NegativeLambda(f64),
    #[error(
        "zero-probability transition at state {state} on symbol {symbol}; \
         train or score with smoothing_lambda > 0"
    )]
    ZeroProbability { state: StateId, symbol: SymbolId },
    #[error("mask must not be empty")]
    EmptyMask,
    #[error("mask contains invalid symbol id {0}")]
    InvalidMaskSymbol(SymbolId),
    #[error("no tokens to evaluate: perplexity is undefined")]
    EmptyEvaluation,
    #[error("malformed model: {0}")]
    Format(String),
    #[error("unsupported model format version {found} (this build reads version {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// An interned symbol inventory with dense ids `0..len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<String>,
    index: HashMap<String, SymbolId>,
}

impl Alphabet {
    /// Build an alphabet from distinct names. Order is preserved and defines
    /// the ids.
    pub fn new<I, S>(names: I) -> Result<Alphabet, FstError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let symbols: Vec<String> = names.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(symbols.len());
        for (id, name) in symbols.iter().enumerate() {
            if index.insert(name.clone(), id).is_some() {
                return Err(FstError::DuplicateSymbol(name.clone()));
            }
        }
        Ok(Alphabet { symbols, index })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<SymbolId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: SymbolId) -> Option<&str> {
        self.symbols.get(id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.symbols
    }

    /// Encode a name sequence, failing on the first unknown symbol.
    pub fn encode<'a>(
        &self,
        names: impl IntoIterator<Item = &'a str>,
    ) -> Result<Vec<SymbolId>, FstError> {
        names
            .into_iter()
            .enumerate()
            .map(|(position, name)| {
                self.id(name).ok_or_else(|| FstError::Format(format!(
                    "symbol {name:?} at position {position} not in alphabet"
                )))
            })
            .collect()
    }
}

/// A state's smoothed next-symbol distribution; doubles as the state
/// embedding exposed to downstream consumers.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEmbedding {
    probs: Vec<f64>,
}

impl StateEmbedding {
    pub(crate) fn from_probs(probs: Vec<f64>) -> StateEmbedding {
        StateEmbedding { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, symbol: SymbolId) -> Option<f64> {
        self.probs.get(symbol).copied()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Shannon entropy in bits of the maximum-likelihood distribution given by
/// `counts`. All-zero counts have entropy 0 by convention.
pub fn entropy_bits(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    let mut h = 0.0;
    for &c in counts {
        if c > 0 {
            let p = c as f64 / total;
            h -= p * p.log2();
        }
    }
    h
}

/// Additively smoothed distribution over `counts.len()` outcomes. With zero
/// total mass and zero lambda the distribution falls back to uniform.
pub(crate) fn smoothed_pdf(counts: &[u64], lambda: f64) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    let denom = total as f64 + lambda * counts.len() as f64;
    if denom == 0.0 {
        let uniform = 1.0 / counts.len() as f64;
        return vec![uniform; counts.len()];
    }
    counts.iter().map(|&c| (c as f64 + lambda) / denom).collect()
}

/// One admissible state split, scored by count-weighted child entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCandidate {
    /// State to be split.
    pub state: StateId,
    /// Incoming symbol whose entries move to the new child.
    pub symbol: SymbolId,
    /// Count-weighted average entropy of the two hypothetical children, bits.
    pub weighted_child_entropy: f64,
    /// Entropy of the unsplit state, bits.
    pub parent_entropy: f64,
    /// `parent_entropy - weighted_child_entropy`.
    pub gain: f64,
    /// Emission mass landing in (child via symbol, remaining child).
    pub support: (u64, u64),
    /// Model size this candidate was computed for; guards against stale use.
    num_states: usize,
}

/// Training hyperparameters. `target_states` is the stopping size; the gain
/// and support guards stop training early when no split is worth making.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub target_states: usize,
    pub min_child_support: u64,
    pub min_entropy_gain: f64,
    pub smoothing_lambda: f64,
}

impl TrainConfig {
    pub fn new(target_states: usize) -> TrainConfig {
        TrainConfig {
            target_states,
            min_child_support: 5,
            min_entropy_gain: 0.01,
            smoothing_lambda: 0.1,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> TrainConfig {
        self.smoothing_lambda = lambda;
        self
    }

    pub fn with_guards(mut self, min_child_support: u64, min_entropy_gain: f64) -> TrainConfig {
        self.min_child_support = min_child_support;
        self.min_entropy_gain = min_entropy_gain;
        self
    }
}

/// One split taken during training, for logs and post-hoc inspection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitRecord {
    pub step: usize,
    pub state: StateId,
    pub symbol: SymbolId,
    pub symbol_name: String,
    pub parent_entropy: f64,
    pub weighted_child_entropy: f64,
    pub gain: f64,
    pub support: (u64, u64),
    pub num_states_after: usize,
}

/// A deterministic, total probabilistic automaton over one symbol alphabet.
///
/// `delta` maps every (state, symbol) pair to exactly one successor; `counts`
/// holds the next-symbol emissions observed at each state under the current
/// transition function.
#[derive(Debug, Clone, PartialEq)]
pub struct Fst {
    alphabet: Alphabet,
    num_states: usize,
    start: StateId,
    delta: Vec<StateId>,
    counts: Vec<u64>,
    lambda: f64,
    lineage: Vec<Option<(StateId, SymbolId)>>,
}

impl Fst {
    /// The initial model: a single ergodic state with every edge looping back
    /// to itself and all counts zero.
    pub fn init(alphabet: Alphabet, smoothing_lambda: f64) -> Result<Fst, FstError> {
        if alphabet.is_empty() {
            return Err(FstError::EmptyAlphabet);
        }
        if smoothing_lambda < 0.0 {
            return Err(FstError::NegativeLambda(smoothing_lambda));
        }
        let a = alphabet.len();
        Ok(Fst {
            alphabet,
            num_states: 1,
            start: 0,
            delta: vec![0; a],
            counts: vec![0; a],
            lambda: smoothing_lambda,
            lineage: vec![None],
        })
    }

    /// Reassemble a model from raw parts, validating every invariant.
    pub fn from_parts(
        alphabet: Alphabet,
        num_states: usize,
        start: StateId,
        delta: Vec<StateId>,
        counts: Vec<u64>,
        smoothing_lambda: f64,
        lineage: Vec<Option<(StateId, SymbolId)>>,
    ) -> Result<Fst, FstError> {
        if alphabet.is_empty() {
            return Err(FstError::EmptyAlphabet);
        }
        if smoothing_lambda < 0.0 {
            return Err(FstError::NegativeLambda(smoothing_lambda));
        }
        let a = alphabet.len();
        if num_states == 0 {
            return Err(FstError::Format("num_states must be at least 1".into()));
        }
        if start >= num_states {
            return Err(FstError::Format(format!(
                "start_state {start} out of range for {num_states} states"
            )));
        }
        if delta.len() != num_states * a {
            return Err(FstError::Format(format!(
                "delta has {} entries, expected {num_states} states x {a} symbols",
                delta.len()
            )));
        }
        if counts.len() != num_states * a {
            return Err(FstError::Format(format!(
                "counts has {} entries, expected {num_states} states x {a} symbols",
                counts.len()
            )));
        }
        if let Some(&bad) = delta.iter().find(|&&target| target >= num_states) {
            return Err(FstError::Format(format!(
                "delta target {bad} out of range for {num_states} states"
            )));
        }
        if lineage.len() != num_states {
            return Err(FstError::Format(format!(
                "lineage has {} entries, expected {num_states}",
                lineage.len()
            )));
        }
        for parent in lineage.iter().flatten() {
            if parent.0 >= num_states || parent.1 >= a {
                return Err(FstError::Format(format!(
                    "lineage entry ({}, {}) out of range",
                    parent.0, parent.1
                )));
            }
        }
        Ok(Fst { alphabet, num_states, start, delta, counts, lambda: smoothing_lambda, lineage })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn start_state(&self) -> StateId {
        self.start
    }

    pub fn smoothing_lambda(&self) -> f64 {
        self.lambda
    }

    /// Per-state record of (parent state, splitting symbol); `None` for the
    /// root state.
    pub fn lineage(&self) -> &[Option<(StateId, SymbolId)>] {
        &self.lineage
    }

    pub(crate) fn delta_raw(&self, state: StateId, symbol: SymbolId) -> StateId {
        self.delta[state * self.alphabet.len() + symbol]
    }

    pub(crate) fn delta_table(&self) -> &[StateId] {
        &self.delta
    }

    pub(crate) fn counts_table(&self) -> &[u64] {
        &self.counts
    }

    fn check_state(&self, state: StateId) -> Result<(), FstError> {
        if state >= self.num_states {
            return Err(FstError::InvalidState { state, num_states: self.num_states });
        }
        Ok(())
    }

    /// Observed emission count for (state, symbol).
    pub fn count(&self, state: StateId, symbol: SymbolId) -> Result<u64, FstError> {
        self.check_state(state)?;
        if symbol >= self.alphabet.len() {
            return Err(FstError::InvalidSymbolAt {
                position: 0,
                symbol,
                alphabet_len: self.alphabet.len(),
            });
        }
        Ok(self.counts[state * self.alphabet.len() + symbol])
    }

    /// Replace all emission counts by re-running every sequence from the
    /// start state under the current transition function.
    pub fn run_counts(&mut self, sequences: &[Vec<SymbolId>]) -> Result<(), FstError> {
        let a = self.alphabet.len();
        let mut counts = vec![0u64; self.num_states * a];
        for (sequence, seq) in sequences.iter().enumerate() {
            let mut state = self.start;
            for &x in seq {
                if x >= a {
                    return Err(FstError::SymbolOutOfRange { sequence, symbol: x, alphabet_len: a });
                }
                counts[state * a + x] += 1;
                state = self.delta_raw(state, x);
            }
        }
        self.counts = counts;
        Ok(())
    }

    /// Shannon entropy (bits) of the unsmoothed next-symbol distribution at
    /// `state`. A state with no observations has entropy 0.
    pub fn state_entropy(&self, state: StateId) -> Result<f64, FstError> {
        self.check_state(state)?;
        let a = self.alphabet.len();
        Ok(entropy_bits(&self.counts[state * a..(state + 1) * a]))
    }

    /// Smoothed next-symbol distribution at `state`:
    /// `(count + lambda) / (total + lambda * |alphabet|)`.
    ///
    /// With zero counts and zero lambda the distribution is uniform.
    pub fn emission_pdf(&self, state: StateId) -> Result<StateEmbedding, FstError> {
        self.check_state(state)?;
        let a = self.alphabet.len();
        Ok(StateEmbedding::from_probs(smoothed_pdf(
            &self.counts[state * a..(state + 1) * a],
            self.lambda,
        )))
    }

    /// Find the admissible split minimizing count-weighted child entropy, or
    /// `None` when no candidate clears the gain and support guards.
    ///
    /// Ties break towards the lowest state id, then the lowest symbol id.
    pub fn best_split(
        &self,
        sequences: &[Vec<SymbolId>],
        config: &TrainConfig,
    ) -> Result<Option<SplitCandidate>, FstError> {
        let a = self.alphabet.len();
        let ins = a + 1; // extra slot for sequence-initial visits
        let n = self.num_states;

        // visits[t][i]: visits to t entered via symbol i (i == a: initial).
        // emit[t][i][x]: next-symbol x emissions at those visits.
        let mut visits = vec![0u64; n * ins];
        let mut emit = vec![0u64; n * ins * a];
        for (sequence, seq) in sequences.iter().enumerate() {
            let mut state = self.start;
            let mut incoming = a;
            visits[state * ins + incoming] += 1;
            for &x in seq {
                if x >= a {
                    return Err(FstError::SymbolOutOfRange { sequence, symbol: x, alphabet_len: a });
                }
                emit[(state * ins + incoming) * a + x] += 1;
                state = self.delta_raw(state, x);
                incoming = x;
                visits[state * ins + incoming] += 1;
            }
        }

        let mut best: Option<SplitCandidate> = None;
        for t in 0..n {
            let mut parent = vec![0u64; a];
            for i in 0..ins {
                for x in 0..a {
                    parent[x] += emit[(t * ins + i) * a + x];
                }
            }
            let parent_total: u64 = parent.iter().sum();
            let parent_entropy = entropy_bits(&parent);
            let total_visits: u64 = visits[t * ins..(t + 1) * ins].iter().sum();

            for sym in 0..a {
                let via = visits[t * ins + sym];
                if via == 0 || total_visits == via {
                    // Nothing enters via this symbol, or nothing remains for
                    // the other child: no partition.
                    continue;
                }
                let child_a = &emit[(t * ins + sym) * a..(t * ins + sym) * a + a];
                let n_a: u64 = child_a.iter().sum();
                let n_rest = parent_total - n_a;
                if n_a.min(n_rest) < config.min_child_support {
                    continue;
                }
                let child_rest: Vec<u64> = (0..a).map(|x| parent[x] - child_a[x]).collect();
                let weighted = if n_a + n_rest == 0 {
                    0.0
                } else {
                    (n_a as f64 * entropy_bits(child_a) + n_rest as f64 * entropy_bits(&child_rest))
                        / (n_a + n_rest) as f64
                };
                let gain = parent_entropy - weighted;
                if gain < config.min_entropy_gain {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some(b) => weighted < b.weighted_child_entropy,
                };
                if better {
                    best = Some(SplitCandidate {
                        state: t,
                        symbol: sym,
                        weighted_child_entropy: weighted,
                        parent_entropy,
                        gain,
                        support: (n_a, n_rest),
                        num_states: n,
                    });
                }
            }
        }
        Ok(best)
    }

    /// Split `cand.state`: a new state takes over every edge labeled
    /// `cand.symbol` that entered it, including the self-directed ones. The
    /// new state inherits the parent's outgoing row; the start state never
    /// moves (sequence-initial visits stay with the remaining child). Counts
    /// are zeroed; callers re-estimate with [`Fst::run_counts`].
    pub fn apply_split(&mut self, cand: &SplitCandidate) -> Result<StateId, FstError> {
        if cand.num_states != self.num_states {
            return Err(FstError::StaleCandidate {
                expected: cand.num_states,
                actual: self.num_states,
            });
        }
        self.check_state(cand.state)?;
        let a = self.alphabet.len();
        let t = cand.state;
        let new_state = self.num_states;

        let parent_row: Vec<StateId> = self.delta[t * a..(t + 1) * a].to_vec();
        self.delta.extend(parent_row);
        self.num_states += 1;
        for s in 0..self.num_states {
            let edge = s * a + cand.symbol;
            if self.delta[edge] == t {
                self.delta[edge] = new_state;
            }
        }
        self.lineage.push(Some((t, cand.symbol)));
        self.counts = vec![0; self.num_states * a];
        Ok(new_state)
    }

    /// Structural sanity check: transition targets in range, table shapes
    /// consistent, emission PDFs proper distributions.
    pub fn validate(&self) -> Result<(), FstError> {
        let a = self.alphabet.len();
        if self.delta.len() != self.num_states * a || self.counts.len() != self.num_states * a {
            return Err(FstError::Format("table shape mismatch".into()));
        }
        if self.start >= self.num_states {
            return Err(FstError::Format("start state out of range".into()));
        }
        for (i, &target) in self.delta.iter().enumerate() {
            if target >= self.num_states {
                return Err(FstError::Format(format!(
                    "delta[{i}] = {target} out of range for {} states",
                    self.num_states
                )));
            }
        }
        for state in 0..self.num_states {
            let pdf = self.emission_pdf(state)?;
            let sum: f64 = pdf.probs().iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(FstError::Format(format!(
                    "emission pdf at state {state} sums to {sum}"
                )));
            }
            if pdf.probs().iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(FstError::Format(format!(
                    "emission pdf at state {state} has entries outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Train a model: initialize, then split greedily until `target_states` is
/// reached or no admissible candidate remains. Deterministic given inputs.
pub fn train_fst(
    sequences: &[Vec<SymbolId>],
    alphabet: Alphabet,
    config: &TrainConfig,
) -> Result<Fst, FstError> {
    train_fst_with_log(sequences, alphabet, config).map(|(fst, _)| fst)
}

/// As [`train_fst`], also returning the per-split history.
pub fn train_fst_with_log(
    sequences: &[Vec<SymbolId>],
    alphabet: Alphabet,
    config: &TrainConfig,
) -> Result<(Fst, Vec<SplitRecord>), FstError> {
    if config.target_states < 1 {
        return Err(FstError::InvalidTargetStates);
    }
    let mut fst = Fst::init(alphabet, config.smoothing_lambda)?;
    fst.run_counts(sequences)?;
    let mut log = Vec::new();
    while fst.num_states() < config.target_states {
        let Some(cand) = fst.best_split(sequences, config)? else {
            break;
        };
        fst.apply_split(&cand)?;
        fst.run_counts(sequences)?;
        log.push(SplitRecord {
            step: log.len() + 1,
            state: cand.state,
            symbol: cand.symbol,
            symbol_name: fst.alphabet().name(cand.symbol).unwrap_or("?").to_string(),
            parent_entropy: cand.parent_entropy,
            weighted_child_entropy: cand.weighted_child_entropy,
            gain: cand.gain,
            support: cand.support,
            num_states_after: fst.num_states(),
        });
    }
    Ok((fst, log))
}
