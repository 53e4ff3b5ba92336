//! Traversal, next-symbol prediction, sequence scoring, model files, and
//! DOT export.
//!
//! All operations here are read-only over a trained [`Fst`] and are safe for
//! any number of concurrent callers. The [`Predictor`] trait abstracts the
//! minimal walk-and-emit interface so the evaluation baselines score through
//! exactly the same code path as a trained model.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::fst::{Alphabet, Fst, FstError, StateEmbedding, StateId, SymbolId};

/// Current on-disk model format version.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Default emission probability below which DOT edges are hidden.
pub const DOT_DISPLAY_THRESHOLD: f64 = 0.05;

/// Anything that walks a state machine over symbols and exposes a per-state
/// next-symbol distribution.
///
/// Callers must pass symbol ids below `alphabet().len()` and only states
/// previously returned by `start_state`/`next_state`.
pub trait Predictor {
    fn alphabet(&self) -> &Alphabet;
    fn start_state(&self) -> usize;
    fn next_state(&self, state: usize, symbol: SymbolId) -> usize;
    fn state_pdf(&self, state: usize) -> StateEmbedding;
}

impl Predictor for Fst {
    fn alphabet(&self) -> &Alphabet {
        Fst::alphabet(self)
    }

    fn start_state(&self) -> usize {
        Fst::start_state(self)
    }

    fn next_state(&self, state: usize, symbol: SymbolId) -> usize {
        self.delta_raw(state, symbol)
    }

    fn state_pdf(&self, state: usize) -> StateEmbedding {
        self.emission_pdf(state).expect("state produced by this model")
    }
}

/// The full history of one traversal: every state visited (starting with the
/// start state) and the embedding of each.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub states: Vec<StateId>,
    pub embeddings: Vec<StateEmbedding>,
}

/// Symbols ranked by probability (descending, ties by ascending id).
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub ranked: Vec<(SymbolId, f64)>,
}

impl Prediction {
    /// The most probable symbol.
    pub fn top(&self) -> Option<SymbolId> {
        self.ranked.first().map(|&(s, _)| s)
    }
}

/// Rank a distribution, optionally restricted to `mask` and renormalized.
///
/// Without a mask the full symbol set is ranked (and renormalized by its own
/// total, so a full mask and no mask are bit-identical). A mask whose entries
/// all have probability zero ranks uniformly over the mask.
pub fn rank_masked(
    pdf: &StateEmbedding,
    mask: Option<&[SymbolId]>,
) -> Result<Prediction, FstError> {
    let ids: Vec<SymbolId> = match mask {
        None => (0..pdf.len()).collect(),
        Some(ids) => {
            if ids.is_empty() {
                return Err(FstError::EmptyMask);
            }
            let mut sorted: Vec<SymbolId> = ids.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            if let Some(&bad) = sorted.iter().find(|&&id| id >= pdf.len()) {
                return Err(FstError::InvalidMaskSymbol(bad));
            }
            sorted
        }
    };
    let total: f64 = ids.iter().map(|&id| pdf.probs()[id]).sum();
    let mut ranked: Vec<(SymbolId, f64)> = if total > 0.0 {
        ids.iter().map(|&id| (id, pdf.probs()[id] / total)).collect()
    } else {
        let uniform = 1.0 / ids.len() as f64;
        ids.iter().map(|&id| (id, uniform)).collect()
    };
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(Prediction { ranked })
}

impl Fst {
    /// Follow one transition.
    pub fn step(&self, state: StateId, symbol: SymbolId) -> Result<StateId, FstError> {
        if state >= self.num_states() {
            return Err(FstError::InvalidState { state, num_states: self.num_states() });
        }
        if symbol >= self.alphabet().len() {
            return Err(FstError::InvalidSymbolAt {
                position: 0,
                symbol,
                alphabet_len: self.alphabet().len(),
            });
        }
        Ok(self.delta_raw(state, symbol))
    }

    /// Walk a whole sequence from the start state, recording every state and
    /// its embedding. An empty sequence yields the start state alone.
    pub fn traverse(&self, sequence: &[SymbolId]) -> Result<Trace, FstError> {
        let mut states = Vec::with_capacity(sequence.len() + 1);
        let mut embeddings = Vec::with_capacity(sequence.len() + 1);
        let mut state = self.start_state();
        states.push(state);
        embeddings.push(self.emission_pdf(state)?);
        for (position, &symbol) in sequence.iter().enumerate() {
            if symbol >= self.alphabet().len() {
                return Err(FstError::InvalidSymbolAt {
                    position,
                    symbol,
                    alphabet_len: self.alphabet().len(),
                });
            }
            state = self.delta_raw(state, symbol);
            states.push(state);
            embeddings.push(self.emission_pdf(state)?);
        }
        Ok(Trace { states, embeddings })
    }

    /// Rank the next symbol at `state`, optionally masked and renormalized.
    pub fn predict_next(
        &self,
        state: StateId,
        mask: Option<&[SymbolId]>,
    ) -> Result<Prediction, FstError> {
        let pdf = self.emission_pdf(state)?;
        rank_masked(&pdf, mask)
    }

    /// Total log2 probability of a sequence from the start state.
    pub fn sequence_logprob(&self, sequence: &[SymbolId]) -> Result<f64, FstError> {
        logprob_with(self, sequence)
    }

    /// `2^(-total logprob / total tokens)` over a set of sequences.
    pub fn perplexity(&self, sequences: &[Vec<SymbolId>]) -> Result<f64, FstError> {
        perplexity_with(self, sequences)
    }
}

/// Total log2 probability of `sequence` under any predictor.
pub fn logprob_with<P: Predictor + ?Sized>(
    model: &P,
    sequence: &[SymbolId],
) -> Result<f64, FstError> {
    let alphabet_len = model.alphabet().len();
    let mut state = model.start_state();
    let mut total = 0.0;
    for (position, &symbol) in sequence.iter().enumerate() {
        if symbol >= alphabet_len {
            return Err(FstError::InvalidSymbolAt { position, symbol, alphabet_len });
        }
        let p = model.state_pdf(state).probs()[symbol];
        if p <= 0.0 {
            return Err(FstError::ZeroProbability { state, symbol });
        }
        total += p.log2();
        state = model.next_state(state, symbol);
    }
    Ok(total)
}

/// Per-symbol perplexity of a sequence set under any predictor. Errors when
/// the set contains no tokens at all.
pub fn perplexity_with<P: Predictor + ?Sized>(
    model: &P,
    sequences: &[Vec<SymbolId>],
) -> Result<f64, FstError> {
    let tokens: usize = sequences.iter().map(Vec::len).sum();
    if tokens == 0 {
        return Err(FstError::EmptyEvaluation);
    }
    let mut total = 0.0;
    for seq in sequences {
        total += logprob_with(model, seq)?;
    }
    Ok((-total / tokens as f64).exp2())
}

#[derive(Serialize, Deserialize)]
struct WireModel {
    format_version: u32,
    alphabet: Vec<String>,
    num_states: usize,
    start_state: usize,
    smoothing_lambda: f64,
    delta: Vec<usize>,
    counts: Vec<u64>,
    lineage: Vec<Option<(usize, usize)>>,
}

/// Serialize a model to its versioned JSON form.
pub fn model_to_json(fst: &Fst) -> String {
    let wire = WireModel {
        format_version: MODEL_FORMAT_VERSION,
        alphabet: fst.alphabet().names().to_vec(),
        num_states: fst.num_states(),
        start_state: fst.start_state(),
        smoothing_lambda: fst.smoothing_lambda(),
        delta: fst.delta_table().to_vec(),
        counts: fst.counts_table().to_vec(),
        lineage: fst.lineage().to_vec(),
    };
    serde_json::to_string(&wire).expect("model serializes")
}

/// Parse a model from its JSON form, validating shape and version.
pub fn model_from_json(text: &str) -> Result<Fst, FstError> {
    let wire: WireModel =
        serde_json::from_str(text).map_err(|e| FstError::Format(e.to_string()))?;
    if wire.format_version != MODEL_FORMAT_VERSION {
        return Err(FstError::UnsupportedVersion {
            found: wire.format_version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let alphabet = Alphabet::new(wire.alphabet)?;
    Fst::from_parts(
        alphabet,
        wire.num_states,
        wire.start_state,
        wire.delta,
        wire.counts,
        wire.smoothing_lambda,
        wire.lineage,
    )
}

/// Write a model to any byte sink (JSON plus a trailing newline).
pub fn write_model(fst: &Fst, mut writer: impl Write) -> Result<(), FstError> {
    writer.write_all(model_to_json(fst).as_bytes())?;
    writer.write_all(b"\n")?;
    Ok(())
}

/// Read a model from any byte source.
pub fn read_model(mut reader: impl Read) -> Result<Fst, FstError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    model_from_json(&text)
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

impl Fst {
    /// Render the model as a Graphviz digraph. Each node shows the state id
    /// and its `top_k` most probable emissions; each (state, symbol) edge
    /// with emission probability at or above `threshold` is drawn and
    /// labeled `symbol, p`. Output ordering is deterministic.
    pub fn to_dot_with(&self, top_k: usize, threshold: f64) -> String {
        assert!(top_k >= 1, "top_k must be at least 1");
        let mut out = String::new();
        out.push_str("digraph fst {\n");
        out.push_str("  rankdir=LR;\n");
        out.push_str("  node [shape=circle, fontsize=10];\n");
        for state in 0..self.num_states() {
            let pdf = self.emission_pdf(state).expect("valid state");
            let ranked = rank_masked(&pdf, None).expect("unmasked ranking");
            let mut label = format!("{state}");
            for &(symbol, p) in ranked.ranked.iter().take(top_k) {
                let name = self.alphabet().name(symbol).unwrap_or("?");
                label.push_str(&format!("\\n{} {:.2}", dot_escape(name), p));
            }
            let peripheries = if state == self.start_state() { 2 } else { 1 };
            out.push_str(&format!(
                "  s{state} [label=\"{label}\", peripheries={peripheries}];\n"
            ));
        }
        for state in 0..self.num_states() {
            let pdf = self.emission_pdf(state).expect("valid state");
            for symbol in 0..self.alphabet().len() {
                let p = pdf.probs()[symbol];
                if p < threshold {
                    continue;
                }
                let target = self.delta_raw(state, symbol);
                let name = self.alphabet().name(symbol).unwrap_or("?");
                out.push_str(&format!(
                    "  s{state} -> s{target} [label=\"{}, {:.2}\"];\n",
                    dot_escape(name),
                    p
                ));
            }
        }
        out.push_str("}\n");
        out
    }

    /// [`Fst::to_dot_with`] at the default display threshold.
    pub fn to_dot(&self, top_k: usize) -> String {
        self.to_dot_with(top_k, DOT_DISPLAY_THRESHOLD)
    }
}
