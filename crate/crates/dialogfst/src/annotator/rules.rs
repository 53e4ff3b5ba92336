//! Versioned plain-text rule files backing the lexical detectors.
//!
//! A rules file starts with a `version 1` line. Every other non-blank,
//! non-`#` line is one rule, tab-separated:
//!
//! ```text
//! act:agree	regex	\bdeal\b
//! strategy:hedge	literal	a bit
//! ```
//!
//! `regex` patterns use the `regex` crate syntax; `literal` patterns match as
//! case-insensitive substrings. Targets name either a dialog act
//! (`act:<label>`) or a rule-detected negotiation strategy
//! (`strategy:<label>`). Strategies whose detector is classifier-based cannot
//! be targeted by rules; their labels come from gold annotations instead.

use std::collections::HashMap;
use std::path::Path;
use std::sync::OnceLock;

use regex::RegexBuilder;
use thiserror::Error;

use super::{Detector, DialogAct, NegotiationStrategy};

pub const RULES_FORMAT_VERSION: u32 = 1;

const DEFAULT_RULES: &str = include_str!("default.rules");

#[derive(Debug, Error)]
pub enum RulesError {
    #[error("i/o error reading rules file: {0}")]
    Io(#[from] std::io::Error),
    #[error("rules file must start with a `version <n>` line")]
    MissingVersion,
    #[error("unsupported rules version {0:?} (this build reads version {RULES_FORMAT_VERSION})")]
    UnsupportedVersion(String),
    #[error("rules line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("rules line {line}: invalid pattern: {source}")]
    BadPattern {
        line: usize,
        #[source]
        source: regex::Error,
    },
}

/// How a rule pattern is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternKind {
    Regex,
    Literal,
}

/// Compiled rule lexicons for dialog acts and rule-detected strategies.
#[derive(Debug, Default)]
pub struct RuleSet {
    act_patterns: HashMap<DialogAct, Vec<regex::Regex>>,
    strategy_patterns: HashMap<NegotiationStrategy, Vec<regex::Regex>>,
}

impl RuleSet {
    /// The rules embedded in this build.
    pub fn embedded() -> &'static RuleSet {
        static DEFAULT: OnceLock<RuleSet> = OnceLock::new();
        DEFAULT.get_or_init(|| RuleSet::parse(DEFAULT_RULES).expect("embedded rules parse"))
    }

    /// Source text of the embedded rules, for writing out a starter file.
    pub fn embedded_source() -> &'static str {
        DEFAULT_RULES
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<RuleSet, RulesError> {
        RuleSet::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<RuleSet, RulesError> {
        let mut set = RuleSet::default();
        let mut version_seen = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            if !version_seen {
                let mut words = line.split_whitespace();
                match (words.next(), words.next(), words.next()) {
                    (Some("version"), Some(v), None) => {
                        if v != RULES_FORMAT_VERSION.to_string() {
                            return Err(RulesError::UnsupportedVersion(v.to_string()));
                        }
                        version_seen = true;
                        continue;
                    }
                    _ => return Err(RulesError::MissingVersion),
                }
            }
            set.add_line(idx + 1, line)?;
        }
        if !version_seen {
            return Err(RulesError::MissingVersion);
        }
        Ok(set)
    }

    fn add_line(&mut self, line_no: usize, line: &str) -> Result<(), RulesError> {
        let mut fields = line.splitn(3, '\t');
        let (target, kind, pattern) = match (fields.next(), fields.next(), fields.next()) {
            (Some(t), Some(k), Some(p)) if !p.is_empty() => (t.trim(), k.trim(), p),
            _ => {
                return Err(RulesError::Parse {
                    line: line_no,
                    reason: "expected `target<TAB>kind<TAB>pattern`".to_string(),
                })
            }
        };
        let kind = match kind {
            "regex" => PatternKind::Regex,
            "literal" => PatternKind::Literal,
            other => {
                return Err(RulesError::Parse {
                    line: line_no,
                    reason: format!("unknown pattern kind {other:?} (expected regex or literal)"),
                })
            }
        };
        let source = match kind {
            PatternKind::Regex => pattern.to_string(),
            PatternKind::Literal => regex::escape(pattern),
        };
        let compiled = RegexBuilder::new(&source)
            .case_insensitive(true)
            .build()
            .map_err(|source| RulesError::BadPattern { line: line_no, source })?;

        if let Some(label) = target.strip_prefix("act:") {
            let act = DialogAct::from_label(label).ok_or_else(|| RulesError::Parse {
                line: line_no,
                reason: format!("unknown dialog act {label:?}"),
            })?;
            self.act_patterns.entry(act).or_default().push(compiled);
        } else if let Some(label) = target.strip_prefix("strategy:") {
            let strategy =
                NegotiationStrategy::from_label(label).ok_or_else(|| RulesError::Parse {
                    line: line_no,
                    reason: format!("unknown negotiation strategy {label:?}"),
                })?;
            if strategy.detector() == Detector::Classifier {
                return Err(RulesError::Parse {
                    line: line_no,
                    reason: format!(
                        "{label} is classifier-detected; its labels come from gold annotations, \
                         not rule patterns"
                    ),
                });
            }
            self.strategy_patterns.entry(strategy).or_default().push(compiled);
        } else {
            return Err(RulesError::Parse {
                line: line_no,
                reason: format!("target {target:?} must start with `act:` or `strategy:`"),
            });
        }
        Ok(())
    }

    pub fn act_matches(&self, act: DialogAct, text: &str) -> bool {
        self.act_patterns.get(&act).is_some_and(|ps| ps.iter().any(|p| p.is_match(text)))
    }

    pub fn strategy_matches(&self, strategy: NegotiationStrategy, text: &str) -> bool {
        self.strategy_patterns.get(&strategy).is_some_and(|ps| ps.iter().any(|p| p.is_match(text)))
    }
}
