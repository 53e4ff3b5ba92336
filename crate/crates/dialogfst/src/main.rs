//! Command-line pipeline: annotate -> train -> eval, plus model inspection.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use dialogfst::annotator::{
    self, act_alphabet, strategy_alphabet, AnnotatedDialog, Annotator, GoldPolicy, RuleSet,
};
use dialogfst::corpus::{self, Schema, SplitSpec};
use dialogfst::eval::{
    compare_report, BigramRule, EvalConfig, EvalError, SetRule, SetRuleChoice,
};
use dialogfst::fst::{train_fst_with_log, Alphabet, Fst, SymbolId, TrainConfig};
use dialogfst::inference::{rank_masked, read_model, write_model};

#[derive(Parser)]
#[command(
    name = "dialogfst",
    about = "Learn and evaluate probabilistic finite-state models of dialog structure",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML config file; explicit flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed recorded in outputs and used wherever randomness is needed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for commands that write multiple files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Annotation rules file (defaults to the embedded rules).
    #[arg(long, global = true)]
    rules: Option<PathBuf>,
    /// Corpus schema.
    #[arg(long, global = true)]
    schema: Option<Schema>,
    /// Target number of states for training.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Additive smoothing for emission distributions.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Minimum emission mass required in each child of a split.
    #[arg(long = "min-support", global = true)]
    min_support: Option<u64>,
    /// Minimum entropy gain (bits) required to take a split.
    #[arg(long = "min-gain", global = true)]
    min_gain: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Annotate a JSONL corpus with dialog acts and strategies.
    Annotate {
        /// Input corpus (JSONL, one dialog per line).
        #[arg(long)]
        input: PathBuf,
        /// Annotated output file; stdout when omitted (and no split is
        /// configured).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Where classifier-detected strategy rows come from.
        #[arg(long = "gold-policy", default_value = "prefer-gold")]
        gold_policy: GoldPolicy,
    },
    /// Train a state-split model on an annotated corpus.
    Train {
        /// Annotated corpus (output of `annotate`).
        #[arg(long)]
        input: PathBuf,
        /// Which symbol stream to train on.
        #[arg(long, value_enum)]
        which: StreamArg,
        /// Model file to write; a training log lands next to it (`.log`).
        #[arg(long)]
        output: PathBuf,
    },
    /// Evaluate trained models against baselines on a held-out corpus.
    Eval {
        #[arg(long = "da-model")]
        da_model: PathBuf,
        #[arg(long = "strategy-model")]
        strategy_model: PathBuf,
        /// Annotated training corpus (baselines + ground-truth expansion).
        #[arg(long)]
        train: PathBuf,
        /// Annotated test corpus.
        #[arg(long)]
        test: PathBuf,
        /// Strategy-set readout rule.
        #[arg(long = "set-rule", value_enum, default_value = "auto")]
        set_rule: SetRuleArg,
        /// k for --set-rule top-k.
        #[arg(long = "top-k")]
        top_k: Option<usize>,
        /// Threshold for --set-rule threshold.
        #[arg(long)]
        threshold: Option<f64>,
        /// How predictions are judged against the expanded ground truth.
        #[arg(long = "bigram-rule", value_enum, default_value = "subset")]
        bigram_rule: BigramRuleArg,
    },
    /// Step a model over symbol names read from stdin.
    Step {
        #[arg(long)]
        model: PathBuf,
        /// How many top predictions to print per step.
        #[arg(long = "top-k", default_value_t = 3)]
        top_k: usize,
    },
    /// Render a model as a Graphviz digraph on stdout.
    ExportDot {
        #[arg(long)]
        model: PathBuf,
        /// Emission entries shown per node.
        #[arg(long = "top-k", default_value_t = 3)]
        top_k: usize,
        /// Hide edges below this emission probability.
        #[arg(long, default_value_t = dialogfst::inference::DOT_DISPLAY_THRESHOLD)]
        threshold: f64,
    },
    /// Print corpus statistics.
    Stats {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StreamArg {
    Da,
    Strategy,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SetRuleArg {
    Auto,
    TopK,
    Threshold,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BigramRuleArg {
    Subset,
    Exact,
}

// ---------------------------------------------------------------------------
// Config file

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    out: Option<PathBuf>,
    rules: Option<PathBuf>,
    schema: Option<Schema>,
    split: Option<SplitSection>,
    train: Option<TrainSection>,
    eval: Option<EvalSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitSection {
    train: f64,
    val: f64,
    test: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainSection {
    da: Option<TrainParams>,
    strategy: Option<TrainParams>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainParams {
    k: Option<usize>,
    lambda: Option<f64>,
    min_support: Option<u64>,
    min_gain: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalSection {
    set_rule: Option<String>,
    top_k: Option<usize>,
    threshold: Option<f64>,
    bigram_rule: Option<String>,
    baseline_lambda: Option<f64>,
}

/// Everything resolved from flags and config, flags winning.
struct Resolved {
    common: CommonArgs,
    file: FileConfig,
}

impl Resolved {
    fn load(common: CommonArgs) -> Result<Resolved> {
        let file = match &common.config {
            None => FileConfig::default(),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read config file {}", path.display()))?;
                toml::from_str(&text)
                    .with_context(|| format!("cannot parse config file {}", path.display()))?
            }
        };
        Ok(Resolved { common, file })
    }

    fn schema(&self) -> Schema {
        self.common.schema.or(self.file.schema).unwrap_or(Schema::Negotiation)
    }

    fn seed(&self) -> u64 {
        self.common.seed.or(self.file.seed).unwrap_or(0)
    }

    fn out_dir(&self) -> PathBuf {
        self.common
            .out
            .clone()
            .or_else(|| self.file.out.clone())
            .unwrap_or_else(|| PathBuf::from("."))
    }

    fn rules(&self) -> Result<RuleSet> {
        let path = self.common.rules.as_ref().or(self.file.rules.as_ref());
        match path {
            None => RuleSet::parse(RuleSet::embedded_source())
                .context("embedded rules failed to parse"),
            Some(path) => RuleSet::from_path(path)
                .with_context(|| format!("cannot load rules file {}", path.display())),
        }
    }

    fn split_spec(&self) -> Result<Option<SplitSpec>> {
        match &self.file.split {
            None => Ok(None),
            Some(s) => Ok(Some(SplitSpec::new(s.train, s.val, s.test, self.seed())?)),
        }
    }

    fn train_config(&self, which: StreamArg) -> TrainConfig {
        let section = self.file.train.as_ref().and_then(|t| match which {
            StreamArg::Da => t.da,
            StreamArg::Strategy => t.strategy,
        });
        let section = section.unwrap_or_default();
        let mut config = TrainConfig::new(self.common.k.or(section.k).unwrap_or(3));
        if let Some(lambda) = self.common.lambda.or(section.lambda) {
            config.smoothing_lambda = lambda;
        }
        if let Some(min_support) = self.common.min_support.or(section.min_support) {
            config.min_child_support = min_support;
        }
        if let Some(min_gain) = self.common.min_gain.or(section.min_gain) {
            config.min_entropy_gain = min_gain;
        }
        config
    }

    fn eval_config(
        &self,
        set_rule: SetRuleArg,
        top_k: Option<usize>,
        threshold: Option<f64>,
        bigram_rule: BigramRuleArg,
    ) -> Result<EvalConfig> {
        let section = self.file.eval.as_ref();
        let mut config = EvalConfig { seed: Some(self.seed()), ..EvalConfig::default() };
        if let Some(lambda) = section.and_then(|e| e.baseline_lambda) {
            config.baseline_lambda = lambda;
        }
        let rule_name = match set_rule {
            SetRuleArg::Auto => {
                section.and_then(|e| e.set_rule.clone()).unwrap_or_else(|| "auto".to_string())
            }
            SetRuleArg::TopK => "top_k".to_string(),
            SetRuleArg::Threshold => "threshold".to_string(),
        };
        config.set_rule = match rule_name.as_str() {
            "auto" => SetRuleChoice::Auto,
            "top_k" | "top-k" => {
                let k = top_k
                    .or_else(|| section.and_then(|e| e.top_k))
                    .context("--top-k (or eval.top_k in the config) required for top_k")?;
                SetRuleChoice::Fixed(SetRule::TopK(k))
            }
            "threshold" => {
                let tau = threshold
                    .or_else(|| section.and_then(|e| e.threshold))
                    .context("--threshold (or eval.threshold in the config) required")?;
                SetRuleChoice::Fixed(SetRule::Threshold(tau))
            }
            other => bail!("unknown set rule {other:?} (expected auto, top_k, or threshold)"),
        };
        let bigram_name = match bigram_rule {
            BigramRuleArg::Subset => section
                .and_then(|e| e.bigram_rule.clone())
                .unwrap_or_else(|| "subset".to_string()),
            BigramRuleArg::Exact => "exact".to_string(),
        };
        config.bigram_rule = match bigram_name.as_str() {
            "subset" => BigramRule::Subset,
            "exact" => BigramRule::Exact,
            other => bail!("unknown bigram rule {other:?} (expected subset or exact)"),
        };
        Ok(config)
    }
}

// ---------------------------------------------------------------------------

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let resolved = Resolved::load(cli.common)?;
    match cli.command {
        Command::Annotate { input, output, gold_policy } => {
            cmd_annotate(&resolved, &input, output.as_deref(), gold_policy)
        }
        Command::Train { input, which, output } => cmd_train(&resolved, &input, which, &output),
        Command::Eval {
            da_model,
            strategy_model,
            train,
            test,
            set_rule,
            top_k,
            threshold,
            bigram_rule,
        } => {
            let config = resolved.eval_config(set_rule, top_k, threshold, bigram_rule)?;
            cmd_eval(&resolved, &da_model, &strategy_model, &train, &test, &config)
        }
        Command::Step { model, top_k } => cmd_step(&model, top_k),
        Command::ExportDot { model, top_k, threshold } => {
            let fst = load_model(&model)?;
            print!("{}", fst.to_dot_with(top_k.max(1), threshold));
            Ok(())
        }
        Command::Stats { input } => cmd_stats(&resolved, &input),
    }
}

fn open_corpus(path: &Path, schema: Schema) -> Result<Vec<corpus::Dialog>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    corpus::load_corpus(BufReader::new(file), schema)
        .with_context(|| format!("failed to load corpus {}", path.display()))
}

fn load_model(path: &Path) -> Result<Fst> {
    let file = File::open(path).with_context(|| format!("cannot open model {}", path.display()))?;
    read_model(BufReader::new(file))
        .with_context(|| format!("failed to read model {}", path.display()))
}

fn write_dialogs(dialogs: &[AnnotatedDialog], path: &Path) -> Result<()> {
    let plain: Vec<corpus::Dialog> = dialogs.iter().map(AnnotatedDialog::to_dialog).collect();
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    corpus::write_corpus(&plain, BufWriter::new(file))?;
    Ok(())
}

fn cmd_annotate(
    resolved: &Resolved,
    input: &Path,
    output: Option<&Path>,
    gold_policy: GoldPolicy,
) -> Result<()> {
    let schema = resolved.schema();
    let rules = resolved.rules()?;
    let annotator = Annotator::with_rules(schema, &rules);
    let dialogs = open_corpus(input, schema)?;
    let annotated = annotator.annotate_corpus(&dialogs, gold_policy);
    print_annotation_summary(&annotated);

    match resolved.split_spec()? {
        Some(spec) => {
            let out_dir = resolved.out_dir();
            std::fs::create_dir_all(&out_dir)
                .with_context(|| format!("cannot create {}", out_dir.display()))?;
            let plain: Vec<corpus::Dialog> =
                annotated.iter().map(AnnotatedDialog::to_dialog).collect();
            let (train, val, test) = corpus::split_corpus(plain, &spec)?;
            for (name, part) in [("train", &train), ("val", &val), ("test", &test)] {
                let path = out_dir.join(format!("annotated.{name}.jsonl"));
                let file = File::create(&path)
                    .with_context(|| format!("cannot create {}", path.display()))?;
                corpus::write_corpus(part, BufWriter::new(file))?;
                eprintln!("wrote {} dialogs to {}", part.len(), path.display());
            }
            eprintln!("split seed: {}", spec.seed);
        }
        None => match output {
            Some(path) => {
                write_dialogs(&annotated, path)?;
                eprintln!("wrote {} dialogs to {}", annotated.len(), path.display());
            }
            None => {
                let plain: Vec<corpus::Dialog> =
                    annotated.iter().map(AnnotatedDialog::to_dialog).collect();
                let stdout = io::stdout();
                corpus::write_corpus(&plain, stdout.lock())?;
            }
        },
    }
    Ok(())
}

fn print_annotation_summary(annotated: &[AnnotatedDialog]) {
    let mut act_counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut strategy_counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut warnings = 0usize;
    for dialog in annotated {
        warnings += dialog.warnings.len();
        for turn in &dialog.turns {
            *act_counts.entry(turn.act.as_str()).or_default() += 1;
            for strategy in &turn.strategies {
                *strategy_counts.entry(strategy.as_str()).or_default() += 1;
            }
        }
    }
    eprintln!("dialog act frequencies:");
    for (label, count) in &act_counts {
        eprintln!("  {label:<22} {count}");
    }
    eprintln!("strategy frequencies:");
    for (label, count) in &strategy_counts {
        eprintln!("  {label:<22} {count}");
    }
    if warnings > 0 {
        eprintln!("{warnings} annotation warning(s); see dialog records");
    }
}

fn load_annotated(path: &Path, schema: Schema, require_strategies: bool) -> Result<Vec<AnnotatedDialog>> {
    let dialogs = open_corpus(path, schema)?;
    dialogs
        .iter()
        .map(|d| {
            AnnotatedDialog::from_gold(d, schema, require_strategies)
                .with_context(|| format!("{} is not fully annotated", path.display()))
        })
        .collect()
}

fn encode_corpus(
    alphabet: &Alphabet,
    dialogs: &[AnnotatedDialog],
    stream: StreamArg,
) -> Result<Vec<Vec<SymbolId>>> {
    dialogs
        .iter()
        .map(|d| {
            let names = match stream {
                StreamArg::Da => annotator::act_sequence(d),
                StreamArg::Strategy => annotator::strategy_sequence(d),
            };
            alphabet
                .encode(names.iter().map(String::as_str))
                .context("symbol missing from the canonical alphabet")
        })
        .collect()
}

fn cmd_train(resolved: &Resolved, input: &Path, which: StreamArg, output: &Path) -> Result<()> {
    let schema = resolved.schema();
    let config = resolved.train_config(which);
    if config.target_states < 1 {
        bail!("--k must be at least 1");
    }
    let annotated = load_annotated(input, schema, which == StreamArg::Strategy)?;
    if annotated.is_empty() {
        bail!("training corpus {} is empty", input.display());
    }
    let alphabet = match which {
        StreamArg::Da => act_alphabet(schema),
        StreamArg::Strategy => strategy_alphabet(schema),
    };
    let sequences = encode_corpus(&alphabet, &annotated, which)?;
    let tokens: usize = sequences.iter().map(Vec::len).sum();
    let (fst, log) = train_fst_with_log(&sequences, alphabet, &config)?;

    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let file =
        File::create(output).with_context(|| format!("cannot create {}", output.display()))?;
    write_model(&fst, BufWriter::new(file))?;

    let log_path = output.with_extension(match output.extension() {
        Some(ext) => format!("{}.log", ext.to_string_lossy()),
        None => "log".to_string(),
    });
    let mut log_file = BufWriter::new(
        File::create(&log_path)
            .with_context(|| format!("cannot create {}", log_path.display()))?,
    );
    writeln!(log_file, "# dialogfst training log")?;
    writeln!(log_file, "# seed: {}", resolved.seed())?;
    writeln!(
        log_file,
        "# stream: {}",
        match which {
            StreamArg::Da => "da",
            StreamArg::Strategy => "strategy",
        }
    )?;
    writeln!(
        log_file,
        "# config: k={} lambda={} min_support={} min_gain={}",
        config.target_states,
        config.smoothing_lambda,
        config.min_child_support,
        config.min_entropy_gain
    )?;
    writeln!(log_file, "# corpus: {} sequences, {tokens} tokens", sequences.len())?;
    for record in &log {
        writeln!(
            log_file,
            "split {}: state={} symbol={} parent_entropy={:.6} weighted={:.6} gain={:.6} \
             support=({},{}) states={}",
            record.step,
            record.state,
            record.symbol_name,
            record.parent_entropy,
            record.weighted_child_entropy,
            record.gain,
            record.support.0,
            record.support.1,
            record.num_states_after,
        )?;
    }
    writeln!(log_file, "# final states: {}", fst.num_states())?;

    eprintln!(
        "trained {} states ({} splits) on {} tokens; model: {}",
        fst.num_states(),
        log.len(),
        tokens,
        output.display()
    );
    Ok(())
}

fn cmd_eval(
    resolved: &Resolved,
    da_model: &Path,
    strategy_model: &Path,
    train: &Path,
    test: &Path,
    config: &EvalConfig,
) -> Result<()> {
    let schema = resolved.schema();
    let da = load_model(da_model)?;
    let strategy = load_model(strategy_model)?;
    let train_dialogs = load_annotated(train, schema, true)?;
    let test_dialogs = load_annotated(test, schema, true)?;

    let report = match compare_report(&da, &strategy, &train_dialogs, &test_dialogs, config) {
        Ok(report) => report,
        Err(EvalError::AlphabetMismatch { symbol }) => {
            eprintln!("alphabet mismatch on symbol {symbol:?}");
            eprintln!("da model alphabet: {:?}", da.alphabet().names());
            eprintln!("strategy model alphabet: {:?}", strategy.alphabet().names());
            bail!("model alphabets do not cover the evaluation corpus");
        }
        Err(err) => return Err(err.into()),
    };

    let out_dir = resolved.out_dir();
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    let json_path = out_dir.join("report.json");
    let mut json_file = BufWriter::new(
        File::create(&json_path)
            .with_context(|| format!("cannot create {}", json_path.display()))?,
    );
    serde_json::to_writer_pretty(&mut json_file, &report)?;
    json_file.write_all(b"\n")?;
    json_file.flush()?;

    let table = report.to_table();
    let txt_path = out_dir.join("report.txt");
    std::fs::write(&txt_path, &table)
        .with_context(|| format!("cannot create {}", txt_path.display()))?;

    print!("{table}");
    eprintln!("reports: {} and {}", json_path.display(), txt_path.display());
    Ok(())
}

fn cmd_step(model: &Path, top_k: usize) -> Result<()> {
    let fst = load_model(model)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut state = fst.start_state();
    print_state(&fst, state, top_k, &mut out)?;
    for line in io::stdin().lock().lines() {
        let line = line?;
        let name = line.trim();
        if name.is_empty() {
            continue;
        }
        if name == "reset" {
            state = fst.start_state();
            print_state(&fst, state, top_k, &mut out)?;
            continue;
        }
        match fst.alphabet().id(name) {
            None => {
                eprintln!("unknown symbol {name:?}; alphabet:");
                for known in fst.alphabet().names() {
                    eprintln!("  {known}");
                }
            }
            Some(id) => {
                state = fst.step(state, id)?;
                print_state(&fst, state, top_k, &mut out)?;
            }
        }
    }
    Ok(())
}

fn print_state(fst: &Fst, state: usize, top_k: usize, out: &mut impl Write) -> Result<()> {
    let prediction = rank_masked(&fst.emission_pdf(state)?, None)?;
    let shown: Vec<String> = prediction
        .ranked
        .iter()
        .take(top_k.max(1))
        .map(|&(id, p)| format!("{} {:.4}", fst.alphabet().name(id).unwrap_or("?"), p))
        .collect();
    writeln!(out, "state={state} top: {}", shown.join(" | "))?;
    Ok(())
}

fn cmd_stats(resolved: &Resolved, input: &Path) -> Result<()> {
    let dialogs = open_corpus(input, resolved.schema())?;
    let stats = corpus::corpus_stats(&dialogs);
    println!("num_dialogs: {}", stats.num_dialogs);
    println!("mean_turns: {:.4}", stats.mean_turns);
    println!("vocab_size: {}", stats.vocab_size);
    Ok(())
}
