mod commands;
mod output;

use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use srlprune::model::{Mode, PruneMode, RunConfig};
use srlprune::SyntaxSource;

use output::{classify, error_line, Usage};

#[derive(Parser)]
#[command(
    name = "srlprune",
    version,
    about = "Dependency semantic role labeling with syntactic-rule argument pruning"
)]
struct Cli {
    /// Worker threads for parallel stages. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Seed for every random choice (default 1).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a CoNLL-2009 file parses, forms trees and round-trips.
    Validate {
        /// Input file, `-` for stdin.
        #[arg(default_value = "-")]
        input: String,
    },
    /// Sentence, token, predicate and argument counts.
    Stats {
        #[arg(default_value = "-")]
        input: String,
    },
    /// Generate a synthetic corpus with a known distance-tuple distribution.
    Synth(SynthArgs),
    /// Mine distance-tuple frequencies and select a pruning rule.
    ExtractRules(ExtractArgs),
    /// Fraction of gold arguments a rule keeps, and the candidate reduction.
    Coverage(CoverageArgs),
    /// Candidate and gold-argument counts under a pruning strategy.
    PruneStats(PruneStatsArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Label a corpus with a trained checkpoint.
    Predict(PredictArgs),
    /// Labeled precision, recall and F1 of a prediction file.
    Evaluate(EvaluateArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Coverage and reduction for a range of rule sizes.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    sentences: usize,
    #[arg(long)]
    min_len: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    /// Tuple weights, e.g. `0,1:0.5;1,2:0.3;0,2:0.2`.
    #[arg(long)]
    tuples: Option<String>,
    /// Comma-separated role labels.
    #[arg(long)]
    roles: Option<String>,
    /// Comma-separated sense suffixes.
    #[arg(long)]
    senses: Option<String>,
    #[arg(long)]
    max_predicates: Option<usize>,
    #[arg(long)]
    max_arguments: Option<usize>,
    #[arg(long)]
    vocab: Option<usize>,
    #[arg(long)]
    pos_tags: Option<usize>,
    /// Probability of replacing a predicted head with a random other token.
    #[arg(long)]
    noise: Option<f64>,
    /// Output file (default stdout).
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("select").args(["top_k", "coverage"])))]
struct ExtractArgs {
    #[arg(long)]
    train: String,
    #[arg(long, default_value = "en")]
    language: String,
    #[arg(long, default_value = "pred")]
    syntax: SyntaxSource,
    /// Keep the k most frequent tuples.
    #[arg(long)]
    top_k: Option<usize>,
    /// Keep the shortest prefix covering this fraction of arguments
    /// (default 0.99).
    #[arg(long)]
    coverage: Option<f64>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct CoverageArgs {
    #[arg(long)]
    rules: String,
    #[arg(long)]
    corpus: String,
    /// Defaults to the syntax source recorded in the rule file.
    #[arg(long)]
    syntax: Option<SyntaxSource>,
    /// Override the rule file's selected k.
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("strategy").args(["rules", "korder", "none"]).required(true)))]
struct PruneStatsArgs {
    #[arg(long)]
    corpus: String,
    #[arg(long)]
    rules: Option<String>,
    /// k-order baseline: keep tokens at most k arcs below a predicate ancestor.
    #[arg(long)]
    korder: Option<usize>,
    /// No pruning.
    #[arg(long)]
    none: bool,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    syntax: Option<SyntaxSource>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    rules: String,
    #[arg(long)]
    corpus: String,
    #[arg(long)]
    syntax: Option<SyntaxSource>,
    /// Comma-separated k values (default every k from 0 to the number of
    /// tuples).
    #[arg(long, value_delimiter = ',')]
    ks: Vec<usize>,
    #[arg(long)]
    out: Option<String>,
}

/// Hyperparameter flags shared by train, predict and gradcheck. Applied
/// after `--config` and `--set`.
#[derive(Args, Default)]
struct ModelArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<String>,
    /// Set any config key, e.g. `--set lstm_keep=0.9`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    language: Option<String>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    syntax: Option<SyntaxSource>,
    #[arg(long)]
    prune: Option<PruneMode>,
    #[arg(long)]
    korder_k: Option<usize>,
    #[arg(long)]
    rule_k: Option<usize>,
    #[arg(long)]
    rule_coverage: Option<f64>,
    #[arg(long)]
    no_pos: bool,
    #[arg(long)]
    no_lemma: bool,
    /// Word vectors in text format.
    #[arg(long)]
    pretrained: Option<String>,
    #[arg(long)]
    fine_tune_pretrained: bool,
    /// Per-token contextual vectors aligned with the input corpus.
    #[arg(long)]
    contextual: Option<String>,
    #[arg(long)]
    lstm_layers: Option<usize>,
    #[arg(long)]
    lstm_hidden: Option<usize>,
    #[arg(long)]
    mlp_dim: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Stop once development F1 reaches this value.
    #[arg(long)]
    stop_f1: Option<f64>,
    #[arg(long)]
    eval_every: Option<usize>,
}

impl ModelArgs {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut put = |key: &'static str, value: Option<String>| {
            if let Some(v) = value {
                out.push((key, v));
            }
        };
        put("language", self.language.clone());
        put("mode", self.mode.map(|m| m.as_str().to_owned()));
        put("syntax", self.syntax.map(|s| s.as_str().to_owned()));
        put("prune", self.prune.map(|p| p.as_str().to_owned()));
        put("korder_k", self.korder_k.map(|v| v.to_string()));
        put("rule_k", self.rule_k.map(|v| v.to_string()));
        put("rule_coverage", self.rule_coverage.map(|v| v.to_string()));
        put("use_pos", self.no_pos.then(|| "false".to_owned()));
        put("use_lemma", self.no_lemma.then(|| "false".to_owned()));
        put("pretrained", self.pretrained.clone());
        put("fine_tune_pretrained", self.fine_tune_pretrained.then(|| "true".to_owned()));
        put("contextual", self.contextual.clone());
        put("lstm_layers", self.lstm_layers.map(|v| v.to_string()));
        put("lstm_hidden", self.lstm_hidden.map(|v| v.to_string()));
        put("mlp_dim", self.mlp_dim.map(|v| v.to_string()));
        put("epochs", self.epochs.map(|v| v.to_string()));
        put("batch_size", self.batch_size.map(|v| v.to_string()));
        put("lr", self.lr.map(|v| v.to_string()));
        put("stop_f1", self.stop_f1.map(|v| v.to_string()));
        put("eval_every", self.eval_every.map(|v| v.to_string()));
        out
    }

    /// Applies `--config`, then `--set`, then the typed flags.
    fn apply(&self, config: &mut RunConfig) -> anyhow::Result<()> {
        if let Some(path) = &self.config {
            let text = commands::read_text(path)?;
            config
                .apply_text(&text)
                .map_err(|e| anyhow::Error::new(e).context(format!("config file {path}")))?;
        }
        for item in &self.sets {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Usage(format!("--set expects KEY=VALUE, got {item:?}")))?;
            config.set(key.trim(), value.trim())?;
        }
        for (key, value) in self.overrides() {
            config.set(key, &value)?;
        }
        Ok(())
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    train: String,
    #[arg(long)]
    dev: Option<String>,
    /// Contextual vectors aligned with the development corpus.
    #[arg(long)]
    dev_contextual: Option<String>,
    /// Rule file from extract-rules. Without it rules are mined from the
    /// training corpus.
    #[arg(long)]
    rules: Option<String>,
    /// Checkpoint path.
    #[arg(long)]
    out: String,
    /// Development score report path (needs --dev).
    #[arg(long)]
    report: Option<String>,
}

#[derive(Args)]
struct PredictArgs {
    /// Checkpoint written by train.
    #[arg(long)]
    model: String,
    #[arg(long, default_value = "-")]
    input: String,
    #[arg(long)]
    out: Option<String>,
    /// Flags checked against the checkpoint; architecture mismatches are
    /// refused.
    #[command(flatten)]
    flags: ModelArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    gold: String,
    #[arg(long)]
    pred: String,
    /// Count predicate senses as scored items.
    #[arg(long)]
    senses: bool,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Draw instances from this corpus instead of synthetic sentences.
    #[arg(long)]
    corpus: Option<String>,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Tokens per synthetic sentence.
    #[arg(long, default_value_t = 5)]
    tokens: usize,
    /// Coordinates checked per trial.
    #[arg(long, default_value_t = 40)]
    samples: usize,
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let text = text.split("\nUsage:").next().unwrap_or(&text);
            let text = text.strip_prefix("error: ").unwrap_or(text);
            eprintln!("{}", error_line(2, "usage", text));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, kind) = classify(&e);
            eprintln!("{}", error_line(code, kind, &format!("{e:#}")));
            ExitCode::from(code)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if cli.threads == 0 {
        return Err(Usage("--threads must be positive".into()).into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()?;
    let seed = cli.seed.unwrap_or(1);
    match &cli.command {
        Command::Validate { input } => commands::validate(input),
        Command::Stats { input } => commands::stats(input),
        Command::Synth(a) => commands::synth(a, seed),
        Command::ExtractRules(a) => commands::extract_rules(a),
        Command::Coverage(a) => commands::coverage(a),
        Command::PruneStats(a) => commands::prune_stats(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Train(a) => commands::train(a, cli),
        Command::Predict(a) => commands::predict(a, cli),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Gradcheck(a) => commands::gradcheck(a, cli),
    }
}
