use std::fs::{self, File};
use std::io::{self, BufReader, Read};

use anyhow::{bail, Context, Result};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use srlprune::conll::to_conll09_string;
use srlprune::model::embed::{ContextualEmbeddings, PretrainedVectors};
use srlprune::model::{self, Mode, PruneMode, RunConfig, TrainEvent};
use srlprune::neural::Checkpoint;
use srlprune::rules::RuleSet;
use srlprune::synth::{parse_tuple_weights, SynthError};
use srlprune::{
    corpus_stats, mine_rules, parse_conll09, prune_stats as stats_under, score, DepTree,
    Pruning, ScoreReport, Sentence, SrlModel, SynthConfig, SyntaxSource,
};

use crate::output::{emit, log, report, NumericFailure, Usage};
use crate::{
    Cli, CoverageArgs, EvaluateArgs, ExtractArgs, GradcheckArgs, PredictArgs, PruneStatsArgs,
    SweepArgs, SynthArgs, TrainArgs,
};

pub fn read_text(path: &str) -> Result<String> {
    if path == "-" {
        let mut text = String::new();
        io::stdin()
            .read_to_string(&mut text)
            .context("reading stdin")?;
        Ok(text)
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {path}"))
    }
}

fn read_corpus(path: &str) -> Result<Vec<Sentence>> {
    let text = read_text(path)?;
    parse_conll09(&text).with_context(|| format!("parsing {path}"))
}

fn read_rules(path: &str) -> Result<RuleSet> {
    let text = read_text(path)?;
    RuleSet::from_text(&text).with_context(|| format!("parsing {path}"))
}

fn read_contextual(path: &str, corpus: &[Sentence]) -> Result<ContextualEmbeddings> {
    let file = File::open(path).with_context(|| format!("opening {path}"))?;
    ContextualEmbeddings::read(BufReader::new(file), corpus)
        .with_context(|| format!("reading contextual vectors {path}"))
}

fn read_pretrained(path: &str) -> Result<PretrainedVectors> {
    let file = File::open(path).with_context(|| format!("opening {path}"))?;
    PretrainedVectors::read(BufReader::new(file))
        .with_context(|| format!("reading word vectors {path}"))
}

fn config_header(config: &RunConfig) -> Vec<(String, String)> {
    config
        .entries()
        .into_iter()
        .map(|(k, v)| (format!("config.{k}"), v))
        .collect()
}

fn score_columns() -> [&'static str; 8] {
    ["precision", "recall", "f1", "pd", "correct", "predicted", "gold", "senses_skipped"]
}

fn score_row(r: &ScoreReport) -> Vec<String> {
    let mut row: Vec<String> = r.line().split('\t').map(str::to_owned).collect();
    row.extend([r.correct, r.predicted, r.gold, r.senses_skipped].map(|v| v.to_string()));
    row
}

/// The rule set for rule pruning: the configured file, or rules mined from
/// `train`. A rule-k in the config overrides the file's selection; with no
/// selection at all the coverage target decides.
fn resolve_rules(config: &RunConfig, train: &[Sentence]) -> Result<Option<RuleSet>> {
    if config.prune != PruneMode::Rule {
        return Ok(None);
    }
    let rules = match &config.rules {
        Some(path) => read_rules(path)?,
        None => mine_rules(train, config.syntax, &config.language)?,
    };
    let rules = match (config.rule_k, rules.k()) {
        (Some(k), _) => rules.select_top_k(k)?,
        (None, Some(_)) => rules,
        (None, None) => rules.select_by_coverage(config.rule_coverage)?,
    };
    Ok(Some(rules))
}

pub fn validate(input: &str) -> Result<()> {
    let corpus = read_corpus(input)?;
    let again = parse_conll09(&to_conll09_string(&corpus)).context("re-reading written corpus")?;
    if again != corpus {
        bail!("{input}: corpus does not survive a write/read round trip");
    }
    for (i, s) in corpus.iter().enumerate() {
        for source in [SyntaxSource::Gold, SyntaxSource::Predicted] {
            DepTree::from_sentence(s, source)
                .with_context(|| format!("{input}: sentence {} ({source} syntax)", i + 1))?;
        }
    }
    println!("status=ok {}", corpus_stats(&corpus));
    Ok(())
}

pub fn stats(input: &str) -> Result<()> {
    let corpus = read_corpus(input)?;
    let s = corpus_stats(&corpus);
    let text = report(
        &[("input".into(), input.into())],
        &["sentences", "tokens", "predicates", "arguments"],
        &[[s.n_sentences, s.n_tokens, s.n_predicates, s.n_arguments]
            .map(|v| v.to_string())
            .to_vec()],
    );
    emit(None, text.as_bytes())
}

fn list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(str::to_owned)
        .collect()
}

pub fn synth(a: &SynthArgs, seed: u64) -> Result<()> {
    let mut c = SynthConfig {
        seed,
        n_sentences: a.sentences,
        ..SynthConfig::default()
    };
    if let Some(v) = a.min_len {
        c.min_len = v;
    }
    if let Some(v) = a.max_len {
        c.max_len = v;
    }
    if let Some(t) = &a.tuples {
        c.tuples = parse_tuple_weights(t).map_err(|e| Usage(e.to_string()))?;
    }
    if let Some(r) = &a.roles {
        c.roles = list(r);
    }
    if let Some(s) = &a.senses {
        c.senses = list(s);
    }
    if let Some(v) = a.max_predicates {
        c.max_predicates = v;
    }
    if let Some(v) = a.max_arguments {
        c.max_arguments = v;
    }
    if let Some(v) = a.vocab {
        c.vocab_size = v;
    }
    if let Some(v) = a.pos_tags {
        c.n_pos = v;
    }
    if let Some(v) = a.noise {
        c.pred_noise = v;
    }
    let out = srlprune::synth_corpus(&c)?;
    log(&[
        ("event", &"synth"),
        ("seed", &seed),
        ("sentences", &out.truth.stats.n_sentences),
        ("arguments", &out.truth.stats.n_arguments),
    ]);
    emit(a.out.as_deref(), to_conll09_string(&out.corpus).as_bytes())
}

pub fn extract_rules(a: &ExtractArgs) -> Result<()> {
    let corpus = read_corpus(&a.train)?;
    let mut config = RunConfig {
        language: a.language.clone(),
        syntax: a.syntax,
        rule_k: a.top_k,
        train: Some(a.train.clone()),
        ..RunConfig::default()
    };
    if let Some(c) = a.coverage {
        config.rule_coverage = c;
    }
    let mined = mine_rules(&corpus, a.syntax, &a.language)?;
    let mut rules = match a.top_k {
        Some(k) => mined.select_top_k(k)?,
        None => mined.select_by_coverage(config.rule_coverage)?,
    };
    rules.meta.extend(config_header(&config));
    let active = rules.active()?;
    let cov = srlprune::coverage(&active, &corpus, a.syntax)?;
    log(&[
        ("event", &"rules"),
        ("tuples", &rules.len()),
        ("k", &active.len()),
        ("coverage", &format!("{:.6}", cov.coverage())),
        ("reduction", &format!("{:.6}", cov.reduction())),
    ]);
    emit(a.out.as_deref(), rules.to_text().as_bytes())
}

fn reselect(rules: RuleSet, top_k: Option<usize>) -> Result<RuleSet> {
    Ok(match top_k {
        Some(k) => rules.select_top_k(k)?,
        None => rules,
    })
}

pub fn coverage(a: &CoverageArgs) -> Result<()> {
    let rules = reselect(read_rules(&a.rules)?, a.top_k)?;
    let corpus = read_corpus(&a.corpus)?;
    let syntax = a.syntax.unwrap_or(rules.syntax);
    let c = srlprune::coverage(&rules.active()?, &corpus, syntax)?;
    let text = report(
        &[
            ("rules".into(), a.rules.clone()),
            ("corpus".into(), a.corpus.clone()),
            ("syntax".into(), syntax.to_string()),
        ],
        &["k", "coverage", "reduction", "covered", "arguments", "retained_pairs", "candidate_pairs"],
        &[vec![
            rules.k().unwrap_or(0).to_string(),
            format!("{:.6}", c.coverage()),
            format!("{:.6}", c.reduction()),
            c.covered.to_string(),
            c.arguments.to_string(),
            c.retained_pairs.to_string(),
            c.candidate_pairs.to_string(),
        ]],
    );
    emit(a.out.as_deref(), text.as_bytes())
}

pub fn prune_stats(a: &PruneStatsArgs) -> Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    let mut header = vec![("corpus".to_owned(), a.corpus.clone())];
    let (pruning, default_syntax) = if let Some(path) = &a.rules {
        let rules = reselect(read_rules(path)?, a.top_k)?;
        header.push(("rules".into(), path.clone()));
        header.push(("k".into(), rules.k().unwrap_or(0).to_string()));
        (Pruning::Rule(rules.active()?), rules.syntax)
    } else if let Some(k) = a.korder {
        (Pruning::KOrder(k), SyntaxSource::Predicted)
    } else {
        (Pruning::Off, SyntaxSource::Predicted)
    };
    let syntax = a.syntax.unwrap_or(default_syntax);
    header.push(("strategy".into(), pruning.name().into()));
    header.push(("syntax".into(), syntax.to_string()));
    let r = stats_under(&corpus, &pruning, syntax)?;
    for (t, n) in &r.lost_by_tuple {
        header.push((format!("lost.{},{}", t.pred, t.arg), n.to_string()));
    }
    let text = report(
        &header,
        &[
            "candidate_pairs",
            "retained_pairs",
            "reduction",
            "gold_arguments",
            "gold_retained",
            "recall",
            "positive_rate",
            "retained_positive_rate",
        ],
        &[vec![
            r.candidate_pairs.to_string(),
            r.retained_pairs.to_string(),
            format!("{:.6}", r.reduction()),
            r.gold_arguments.to_string(),
            r.gold_retained.to_string(),
            format!("{:.6}", r.recall()),
            format!("{:.6}", r.positive_rate()),
            format!("{:.6}", r.retained_positive_rate()),
        ]],
    );
    emit(a.out.as_deref(), text.as_bytes())
}

pub fn sweep(a: &SweepArgs) -> Result<()> {
    let rules = read_rules(&a.rules)?;
    let corpus = read_corpus(&a.corpus)?;
    let syntax = a.syntax.unwrap_or(rules.syntax);
    let ks: Vec<usize> = if a.ks.is_empty() {
        (0..=rules.len()).collect()
    } else {
        a.ks.clone()
    };
    let rows = srlprune::sweep(&rules, &corpus, syntax, &ks)?
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                format!("{:.6}", r.coverage),
                format!("{:.6}", r.reduction),
            ]
        })
        .collect::<Vec<_>>();
    let text = report(
        &[
            ("rules".into(), a.rules.clone()),
            ("corpus".into(), a.corpus.clone()),
            ("syntax".into(), syntax.to_string()),
        ],
        &["k", "coverage", "reduction"],
        &rows,
    );
    emit(a.out.as_deref(), text.as_bytes())
}

fn run_config(args: &crate::ModelArgs, cli: &Cli) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    args.apply(&mut config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.threads = cli.threads;
    Ok(config)
}

pub fn train(a: &TrainArgs, cli: &Cli) -> Result<()> {
    let mut config = run_config(&a.model, cli)?;
    config.train = Some(a.train.clone());
    if let Some(dev) = &a.dev {
        config.dev = Some(dev.clone());
    }
    if let Some(p) = &a.dev_contextual {
        config.dev_contextual = Some(p.clone());
    }
    if let Some(p) = &a.rules {
        config.rules = Some(p.clone());
    }
    if a.report.is_some() && config.dev.is_none() {
        return Err(Usage("--report needs --dev".into()).into());
    }
    if config.dev.is_some() && config.contextual.is_some() != config.dev_contextual.is_some() {
        return Err(Usage("--contextual and --dev-contextual go together".into()).into());
    }
    config.validate()?;

    let train = read_corpus(&a.train)?;
    let contextual = config
        .contextual
        .as_deref()
        .map(|p| read_contextual(p, &train))
        .transpose()?;
    config.contextual_dim = contextual.as_ref().map_or(0, |c| c.dim);
    let dev = config.dev.as_deref().map(read_corpus).transpose()?;
    let dev_contextual = match (&dev, config.dev_contextual.as_deref()) {
        (Some(d), Some(p)) => Some(read_contextual(p, d)?),
        _ => None,
    };
    if let (Some(t), Some(d)) = (&contextual, &dev_contextual) {
        if t.dim != d.dim {
            bail!("contextual vectors have width {} for training, {} for development", t.dim, d.dim);
        }
    }
    let pretrained = config.pretrained.as_deref().map(read_pretrained).transpose()?;
    let rules = resolve_rules(&config, &train)?;

    let stats = corpus_stats(&train);
    log(&[
        ("event", &"start"),
        ("sentences", &stats.n_sentences),
        ("predicates", &stats.n_predicates),
        ("arguments", &stats.n_arguments),
        ("prune", &config.prune.as_str()),
        ("rule_k", &rules.as_ref().and_then(|r| r.k()).map_or("-".into(), |k| k.to_string())),
        ("seed", &config.seed),
    ]);

    let m = SrlModel::new(config, &train, rules, pretrained.as_ref())?;
    let dev_pair = dev.as_deref().map(|d| (d, dev_contextual.as_ref()));
    let outcome = model::train(m, &train, contextual.as_ref(), dev_pair, &mut |event| match event {
        TrainEvent::Epoch(r) => log(&[
            ("event", &"epoch"),
            ("epoch", &r.epoch),
            ("steps", &r.steps),
            ("loss", &format!("{:.6}", r.loss)),
        ]),
        TrainEvent::Eval { epoch, report, best } => log(&[
            ("event", &"eval"),
            ("epoch", &epoch),
            ("precision", &format!("{:.6}", report.precision)),
            ("recall", &format!("{:.6}", report.recall)),
            ("f1", &format!("{:.6}", report.f1)),
            ("pd", &report.pd_accuracy.map_or("-".into(), |v| format!("{v:.6}"))),
            ("best", &best),
        ]),
    })?;

    let checkpoint = outcome.model.to_checkpoint();
    emit(Some(&a.out), &checkpoint.to_bytes())?;

    if let (Some(path), Some(dev)) = (&a.report, &dev) {
        let cfg = &outcome.model.config;
        let predicted = outcome.model.predict(dev, dev_contextual.as_ref())?;
        let scored = score(dev, &predicted, cfg.mode == Mode::EndToEnd)?;
        let mut header = config_header(cfg);
        header.push(("best_epoch".into(), outcome.best_epoch.map_or(String::new(), |e| e.to_string())));
        header.push(("epochs_run".into(), outcome.epochs_run.to_string()));
        let text = report(&header, &score_columns(), &[score_row(&scored)]);
        emit(Some(path), text.as_bytes())?;
    }
    log(&[
        ("event", &"done"),
        ("epochs_run", &outcome.epochs_run),
        ("best_epoch", &outcome.best_epoch.map_or("-".into(), |e| e.to_string())),
        ("checkpoint", &a.out),
    ]);
    Ok(())
}

pub fn predict(a: &PredictArgs, cli: &Cli) -> Result<()> {
    let bytes = fs::read(&a.model).with_context(|| format!("reading {}", a.model))?;
    let checkpoint =
        Checkpoint::read(bytes.as_slice()).with_context(|| format!("reading {}", a.model))?;
    let m = SrlModel::from_checkpoint(&checkpoint).with_context(|| format!("loading {}", a.model))?;
    let mut requested = m.config.clone();
    a.flags.apply(&mut requested)?;
    if let Some(seed) = cli.seed {
        requested.seed = seed;
    }
    let conflicts = m.config.architecture_conflicts(&requested);
    if !conflicts.is_empty() {
        let detail: Vec<String> = conflicts
            .iter()
            .map(|k| {
                format!(
                    "{k} (checkpoint {}, requested {})",
                    m.config.get(k).unwrap_or_default(),
                    requested.get(k).unwrap_or_default()
                )
            })
            .collect();
        return Err(Usage(format!("flags conflict with checkpoint: {}", detail.join(", "))).into());
    }
    let corpus = read_corpus(&a.input)?;
    let contextual = requested
        .contextual
        .as_deref()
        .filter(|_| a.flags.contextual.is_some())
        .map(|p| read_contextual(p, &corpus))
        .transpose()?;
    if m.config.contextual_dim > 0 && contextual.is_none() {
        log(&[("event", &"warning"), ("message", &"no --contextual given; using zero vectors")]);
    }
    let predicted = m.predict(&corpus, contextual.as_ref())?;
    emit(a.out.as_deref(), to_conll09_string(&predicted).as_bytes())
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let gold = read_corpus(&a.gold)?;
    let pred = read_corpus(&a.pred)?;
    let r = score(&gold, &pred, a.senses)?;
    let text = report(
        &[
            ("gold".into(), a.gold.clone()),
            ("pred".into(), a.pred.clone()),
            ("senses".into(), a.senses.to_string()),
        ],
        &score_columns(),
        &[score_row(&r)],
    );
    emit(a.out.as_deref(), text.as_bytes())
}

/// One synthetic sentence of exactly `tokens` tokens. Frames that cannot be
/// realised in so few tokens are redrawn from the next seed.
fn synthetic_instance(tokens: usize, seed: u64) -> Result<Sentence> {
    let mut last = None;
    for attempt in 0..100u64 {
        let c = SynthConfig {
            seed: seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9)),
            n_sentences: 1,
            min_len: tokens,
            max_len: tokens,
            max_retries: 50,
            ..SynthConfig::default()
        };
        match srlprune::synth_corpus(&c) {
            Ok(mut out) => return Ok(out.corpus.remove(0)),
            Err(e @ SynthError::Unsatisfiable { .. }) => last = Some(e),
            Err(e) => return Err(e.into()),
        }
    }
    Err(last.expect("at least one attempt").into())
}

pub fn gradcheck(a: &GradcheckArgs, cli: &Cli) -> Result<()> {
    let base = run_config(&a.model, cli)?;
    let pool: Option<Vec<Sentence>> = a
        .corpus
        .as_deref()
        .map(read_corpus)
        .transpose()?
        .map(|c| c.into_iter().filter(|s| !s.predicates().is_empty()).collect());
    if pool.as_ref().is_some_and(Vec::is_empty) {
        bail!("corpus has no predicates to check");
    }
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for trial in 0..a.trials {
        let seed = base.seed.wrapping_add(trial as u64);
        let sentence = match &pool {
            Some(p) => p[trial % p.len()].clone(),
            None => synthetic_instance(a.tokens, seed)?,
        };
        let mut config = base.clone();
        config.seed = seed;
        let one = std::slice::from_ref(&sentence);
        let rules = resolve_rules(&config, one)?;
        let mut m = SrlModel::new(config, one, rules, None)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = m.grad_check(&sentence, 0, None, a.samples, a.step, &mut rng)?;
        worst = worst.max(r.max_rel_error);
        log(&[
            ("event", &"gradcheck"),
            ("trial", &(trial + 1)),
            ("tokens", &sentence.len()),
            ("max_rel_error", &format!("{:.3e}", r.max_rel_error)),
        ]);
        rows.push(vec![
            (trial + 1).to_string(),
            seed.to_string(),
            sentence.len().to_string(),
            format!("{:.6e}", r.max_rel_error),
            r.worst.map_or("-".into(), |w| format!("{}[{}]", w.0, w.1)),
        ]);
    }
    let mut header = config_header(&base);
    header.push(("samples".into(), a.samples.to_string()));
    header.push(("step".into(), a.step.to_string()));
    header.push(("tolerance".into(), a.tolerance.to_string()));
    header.push(("max_rel_error".into(), format!("{worst:.6e}")));
    let text = report(&header, &["trial", "seed", "tokens", "max_rel_error", "worst"], &rows);
    emit(None, text.as_bytes())?;
    if worst >= a.tolerance || worst.is_nan() {
        return Err(NumericFailure(format!(
            "max relative error {worst:.3e} exceeds tolerance {:.1e}",
            a.tolerance
        ))
        .into());
    }
    Ok(())
}
