//! Run configuration: a line-oriented `key = value` file.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::deptree::SyntaxSource;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("config line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("config key {key}: bad value {value:?}")]
    BadValue { key: String, value: String },
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Roles only; senses are taken from the input.
    RoleOnly,
    /// Roles and predicate senses, the latter through a virtual root token.
    EndToEnd,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::RoleOnly => "role-only",
            Mode::EndToEnd => "end-to-end",
        }
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "role-only" => Ok(Mode::RoleOnly),
            "end-to-end" => Ok(Mode::EndToEnd),
            _ => Err(format!("unknown mode {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PruneMode {
    Rule,
    KOrder,
    None,
}

impl PruneMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PruneMode::Rule => "rule",
            PruneMode::KOrder => "korder",
            PruneMode::None => "none",
        }
    }
}

impl FromStr for PruneMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rule" => Ok(PruneMode::Rule),
            "korder" => Ok(PruneMode::KOrder),
            "none" => Ok(PruneMode::None),
            _ => Err(format!("unknown prune mode {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub language: String,
    pub mode: Mode,
    pub syntax: SyntaxSource,
    pub prune: PruneMode,
    pub korder_k: usize,
    /// Coverage target used when mining a rule during training.
    pub rule_coverage: f64,
    /// Fixed rule size; overrides `rule_coverage` when set.
    pub rule_k: Option<usize>,

    pub word_dim: usize,
    pub lemma_dim: usize,
    pub pos_dim: usize,
    pub indicator_dim: usize,
    pub use_lemma: bool,
    pub use_pos: bool,
    /// Width of the pre-trained word vectors; 0 when none are used.
    pub pretrained_dim: usize,
    pub fine_tune_pretrained: bool,
    /// Width of external contextual vectors; 0 when none are used.
    pub contextual_dim: usize,

    pub lstm_layers: usize,
    pub lstm_hidden: usize,
    pub lstm_keep: f64,
    pub mlp_dim: usize,
    pub mlp_keep: f64,

    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub unk_replace: f64,
    pub eval_every: usize,
    /// Stop once the development F1 reaches this value.
    pub stop_f1: Option<f64>,
    pub seed: u64,
    pub threads: usize,

    pub train: Option<String>,
    pub dev: Option<String>,
    pub rules: Option<String>,
    pub pretrained: Option<String>,
    pub contextual: Option<String>,
    pub dev_contextual: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            language: "en".into(),
            mode: Mode::RoleOnly,
            syntax: SyntaxSource::Predicted,
            prune: PruneMode::Rule,
            korder_k: 10,
            rule_coverage: 0.99,
            rule_k: None,
            word_dim: 100,
            lemma_dim: 100,
            pos_dim: 100,
            indicator_dim: 16,
            use_lemma: true,
            use_pos: true,
            pretrained_dim: 0,
            fine_tune_pretrained: false,
            contextual_dim: 0,
            lstm_layers: 3,
            lstm_hidden: 400,
            lstm_keep: 0.8,
            mlp_dim: 300,
            mlp_keep: 0.8,
            lr: 2e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: 500,
            batch_size: 64,
            unk_replace: 0.1,
            eval_every: 1,
            stop_f1: None,
            seed: 1,
            threads: 1,
            train: None,
            dev: None,
            rules: None,
            pretrained: None,
            contextual: None,
            dev_contextual: None,
        }
    }
}

/// Keys that fix the shape or meaning of a trained model.
pub const ARCHITECTURE_KEYS: &[&str] = &[
    "language",
    "mode",
    "syntax",
    "prune",
    "korder_k",
    "word_dim",
    "lemma_dim",
    "pos_dim",
    "indicator_dim",
    "use_lemma",
    "use_pos",
    "pretrained_dim",
    "contextual_dim",
    "lstm_layers",
    "lstm_hidden",
    "mlp_dim",
];

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

impl RunConfig {
    /// All keys with their current values, in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("language", self.language.clone()),
            ("mode", self.mode.as_str().into()),
            ("syntax", self.syntax.as_str().into()),
            ("prune", self.prune.as_str().into()),
            ("korder_k", self.korder_k.to_string()),
            ("rule_coverage", self.rule_coverage.to_string()),
            ("rule_k", opt(&self.rule_k)),
            ("word_dim", self.word_dim.to_string()),
            ("lemma_dim", self.lemma_dim.to_string()),
            ("pos_dim", self.pos_dim.to_string()),
            ("indicator_dim", self.indicator_dim.to_string()),
            ("use_lemma", self.use_lemma.to_string()),
            ("use_pos", self.use_pos.to_string()),
            ("pretrained_dim", self.pretrained_dim.to_string()),
            ("fine_tune_pretrained", self.fine_tune_pretrained.to_string()),
            ("contextual_dim", self.contextual_dim.to_string()),
            ("lstm_layers", self.lstm_layers.to_string()),
            ("lstm_hidden", self.lstm_hidden.to_string()),
            ("lstm_keep", self.lstm_keep.to_string()),
            ("mlp_dim", self.mlp_dim.to_string()),
            ("mlp_keep", self.mlp_keep.to_string()),
            ("lr", self.lr.to_string()),
            ("beta1", self.beta1.to_string()),
            ("beta2", self.beta2.to_string()),
            ("eps", self.eps.to_string()),
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("unk_replace", self.unk_replace.to_string()),
            ("eval_every", self.eval_every.to_string()),
            ("stop_f1", opt(&self.stop_f1)),
            ("seed", self.seed.to_string()),
            ("threads", self.threads.to_string()),
            ("train", opt(&self.train)),
            ("dev", opt(&self.dev)),
            ("rules", opt(&self.rules)),
            ("pretrained", opt(&self.pretrained)),
            ("contextual", opt(&self.contextual)),
            ("dev_contextual", opt(&self.dev_contextual)),
        ]
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.entries()
            .into_iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn p<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
            value.parse().map_err(|_| ConfigError::BadValue {
                key: key.into(),
                value: value.into(),
            })
        }
        fn popt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>, ConfigError> {
            if value.is_empty() {
                Ok(None)
            } else {
                p(key, value).map(Some)
            }
        }
        let path = |v: &str| (!v.is_empty()).then(|| v.to_owned());
        let v = value;
        match key {
            "language" => self.language = v.into(),
            "mode" => self.mode = p(key, v)?,
            "syntax" => self.syntax = p(key, v)?,
            "prune" => self.prune = p(key, v)?,
            "korder_k" => self.korder_k = p(key, v)?,
            "rule_coverage" => self.rule_coverage = p(key, v)?,
            "rule_k" => self.rule_k = popt(key, v)?,
            "word_dim" => self.word_dim = p(key, v)?,
            "lemma_dim" => self.lemma_dim = p(key, v)?,
            "pos_dim" => self.pos_dim = p(key, v)?,
            "indicator_dim" => self.indicator_dim = p(key, v)?,
            "use_lemma" => self.use_lemma = p(key, v)?,
            "use_pos" => self.use_pos = p(key, v)?,
            "pretrained_dim" => self.pretrained_dim = p(key, v)?,
            "fine_tune_pretrained" => self.fine_tune_pretrained = p(key, v)?,
            "contextual_dim" => self.contextual_dim = p(key, v)?,
            "lstm_layers" => self.lstm_layers = p(key, v)?,
            "lstm_hidden" => self.lstm_hidden = p(key, v)?,
            "lstm_keep" => self.lstm_keep = p(key, v)?,
            "mlp_dim" => self.mlp_dim = p(key, v)?,
            "mlp_keep" => self.mlp_keep = p(key, v)?,
            "lr" => self.lr = p(key, v)?,
            "beta1" => self.beta1 = p(key, v)?,
            "beta2" => self.beta2 = p(key, v)?,
            "eps" => self.eps = p(key, v)?,
            "epochs" => self.epochs = p(key, v)?,
            "batch_size" => self.batch_size = p(key, v)?,
            "unk_replace" => self.unk_replace = p(key, v)?,
            "eval_every" => self.eval_every = p(key, v)?,
            "stop_f1" => self.stop_f1 = popt(key, v)?,
            "seed" => self.seed = p(key, v)?,
            "threads" => self.threads = p(key, v)?,
            "train" => self.train = path(v),
            "dev" => self.dev = path(v),
            "rules" => self.rules = path(v),
            "pretrained" => self.pretrained = path(v),
            "contextual" => self.contextual = path(v),
            "dev_contextual" => self.dev_contextual = path(v),
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Applies a config file on top of `self`. `#` starts a comment line.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<RunConfig, ConfigError> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        let prob = |x: f64| x > 0.0 && x <= 1.0;
        if self.lstm_layers == 0 || self.lstm_hidden == 0 || self.mlp_dim == 0 {
            return bad("lstm_layers, lstm_hidden and mlp_dim must be positive");
        }
        if self.word_dim == 0 || self.indicator_dim == 0 {
            return bad("word_dim and indicator_dim must be positive");
        }
        if !prob(self.lstm_keep) || !prob(self.mlp_keep) {
            return bad("keep probabilities must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.unk_replace) {
            return bad("unk_replace must be in [0, 1]");
        }
        if !prob(self.rule_coverage) {
            return bad("rule_coverage must be in (0, 1]");
        }
        if self.batch_size == 0 || self.eval_every == 0 || self.threads == 0 {
            return bad("batch_size, eval_every and threads must be positive");
        }
        if !(self.lr > 0.0 && self.eps > 0.0 && (0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("optimizer settings out of range");
        }
        Ok(())
    }

    /// Architecture keys whose values differ between `self` and `other`.
    pub fn architecture_conflicts(&self, other: &RunConfig) -> Vec<String> {
        ARCHITECTURE_KEYS
            .iter()
            .filter(|k| self.get(k) != other.get(k))
            .map(|k| k.to_string())
            .collect()
    }
}
