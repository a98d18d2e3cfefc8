//! `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use phonexl_core::metrics::Task;
use phonexl_core::nnet::{AdamConfig, EmbedFlags, EncoderConfig};
use phonexl_core::objectives::LossWeights;
use phonexl_core::trainer::TrainConfig;
use phonexl_core::transcription::Mode;
use phonexl_core::Lang;

use crate::error::Error;

/// Ablation switches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Ablation {
    pub no_pe: bool,
    pub no_extension: bool,
    pub no_lang_emb: bool,
    pub romanized: bool,
}

impl Ablation {
    pub fn flags(&self) -> EmbedFlags {
        EmbedFlags {
            phonemic: !self.no_pe,
            language: !self.no_lang_emb,
        }
    }

    pub fn mode(&self) -> Mode {
        if self.romanized {
            Mode::Romanized
        } else {
            Mode::Ipa
        }
    }
}

/// Everything a training or evaluation run needs. Relative paths are
/// resolved against the directory of the config file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub source_lang: Lang,
    pub target_lang: Lang,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub target_test: Option<PathBuf>,
    /// Extra unlabelled corpora used only for the vocabulary.
    pub raw: Vec<PathBuf>,
    /// Prebuilt dictionary in TSV form.
    pub dictionary: Option<PathBuf>,
    /// MUSE pivot files, used when `dictionary` is not given.
    pub pivot_source_en: Option<PathBuf>,
    pub pivot_en_target: Option<PathBuf>,
    /// Directory of `<lang>.<stage>.tsv` tables layered over the bundled ones.
    pub tables: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub vocab_size: usize,
    /// Refill the phonemic column from the tables.
    pub transcribe: bool,
    pub layers: usize,
    pub heads: usize,
    pub hidden: usize,
    pub ff: usize,
    pub max_positions: usize,
    pub init_std: f64,
    pub weights: LossWeights,
    pub adam: AdamConfig,
    pub clip_norm: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub ablation: Ablation,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: Task::Ner,
            source_lang: Lang::zh(),
            target_lang: Lang::vi(),
            train: None,
            dev: None,
            test: None,
            target_test: None,
            raw: Vec::new(),
            dictionary: None,
            pivot_source_en: None,
            pivot_en_target: None,
            tables: None,
            vocab: None,
            vocab_size: 2000,
            transcribe: true,
            layers: 2,
            heads: 2,
            hidden: 64,
            ff: 128,
            max_positions: 256,
            init_std: 0.02,
            weights: LossWeights::TASK_ONLY,
            adam: AdamConfig::default(),
            clip_norm: 1.0,
            batch_size: 16,
            epochs: 3,
            seed: 0,
            seeds: vec![0, 1, 2],
            ablation: Ablation::default(),
            out: None,
        }
    }
}

pub const KEYS: &[&str] = &[
    "task",
    "source_lang",
    "target_lang",
    "train",
    "dev",
    "test",
    "target_test",
    "raw",
    "dictionary",
    "pivot_source_en",
    "pivot_en_target",
    "tables",
    "vocab",
    "vocab_size",
    "transcribe",
    "layers",
    "heads",
    "hidden",
    "ff",
    "max_positions",
    "init_std",
    "lambda_align",
    "beta_mlm",
    "gamma_xmlm",
    "mu",
    "r",
    "lr",
    "beta1",
    "beta2",
    "eps",
    "clip_norm",
    "batch_size",
    "epochs",
    "seed",
    "seeds",
    "no_pe",
    "no_extension",
    "no_lang_emb",
    "romanized",
    "out",
];

fn invalid(key: &str, value: &str, why: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key} = {value:?}: {why}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, Error>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| invalid(key, value, e))
}

fn boolean(key: &str, value: &str) -> Result<bool, Error> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(invalid(key, value, "expected true or false")),
    }
}

impl RunConfig {
    /// Parses config text. `base` resolves relative paths.
    pub fn parse(text: &str, base: &Path) -> Result<Self, Error> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(k.trim(), v.trim(), base)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = crate::io::read(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Applies `key=value` overrides; relative paths resolve against the
    /// working directory.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), Error> {
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?}: expected key=value")))?;
            self.set(k.trim(), v.trim(), Path::new("."))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<(), Error> {
        let path = || (!value.is_empty()).then(|| base.join(value));
        let lang = || Lang::new(value).map_err(|e| invalid(key, value, e));
        match key {
            "task" => self.task = value.parse().map_err(|e: String| invalid(key, value, e))?,
            "source_lang" => self.source_lang = lang()?,
            "target_lang" => self.target_lang = lang()?,
            "train" => self.train = path(),
            "dev" => self.dev = path(),
            "test" => self.test = path(),
            "target_test" => self.target_test = path(),
            "raw" => {
                self.raw = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| base.join(s))
                    .collect()
            }
            "dictionary" => self.dictionary = path(),
            "pivot_source_en" => self.pivot_source_en = path(),
            "pivot_en_target" => self.pivot_en_target = path(),
            "tables" => self.tables = path(),
            "vocab" => self.vocab = path(),
            "vocab_size" => self.vocab_size = num(key, value)?,
            "transcribe" => self.transcribe = boolean(key, value)?,
            "layers" => self.layers = num(key, value)?,
            "heads" => self.heads = num(key, value)?,
            "hidden" => self.hidden = num(key, value)?,
            "ff" => self.ff = num(key, value)?,
            "max_positions" => self.max_positions = num(key, value)?,
            "init_std" => self.init_std = num(key, value)?,
            "lambda_align" | "alpha_align" => self.weights.lambda_align = num(key, value)?,
            "beta_mlm" => self.weights.beta_mlm = num(key, value)?,
            "gamma_xmlm" => self.weights.gamma_xmlm = num(key, value)?,
            "mu" => self.weights.mu = num(key, value)?,
            "r" => self.weights.r = num(key, value)?,
            "lr" => self.adam.lr = num(key, value)?,
            "beta1" => self.adam.beta1 = num(key, value)?,
            "beta2" => self.adam.beta2 = num(key, value)?,
            "eps" => self.adam.eps = num(key, value)?,
            "clip_norm" => self.clip_norm = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "seeds" => {
                self.seeds = value
                    .split(',')
                    .map(|s| num(key, s.trim()))
                    .collect::<Result<_, _>>()?
            }
            "no_pe" => self.ablation.no_pe = boolean(key, value)?,
            "no_extension" => self.ablation.no_extension = boolean(key, value)?,
            "no_lang_emb" => self.ablation.no_lang_emb = boolean(key, value)?,
            "romanized" => self.ablation.romanized = boolean(key, value)?,
            "out" => self.out = path(),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.ablation.romanized && !self.transcribe {
            return Err(Error::Config("romanized mode needs transcribe = true".into()));
        }
        self.weights.validate().map_err(|e| Error::Config(e.into()))?;
        for p in self.paths() {
            if !p.exists() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    fn paths(&self) -> impl Iterator<Item = &PathBuf> {
        [
            &self.train,
            &self.dev,
            &self.test,
            &self.target_test,
            &self.dictionary,
            &self.pivot_source_en,
            &self.pivot_en_target,
            &self.tables,
            &self.vocab,
        ]
        .into_iter()
        .flatten()
        .chain(&self.raw)
    }

    pub fn encoder(&self, vocab: usize, languages: usize) -> EncoderConfig {
        EncoderConfig {
            layers: self.layers,
            heads: self.heads,
            hidden: self.hidden,
            ff: self.ff,
            max_positions: self.max_positions,
            segments: 1,
            languages,
            ortho_vocab: vocab,
            phone_vocab: vocab,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: self.adam,
            clip_norm: self.clip_norm,
            seed,
            weights: self.weights,
        }
    }

    /// Canonical text form: every key in [`KEYS`] order.
    pub fn to_text(&self) -> String {
        let p = |p: &Option<PathBuf>| p.as_ref().map_or(String::new(), |p| p.display().to_string());
        let b = |b: bool| b.to_string();
        let mut m: BTreeMap<&str, String> = BTreeMap::new();
        m.insert("task", self.task.to_string());
        m.insert("source_lang", self.source_lang.to_string());
        m.insert("target_lang", self.target_lang.to_string());
        m.insert("train", p(&self.train));
        m.insert("dev", p(&self.dev));
        m.insert("test", p(&self.test));
        m.insert("target_test", p(&self.target_test));
        m.insert(
            "raw",
            self.raw.iter().map(|r| r.display().to_string()).collect::<Vec<_>>().join(","),
        );
        m.insert("dictionary", p(&self.dictionary));
        m.insert("pivot_source_en", p(&self.pivot_source_en));
        m.insert("pivot_en_target", p(&self.pivot_en_target));
        m.insert("tables", p(&self.tables));
        m.insert("vocab", p(&self.vocab));
        m.insert("vocab_size", self.vocab_size.to_string());
        m.insert("transcribe", b(self.transcribe));
        m.insert("layers", self.layers.to_string());
        m.insert("heads", self.heads.to_string());
        m.insert("hidden", self.hidden.to_string());
        m.insert("ff", self.ff.to_string());
        m.insert("max_positions", self.max_positions.to_string());
        m.insert("init_std", self.init_std.to_string());
        m.insert("lambda_align", self.weights.lambda_align.to_string());
        m.insert("beta_mlm", self.weights.beta_mlm.to_string());
        m.insert("gamma_xmlm", self.weights.gamma_xmlm.to_string());
        m.insert("mu", self.weights.mu.to_string());
        m.insert("r", self.weights.r.to_string());
        m.insert("lr", self.adam.lr.to_string());
        m.insert("beta1", self.adam.beta1.to_string());
        m.insert("beta2", self.adam.beta2.to_string());
        m.insert("eps", self.adam.eps.to_string());
        m.insert("clip_norm", self.clip_norm.to_string());
        m.insert("batch_size", self.batch_size.to_string());
        m.insert("epochs", self.epochs.to_string());
        m.insert("seed", self.seed.to_string());
        m.insert(
            "seeds",
            self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
        );
        m.insert("no_pe", b(self.ablation.no_pe));
        m.insert("no_extension", b(self.ablation.no_extension));
        m.insert("no_lang_emb", b(self.ablation.no_lang_emb));
        m.insert("romanized", b(self.ablation.romanized));
        m.insert("out", p(&self.out));
        KEYS.iter().map(|k| format!("{k} = {}\n", m[k])).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_comments_and_relative_paths() {
        let text = "task = pos  # tagging\nlambda_align = 0.1\nseeds = 4, 5\ntrain = data/a.tsv\nno_pe = true\n";
        let c = RunConfig::parse(text, Path::new("/cfg")).unwrap();
        assert_eq!(c.task, Task::Pos);
        assert_eq!(c.weights.lambda_align, 0.1);
        assert_eq!(c.seeds, [4, 5]);
        assert_eq!(c.train.as_deref(), Some(Path::new("/cfg/data/a.tsv")));
        assert!(c.ablation.no_pe);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::parse("colour = red", Path::new(".")).is_err());
        assert!(RunConfig::parse("epochs = many", Path::new(".")).is_err());
        assert!(RunConfig::parse("just words", Path::new(".")).is_err());
    }

    #[test]
    fn overrides_win() {
        let mut c = RunConfig::parse("epochs = 3", Path::new(".")).unwrap();
        c.apply_overrides(&["epochs=7".into(), "mu=0.25".into()]).unwrap();
        assert_eq!(c.epochs, 7);
        assert_eq!(c.weights.mu, 0.25);
    }

    #[test]
    fn text_round_trip() {
        let c = RunConfig {
            weights: LossWeights::UDPOS_JA_KO,
            seeds: vec![9],
            ..RunConfig::default()
        };
        let back = RunConfig::parse(&c.to_text(), Path::new("")).unwrap();
        assert_eq!(back, c);
    }
}
