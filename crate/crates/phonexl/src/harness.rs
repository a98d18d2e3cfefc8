//! Data preparation, seeded training runs, zero-shot evaluation and
//! ablations.

use std::fmt;
use std::path::{Path, PathBuf};

use phonexl_core::corpus::{train_subword_vocab, Dataset, Role, TagSet, Vocabulary};
use phonexl_core::dictionary::{build_pivot_dictionary, BilingualDictionary, Translation};
use phonexl_core::metrics::{summarize, EvalReport, LangScores, Score, Summary, Task};
use phonexl_core::nnet::Model;
use phonexl_core::objectives::LossContext;
use phonexl_core::rng::{stream, Stream};
use phonexl_core::trainer::{self, EpochRecord, Observer, StepRecord, TrainError};
use phonexl_core::transcription::{Mode, TableSet, TranscriptionError};
use phonexl_core::Lang;

use crate::checkpoint::{sha256_hex, Checkpoint};
use crate::config::RunConfig;
use crate::error::Error;
use crate::io;
use crate::metrics_log::LogRecord;

/// Fills the phonemic column of every word from its surface and its own
/// language.
pub fn transcribe_dataset(tables: &TableSet, dataset: &Dataset, mode: Mode) -> Result<Dataset, TranscriptionError> {
    let mut out = dataset.clone();
    for (s, ex) in out.examples_mut().iter_mut().enumerate() {
        for (t, w) in ex.words_mut().iter_mut().enumerate() {
            w.ipa = tables
                .transcribe(&w.surface, &w.lang, mode)
                .map_err(|e| TranscriptionError::At {
                    sentence: s + 1,
                    token: t + 1,
                    source: Box::new(e),
                })?;
        }
    }
    Ok(out)
}

/// Re-derives the phonemic column of every translation; entries the tables
/// cannot transcribe keep their stored column.
pub fn retranscribe_dictionary(tables: &TableSet, dict: &BilingualDictionary, mode: Mode) -> BilingualDictionary {
    let mut out = BilingualDictionary::new();
    for (src, list) in dict.iter() {
        for t in list {
            let phrase = t.surface.replace('-', " ");
            let ipa = tables
                .transcribe(&phrase, &t.lang, mode)
                .ok()
                .filter(|p| !p.is_empty())
                .unwrap_or_else(|| t.ipa.clone());
            out.insert(src, Translation { ipa, ..t.clone() });
        }
    }
    out
}

/// Everything a run reads, loaded and transcribed.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub task: Task,
    pub tags: TagSet,
    pub langs: Vec<Lang>,
    pub mode: Mode,
    pub tables: TableSet,
    pub train: Dataset,
    pub dev: Option<Dataset>,
    pub test: Option<Dataset>,
    pub target_test: Option<Dataset>,
    pub raw: Vec<Dataset>,
    pub dictionary: Option<BilingualDictionary>,
    pub vocab: Vocabulary,
}

impl Prepared {
    pub fn context(&self) -> LossContext<'_> {
        LossContext {
            vocab: &self.vocab,
            langs: &self.langs,
            tags: &self.tags,
            dictionary: self.dictionary.as_ref(),
        }
    }

    pub fn vocab_sha256(&self) -> String {
        sha256_hex(self.vocab.to_text())
    }
}

fn load(cfg: &RunConfig, tables: &TableSet, path: &Path, tags: &TagSet, role: Role) -> Result<Dataset, Error> {
    let d = io::load_dataset(path, tags, role)?;
    if cfg.transcribe {
        transcribe_dataset(tables, &d, cfg.ablation.mode()).map_err(|e| Error::parse(path, e))
    } else {
        Ok(d)
    }
}

/// Loads and transcribes the corpora, builds the dictionary and the
/// vocabulary. Only source-language training text, unlabelled raw text and
/// the dictionary feed the vocabulary.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared, Error> {
    cfg.validate()?;
    let tables = io::load_tables(cfg.tables.as_deref())?;
    let tags = cfg.task.default_tags();
    let mode = cfg.ablation.mode();
    let train_path = cfg
        .train
        .as_deref()
        .ok_or_else(|| Error::Config("`train` is required".into()))?;
    let train = load(cfg, &tables, train_path, &tags, Role::Train)?;
    let opt = |p: &Option<PathBuf>, role| {
        p.as_deref()
            .map(|p| load(cfg, &tables, p, &tags, role))
            .transpose()
    };
    let dev = opt(&cfg.dev, Role::Dev)?;
    let test = opt(&cfg.test, Role::Test)?;
    let target_test = opt(&cfg.target_test, Role::Test)?;
    let raw = cfg
        .raw
        .iter()
        .map(|p| load(cfg, &tables, p, &tags, Role::Train))
        .collect::<Result<Vec<_>, _>>()?;

    let dictionary = match (&cfg.dictionary, &cfg.pivot_source_en, &cfg.pivot_en_target) {
        (Some(p), _, _) => {
            let d = io::load_dictionary(p)?;
            Some(if cfg.transcribe {
                retranscribe_dictionary(&tables, &d, mode)
            } else {
                d
            })
        }
        (None, Some(a), Some(b)) => {
            let built = build_pivot_dictionary(&io::load_muse(a)?, &io::load_muse(b)?, &cfg.target_lang, &tables, mode);
            Some(built.dictionary)
        }
        (None, None, None) => None,
        _ => {
            return Err(Error::Config(
                "pivot_source_en and pivot_en_target must be given together".into(),
            ))
        }
    };

    let mut vocab = match &cfg.vocab {
        Some(p) => io::load_vocab(p)?,
        None => {
            let mut corpora = vec![&train];
            corpora.extend(&raw);
            train_subword_vocab(&corpora, cfg.vocab_size)
        }
    };
    if !cfg.ablation.no_extension {
        let mut segments: Vec<&str> = train.segments().collect();
        for r in &raw {
            segments.extend(r.segments());
        }
        if let Some(d) = &dictionary {
            segments.extend(d.segments());
        }
        vocab = vocab.extend(segments);
    }

    Ok(Prepared {
        task: cfg.task,
        tags,
        langs: vec![cfg.source_lang.clone(), cfg.target_lang.clone()],
        mode,
        tables,
        train,
        dev,
        test,
        target_test,
        raw,
        dictionary,
        vocab,
    })
}

/// Freshly initialised model for `seed`.
pub fn init_model(cfg: &RunConfig, prep: &Prepared, seed: u64) -> Result<Model, Error> {
    let encoder = cfg.encoder(prep.vocab.len(), prep.langs.len());
    let mut rng = stream(seed, Stream::Init, &[]);
    Ok(Model::new(encoder, cfg.ablation.flags(), prep.tags.len(), cfg.init_std, &mut rng)?)
}

/// Digest of the config with the output directory blanked, so the same run
/// written to two places carries the same digest.
pub fn config_sha256(cfg: &RunConfig) -> String {
    let mut c = cfg.clone();
    c.out = None;
    sha256_hex(c.to_text())
}

pub fn checkpoint(cfg: &RunConfig, prep: &Prepared, seed: u64, epoch: usize, dev: Option<Score>, model: Model) -> Checkpoint {
    Checkpoint {
        task: prep.task,
        source_lang: cfg.source_lang.clone(),
        target_lang: cfg.target_lang.clone(),
        langs: prep.langs.clone(),
        tags: prep.tags.clone(),
        mode: prep.mode,
        vocab_sha256: prep.vocab_sha256(),
        config_sha256: config_sha256(cfg),
        seed,
        epoch,
        dev_f1: dev.map(|s| s.f1),
        model,
    }
}

pub const LAST: &str = "last.ckpt";
pub const BEST: &str = "best.ckpt";
pub const LAST_GOOD: &str = "last-good.ckpt";
pub const VOCAB: &str = "vocab.txt";
pub const METRICS: &str = "metrics.jsonl";
pub const CONFIG: &str = "config.txt";

struct RunObserver<'a> {
    cfg: &'a RunConfig,
    prep: &'a Prepared,
    seed: u64,
    out: Option<&'a Path>,
    log: String,
    error: Option<Error>,
}

impl RunObserver<'_> {
    fn flush(&self) -> Result<(), Error> {
        match self.out {
            Some(dir) => io::write(&dir.join(METRICS), &self.log),
            None => Ok(()),
        }
    }

    fn save(&self, name: &str, epoch: usize, dev: Option<Score>, model: &Model) -> Result<(), Error> {
        let Some(dir) = self.out else {
            return Ok(());
        };
        checkpoint(self.cfg, self.prep, self.seed, epoch, dev, model.clone()).save(&dir.join(name))
    }
}

impl Observer for RunObserver<'_> {
    fn on_step(&mut self, r: &StepRecord) {
        self.log.push_str(&LogRecord::from(r).to_line());
    }

    fn on_epoch(&mut self, r: &EpochRecord, model: &Model) {
        self.log.push_str(&LogRecord::from(r).to_line());
        if self.error.is_some() {
            return;
        }
        let mut res = self.save(LAST, r.epoch, r.dev, model);
        if r.best {
            res = res.and_then(|_| self.save(BEST, r.epoch, r.dev, model));
        }
        self.error = res.and_then(|_| self.flush()).err();
    }
}

/// Result of one seeded training run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub seed: u64,
    pub best: Model,
    pub last: Model,
    pub best_epoch: usize,
    pub best_dev: Option<Score>,
    pub steps: u64,
    /// The metrics log as written to `metrics.jsonl`.
    pub log: String,
}

/// Trains one seed on source-language data only. With `out`, writes the
/// vocabulary, config, metrics log, `last.ckpt` after every epoch and
/// `best.ckpt` whenever dev F1 does not drop. A non-finite loss saves the
/// parameters before the failing step as `last-good.ckpt`.
pub fn train(cfg: &RunConfig, prep: &Prepared, seed: u64, out: Option<&Path>) -> Result<RunOutcome, Error> {
    if let Some(dir) = out {
        io::write(&dir.join(VOCAB), prep.vocab.to_text())?;
        let mut c = cfg.clone();
        c.seed = seed;
        c.out = None;
        io::write(&dir.join(CONFIG), c.to_text())?;
    }
    let model = init_model(cfg, prep, seed)?;
    let mut obs = RunObserver {
        cfg,
        prep,
        seed,
        out,
        log: String::new(),
        error: None,
    };
    let ctx = prep.context();
    let result = trainer::train(
        model,
        prep.train.examples(),
        prep.dev.as_ref().map(Dataset::examples),
        prep.task,
        &ctx,
        &cfg.train_config(seed),
        &mut obs,
    );
    if let Some(e) = obs.error.take() {
        return Err(e);
    }
    match result {
        Ok(o) => {
            obs.flush()?;
            Ok(RunOutcome {
                seed,
                best: o.best,
                last: o.last,
                best_epoch: o.best_epoch,
                best_dev: o.best_dev,
                steps: o.steps,
                log: obs.log,
            })
        }
        Err(TrainError::NonFinite { epoch, step, last_good }) => {
            obs.flush()?;
            obs.save(LAST_GOOD, epoch.saturating_sub(1), None, &last_good)?;
            Err(Error::Numerical(format!(
                "non-finite loss or gradient at epoch {epoch}, step {step}"
            )))
        }
        Err(TrainError::Objective(e)) => Err(e.into()),
        Err(e) => Err(Error::Config(e.to_string())),
    }
}

pub fn score(model: &Model, prep: &Prepared, data: &Dataset) -> Result<Score, Error> {
    Ok(trainer::evaluate(model, data.examples(), prep.task, &prep.context())?)
}

/// Test scores of one seed's best-dev model.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    pub best_epoch: usize,
    pub dev: Option<Score>,
    pub source_test: Option<Score>,
    pub target_test: Option<Score>,
}

/// Per-seed results and their summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedReport {
    pub results: Vec<SeedResult>,
    pub report: EvalReport,
}

fn report(task: Task, source: &Lang, target: &Lang, results: &[SeedResult]) -> EvalReport {
    let seeds: Vec<u64> = results.iter().map(|r| r.seed).collect();
    let mut languages = Vec::new();
    let mut add = |lang: &Lang, pick: fn(&SeedResult) -> Option<Score>| {
        let scores: Option<Vec<Score>> = results.iter().map(pick).collect();
        if let Some(scores) = scores.filter(|s| !s.is_empty()) {
            languages.push(LangScores {
                lang: lang.clone(),
                seeds: seeds.clone(),
                scores,
            });
        }
    };
    add(source, |r| r.source_test);
    add(target, |r| r.target_test);
    EvalReport { task, languages }
}

/// Trains and scores every seed of `cfg.seeds`; each seed writes to
/// `out/seed-<n>` when `out` is given.
pub fn run_seeds(cfg: &RunConfig, prep: &Prepared, out: Option<&Path>) -> Result<SeedReport, Error> {
    let mut results = Vec::new();
    for &seed in &cfg.seeds {
        let dir = out.map(|d| d.join(format!("seed-{seed}")));
        let run = train(cfg, prep, seed, dir.as_deref())?;
        let test = |d: &Option<Dataset>| d.as_ref().map(|d| score(&run.best, prep, d)).transpose();
        results.push(SeedResult {
            seed,
            best_epoch: run.best_epoch,
            dev: run.best_dev,
            source_test: test(&prep.test)?,
            target_test: test(&prep.target_test)?,
        });
    }
    let report = report(prep.task, &cfg.source_lang, &cfg.target_lang, &results);
    Ok(SeedReport { results, report })
}

/// One ablation switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    NoPe,
    NoExtension,
    NoLangEmb,
    Romanized,
    DropAlign,
    DropMlm,
    DropXmlm,
}

impl Axis {
    pub const ALL: [Axis; 7] = [
        Axis::NoPe,
        Axis::NoExtension,
        Axis::NoLangEmb,
        Axis::Romanized,
        Axis::DropAlign,
        Axis::DropMlm,
        Axis::DropXmlm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axis::NoPe => "no-pe",
            Axis::NoExtension => "no-extension",
            Axis::NoLangEmb => "no-lang-emb",
            Axis::Romanized => "romanized-mode",
            Axis::DropAlign => "drop-align",
            Axis::DropMlm => "drop-mlm",
            Axis::DropXmlm => "drop-xmlm",
        }
    }

    pub fn apply(self, cfg: &mut RunConfig) {
        match self {
            Axis::NoPe => cfg.ablation.no_pe = true,
            Axis::NoExtension => cfg.ablation.no_extension = true,
            Axis::NoLangEmb => cfg.ablation.no_lang_emb = true,
            Axis::Romanized => cfg.ablation.romanized = true,
            Axis::DropAlign => cfg.weights.lambda_align = 0.0,
            Axis::DropMlm => cfg.weights.beta_mlm = 0.0,
            Axis::DropXmlm => cfg.weights.gamma_xmlm = 0.0,
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "romanized" => Ok(Axis::Romanized),
            _ => Axis::ALL
                .into_iter()
                .find(|a| a.name() == s)
                .ok_or_else(|| Error::Config(format!("unknown ablation axis {s:?}"))),
        }
    }
}

/// A named combination of axes; the empty combination is the full model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Setting {
    pub name: String,
    pub axes: Vec<Axis>,
}

impl Setting {
    pub fn full() -> Self {
        Setting {
            name: "full".into(),
            axes: Vec::new(),
        }
    }

    /// Orthographic-only baseline: no phonemic embedding and no auxiliary
    /// objectives.
    pub fn baseline() -> Self {
        Setting {
            name: "baseline".into(),
            axes: vec![Axis::NoPe, Axis::DropAlign, Axis::DropMlm, Axis::DropXmlm],
        }
    }

    /// `full`, `baseline`, or axis names joined by `+`.
    pub fn parse(s: &str) -> Result<Self, Error> {
        match s {
            "full" => Ok(Self::full()),
            "baseline" => Ok(Self::baseline()),
            _ => Ok(Setting {
                name: s.into(),
                axes: s.split('+').map(str::parse).collect::<Result<_, _>>()?,
            }),
        }
    }

    pub fn apply(&self, cfg: &RunConfig) -> RunConfig {
        let mut c = cfg.clone();
        for a in &self.axes {
            a.apply(&mut c);
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub setting: Setting,
    pub seeds: SeedReport,
}

impl AblationRow {
    fn target_f1(&self) -> Vec<(u64, f64)> {
        self.seeds
            .results
            .iter()
            .filter_map(|r| r.target_test.map(|s| (r.seed, s.f1)))
            .collect()
    }

    fn source_f1(&self) -> Vec<f64> {
        self.seeds
            .results
            .iter()
            .filter_map(|r| r.source_test.map(|s| s.f1))
            .collect()
    }
}

/// Comparison of settings on the same data and seeds. The first row is
/// always the full model.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub task: Task,
    pub source: Lang,
    pub target: Lang,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, name: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.setting.name == name)
    }

    /// Per-seed target F1 of `a` minus that of `b`, paired by seed.
    pub fn target_differences(&self, a: &str, b: &str) -> Option<Vec<(u64, f64)>> {
        let (a, b) = (self.row(a)?.target_f1(), self.row(b)?.target_f1());
        Some(
            a.iter()
                .filter_map(|&(s, x)| b.iter().find(|(t, _)| *t == s).map(|&(_, y)| (s, x - y)))
                .collect(),
        )
    }
}

/// Trains the full model and every setting over `cfg.seeds`.
pub fn ablate(cfg: &RunConfig, settings: &[Setting], out: Option<&Path>) -> Result<AblationTable, Error> {
    let mut all = vec![Setting::full()];
    all.extend(settings.iter().filter(|s| !s.axes.is_empty() || s.name != "full").cloned());
    let mut rows = Vec::new();
    for setting in all {
        let c = setting.apply(cfg);
        let prep = prepare(&c)?;
        let dir = out.map(|d| d.join(&setting.name));
        let seeds = run_seeds(&c, &prep, dir.as_deref())?;
        rows.push(AblationRow { setting, seeds });
    }
    Ok(AblationTable {
        task: cfg.task,
        source: cfg.source_lang.clone(),
        target: cfg.target_lang.clone(),
        rows,
    })
}

fn fmt_opt(s: Option<Summary>) -> String {
    s.map_or_else(|| "-".into(), |s| s.to_string())
}

impl fmt::Display for AblationTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "setting\t{} {} F1\t{} {} F1\tvs full\tper seed",
            self.source, self.task, self.target, self.task
        )?;
        for row in &self.rows {
            let src = row.source_f1();
            let tgt = row.target_f1();
            let delta = self
                .target_differences(&row.setting.name, "full")
                .filter(|d| !d.is_empty() && row.setting.name != "full")
                .map(|d| summarize(&d.iter().map(|x| x.1).collect::<Vec<_>>()));
            let per_seed: Vec<String> = tgt.iter().map(|(s, v)| format!("{s}:{v:.2}")).collect();
            writeln!(
                f,
                "{}\t{}\t{}\t{}\t{}",
                row.setting.name,
                fmt_opt((!src.is_empty()).then(|| summarize(&src))),
                fmt_opt((!tgt.is_empty()).then(|| summarize(&tgt.iter().map(|x| x.1).collect::<Vec<_>>()))),
                fmt_opt(delta),
                per_seed.join(" ")
            )?;
        }
        Ok(())
    }
}

/// A trained checkpoint with the vocabulary it was trained with.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub checkpoint: Checkpoint,
    pub vocab: Vocabulary,
}

impl Loaded {
    /// Reads `path` and a vocabulary, by default `vocab.txt` beside it; the
    /// vocabulary digest must match the checkpoint's.
    pub fn open(path: &Path, vocab: Option<&Path>) -> Result<Self, Error> {
        let checkpoint = Checkpoint::load(path)?;
        let vocab_path = match vocab {
            Some(v) => v.to_path_buf(),
            None => path.with_file_name(VOCAB),
        };
        let text = io::read(&vocab_path)?;
        if sha256_hex(&text) != checkpoint.vocab_sha256 {
            return Err(Error::Config(format!(
                "{} does not match the vocabulary of {}",
                vocab_path.display(),
                path.display()
            )));
        }
        let vocab = Vocabulary::parse(&text).map_err(|e| Error::parse(&vocab_path, e))?;
        Ok(Loaded { checkpoint, vocab })
    }

    /// Loads a labelled corpus against the checkpoint's tag set,
    /// transcribing it in the checkpoint's mode when `tables` is given.
    pub fn load_data(&self, path: &Path, tables: Option<&TableSet>) -> Result<Dataset, Error> {
        let d = io::load_dataset(path, &self.checkpoint.tags, Role::Test).map_err(|e| match e {
            Error::Parse { path, message } if message.contains("not in the tag set") => {
                Error::Config(format!("{}: tag set does not match the checkpoint: {message}", path.display()))
            }
            other => other,
        })?;
        match tables {
            Some(t) => transcribe_dataset(t, &d, self.checkpoint.mode).map_err(|e| Error::parse(path, e)),
            None => Ok(d),
        }
    }

    pub fn context(&self) -> LossContext<'_> {
        LossContext {
            vocab: &self.vocab,
            langs: &self.checkpoint.langs,
            tags: &self.checkpoint.tags,
            dictionary: None,
        }
    }

    pub fn evaluate(&self, data: &Dataset) -> Result<Score, Error> {
        Ok(trainer::evaluate(&self.checkpoint.model, data.examples(), self.checkpoint.task, &self.context())?)
    }

    /// `data` with every label replaced by the predicted tag.
    pub fn predict(&self, data: &Dataset) -> Result<Dataset, Error> {
        let tags = trainer::predict_tags(&self.checkpoint.model, data.examples(), &self.context())?;
        let mut out = data.clone();
        for (ex, pred) in out.examples_mut().iter_mut().zip(tags) {
            for (w, t) in ex.words_mut().iter_mut().zip(pred) {
                w.label = Some(t);
            }
        }
        Ok(out)
    }
}
