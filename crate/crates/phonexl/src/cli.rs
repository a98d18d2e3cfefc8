//! The `phonexl` command line.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use phonexl_core::corpus::{train_subword_vocab, Dataset, Vocabulary, UNK};
use phonexl_core::dictionary::{build_pivot_dictionary, code_switch, BilingualDictionary};
use phonexl_core::metrics::{EvalReport, LangScores, Task};
use phonexl_core::nnet::GradCheckOptions;
use phonexl_core::objectives::check::check_objectives;
use phonexl_core::rng::{stream, Stream};
use phonexl_core::synthetic::{make_synthetic, SyntheticSpec};
use phonexl_core::transcription::Mode;
use phonexl_core::Lang;

use crate::config::RunConfig;
use crate::error::Error;
use crate::harness::{self, Loaded, Setting};
use crate::io;

/// Run config shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// `key = value` run config; relative paths resolve against its directory.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one config key, `key=value`; may repeat.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        cfg.apply_overrides(&self.set)?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fill the phonemic column of a corpus from the rule tables.
    Transcribe {
        /// Transcribe every word as this language instead of its own.
        #[arg(long)]
        lang: Option<Lang>,
        #[arg(long, default_value = "ipa")]
        mode: Mode,
        /// Directory of tables layered over the bundled ones.
        #[arg(long)]
        tables: Option<PathBuf>,
        input: PathBuf,
        output: PathBuf,
    },
    /// Learn a subword vocabulary from corpus surfaces.
    BuildVocab {
        /// Target size; defaults to the config's `vocab_size`.
        #[arg(long)]
        size: Option<usize>,
        #[arg(short, long)]
        output: PathBuf,
        /// Corpora; defaults to the config's train and raw corpora.
        inputs: Vec<PathBuf>,
    },
    /// Append the phonemic segments of corpora and a dictionary to a vocabulary.
    ExtendVocab {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        dict: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        inputs: Vec<PathBuf>,
    },
    /// Print corpus statistics.
    InspectDataset {
        /// Also report subtoken counts and unknown rates under this vocabulary.
        #[arg(long)]
        vocab: Option<PathBuf>,
        input: PathBuf,
    },
    /// Build a source-target dictionary through English.
    BuildDict {
        #[arg(long)]
        src_en: Option<PathBuf>,
        #[arg(long)]
        en_tgt: Option<PathBuf>,
        #[arg(long)]
        tables: Option<PathBuf>,
        /// Target language; defaults to the config's `target_lang`.
        #[arg(long)]
        lang: Option<Lang>,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Code-switch a corpus with a dictionary.
    Augment {
        #[arg(long)]
        dict: Option<PathBuf>,
        /// Switch ratio; defaults to the config's `r`.
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: PathBuf,
        /// Corpus; defaults to the config's train corpus.
        input: Option<PathBuf>,
    },
    /// Train one seed and write checkpoints, vocabulary and metrics log.
    Train {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score checkpoints; several checkpoints are summarised as seeds.
    Evaluate {
        #[arg(long = "checkpoint", required = true)]
        checkpoints: Vec<PathBuf>,
        /// Vocabulary file; defaults to `vocab.txt` beside each checkpoint.
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Labelled corpora; default to the config's test and target_test.
        #[arg(long = "data")]
        data: Vec<PathBuf>,
        /// Write the predictions of the first checkpoint on the first corpus.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Train and compare ablation settings over the config's seeds.
    Ablate {
        /// Comma-separated settings: axis names joined by `+`, or `baseline`.
        #[arg(long, value_delimiter = ',')]
        axes: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of every objective on random small models.
    Gradcheck {
        /// Number of random problems, seeded 0..n after `--seed`.
        #[arg(long, default_value_t = 3)]
        problems: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        verbose: bool,
    },
    /// Generate the synthetic bilingual benchmark and a config for it.
    MakeSynthetic {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Training sentences.
        #[arg(long, default_value_t = 1000)]
        size: usize,
        #[arg(long, default_value = "ner")]
        task: Task,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Parser)]
#[command(name = "phonexl", version, about = "Phonemic-orthographic cross-lingual transfer")]
pub struct Cli {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Parses `args` (program name first) and runs the command, writing its
/// report to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Usage(e.to_string()))?;
    execute(&cli.config, cli.command, out)
}

fn say(out: &mut dyn Write, text: impl AsRef<str>) -> Result<(), Error> {
    out.write_all(text.as_ref().as_bytes()).map_err(|source| Error::Io {
        path: "<stdout>".into(),
        source,
    })
}

pub fn execute(args: &ConfigArgs, command: Command, out: &mut dyn Write) -> Result<(), Error> {
    let cfg = args.resolve()?;
    match command {
        Command::Transcribe {
            lang,
            mode,
            tables,
            input,
            output,
        } => {
            let tables = io::load_tables(tables.as_deref().or(cfg.tables.as_deref()))?;
            let mut d = io::load_dataset_any(&input)?;
            if let Some(l) = &lang {
                for ex in d.examples_mut() {
                    for w in ex.words_mut() {
                        w.lang = l.clone();
                    }
                }
            }
            let t = harness::transcribe_dataset(&tables, &d, mode).map_err(|e| Error::parse(&input, e))?;
            let t = match &lang {
                Some(_) => restore_langs(&t, &io::load_dataset_any(&input)?),
                None => t,
            };
            io::save_dataset(&output, &t)?;
            say(out, format!("transcribed {} sentences, {} words\n", t.len(), t.word_count()))
        }
        Command::BuildVocab { size, output, inputs } => {
            let corpora = corpora_or_config(&inputs, &cfg)?;
            let refs: Vec<&Dataset> = corpora.iter().collect();
            let vocab = train_subword_vocab(&refs, size.unwrap_or(cfg.vocab_size));
            io::write(&output, vocab.to_text())?;
            say(out, format!("{} entries\n", vocab.len()))
        }
        Command::ExtendVocab {
            vocab,
            dict,
            output,
            inputs,
        } => {
            let base = io::load_vocab(&vocab)?;
            let corpora = inputs
                .iter()
                .map(|p| io::load_dataset_any(p))
                .collect::<Result<Vec<_>, _>>()?;
            let dict = dict.as_deref().map(io::load_dictionary).transpose()?;
            let mut segments: Vec<&str> = corpora.iter().flat_map(Dataset::segments).collect();
            if let Some(d) = &dict {
                segments.extend(d.segments());
            }
            let extended = base.extend(segments);
            io::write(&output, extended.to_text())?;
            say(
                out,
                format!("{} entries ({} added)\n", extended.len(), extended.len() - base.len()),
            )
        }
        Command::InspectDataset { vocab, input } => {
            let d = io::load_dataset_any(&input)?;
            let vocab = vocab.as_deref().map(io::load_vocab).transpose()?;
            say(out, inspect(&d, vocab.as_ref()))
        }
        Command::BuildDict {
            src_en,
            en_tgt,
            tables,
            lang,
            mode,
            output,
        } => {
            let need = |flag: Option<PathBuf>, key: &Option<PathBuf>, name: &str| {
                flag.or_else(|| key.clone())
                    .ok_or_else(|| Error::Config(format!("--{name} is required")))
            };
            let src_en = need(src_en, &cfg.pivot_source_en, "src-en")?;
            let en_tgt = need(en_tgt, &cfg.pivot_en_target, "en-tgt")?;
            let tables = io::load_tables(tables.as_deref().or(cfg.tables.as_deref()))?;
            let target = lang.unwrap_or_else(|| cfg.target_lang.clone());
            let mode = mode.unwrap_or(cfg.ablation.mode());
            let built = build_pivot_dictionary(&io::load_muse(&src_en)?, &io::load_muse(&en_tgt)?, &target, &tables, mode);
            io::write(&output, built.dictionary.to_tsv())?;
            say(
                out,
                format!(
                    "{} source words, {} untranscribable targets dropped\n",
                    built.dictionary.len(),
                    built.dropped
                ),
            )
        }
        Command::Augment {
            dict,
            r,
            seed,
            output,
            input,
        } => {
            let dict = match dict.or_else(|| cfg.dictionary.clone()) {
                Some(p) => io::load_dictionary(&p)?,
                None => harness::prepare(&cfg)?
                    .dictionary
                    .ok_or_else(|| Error::Config("augment needs a dictionary".into()))?,
            };
            let input = input
                .or_else(|| cfg.train.clone())
                .ok_or_else(|| Error::Config("augment needs an input corpus".into()))?;
            let r = r.unwrap_or(cfg.weights.r);
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Config(format!("r = {r} lies outside [0, 1]")));
            }
            let (augmented, switched, covered) = augment(&io::load_dataset_any(&input)?, &dict, r, seed.unwrap_or(cfg.seed));
            io::save_dataset(&output, &augmented)?;
            say(out, format!("switched {switched} of {covered} covered words\n"))
        }
        Command::Train { seed, epochs, out: dir } => {
            let mut cfg = cfg;
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            if let Some(d) = dir {
                cfg.out = Some(d);
            }
            let seed = seed.unwrap_or(cfg.seed);
            let prep = harness::prepare(&cfg)?;
            let run = harness::train(&cfg, &prep, seed, cfg.out.as_deref())?;
            let mut text = format!(
                "seed {seed}: {} steps, best epoch {}",
                run.steps, run.best_epoch
            );
            if let Some(s) = run.best_dev {
                text.push_str(&format!(", dev F1 {:.2}", s.f1));
            }
            text.push('\n');
            for (name, d) in [("test", &prep.test), ("target_test", &prep.target_test)] {
                if let Some(d) = d {
                    let s = harness::score(&run.best, &prep, d)?;
                    text.push_str(&format!(
                        "{name}: P {:.2} R {:.2} F1 {:.2}\n",
                        s.precision, s.recall, s.f1
                    ));
                }
            }
            say(out, text)
        }
        Command::Evaluate {
            checkpoints,
            vocab,
            data,
            predictions,
        } => {
            let data = if data.is_empty() {
                [&cfg.test, &cfg.target_test].into_iter().flatten().cloned().collect()
            } else {
                data
            };
            if data.is_empty() {
                return Err(Error::Config("no corpus to evaluate: pass --data or set test/target_test".into()));
            }
            let tables = cfg
                .transcribe
                .then(|| io::load_tables(cfg.tables.as_deref()))
                .transpose()?;
            let report = evaluate(&checkpoints, vocab.as_deref(), &data, tables.as_ref(), predictions.as_deref())?;
            say(out, report.to_string())
        }
        Command::Ablate { axes, seeds, out: dir } => {
            let mut cfg = cfg;
            if !seeds.is_empty() {
                cfg.seeds = seeds;
            }
            let settings = axes
                .iter()
                .map(|a| Setting::parse(a.trim()))
                .collect::<Result<Vec<_>, _>>()?;
            let dir = dir.or_else(|| cfg.out.clone());
            let table = harness::ablate(&cfg, &settings, dir.as_deref())?;
            let text = table.to_string();
            if let Some(d) = &dir {
                io::write(&d.join("ablation.tsv"), &text)?;
            }
            say(out, text)
        }
        Command::Gradcheck { problems, seed, verbose } => {
            let mut failed = Vec::new();
            let mut worst: f64 = 0.0;
            for s in seed..seed + problems {
                for r in check_objectives(s, &GradCheckOptions::default()) {
                    worst = worst.max(r.report.max_relative());
                    if verbose || !r.report.passed() {
                        say(out, format!("problem {s}: {r}"))?;
                    }
                    if !r.report.passed() {
                        failed.push(format!("{} (problem {s})", r.checked.name()));
                    }
                }
            }
            say(
                out,
                format!("{problems} problems, 5 objectives each, worst relative error {worst:.3e}\n"),
            )?;
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Error::Numerical(format!("gradient check failed: {}", failed.join(", "))))
            }
        }
        Command::MakeSynthetic { seed, size, task, out: dir } => {
            let bench = make_synthetic(&SyntheticSpec::new(seed, size)).map_err(|e| Error::Config(e.to_string()))?;
            let files = bench.files();
            for (name, text) in &files {
                io::write(&dir.join(name), text)?;
            }
            io::write(&dir.join(SYNTHETIC_CONFIG), synthetic_config(task))?;
            say(
                out,
                format!(
                    "{} files in {}, sound change {} -> {}\n",
                    files.len() + 1,
                    dir.display(),
                    bench.substitution.0,
                    bench.substitution.1
                ),
            )
        }
    }
}

fn restore_langs(transcribed: &Dataset, original: &Dataset) -> Dataset {
    let mut out = transcribed.clone();
    for (ex, orig) in out.examples_mut().iter_mut().zip(original.examples()) {
        for (w, o) in ex.words_mut().iter_mut().zip(orig.words()) {
            w.lang = o.lang.clone();
        }
    }
    out
}

fn corpora_or_config(inputs: &[PathBuf], cfg: &RunConfig) -> Result<Vec<Dataset>, Error> {
    let paths: Vec<PathBuf> = if inputs.is_empty() {
        cfg.train.iter().chain(&cfg.raw).cloned().collect()
    } else {
        inputs.to_vec()
    };
    if paths.is_empty() {
        return Err(Error::Config("no input corpora: pass files or set train/raw".into()));
    }
    paths.iter().map(|p| io::load_dataset_any(p)).collect()
}

/// Every sentence code-switched with its own stream; returns the corpus and
/// the switched and covered word counts.
pub fn augment(d: &Dataset, dict: &BilingualDictionary, r: f64, seed: u64) -> (Dataset, usize, usize) {
    let mut examples = Vec::with_capacity(d.len());
    let (mut switched, mut covered) = (0, 0);
    for (i, ex) in d.examples().iter().enumerate() {
        let mut rng = stream(seed, Stream::CodeSwitch, &[i as u64]);
        let (e, plan) = code_switch(ex, dict, r, &mut rng);
        switched += plan.positions.len();
        covered += plan.covered;
        examples.push(e);
    }
    (Dataset::new(examples, d.role(), d.tags().clone()), switched, covered)
}

/// Corpus statistics as `key<TAB>value` lines.
pub fn inspect(d: &Dataset, vocab: Option<&Vocabulary>) -> String {
    let mut langs: BTreeMap<&str, usize> = BTreeMap::new();
    let mut labels: BTreeMap<&str, usize> = BTreeMap::new();
    let mut segments: BTreeMap<&str, usize> = BTreeMap::new();
    let (mut no_ipa, mut labelled) = (0, 0);
    for ex in d.examples() {
        labelled += usize::from(ex.is_labelled());
        for w in ex.words() {
            *langs.entry(w.lang.as_str()).or_default() += 1;
            if let Some(l) = &w.label {
                *labels.entry(l).or_default() += 1;
            }
            no_ipa += usize::from(w.ipa.is_empty());
            for s in w.ipa.segments() {
                *segments.entry(s).or_default() += 1;
            }
        }
    }
    let mut s = String::new();
    let mut line = |k: &str, v: String| s.push_str(&format!("{k}\t{v}\n"));
    line("sentences", d.len().to_string());
    line("labelled sentences", labelled.to_string());
    line("words", d.word_count().to_string());
    line("words without phonemes", no_ipa.to_string());
    line("distinct segments", segments.len().to_string());
    let max_len = d.examples().iter().map(|e| e.len()).max().unwrap_or(0);
    line("longest sentence", max_len.to_string());
    for (l, n) in &langs {
        line(&format!("lang {l}"), n.to_string());
    }
    for (l, n) in &labels {
        line(&format!("label {l}"), n.to_string());
    }
    if let Some(v) = vocab {
        let (mut ortho, mut ortho_unk, mut phone, mut phone_unk) = (0, 0, 0, 0);
        for w in d.examples().iter().flat_map(|e| e.words()) {
            let o = v.encode_surface(&w.surface);
            ortho += o.len();
            ortho_unk += o.iter().filter(|&&i| i == UNK).count();
            let p = v.encode_segments(w.ipa.segments());
            phone += p.len();
            phone_unk += p.iter().filter(|&&i| i == UNK).count();
        }
        line("vocabulary", v.len().to_string());
        line("orthographic subtokens", ortho.to_string());
        line("orthographic unknown", ortho_unk.to_string());
        line("phonemic subtokens", phone.to_string());
        line("phonemic unknown", phone_unk.to_string());
    }
    s
}

/// Scores every checkpoint on every corpus; rows are per language, columns
/// per checkpoint (seed).
pub fn evaluate(
    checkpoints: &[PathBuf],
    vocab: Option<&Path>,
    data: &[PathBuf],
    tables: Option<&phonexl_core::transcription::TableSet>,
    predictions: Option<&Path>,
) -> Result<EvalReport, Error> {
    let mut task = None;
    let mut by_lang: Vec<LangScores> = Vec::new();
    for (k, ckpt) in checkpoints.iter().enumerate() {
        let loaded = Loaded::open(ckpt, vocab)?;
        if task.is_some_and(|t| t != loaded.checkpoint.task) {
            return Err(Error::Config("checkpoints disagree on the task".into()));
        }
        task = Some(loaded.checkpoint.task);
        for (j, path) in data.iter().enumerate() {
            let d = loaded.load_data(path, tables)?;
            let lang = d
                .examples()
                .first()
                .map(|e| e.lang().clone())
                .ok_or_else(|| Error::Config(format!("{} is empty", path.display())))?;
            let score = loaded.evaluate(&d)?;
            if k == 0 && j == 0 {
                if let Some(p) = predictions {
                    io::save_dataset(p, &loaded.predict(&d)?)?;
                }
            }
            let seed = loaded.checkpoint.seed;
            match by_lang.iter_mut().find(|l| l.lang == lang) {
                Some(l) => {
                    l.seeds.push(seed);
                    l.scores.push(score);
                }
                None => by_lang.push(LangScores {
                    lang,
                    seeds: vec![seed],
                    scores: vec![score],
                }),
            }
        }
    }
    Ok(EvalReport {
        task: task.unwrap_or(Task::Ner),
        languages: by_lang,
    })
}

pub const SYNTHETIC_CONFIG: &str = "synthetic.conf";

/// Config for the files written by `make-synthetic`.
pub fn synthetic_config(task: Task) -> String {
    let weights = match task {
        Task::Ner => "lambda_align = 0.01\nbeta_mlm = 0.01\ngamma_xmlm = 0.01\nmu = 0.2\nr = 0.4\n",
        Task::Pos => "lambda_align = 0.01\nbeta_mlm = 0.001\ngamma_xmlm = 0.01\nmu = 0.1\nr = 0.4\n",
    };
    format!(
        "# synthetic benchmark, {task}\n\
         task = {task}\n\
         source_lang = syn-src\n\
         target_lang = syn-tgt\n\
         train = syn-src.train.{task}.tsv\n\
         dev = syn-src.dev.{task}.tsv\n\
         test = syn-src.test.{task}.tsv\n\
         target_test = syn-tgt.test.{task}.tsv\n\
         raw = syn-tgt.raw.tsv\n\
         pivot_source_en = syn-src-en.txt\n\
         pivot_en_target = en-syn-tgt.txt\n\
         tables = .\n\
         vocab_size = 1500\n\
         layers = 1\n\
         heads = 2\n\
         hidden = 32\n\
         ff = 64\n\
         max_positions = 256\n\
         {weights}\
         lr = 0.002\n\
         batch_size = 16\n\
         epochs = 30\n\
         seeds = 0,1,2\n"
    )
}
