//! Seeded mini-batch training with best-dev selection, and scoring.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::corpus::AlignedExample;
use crate::metrics::{score, Score, Task};
use crate::nnet::{Adam, AdamConfig, Model};
use crate::objectives::{predict, total_loss, Components, LossBreakdown, LossContext, LossWeights, ObjectiveError};
use crate::rng::{derive_seed, stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Global gradient-norm bound; `0` disables clipping.
    pub clip_norm: f64,
    pub seed: u64,
    pub weights: LossWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 3,
            batch_size: 16,
            adam: AdamConfig::default(),
            clip_norm: 1.0,
            seed: 0,
            weights: LossWeights::TASK_ONLY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub epoch: usize,
    /// Global step, counted from 1.
    pub step: u64,
    pub loss: LossBreakdown,
    /// Gradient norm before clipping.
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// Counted from 1.
    pub epoch: usize,
    pub steps: u64,
    pub mean_loss: f64,
    pub dev: Option<Score>,
    /// Whether this epoch is the best so far on dev (ties go to the later epoch).
    pub best: bool,
}

/// Receives training progress. Both hooks default to doing nothing.
pub trait Observer {
    fn on_step(&mut self, _record: &StepRecord) {}
    fn on_epoch(&mut self, _record: &EpochRecord, _model: &Model) {}
}

impl Observer for () {}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub last: Model,
    /// Model of the best dev epoch (the last epoch without a dev set).
    pub best: Model,
    pub best_epoch: usize,
    pub best_dev: Option<Score>,
    pub steps: u64,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum TrainError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("batch size must be at least 1")]
    BatchSize,
    #[error("invalid loss weights: {0}")]
    Weights(&'static str),
    #[error("non-finite loss or gradient at epoch {epoch}, step {step}")]
    NonFinite {
        epoch: usize,
        step: u64,
        /// Parameters before the failing step.
        last_good: Box<Model>,
    },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

/// Seed of example `index` in `epoch`; drives its masks and code-switches.
pub fn example_seed(seed: u64, epoch: usize, index: usize) -> u64 {
    derive_seed(seed, Stream::Mask, &[epoch as u64, index as u64])
}

/// Adam over `total_loss` on shuffled batches of `train`. After each epoch
/// `dev` (when given) is scored and the best model kept.
pub fn train(
    mut model: Model,
    train: &[AlignedExample],
    dev: Option<&[AlignedExample]>,
    task: Task,
    ctx: &LossContext<'_>,
    config: &TrainConfig,
    observer: &mut dyn Observer,
) -> Result<TrainOutcome, TrainError> {
    if train.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    if config.batch_size == 0 {
        return Err(TrainError::BatchSize);
    }
    config.weights.validate().map_err(TrainError::Weights)?;
    let mut adam = Adam::new(config.adam, &model.params);
    let mut best: Option<(Model, usize, Option<Score>)> = None;
    let mut step = 0u64;
    // parameters before the latest update, the last ones with a finite loss
    let mut before_step = model.params.clone();

    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut stream(config.seed, Stream::Shuffle, &[epoch as u64]));
        let mut loss_sum = 0.0;
        let mut batches = 0u64;
        for chunk in order.chunks(config.batch_size) {
            step += 1;
            let examples: Vec<&AlignedExample> = chunk.iter().map(|&i| &train[i]).collect();
            let seeds: Vec<u64> = chunk.iter().map(|&i| example_seed(config.seed, epoch, i)).collect();
            let non_finite = |model: &Model| TrainError::NonFinite {
                epoch,
                step,
                last_good: Box::new(model.clone()),
            };
            let (loss, mut grads) =
                match total_loss(&model, &examples, &seeds, &config.weights, ctx, Components::Weighted) {
                    Ok(v) => v,
                    Err(ObjectiveError::Nnet(crate::nnet::NnetError::Numerical(_))) => {
                        return Err(non_finite(&model))
                    }
                    Err(e) => return Err(e.into()),
                };
            let grad_norm = grads.global_norm();
            if !grad_norm.is_finite() {
                return Err(non_finite(&model));
            }
            if config.clip_norm > 0.0 {
                grads.clip_global_norm(config.clip_norm);
            }
            before_step.clone_from(&model.params);
            adam.step(&mut model.params, &grads);
            model.clamp_tau();
            loss_sum += loss.total;
            batches += 1;
            observer.on_step(&StepRecord {
                epoch,
                step,
                loss,
                grad_norm,
            });
        }

        let dev_score = match dev {
            Some(d) if !d.is_empty() => match evaluate(&model, d, task, ctx) {
                Ok(s) => Some(s),
                Err(ObjectiveError::Nnet(crate::nnet::NnetError::Numerical(_))) => {
                    return Err(TrainError::NonFinite {
                        epoch,
                        step,
                        last_good: Box::new(Model {
                            params: before_step,
                            ..model
                        }),
                    })
                }
                Err(e) => return Err(e.into()),
            },
            _ => None,
        };
        let improved = match (&best, dev_score) {
            (None, _) => true,
            (Some((_, _, Some(b))), Some(s)) => s.f1 >= b.f1,
            (Some(_), None) => true,
            (Some((_, _, None)), Some(_)) => true,
        };
        if improved {
            best = Some((model.clone(), epoch, dev_score));
        }
        observer.on_epoch(
            &EpochRecord {
                epoch,
                steps: batches,
                mean_loss: loss_sum / batches as f64,
                dev: dev_score,
                best: improved,
            },
            &model,
        );
    }

    let (best, best_epoch, best_dev) = best.unwrap_or_else(|| (model.clone(), 0, None));
    Ok(TrainOutcome {
        last: model,
        best,
        best_epoch,
        best_dev,
        steps: step,
    })
}

const EVAL_BATCH: usize = 64;

/// Viterbi tags for every example, as tag strings.
pub fn predict_tags(
    model: &Model,
    examples: &[AlignedExample],
    ctx: &LossContext<'_>,
) -> Result<Vec<Vec<String>>, ObjectiveError> {
    let mut out = Vec::with_capacity(examples.len());
    for chunk in examples.chunks(EVAL_BATCH) {
        let refs: Vec<&AlignedExample> = chunk.iter().collect();
        for ids in predict(model, &refs, ctx)? {
            out.push(ids.into_iter().map(|i| ctx.tags.tag(i).into()).collect());
        }
    }
    Ok(out)
}

/// Scores `model` on labelled `examples`.
pub fn evaluate(
    model: &Model,
    examples: &[AlignedExample],
    task: Task,
    ctx: &LossContext<'_>,
) -> Result<Score, ObjectiveError> {
    let gold = examples
        .iter()
        .enumerate()
        .map(|(i, e)| {
            e.words()
                .iter()
                .map(|w| w.label.clone().ok_or(ObjectiveError::Unlabelled { example: i }))
                .collect::<Result<Vec<String>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let pred = predict_tags(model, examples, ctx)?;
    Ok(score(task, &gold, &pred))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{train_subword_vocab, TagSet};
    use crate::nnet::{EmbedFlags, EncoderConfig};
    use crate::synthetic::{make_synthetic, SyntheticSpec};
    use crate::Lang;

    struct Count(u64, usize);

    impl Observer for Count {
        fn on_step(&mut self, _: &StepRecord) {
            self.0 += 1;
        }
        fn on_epoch(&mut self, _: &EpochRecord, _: &Model) {
            self.1 += 1;
        }
    }

    fn setup() -> (Vec<AlignedExample>, crate::corpus::Vocabulary, Vec<Lang>) {
        let b = make_synthetic(&SyntheticSpec::new(1, 200)).unwrap();
        let train = b.corpus("syn-src.train.ner.tsv").unwrap().dataset.clone();
        let vocab = train_subword_vocab(&[&train], 200);
        let vocab = vocab.extend(train.segments().collect::<Vec<_>>());
        (train.into_examples(), vocab, alloc::vec![b.source, b.target])
    }

    fn model(vocab: usize, seed: u64) -> Model {
        let mut cfg = EncoderConfig::desk(vocab, 2);
        cfg.layers = 1;
        cfg.hidden = 8;
        cfg.ff = 16;
        Model::new(cfg, EmbedFlags::default(), 7, 0.02, &mut stream(seed, Stream::Init, &[])).unwrap()
    }

    #[test]
    fn step_bookkeeping_and_determinism() {
        let (train, vocab, langs) = setup();
        let tags = TagSet::ner();
        let ctx = LossContext {
            vocab: &vocab,
            langs: &langs,
            tags: &tags,
            dictionary: None,
        };
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 2,
            weights: LossWeights::PANX_ZH_VI,
            ..TrainConfig::default()
        };
        let run = || {
            let mut c = Count(0, 0);
            let out = super::train(model(vocab.len(), 5), &train[..3], Some(&train[3..5]), Task::Ner, &ctx, &cfg, &mut c).unwrap();
            (out, c.0, c.1)
        };
        let (a, steps, epochs) = run();
        assert_eq!((steps, epochs, a.steps), (2, 1, 2));
        let (b, _, _) = run();
        assert_eq!(a.last.params, b.last.params);
        assert_eq!(a.best_epoch, 1);
    }

    #[test]
    fn rejects_empty_input() {
        let (train, vocab, langs) = setup();
        let tags = TagSet::ner();
        let ctx = LossContext {
            vocab: &vocab,
            langs: &langs,
            tags: &tags,
            dictionary: None,
        };
        let m = model(vocab.len(), 0);
        let err = super::train(m.clone(), &[], None, Task::Ner, &ctx, &TrainConfig::default(), &mut ());
        assert!(matches!(err, Err(TrainError::EmptyTrainingSet)));
        let cfg = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        let err = super::train(m, &train, None, Task::Ner, &ctx, &cfg, &mut ());
        assert!(matches!(err, Err(TrainError::BatchSize)));
    }
}
