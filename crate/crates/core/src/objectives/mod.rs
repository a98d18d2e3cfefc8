//! Training objectives and their weighted sum:
//! `L = L_task + λ·L_align + β·L_MLM + γ·L_XMLM`.
//!
//! Every component is mean-reduced over the sentences of a batch, so the
//! weights do not depend on batch size.

mod alignment;
mod crf;
mod mlm;
pub mod check;

pub use alignment::{alignment_loss, alignment_loss_grad, alignment_on_tape, AlignmentGrad};
pub use crf::{crf_decode, crf_nll, crf_nll_grad, crf_on_tape, CrfGrad, CrfParams, CrfVars};
pub use mlm::{mask_count, mask_tokens, mlm_loss, mlm_on_tape, MaskPlan};

use alloc::vec::Vec;

use crate::corpus::{tokenize, AlignedExample, CorpusError, SubtokenBatch, TagSet, TokenizedRow, Vocabulary};
use crate::dictionary::{code_switch, BilingualDictionary};
use crate::nnet::{Gradients, Model, NnetError, Tape, Var, WordGroups};
use crate::rng::{stream, Stream};
use crate::{Lang, Matrix};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ObjectiveError {
    #[error("word {word} has a zero embedding vector")]
    DegenerateEmbedding { word: usize },
    #[error("example {example} has no labels")]
    Unlabelled { example: usize },
    #[error(transparent)]
    Nnet(#[from] NnetError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Loss weights and augmentation rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Alignment weight (also written α).
    pub lambda_align: f64,
    pub beta_mlm: f64,
    pub gamma_xmlm: f64,
    /// Fraction of words masked.
    pub mu: f64,
    /// Fraction of dictionary-covered words code-switched.
    pub r: f64,
}

impl LossWeights {
    /// Task loss only.
    pub const TASK_ONLY: LossWeights = LossWeights {
        lambda_align: 0.0,
        beta_mlm: 0.0,
        gamma_xmlm: 0.0,
        mu: 0.0,
        r: 0.0,
    };
    pub const PANX_ZH_VI: LossWeights = LossWeights {
        lambda_align: 0.01,
        beta_mlm: 0.01,
        gamma_xmlm: 0.01,
        mu: 0.20,
        r: 0.40,
    };
    pub const PANX_JA_KO: LossWeights = LossWeights {
        lambda_align: 0.1,
        beta_mlm: 0.001,
        gamma_xmlm: 0.001,
        mu: 0.25,
        r: 0.30,
    };
    pub const UDPOS_ZH_VI: LossWeights = LossWeights {
        lambda_align: 0.01,
        beta_mlm: 0.001,
        gamma_xmlm: 0.01,
        mu: 0.10,
        r: 0.40,
    };
    pub const UDPOS_JA_KO: LossWeights = LossWeights {
        lambda_align: 0.1,
        beta_mlm: 0.01,
        gamma_xmlm: 0.01,
        mu: 0.05,
        r: 0.30,
    };

    pub fn validate(&self) -> Result<(), &'static str> {
        let w = [self.lambda_align, self.beta_mlm, self.gamma_xmlm];
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err("loss weights must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.mu) || !(0.0..=1.0).contains(&self.r) {
            return Err("mu and r must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Component values of one evaluation of the combined loss.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub task: f64,
    pub align: f64,
    pub mlm: f64,
    pub xmlm: f64,
    pub total: f64,
}

/// Whether components with zero weight are still evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Components {
    All,
    #[default]
    Weighted,
}

/// Shared inputs for turning sentences into model batches.
#[derive(Debug, Clone, Copy)]
pub struct LossContext<'a> {
    pub vocab: &'a Vocabulary,
    pub langs: &'a [Lang],
    pub tags: &'a TagSet,
    pub dictionary: Option<&'a BilingualDictionary>,
}

impl LossContext<'_> {
    pub fn tokenize_all(&self, examples: &[&AlignedExample]) -> Result<Vec<TokenizedRow>, ObjectiveError> {
        examples
            .iter()
            .map(|e| tokenize(e, self.vocab, self.langs).map_err(ObjectiveError::from))
            .collect()
    }
}

/// The CRF scores held by `model`.
pub fn model_crf(model: &Model) -> CrfParams {
    let p = &model.params;
    CrfParams {
        transitions: p.get(model.ids.crf.trans).clone(),
        start: p.get(model.ids.crf.start).data().to_vec(),
        stop: p.get(model.ids.crf.stop).data().to_vec(),
    }
}

/// Word-level emissions `[W×K]` from word-pooled hidden states.
pub fn emissions_on_tape(tape: &mut Tape<'_>, model: &Model, hidden: Var, groups: &WordGroups) -> Var {
    let pooled = tape.mean_pool(hidden, groups.ortho.clone());
    let w = tape.param(model.ids.crf.emit_w);
    let b = tape.param(model.ids.crf.emit_b);
    let e = tape.matmul(pooled, w);
    tape.add_row_bias(e, b)
}

/// Viterbi tag ids for each sentence.
pub fn predict(model: &Model, examples: &[&AlignedExample], ctx: &LossContext<'_>) -> Result<Vec<Vec<usize>>, ObjectiveError> {
    if examples.is_empty() {
        return Ok(Vec::new());
    }
    let batch = SubtokenBatch::new(ctx.tokenize_all(examples)?);
    let mut tape = Tape::new(&model.params);
    let (_, hidden) = model.forward(&mut tape, &batch)?;
    let groups = WordGroups::new(&batch);
    let em = emissions_on_tape(&mut tape, model, hidden, &groups);
    let em = tape.value(em);
    let crf = model_crf(model);
    Ok(groups
        .sentences
        .iter()
        .map(|r| {
            let mut m = Matrix::zeros(r.len(), em.cols());
            for (k, src) in r.clone().enumerate() {
                m.row_mut(k).copy_from_slice(em.row(src));
            }
            crf_decode(&m, &crf)
        })
        .collect())
}

/// One summand of the combined loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Term {
    Task,
    Align,
    Mlm,
    Xmlm,
}

impl Term {
    pub const ALL: [Term; 4] = [Term::Task, Term::Align, Term::Mlm, Term::Xmlm];

    pub fn name(self) -> &'static str {
        match self {
            Term::Task => "task",
            Term::Align => "align",
            Term::Mlm => "mlm",
            Term::Xmlm => "xmlm",
        }
    }
}

/// Combined loss over a batch of labelled sentences, with gradients.
///
/// `seeds[i]` drives example `i`'s masking and code-switching. The MLM and
/// XMLM copies draw masks from identically seeded streams, so with `r = 0`
/// the two losses coincide exactly.
pub fn total_loss(
    model: &Model,
    examples: &[&AlignedExample],
    seeds: &[u64],
    weights: &LossWeights,
    ctx: &LossContext<'_>,
    components: Components,
) -> Result<(LossBreakdown, Gradients), ObjectiveError> {
    let all = components == Components::All;
    let include = [
        true,
        all || weights.lambda_align != 0.0,
        all || weights.beta_mlm != 0.0,
        all || weights.gamma_xmlm != 0.0,
    ];
    build(model, examples, seeds, weights, ctx, include)
}

/// A single term at unit weight, with its gradients. `weights` supplies
/// only `mu` and `r`.
pub fn term_loss(
    model: &Model,
    examples: &[&AlignedExample],
    seeds: &[u64],
    weights: &LossWeights,
    ctx: &LossContext<'_>,
    term: Term,
) -> Result<(f64, Gradients), ObjectiveError> {
    let unit = LossWeights {
        lambda_align: 1.0,
        beta_mlm: 1.0,
        gamma_xmlm: 1.0,
        ..*weights
    };
    let include = Term::ALL.map(|t| t == term);
    let (b, g) = build(model, examples, seeds, &unit, ctx, include)?;
    Ok((b.total, g))
}

fn build(
    model: &Model,
    examples: &[&AlignedExample],
    seeds: &[u64],
    weights: &LossWeights,
    ctx: &LossContext<'_>,
    include: [bool; 4],
) -> Result<(LossBreakdown, Gradients), ObjectiveError> {
    assert_eq!(examples.len(), seeds.len(), "one seed per example");
    assert!(!examples.is_empty(), "empty batch");
    let scale = 1.0 / examples.len() as f64;
    let rows = ctx.tokenize_all(examples)?;
    let clean = SubtokenBatch::new(rows.clone());
    let mut tape = Tape::new(&model.params);
    let (emb, hidden) = model.forward(&mut tape, &clean)?;
    let groups = WordGroups::new(&clean);
    let mut terms = Vec::new();
    let mut vars = [None; 4];

    if include[0] {
        let labels: Vec<Vec<usize>> = examples
            .iter()
            .enumerate()
            .map(|(i, e)| e.label_ids(ctx.tags).ok_or(ObjectiveError::Unlabelled { example: i }))
            .collect::<Result<_, _>>()?;
        let em = emissions_on_tape(&mut tape, model, hidden, &groups);
        let crf_vars = CrfVars {
            transitions: tape.param(model.ids.crf.trans),
            start: tape.param(model.ids.crf.start),
            stop: tape.param(model.ids.crf.stop),
        };
        let v = crf_on_tape(&mut tape, em, crf_vars, &groups.sentences, &labels, scale);
        terms.push((v, 1.0));
        vars[0] = Some(v);
    }

    if include[1] {
        let o = tape.mean_pool(emb.tok, groups.ortho.clone());
        let p = tape.mean_pool(emb.phone, groups.phone.clone());
        let s = tape.param(model.ids.log_tau);
        let v = alignment_on_tape(&mut tape, o, p, s, &groups.sentences, scale)?;
        terms.push((v, weights.lambda_align));
        vars[1] = Some(v);
    }

    if include[2] {
        let v = masked_lm(&mut tape, model, &rows, seeds, weights.mu, scale)?;
        terms.push((v, weights.beta_mlm));
        vars[2] = Some(v);
    }

    if include[3] {
        let mut switched = Vec::with_capacity(examples.len());
        for (ex, &seed) in examples.iter().zip(seeds) {
            let ex = match ctx.dictionary {
                Some(d) => code_switch(ex, d, weights.r, &mut stream(seed, Stream::CodeSwitch, &[])).0,
                None => (*ex).clone(),
            };
            switched.push(tokenize(&ex, ctx.vocab, ctx.langs)?);
        }
        let v = masked_lm(&mut tape, model, &switched, seeds, weights.mu, scale)?;
        terms.push((v, weights.gamma_xmlm));
        vars[3] = Some(v);
    }

    let total = tape.weighted_sum(&terms);
    let value = |v: Option<Var>| v.map_or(0.0, |v| tape.value(v).item());
    let breakdown = LossBreakdown {
        task: value(vars[0]),
        align: value(vars[1]),
        mlm: value(vars[2]),
        xmlm: value(vars[3]),
        total: tape.value(total).item(),
    };
    if !breakdown.total.is_finite() {
        return Err(NnetError::Numerical("loss").into());
    }
    let grads = tape.backward(total);
    Ok((breakdown, grads))
}

fn masked_lm(
    tape: &mut Tape<'_>,
    model: &Model,
    rows: &[TokenizedRow],
    seeds: &[u64],
    mu: f64,
    scale: f64,
) -> Result<Var, ObjectiveError> {
    let mut masked = Vec::with_capacity(rows.len());
    let mut plans = Vec::with_capacity(rows.len());
    for (row, &seed) in rows.iter().zip(seeds) {
        let (m, plan) = mask_tokens(row, mu, &mut stream(seed, Stream::Mask, &[]));
        masked.push(m);
        plans.push(plan);
    }
    if plans.iter().all(MaskPlan::is_empty) {
        return Ok(tape.constant(Matrix::scalar(0.0)));
    }
    let batch = SubtokenBatch::new(masked);
    let (_, hidden) = model.forward(tape, &batch)?;
    Ok(mlm_on_tape(tape, model, hidden, batch.ortho_len(), &plans, scale).expect("non-empty plans"))
}
