//! Dense numerics: the reverse-mode tape, the five-term input embedding,
//! a pre-norm transformer encoder, Adam and finite-difference checks.

mod adam;
pub mod grad_check;
mod params;
mod tape;

pub use adam::{Adam, AdamConfig};
pub use grad_check::{grad_check, GradCheckOptions, GradCheckReport, TensorReport};
pub use params::{Gradients, ParamId, Params};
pub use tape::{AttentionLayout, CustomBackward, Tape, Var, LAYER_NORM_EPS};

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, Normal};

use crate::corpus::SubtokenBatch;
use crate::math::ln;
use crate::rng::Rng;
use crate::Matrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnetError {
    #[error("invalid encoder configuration: {0}")]
    Config(String),
    #[error("{table}: id {id} out of range for {size} rows (sequence {sequence}, position {position})")]
    Index {
        table: &'static str,
        id: usize,
        size: usize,
        sequence: usize,
        position: usize,
    },
    #[error("non-finite values in {0}")]
    Numerical(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EncoderConfig {
    pub layers: usize,
    pub heads: usize,
    pub hidden: usize,
    pub ff: usize,
    pub max_positions: usize,
    pub segments: usize,
    pub languages: usize,
    pub ortho_vocab: usize,
    pub phone_vocab: usize,
}

impl EncoderConfig {
    /// Two layers, two heads, width 64.
    pub fn desk(vocab: usize, languages: usize) -> Self {
        EncoderConfig {
            layers: 2,
            heads: 2,
            hidden: 64,
            ff: 128,
            max_positions: 128,
            segments: 1,
            languages,
            ortho_vocab: vocab,
            phone_vocab: vocab,
        }
    }

    pub fn validate(&self) -> Result<(), NnetError> {
        let positive = [
            ("heads", self.heads),
            ("hidden", self.hidden),
            ("ff", self.ff),
            ("max_positions", self.max_positions),
            ("segments", self.segments),
            ("languages", self.languages),
            ("ortho_vocab", self.ortho_vocab),
            ("phone_vocab", self.phone_vocab),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(NnetError::Config(format!("{name} must be positive")));
            }
        }
        if !self.hidden.is_multiple_of(self.heads) {
            return Err(NnetError::Config(format!(
                "hidden {} not divisible by heads {}",
                self.hidden, self.heads
            )));
        }
        Ok(())
    }
}

/// Switches for the optional embedding terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EmbedFlags {
    /// Add the word-pooled phonemic term.
    pub phonemic: bool,
    /// Add the language embedding.
    pub language: bool,
}

impl Default for EmbedFlags {
    fn default() -> Self {
        EmbedFlags {
            phonemic: true,
            language: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerIds {
    pub ln1_g: ParamId,
    pub ln1_b: ParamId,
    pub wq: ParamId,
    pub bq: ParamId,
    pub wk: ParamId,
    pub bk: ParamId,
    pub wv: ParamId,
    pub bv: ParamId,
    pub wo: ParamId,
    pub bo: ParamId,
    pub ln2_g: ParamId,
    pub ln2_b: ParamId,
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrfIds {
    pub emit_w: ParamId,
    pub emit_b: ParamId,
    pub trans: ParamId,
    pub start: ParamId,
    pub stop: ParamId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelIds {
    pub tok: ParamId,
    pub phone: ParamId,
    pub pos: ParamId,
    pub seg: ParamId,
    pub lang: ParamId,
    pub layers: Vec<LayerIds>,
    pub final_g: ParamId,
    pub final_b: ParamId,
    pub mlm_bias: ParamId,
    pub log_tau: ParamId,
    pub crf: CrfIds,
}

/// Initial temperature of the alignment loss.
pub const TAU_INIT: f64 = 1.0 / 0.07;
pub const TAU_MAX: f64 = 100.0;

/// Embedding tables, encoder, tied MLM bias, alignment temperature and the
/// CRF head, all in one [`Params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: EncoderConfig,
    pub flags: EmbedFlags,
    pub tags: usize,
    pub params: Params,
    pub ids: ModelIds,
}

/// Tape handles produced by [`Model::embed`].
#[derive(Debug, Clone, Copy)]
pub struct Embedded {
    /// Full input sum, `[B·T × D]`.
    pub sum: Var,
    /// Orthographic token rows `w_t`, `[B·T × D]`.
    pub tok: Var,
    /// Phonemic token rows `w_PE`, `[B·T' × D]`.
    pub phone: Var,
}

/// Row groups tying subtokens to words across a batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordGroups {
    /// Per word (all sentences, in order): its orthographic rows.
    pub ortho: Vec<Vec<usize>>,
    /// Per word: its phonemic rows.
    pub phone: Vec<Vec<usize>>,
    /// Word range of each sentence.
    pub sentences: Vec<core::ops::Range<usize>>,
}

impl WordGroups {
    pub fn new(batch: &SubtokenBatch) -> Self {
        let (t, tp) = (batch.ortho_len(), batch.phone_len());
        let mut g = WordGroups {
            ortho: Vec::new(),
            phone: Vec::new(),
            sentences: Vec::new(),
        };
        for (b, row) in batch.rows().iter().enumerate() {
            let start = g.ortho.len();
            for m in 0..row.words() {
                g.ortho.push(row.ortho_span(m).map(|i| b * t + i).collect());
                g.phone.push(row.phone_span(m).map(|j| b * tp + j).collect());
            }
            g.sentences.push(start..g.ortho.len());
        }
        g
    }

    pub fn words(&self) -> usize {
        self.ortho.len()
    }
}

impl Model {
    /// Normal(0, `init_std`) matrices, zero biases, unit layer-norm scales.
    pub fn new(
        config: EncoderConfig,
        flags: EmbedFlags,
        tags: usize,
        init_std: f64,
        rng: &mut Rng,
    ) -> Result<Self, NnetError> {
        config.validate()?;
        if tags == 0 {
            return Err(NnetError::Config("tag set is empty".into()));
        }
        let normal = Normal::new(0.0, init_std).map_err(|e| NnetError::Config(format!("{e}")))?;
        let mut p = Params::new();
        let d = config.hidden;
        let mut randn = |p: &mut Params, name: &str, r: usize, c: usize| {
            let data = (0..r * c).map(|_| normal.sample(rng)).collect();
            p.add(name, Matrix::from_vec(r, c, data))
        };
        let tok = randn(&mut p, "emb.tok", config.ortho_vocab, d);
        let phone = randn(&mut p, "emb.phone", config.phone_vocab, d);
        let pos = randn(&mut p, "emb.pos", config.max_positions, d);
        let seg = randn(&mut p, "emb.seg", config.segments, d);
        let lang = randn(&mut p, "emb.lang", config.languages, d);
        let mut layers = Vec::new();
        for l in 0..config.layers {
            let n = |s: &str| format!("layer{l}.{s}");
            let ln1_g = p.add(&n("ln1.g"), Matrix::filled(1, d, 1.0));
            let ln1_b = p.add(&n("ln1.b"), Matrix::zeros(1, d));
            let wq = randn(&mut p, &n("attn.wq"), d, d);
            let bq = p.add(&n("attn.bq"), Matrix::zeros(1, d));
            let wk = randn(&mut p, &n("attn.wk"), d, d);
            let bk = p.add(&n("attn.bk"), Matrix::zeros(1, d));
            let wv = randn(&mut p, &n("attn.wv"), d, d);
            let bv = p.add(&n("attn.bv"), Matrix::zeros(1, d));
            let wo = randn(&mut p, &n("attn.wo"), d, d);
            let bo = p.add(&n("attn.bo"), Matrix::zeros(1, d));
            let ln2_g = p.add(&n("ln2.g"), Matrix::filled(1, d, 1.0));
            let ln2_b = p.add(&n("ln2.b"), Matrix::zeros(1, d));
            let w1 = randn(&mut p, &n("ff.w1"), d, config.ff);
            let b1 = p.add(&n("ff.b1"), Matrix::zeros(1, config.ff));
            let w2 = randn(&mut p, &n("ff.w2"), config.ff, d);
            let b2 = p.add(&n("ff.b2"), Matrix::zeros(1, d));
            layers.push(LayerIds {
                ln1_g,
                ln1_b,
                wq,
                bq,
                wk,
                bk,
                wv,
                bv,
                wo,
                bo,
                ln2_g,
                ln2_b,
                w1,
                b1,
                w2,
                b2,
            });
        }
        let final_g = p.add("final_ln.g", Matrix::filled(1, d, 1.0));
        let final_b = p.add("final_ln.b", Matrix::zeros(1, d));
        let mlm_bias = p.add("mlm.bias", Matrix::zeros(1, config.ortho_vocab));
        let log_tau = p.add("align.log_tau", Matrix::scalar(ln(TAU_INIT)));
        let emit_w = randn(&mut p, "crf.emit_w", d, tags);
        let emit_b = p.add("crf.emit_b", Matrix::zeros(1, tags));
        let trans = p.add("crf.trans", Matrix::zeros(tags, tags));
        let start = p.add("crf.start", Matrix::zeros(1, tags));
        let stop = p.add("crf.stop", Matrix::zeros(1, tags));
        let ids = ModelIds {
            tok,
            phone,
            pos,
            seg,
            lang,
            layers,
            final_g,
            final_b,
            mlm_bias,
            log_tau,
            crf: CrfIds {
                emit_w,
                emit_b,
                trans,
                start,
                stop,
            },
        };
        Ok(Model {
            config,
            flags,
            tags,
            params: p,
            ids,
        })
    }

    /// Rebuilds a model around loaded parameters; names and shapes must
    /// match what [`Model::new`] registers.
    pub fn from_params(
        config: EncoderConfig,
        flags: EmbedFlags,
        tags: usize,
        params: Params,
    ) -> Result<Self, NnetError> {
        let mut rng = crate::rng::stream(0, crate::rng::Stream::Init, &[]);
        let mut model = Model::new(config, flags, tags, 0.02, &mut rng)?;
        if model.params.len() != params.len() {
            return Err(NnetError::Config(format!(
                "expected {} tensors, found {}",
                model.params.len(),
                params.len()
            )));
        }
        for ((_, name, want), (_, got_name, got)) in model.params.iter().zip(params.iter()) {
            if name != got_name || want.shape() != got.shape() {
                return Err(NnetError::Config(format!(
                    "tensor {got_name} {:?} does not match {name} {:?}",
                    got.shape(),
                    want.shape()
                )));
            }
        }
        model.params = params;
        Ok(model)
    }

    /// Alignment temperature `exp(s)`.
    pub fn tau(&self) -> f64 {
        crate::math::exp(self.params.get(self.ids.log_tau).item())
    }

    /// Keeps `τ ≤ 100`.
    pub fn clamp_tau(&mut self) {
        let s = self.params.get_mut(self.ids.log_tau);
        let max = ln(TAU_MAX);
        if s.item() > max {
            s.set(0, 0, max);
        }
    }

    /// Input vectors for every orthographic position:
    /// `w_t[id] + w_p[t] + w_s[seg] (+ w_l[lang of word]) (+ PE term)`,
    /// where the PE term is the mean of `w_PE[id] + w_p[j]` over the word's
    /// phonemic subtokens, repeated at each of its orthographic subtokens.
    pub fn embed(&self, tape: &mut Tape<'_>, batch: &SubtokenBatch) -> Result<Embedded, NnetError> {
        let (t_len, p_len) = (batch.ortho_len(), batch.phone_len());
        let ortho_ids: Vec<usize> = batch.ortho_ids().into_iter().map(|i| i as usize).collect();
        let phone_ids: Vec<usize> = batch.phone_ids().into_iter().map(|i| i as usize).collect();
        check_ids("emb.tok", &ortho_ids, t_len, self.config.ortho_vocab)?;
        check_ids("emb.phone", &phone_ids, p_len, self.config.phone_vocab)?;
        let pos_ids: Vec<usize> = (0..batch.batch_size()).flat_map(|_| 0..t_len).collect();
        check_ids("emb.pos", &pos_ids, t_len, self.config.max_positions)?;
        let seg_ids: Vec<usize> = batch.segment_ids().into_iter().map(|i| i as usize).collect();
        check_ids("emb.seg", &seg_ids, t_len, self.config.segments)?;

        let tok = tape.gather(self.ids.tok, ortho_ids);
        let pos = tape.gather(self.ids.pos, pos_ids);
        let seg = tape.gather(self.ids.seg, seg_ids);
        let mut sum = tape.add(tok, pos);
        sum = tape.add(sum, seg);

        if self.flags.language {
            let mut lang_ids = vec![0usize; batch.batch_size() * t_len];
            for (b, row) in batch.rows().iter().enumerate() {
                for (t, &m) in row.ortho_word.iter().enumerate() {
                    lang_ids[b * t_len + t] = row.word_lang[m];
                }
            }
            check_ids("emb.lang", &lang_ids, t_len, self.config.languages)?;
            let lang = tape.gather(self.ids.lang, lang_ids);
            sum = tape.add(sum, lang);
        }

        let phone = tape.gather(self.ids.phone, phone_ids);
        if self.flags.phonemic {
            let phone_pos: Vec<usize> = (0..batch.batch_size()).flat_map(|_| 0..p_len).collect();
            check_ids("emb.pos", &phone_pos, p_len, self.config.max_positions)?;
            let ppos = tape.gather(self.ids.pos, phone_pos);
            let ph = tape.add(phone, ppos);
            let mut groups = vec![Vec::new(); batch.batch_size() * t_len];
            for (b, row) in batch.rows().iter().enumerate() {
                for (t, &m) in row.ortho_word.iter().enumerate() {
                    groups[b * t_len + t] = row.phone_span(m).map(|j| b * p_len + j).collect();
                }
            }
            let pe = tape.mean_pool(ph, groups);
            sum = tape.add(sum, pe);
        }
        Ok(Embedded { sum, tok, phone })
    }

    /// Pre-norm transformer stack over `x = embedded`; padding keys are
    /// masked. With zero layers this is the identity.
    pub fn encode(&self, tape: &mut Tape<'_>, x: Var, batch: &SubtokenBatch) -> Result<Var, NnetError> {
        let layout = AttentionLayout {
            batch: batch.batch_size(),
            len: batch.ortho_len(),
            heads: self.config.heads,
            key_mask: batch.ortho_mask(),
        };
        let mut x = x;
        for l in &self.ids.layers {
            let p = |tape: &mut Tape<'_>, id| tape.param(id);
            let (g1, b1) = (p(tape, l.ln1_g), p(tape, l.ln1_b));
            let h = tape.layer_norm(x, g1, b1);
            let q = affine(tape, h, l.wq, l.bq);
            let k = affine(tape, h, l.wk, l.bk);
            let v = affine(tape, h, l.wv, l.bv);
            let a = tape.attention(q, k, v, layout.clone());
            let a = affine(tape, a, l.wo, l.bo);
            x = tape.add(x, a);
            let (g2, b2) = (p(tape, l.ln2_g), p(tape, l.ln2_b));
            let h = tape.layer_norm(x, g2, b2);
            let f = affine(tape, h, l.w1, l.b1);
            let f = tape.gelu(f);
            let f = affine(tape, f, l.w2, l.b2);
            x = tape.add(x, f);
        }
        if !self.ids.layers.is_empty() {
            let g = tape.param(self.ids.final_g);
            let b = tape.param(self.ids.final_b);
            x = tape.layer_norm(x, g, b);
        }
        if !tape.value(x).is_finite() {
            return Err(NnetError::Numerical("encoder output"));
        }
        Ok(x)
    }

    /// Embedding plus encoder.
    pub fn forward(&self, tape: &mut Tape<'_>, batch: &SubtokenBatch) -> Result<(Embedded, Var), NnetError> {
        let e = self.embed(tape, batch)?;
        let h = self.encode(tape, e.sum, batch)?;
        Ok((e, h))
    }
}

fn affine(tape: &mut Tape<'_>, x: Var, w: ParamId, b: ParamId) -> Var {
    let wv = tape.param(w);
    let bv = tape.param(b);
    let y = tape.matmul(x, wv);
    tape.add_row_bias(y, bv)
}

fn check_ids(table: &'static str, ids: &[usize], len: usize, size: usize) -> Result<(), NnetError> {
    match ids.iter().position(|&id| id >= size) {
        None => Ok(()),
        Some(i) => Err(NnetError::Index {
            table,
            id: ids[i],
            size,
            sequence: i / len.max(1),
            position: i % len.max(1),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TokenizedRow;
    use crate::rng::{stream, Stream};

    fn config(layers: usize) -> EncoderConfig {
        EncoderConfig {
            layers,
            heads: 2,
            hidden: 8,
            ff: 12,
            max_positions: 16,
            segments: 1,
            languages: 2,
            ortho_vocab: 12,
            phone_vocab: 12,
        }
    }

    fn model(layers: usize, flags: EmbedFlags) -> Model {
        Model::new(config(layers), flags, 3, 0.5, &mut stream(3, Stream::Init, &[])).unwrap()
    }

    fn row(ortho: &[u32], ow: &[usize], phone: &[u32], pw: &[usize], langs: &[usize]) -> TokenizedRow {
        TokenizedRow {
            ortho: ortho.to_vec(),
            ortho_word: ow.to_vec(),
            phone: phone.to_vec(),
            phone_word: pw.to_vec(),
            word_lang: langs.to_vec(),
        }
    }

    fn batch() -> SubtokenBatch {
        SubtokenBatch::new(vec![
            row(&[5, 6, 7], &[0, 0, 1], &[8, 9, 10, 11], &[0, 1, 1, 1], &[0, 1]),
            row(&[9], &[0], &[5, 6], &[0, 0], &[1]),
        ])
    }

    #[test]
    fn zero_layers_is_identity() {
        let m = model(0, EmbedFlags::default());
        let mut t = Tape::new(&m.params);
        let (e, h) = m.forward(&mut t, &batch()).unwrap();
        assert_eq!(t.value(e.sum), t.value(h));
    }

    #[test]
    fn phonemic_term_is_word_mean_broadcast() {
        let on = model(0, EmbedFlags::default());
        let off = Model {
            flags: EmbedFlags {
                phonemic: false,
                language: true,
            },
            ..on.clone()
        };
        let b = batch();
        let mut t1 = Tape::new(&on.params);
        let v = on.embed(&mut t1, &b).unwrap().sum;
        let full = t1.value(v).clone();
        let mut t2 = Tape::new(&off.params);
        let v = off.embed(&mut t2, &b).unwrap().sum;
        let part = t2.value(v).clone();
        let pe = on.params.get(on.ids.phone);
        let pos = on.params.get(on.ids.pos);
        // sequence 1 has one word with phones 5, 6 at positions 0, 1
        for t in 0..3 {
            let r = 3 + t;
            for c in 0..8 {
                let want = if t == 0 {
                    (pe.get(5, c) + pos.get(0, c) + pe.get(6, c) + pos.get(1, c)) / 2.0
                } else {
                    0.0
                };
                assert!((full.get(r, c) - part.get(r, c) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn out_of_range_id_names_coordinates() {
        let m = model(1, EmbedFlags::default());
        let b = SubtokenBatch::new(vec![row(&[5, 40], &[0, 0], &[5], &[0], &[0])]);
        let mut t = Tape::new(&m.params);
        let err = m.embed(&mut t, &b).unwrap_err();
        assert_eq!(
            err,
            NnetError::Index {
                table: "emb.tok",
                id: 40,
                size: 12,
                sequence: 0,
                position: 1
            }
        );
    }

    #[test]
    fn padding_does_not_leak_and_batch_order_is_equivariant() {
        let m = model(2, EmbedFlags::default());
        let b = batch();
        let mut t = Tape::new(&m.params);
        let (_, h) = m.forward(&mut t, &b).unwrap();
        let h = t.value(h).clone();

        let swapped = SubtokenBatch::new(vec![b.rows()[1].clone(), b.rows()[0].clone()]);
        let mut t2 = Tape::new(&m.params);
        let (_, h2) = m.forward(&mut t2, &swapped).unwrap();
        let h2 = t2.value(h2).clone();
        for t in 0..3 {
            assert_eq!(h.row(t), h2.row(3 + t));
        }
        assert_eq!(h.row(3), h2.row(0));

        // perturb a pad row's embedding input directly
        let mut t3 = Tape::new(&m.params);
        let e = m.embed(&mut t3, &b).unwrap();
        let mut noisy = t3.value(e.sum).clone();
        noisy.row_mut(5).iter_mut().for_each(|x| *x += 3.0);
        let c = t3.constant(noisy);
        let h3 = m.encode(&mut t3, c, &b).unwrap();
        let h3 = t3.value(h3);
        for r in [0, 1, 2, 3] {
            assert_eq!(h.row(r), h3.row(r));
        }
    }
}
