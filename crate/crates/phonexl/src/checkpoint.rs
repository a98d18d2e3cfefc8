//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `PHXLCKPT` |
//! | 4 | format version (`u32`, currently 1) |
//! | 8 | header length `n` (`u64`) |
//! | n | UTF-8 JSON header ([`Header`]) |
//! | ... | every tensor of `header.tensors`, in order, as row-major `f64` |
//!
//! The header carries the encoder shape, embedding flags, tag and language
//! inventories, the transcription mode, SHA-256 digests of the vocabulary
//! file and of the run config, the epoch and its dev F1. Nothing in the file
//! depends on wall-clock time, so equal runs give equal bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use phonexl_core::corpus::TagSet;
use phonexl_core::metrics::Task;
use phonexl_core::nnet::{EmbedFlags, EncoderConfig, Model, Params};
use phonexl_core::transcription::Mode;
use phonexl_core::{Lang, Matrix};

use crate::error::Error;

pub const MAGIC: &[u8; 8] = b"PHXLCKPT";
pub const VERSION: u32 = 1;

pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderShape {
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

impl From<&EncoderConfig> for EncoderShape {
    fn from(c: &EncoderConfig) -> Self {
        EncoderShape {
            layers: c.layers,
            heads: c.heads,
            hidden: c.hidden,
            ff: c.ff,
            max_positions: c.max_positions,
            segments: c.segments,
            languages: c.languages,
            ortho_vocab: c.ortho_vocab,
            phone_vocab: c.phone_vocab,
        }
    }
}

impl From<&EncoderShape> for EncoderConfig {
    fn from(s: &EncoderShape) -> Self {
        EncoderConfig {
            layers: s.layers,
            heads: s.heads,
            hidden: s.hidden,
            ff: s.ff,
            max_positions: s.max_positions,
            segments: s.segments,
            languages: s.languages,
            ortho_vocab: s.ortho_vocab,
            phone_vocab: s.phone_vocab,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub task: String,
    pub source_lang: String,
    pub target_lang: String,
    /// Language index order of the language embedding.
    pub langs: Vec<String>,
    pub tags: Vec<String>,
    pub mode: String,
    pub phonemic_embedding: bool,
    pub language_embedding: bool,
    pub encoder: EncoderShape,
    pub vocab_sha256: String,
    pub config_sha256: String,
    pub seed: u64,
    pub epoch: usize,
    pub dev_f1: Option<f64>,
    pub tensors: Vec<TensorInfo>,
}

/// Everything needed to rebuild a trained model, minus the vocabulary.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub task: Task,
    pub source_lang: Lang,
    pub target_lang: Lang,
    pub langs: Vec<Lang>,
    pub tags: TagSet,
    pub mode: Mode,
    pub vocab_sha256: String,
    pub config_sha256: String,
    pub seed: u64,
    pub epoch: usize,
    pub dev_f1: Option<f64>,
    pub model: Model,
}

impl Checkpoint {
    pub fn header(&self) -> Header {
        let m = &self.model;
        Header {
            task: self.task.to_string(),
            source_lang: self.source_lang.to_string(),
            target_lang: self.target_lang.to_string(),
            langs: self.langs.iter().map(Lang::to_string).collect(),
            tags: self.tags.tags().to_vec(),
            mode: self.mode.to_string(),
            phonemic_embedding: m.flags.phonemic,
            language_embedding: m.flags.language,
            encoder: (&m.config).into(),
            vocab_sha256: self.vocab_sha256.clone(),
            config_sha256: self.config_sha256.clone(),
            seed: self.seed,
            epoch: self.epoch,
            dev_f1: self.dev_f1,
            tensors: m
                .params
                .iter()
                .map(|(_, name, t)| TensorInfo {
                    name: name.into(),
                    rows: t.rows(),
                    cols: t.cols(),
                })
                .collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header()).expect("header serializes");
        let mut out = Vec::with_capacity(20 + header.len() + self.model.params.size() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, _, t) in self.model.params.iter() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, String> {
        let take = |at: usize, n: usize| {
            bytes
                .get(at..at + n)
                .ok_or_else(|| format!("truncated at byte {at}"))
        };
        if take(0, 8)? != MAGIC {
            return Err("not a checkpoint (bad magic)".into());
        }
        let version = u32::from_le_bytes(take(8, 4)?.try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let n = u64::from_le_bytes(take(12, 8)?.try_into().expect("8 bytes")) as usize;
        let header: Header = serde_json::from_slice(take(20, n)?).map_err(|e| format!("header: {e}"))?;
        let mut at = 20 + n;
        let mut params = Params::new();
        for t in &header.tensors {
            let len = t.rows * t.cols;
            let data = take(at, len * 8)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            at += len * 8;
            params.add(&t.name, Matrix::from_vec(t.rows, t.cols, data));
        }
        if at != bytes.len() {
            return Err(format!("{} trailing bytes", bytes.len() - at));
        }
        let lang = |s: &str| Lang::new(s).map_err(|e| e.to_string());
        let flags = EmbedFlags {
            phonemic: header.phonemic_embedding,
            language: header.language_embedding,
        };
        let tags = TagSet::new(header.tags.iter().map(String::as_str));
        let model = Model::from_params((&header.encoder).into(), flags, tags.len(), params)
            .map_err(|e| e.to_string())?;
        Ok(Checkpoint {
            task: header.task.parse()?,
            source_lang: lang(&header.source_lang)?,
            target_lang: lang(&header.target_lang)?,
            langs: header.langs.iter().map(|l| lang(l)).collect::<Result<_, _>>()?,
            tags,
            mode: header.mode.parse()?,
            vocab_sha256: header.vocab_sha256,
            config_sha256: header.config_sha256,
            seed: header.seed,
            epoch: header.epoch,
            dev_f1: header.dev_f1,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), Error> {
        crate::io::write(path, self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let bytes = std::fs::read(path).map_err(|source| Error::Io {
            path: path.into(),
            source,
        })?;
        Self::from_bytes(&bytes).map_err(|message| Error::Checkpoint {
            path: path.into(),
            message,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use phonexl_core::rng::{stream, Stream};

    fn sample() -> Checkpoint {
        let mut cfg = EncoderConfig::desk(20, 2);
        cfg.layers = 1;
        cfg.hidden = 8;
        cfg.ff = 16;
        let model = Model::new(cfg, EmbedFlags::default(), 7, 0.02, &mut stream(3, Stream::Init, &[])).unwrap();
        Checkpoint {
            task: Task::Ner,
            source_lang: Lang::zh(),
            target_lang: Lang::vi(),
            langs: vec![Lang::zh(), Lang::vi()],
            tags: TagSet::ner(),
            mode: Mode::Ipa,
            vocab_sha256: sha256_hex("vocab"),
            config_sha256: sha256_hex("config"),
            seed: 3,
            epoch: 2,
            dev_f1: Some(81.5),
            model,
        }
    }

    #[test]
    fn bytes_round_trip() {
        let c = sample();
        let bytes = c.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.model.params, c.model.params);
        assert_eq!(back.header(), c.header());
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn rejects_damage() {
        let bytes = sample().to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
    }

    #[test]
    fn digest_is_hex_sha256() {
        assert_eq!(
            sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
