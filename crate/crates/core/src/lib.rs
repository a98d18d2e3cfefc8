//! Core algorithms for phonemic-orthographic cross-lingual transfer.
//!
//! The crate is `no_std` (with `alloc`) and holds everything that is pure
//! computation:
//!
//! * [`transcription`]: table-driven romanization and IPA transcription of
//!   Chinese, Japanese, Korean and Vietnamese tokens.
//! * [`corpus`]: aligned token-level datasets, the joint subword vocabulary
//!   and subtoken/word alignment.
//! * [`dictionary`]: pivot-built bilingual dictionaries and code-switching.
//! * [`nnet`]: dense tensors with a reverse-mode tape, the five-term input
//!   embedding, a small pre-norm transformer encoder and Adam.
//! * [`objectives`]: CRF task loss, orthographic/phonemic alignment loss,
//!   masked and code-switched masked language modelling, and their sum.
//! * [`metrics`], [`synthetic`] and [`trainer`]: scoring, the synthetic
//!   bilingual benchmark and the seeded training loop.
//!
//! File IO, checkpoints and the command line live in the `phonexl` crate.
#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod corpus;
pub mod dictionary;
pub mod lang;
pub mod math;
pub mod metrics;
pub mod nnet;
pub mod objectives;
pub mod rng;
pub mod synthetic;
pub mod tensor;
pub mod trainer;
pub mod transcription;

pub use lang::Lang;
pub use tensor::Matrix;
