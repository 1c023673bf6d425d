//! DMF-Net: a decoupling-style multi-band fusion model for full-band
//! (48 kHz) speech denoising and dereverberation.
//!
//! The full-band STFT is split into low (0–8 kHz), mid (8–16 kHz) and high
//! (16–24 kHz) bands. The low band is enhanced by a three-network chain
//! (denoising, dereverberation, complex refinement); mid and high bands are
//! masked by magnitude-gain networks that also see the low-band estimate.
//! Bands are fused back and resynthesized.

pub mod audio;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod figure;
pub mod frontend;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod objectives;
pub mod resample;
pub mod train;

pub use error::{Error, Result};
