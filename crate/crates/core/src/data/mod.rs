//! Training-pair synthesis, the synthetic desk-scale corpus and batching.

pub mod batch;
pub mod corpus;
pub mod mixture;

pub use batch::{BatchConfig, BatchIterator, FullBatch, LfBatch, WaveBatch};
pub use corpus::{generate_corpus, speech_like, synthetic_rir, CorpusConfig};
pub use mixture::{
    active_mask, noise_gain, realized_snr_db, synthesize_all, synthesize_pair, Manifest, MixtureSpec,
    Split, SynthesisConfig, TrainingPair,
};
