//! Lane-change intention prediction from vehicle trajectories.
//!
//! The crate covers the whole chain: recording I/O and synthesis, event
//! labeling, physics features, a bidirectional LSTM sequence encoder, a
//! histogram gradient-boosted tree ensemble, imbalance handling, and the
//! location-split evaluation protocol.

pub mod ingest;
pub mod labeling;
pub mod features;
pub mod matrix;
pub mod imbalance;
pub mod metrics;
pub mod gbdt;
pub mod bilstm;
pub mod stats;
pub mod artifact;
pub mod pipeline;
pub mod cli;
