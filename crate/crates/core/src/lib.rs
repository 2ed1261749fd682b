//! Compressed-domain RGBD action recognition.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`media_io`] loads synchronized RGB (PPM) and depth (PGM) frame sequences.
//! 2. [`motion`] produces codec-style block motion fields, picks interest points at
//!    moving blocks and chains them into fixed-length trajectories.
//! 3. [`descriptors`] computes HOG, HOF, MBHx, MBHy and the depth-gradient
//!    histogram (HODG) over trajectory-aligned space-time volumes.
//! 4. [`encoding`] trains per-channel diagonal GMM codebooks and encodes each video
//!    as a first-order Fisher vector.
//! 5. [`classify`] trains one-vs-rest linear SVMs and reports mean average precision.
//!
//! [`bench`] measures extraction throughput, [`synth`] generates seeded synthetic
//! sequences and [`pipeline`] wires everything together.
//!
//! Data-parallel loops go through [`par`]; building without the `parallel` feature
//! gives a purely sequential library with bit-identical results.

pub mod artifact;
pub mod bench;
pub mod classify;
pub mod descriptors;
pub mod encoding;
pub mod error;
pub mod media_io;
pub mod motion;
pub mod par;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
