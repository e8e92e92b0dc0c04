//! Lifting-load estimation from 36-channel insole pressure recordings.

pub mod aggregate;
pub mod dataset;
pub mod domain;
pub mod dsp;
pub mod eval;
pub mod ingest;
pub mod pressmap;
pub mod regress;
pub mod stream;
pub mod synth;
