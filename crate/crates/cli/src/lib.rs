//! Library side of the `funque` command: synthetic clips and distortions,
//! and the extract / score / monotonicity pipelines.

pub mod distort;
pub mod pipeline;
pub mod synth;
