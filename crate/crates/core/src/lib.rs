//! Control-stack model for a frequency-multiplexed superconducting processor.

pub mod circuit;
pub mod compiler;
pub mod cz;
pub mod leakage;
pub mod mux;
pub mod numerics;
pub mod pulse;
pub mod resources;
