pub mod cli;
pub mod error;
pub mod featurizer;
pub mod graph;
pub mod kb;
pub mod logic;
pub mod mlp;
pub mod pipeline;
pub mod rng;
pub mod sampler;
pub mod synth;

pub use error::{Error, Result};
