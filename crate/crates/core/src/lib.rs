pub mod bleu;
pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod edit;
pub mod error;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod tensor;
pub mod train;
pub mod vocab;
pub mod workbench;

pub use error::{Error, Result};
