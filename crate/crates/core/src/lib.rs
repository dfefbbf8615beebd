pub mod amaf_ris;
pub mod beam_design;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod harness;
pub(crate) mod linalg;
pub mod mumimo;

pub use error::{Error, Result};
