pub mod bundle;
pub mod data;
pub mod dbn;
pub mod error;
pub mod eval;
pub mod linear;
pub mod metrics;
pub mod par;
pub mod pipeline;
pub mod rbm;
pub mod rng;
pub mod transforms;

pub use error::{Error, ErrorKind, Result};
