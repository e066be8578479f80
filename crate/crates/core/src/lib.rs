// `!(x > 0.0)` guards deliberately reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod coeffs;
pub mod dtn;
pub mod config;
pub mod elliptic;
pub mod error;
pub mod evolution;
pub mod linalg;
pub mod mesh;
pub mod motion;
pub mod oracle;
pub mod output;
pub mod scenario;
pub mod verify;

pub use error::{Error, Result};
