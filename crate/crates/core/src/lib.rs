// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cavity;
pub mod config;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod io;
pub mod levelset;
pub mod mesh;
pub mod optimizer;
pub mod oracle;
pub mod physics;
pub mod scenario;

pub use error::{Error, Result};
