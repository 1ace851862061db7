// negated comparisons deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod functional;
pub mod grid;
pub mod interp;
pub mod nonlinearity;
pub mod optimizer;
pub mod oracles;
pub mod quad;
pub mod sweep;

pub use error::{Error, Result};
