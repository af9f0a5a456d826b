//! Quantum search decoding: power-law runtime theory, closed-form query
//! bounds for beam post-amplification, and a classical statevector simulator
//! of the decoding algorithms with exact oracle-query accounting.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beam;
pub mod cli;
pub mod closed_form;
pub mod decoder;
pub mod error;
pub mod logvalue;
pub mod powerlaw;
pub mod quantum;
pub mod rankfreq;
mod regression;
pub mod runtime;

pub use error::{QdError, Result};
pub use logvalue::LogValue;
