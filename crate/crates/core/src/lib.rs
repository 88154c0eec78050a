//! Centralized and distributed optimal power flow on radial feeders.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod der;
pub mod feeder;
pub mod nlp;
pub mod partition;
pub mod opf;
pub mod powerflow;
pub mod dopf;
pub mod admm;
