// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod design;
pub mod error;
pub mod harness;
pub mod io;
pub mod linops;
pub mod penalty;
pub mod prox;
pub mod solver;
