// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bifurcation;
pub mod config;
pub mod error;
pub mod linalg;
pub mod linstab;
pub mod model;
pub mod pde;
pub mod presets;
pub mod run;
pub mod steady;
