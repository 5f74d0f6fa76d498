// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod btl;
pub mod error;
pub mod measure;
pub mod promptlab;
pub mod solver;
pub mod utility;
pub mod verify;
