//! Frequency-domain analysis and synthesis of multivariable iterative learning control.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod casestudy;
pub mod cli;
pub mod frf;
pub mod linalg;
pub mod lti;
pub mod poly;
pub mod sim;
pub mod synthesis;
