//! Exponential-sum workbench for prime moduli.

pub mod bilinear;
pub mod cli;
pub mod complete_sums;
pub mod correlation;
pub mod dirichlet;
pub mod exponent_opt;
pub mod ffq;
pub mod kloosterman;
pub mod modforms;
mod special;
