//! Oracles shared by the module tests and the acceptance run.
#![allow(dead_code)]

pub mod chem;
pub mod encoder;
pub mod kg;
pub mod metrics;
pub mod pretrain;
