//! Heterogeneous molecular graph learning.

pub mod autodiff;
pub mod chem;
pub mod config;
pub mod encoder;
pub mod finetune;
pub mod hmg;
pub mod kg;
pub mod model;
pub mod pretrain;
pub mod rng;
pub mod synthetic;
