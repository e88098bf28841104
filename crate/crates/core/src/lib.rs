//! Numerical criteria for discrete spectrum of 1D tridiagonal operators with
//! killing (birth-death chains) and 1D diffusion operators.

pub mod continuous;
pub mod criteria;
pub mod duality;
pub mod expr;
pub mod gallery;
pub mod harmonic;
pub mod logdomain;
pub mod model;
pub mod oracle;
pub mod series;
pub mod single_birth;
