//! Numerical toolkit for β-ensembles with critical potentials: equilibrium
//! measures, effective potentials, Monte Carlo sampling and the escape
//! experiments built on them.

pub mod equilibrium;
pub mod error;
pub mod config;
pub mod exec;
pub mod experiments;
pub mod io;
pub mod measure;
pub mod potential;
pub mod ratefn;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
