//! Coherent quantum Youla–Kučera parameterization and weighted H2 synthesis.

pub mod cli;
pub mod error;
pub mod exec;
pub mod grid;
pub mod hinf_eval;
pub mod linalg;
pub mod norms;
pub mod physreal;
pub mod stabilization;
pub mod statespace;
pub mod synthesis;
pub mod youla;

pub use error::{Error, Result};
