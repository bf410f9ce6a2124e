//! False discovery rate procedures for discrete tests.
//!
//! Discrete p-values (Fisher's exact test and friends) are stochastically
//! larger than uniform under the null, which makes BH and BL conservative.
//! This crate implements the classic procedures next to discrete-aware
//! variants:
//!
//! * [`procedures`]: BH, BL, their midP versions, discrete BH (DBH), discrete
//!   BL (DBL) and Tarone-filtered midP BH/BL, all as adjusted p-values.
//! * [`exact`]: one-sided Fisher's exact test with its full attainable support.
//! * [`null_model`]: the discrete null distribution every procedure consumes.
//! * [`bounds`]: computable FDR bound for BH on midP-values.
//! * [`oracle`]: exact FDR/power by brute-force enumeration for small families.
//! * [`simulation`]: seeded Monte-Carlo FDR/power study.
//! * [`io`]: CSV input formats used by the command-line tool.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod exact;
pub mod io;
pub mod null_model;
pub mod numeric;
pub mod oracle;
pub mod procedures;
pub mod simulation;

pub use error::{Error, Result};
pub use exact::{attainable_support, fisher_exact, hypergeom_pmf, ContingencyTable, TailDirection};
pub use null_model::{NullDistribution, TestResult};
pub use procedures::{adjust, AdjustedPValues, Family, Procedure, TaroneSelection};
