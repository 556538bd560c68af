//! Goodness-of-fit testing for autoregressive Hilbertian processes.
//!
//! The crate covers the full pipeline used to decide whether a functional
//! time series is linearly driven by its own past:
//!
//! * discretized functional data with weighted quadrature ([`grid`], [`sample`], [`fpca`]),
//! * the FPCR-L1S estimator for functional linear models ([`flmfr`]),
//! * the projected Cramér–von Mises statistic and its wild-bootstrap calibration ([`gof`]),
//! * ARH(z) and nonlinear functional autoregression simulators ([`arh`]),
//! * diffusion simulation and drift/volatility estimators ([`sde`]),
//! * the two-stage Ornstein–Uhlenbeck specification test ([`spectest`]),
//! * Monte Carlo experiment and tick-ingestion plumbing ([`experiment`], [`ticks`]).
//!
//! Data-parallel loops (bootstrap replicates, Monte Carlo replicates, the
//! geometry matrix) go through [`Execution`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iterators otherwise.

pub mod arh;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod flmfr;
pub mod fpca;
pub mod gof;
pub mod grid;
pub mod rng;
pub mod sample;
pub mod sde;
pub mod spectest;
pub mod stats;
pub mod ticks;

pub use error::{Error, Result};
pub use exec::Execution;
pub use fpca::{ev_cutoff, fpca, project, reconstruct, FpcBasis, ScoreMatrix};
pub use grid::{inner_product, Grid};
pub use sample::FunctionalSample;
