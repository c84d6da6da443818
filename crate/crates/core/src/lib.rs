//! Nonparametric test for rough spot volatility from high-frequency prices.
//!
//! The crate provides simulators for classical and rough Heston variance
//! with tempered-stable jumps and microstructure noise, spot-variance
//! estimators, the roughness test itself, a Monte Carlo harness, and a
//! tick-data ingestion pipeline.

pub mod error;
pub mod estimators;
pub mod io;
pub mod ingest;
pub mod model;
pub mod montecarlo;
pub mod numeric;
pub mod rng;
pub mod roughtest;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result, Stage};
pub use model::{
    BlockGrid, EtaScheme, GridSpec, JumpModel, NoiseModel, PricePath, RejectionDecision, SimScenario, TestReport,
    TradingDay, TuningSpec, VarianceModel,
};
pub use rng::{rng_stream, RandomStream};
pub use roughtest::{run_test, test_statistic, DiffPanel, SpotVolPanel};
pub use simulate::{simulate, SimOutput};
