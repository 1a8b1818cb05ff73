//! Throughput analysis of Wi-Fi APs and listen-before-talk cellular base
//! stations sharing one unlicensed channel under non-saturated traffic.
//!
//! The numerical core is generic over [`scalar::Scalar`]; the aliases below
//! fix it to `f64`, which is what the simulator and the CLI use.

pub mod airtime;
pub mod cellular;
pub mod config;
pub mod error;
pub mod markov;
pub mod optimizer;
pub mod scalar;
pub mod sim;
pub mod solver;
pub mod wifi;

pub use error::{CoexError, Result};

pub type Config = config::CoexConfig<f64>;
pub type Probability = config::Probability<f64>;
pub type FixedPoint = solver::FixedPoint<f64>;
pub type ThroughputReport = airtime::ThroughputReport<f64>;
pub type FrameDurations = airtime::FrameDurations<f64>;
pub type OptimalCwResult = optimizer::OptimalCwResult<f64>;
pub type SweepGrid = optimizer::SweepGrid<f64>;
pub type WifiChainInput = wifi::WifiChainInput<f64>;
pub type CellChainInput = cellular::CellChainInput<f64>;
