//! Stationary fluctuations of power-grid swing dynamics under stochastic power injections.

pub mod error;
pub mod closed_form;
pub mod graph;
pub mod io;
pub mod lyapunov;
pub mod montecarlo;
pub mod report;
mod schur;
pub mod swing;
pub mod variance;

pub use error::{Error, Result};
pub use graph::{whitened_spectrum, Edge, SpectralDecomposition, WeightedGraph};
pub use report::{CovarianceBlocks, CovarianceReport, Coverage, Method, Quantity};
pub use swing::{
    linearize, linearize_network, security_check, smib_variance, solve_synchronous_state,
    LinearizedSystem, PowerNetwork, SynchronousState,
};
pub use variance::{
    asymptotic_variance_numeric, asymptotic_variance_uniform_ratio, first_order_variance,
    trace_frequency_variance, ReducedSystem,
};
