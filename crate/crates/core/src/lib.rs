//! Capacity-achieving transmit covariance for frequency-selective MIMO
//! channels.
//!
//! With only second-order channel statistics at the transmitter, the input
//! covariance maximizing the ergodic mutual information of a multipath
//! Rayleigh channel has no closed form. This crate maximizes a large-system
//! deterministic approximation of the EMI instead: the approximation is
//! driven by a coupled fixed-point system of 2L trace equations
//! ([`canonical`]), its value and derivatives are evaluated in closed form
//! ([`emi`]), and its unique maximizer over unit-normalized-trace
//! covariances is found by alternating canonical solves with classical
//! waterfilling ([`optimizer`]). A seeded Monte-Carlo estimator of the true
//! EMI validates the approximation on channels drawn from the angular
//! cluster model in [`channel`].
//!
//! ```
//! use ergocap::channel::{build_channel_stats, five_cluster_scenario};
//! use ergocap::optimizer::{optimize_covariance, OptimizerOptions};
//!
//! let stats = build_channel_stats(&five_cluster_scenario(), 4, 4, 0.1, 0.5).unwrap();
//! let result = optimize_covariance(&stats, &OptimizerOptions::default()).unwrap();
//! assert!(result.converged());
//! assert!(result.q_star.is_unit_normalized());
//! ```

pub mod canonical;
pub mod channel;
pub mod emi;
pub mod error;
pub mod linalg;
pub mod optimizer;
pub mod stream;

pub use canonical::{
    f_maps, resolvent_t, resolvent_t_tilde, solve_canonical, solve_canonical_from,
    uniqueness_certificate, DeltaSolution,
};
pub use channel::{
    build_channel_stats, build_ula_correlation, build_ula_correlation_uniform, draw_channel,
    five_cluster_scenario, ChannelRealization, ChannelStats, CorrelationMatrix, PathAngularSpec,
};
pub use emi::{
    directional_derivative, emi_approx, emi_monte_carlo, stationarity_defect, v_function,
    v_gradient, Covariance, EmiEstimate,
};
pub use error::{Error, Result};
pub use optimizer::{
    optimality_check, optimize_covariance, waterfill, OptimizationResult, OptimizerOptions,
    StopReason, TrajectoryPoint, WaterfillSolution,
};
