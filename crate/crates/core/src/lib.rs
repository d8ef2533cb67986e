//! Correlated multivariate count data with generalized Poisson, negative
//! binomial and binomial margins.
//!
//! Each margin is collapsed at its median into a binary variable, binary
//! correlations are calibrated pair by pair so that expansion back to the
//! count scale hits the requested Pearson correlations, and the binary
//! layer is driven by thresholded multivariate normals. The calibrated
//! [`GenerationPlan`] is built once and reused for any number of datasets.
//!
//! ```no_run
//! use multidiscrete::{build_plan, generate, CalibrationOptions, CorrelationMatrix, MarginalSpec};
//!
//! let specs = [
//!     MarginalSpec::GeneralizedPoisson { theta: 5.14, lambda: 0.6445 },
//!     MarginalSpec::NegativeBinomial { r: 3, p: 0.33 },
//! ];
//! let sigma = CorrelationMatrix::from_upper_triangle(2, &[0.25])?;
//! let plan = build_plan(&specs, &sigma, &CalibrationOptions::default())?;
//! let data = generate(&plan, 2000, 42)?;
//! # Ok::<(), multidiscrete::Error>(())
//! ```

pub mod bounds;
pub mod calibration;
pub mod cli;
pub mod collapse;
pub mod config;
pub mod engine;
pub mod error;
pub mod gaussian;
pub mod harness;
pub mod marginals;
pub mod rng;
pub mod stats;

pub use bounds::{check_target_matrix, ep_binary_bounds, gsc_bounds, BoundsOptions, BoundsReport, Verdict};
pub use calibration::{calibrate_matrix, calibrate_pair, CalibrationOptions, PairCalibration};
pub use collapse::{collapse_margin, expand, CollapsedMargin, MedianSide};
pub use config::RunConfig;
pub use engine::{build_plan, empirical_corr, generate, Dataset, GenerationPlan};
pub use error::{Error, Result};
pub use gaussian::{
    bvn_cdf, dichotomize, mvn_sample, nearest_pd, solve_tetrachoric, std_normal_cdf, std_normal_quantile,
    CorrelationMatrix, PdRepairReport,
};
pub use harness::{preset, preset_scenarios, run_replication, EvalTable, Scenario};
pub use marginals::{mom_estimate, Family, MarginalSpec, ParamEstimate, TruncatedPmf};
pub use rng::RngStream;
