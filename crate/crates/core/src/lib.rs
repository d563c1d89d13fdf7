//! Sharp sensitivity analysis for causal contrasts under unmeasured
//! confounding.
//!
//! The analyst supplies two numbers: `M` and `m`, the largest and smallest
//! outcome risk across every exposure/confounder stratum. Together with the
//! observed distribution of exposure and outcome they bound the
//! counterfactual risks `p(D_1 = 1)` and `p(D_0 = 1)`, and through them any
//! contrast that is monotone in both risks. The bounds are arbitrarily sharp:
//! [`witness`] builds explicit confounded models that come as close to them
//! as desired.
//!
//! ```
//! use sharpbounds::{contrast_interval, validate_params, ContrastSpec, ObservedMargins};
//!
//! let obs = ObservedMargins::new(0.27, 0.38, 0.49)?;
//! let params = validate_params(&obs, 0.0, 1.0)?;
//! let rd = contrast_interval(&obs, &params, &ContrastSpec::RiskDifference)?;
//! assert!((rd.lower + 0.4151).abs() < 1e-12 && (rd.upper - 0.5849).abs() < 1e-12);
//! # Ok::<(), sharpbounds::Error>(())
//! ```

pub mod bounds;
pub mod contrasts;
pub mod error;
pub mod ext_real;
pub mod grid;
pub mod ingest;
pub mod montecarlo;
pub mod witness;

pub use bounds::{
    counterfactual_interval, crude_risk, feasible_region, validate_params, Exposure, FeasibleRegion, ObservedMargins,
    Probability, ProbabilityInterval, SensitivityParams,
};
pub use contrasts::{contrast_interval, eval_contrast, odds, ContrastInterval, ContrastSpec};
pub use error::{Error, Result};
pub use grid::{grid, GridCell, GridTable};
pub use ingest::{margins_from_counts, margins_from_records, ContingencyCounts};
pub use montecarlo::{run_mc, sample_param, McConfig, McSummary, ParamDistribution};
pub use witness::{
    build_witness, exact_counterfactual, implied_extrema, implied_margins, sharpness_gap, BinaryConfounderModel,
    SharpnessGap, WitnessModel, WitnessTarget,
};
