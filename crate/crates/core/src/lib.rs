//! Many-to-one comparisons of proportions under a monotone order
//! restriction, on the odds-ratio scale.
//!
//! The pipeline is: fit the saturated logit model ([`model`]), build Dunnett
//! or Williams contrasts and their maxT adjusted p-values ([`contrasts`],
//! [`mvn`]), then combine them in closed testing chains ([`ctp`]).
//! [`simulation`] estimates per-pair power and FWER of all procedures.

pub mod contrasts;
pub mod ctp;
pub mod error;
pub mod model;
pub mod mvn;
pub mod simulation;

pub use contrasts::{
    contrast_test, dunnett_matrix, global_maxt_p, pad_to_full, single_contrast_p, williams_matrix,
    ContrastKind, ContrastMatrix, ContrastRow, TestReport,
};
pub use ctp::{analyze, ctp_pairwise, ctp_williams, dunnett_baseline, williams_baseline, CtpResult, DoseEntry, WilliamsResult};
pub use error::{Error, Result};
pub use model::{fit_saturated_logit, BoundaryPolicy, DoseGroupData, ModelFit};
pub use mvn::{adjust_maxt, mvn_upper_orthant_complement, MvnOptions, MvnSpec};
pub use simulation::{run_scenario, run_study, Procedure, Scenario, ScenarioResult};
