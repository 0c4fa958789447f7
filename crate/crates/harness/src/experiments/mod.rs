mod ablation;
mod bounds;
mod calibration;
mod estimation;
mod modes;
mod tradeoff;

use serde::{Deserialize, Serialize};

pub use ablation::{run_ablation_epsilon, ABLATION_ATTACKS, ABLATION_EPSILONS};
pub use bounds::{run_validate_bounds, REPORTED_BUDGET_TABLE};
pub use calibration::{run_calibrate, SUBTLE_FAIL_BELOW, SUBTLE_SWEEP};
pub use estimation::{run_estimation, ESTIMATION_RATIOS};
pub use modes::run_modes;
pub use tradeoff::{run_tradeoff, TRADEOFF_BUDGETS};

use crate::{ExperimentSpec, HarnessError, Report};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ValidateBounds,
    Tradeoff,
    EstimateRatio,
    Modes,
    AblationEpsilon,
    Calibrate,
}

impl Experiment {
    pub fn run(self, spec: &ExperimentSpec) -> Result<Report, HarnessError> {
        spec.validate()?;
        match self {
            Experiment::ValidateBounds => run_validate_bounds(spec),
            Experiment::Tradeoff => run_tradeoff(spec),
            Experiment::EstimateRatio => run_estimation(spec),
            Experiment::Modes => run_modes(spec),
            Experiment::AblationEpsilon => run_ablation_epsilon(spec),
            Experiment::Calibrate => run_calibrate(spec),
        }
    }
}
