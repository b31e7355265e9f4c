//! PALM, iPALM and PAM for the blind fusion objective.

mod backtracking;
mod objective;
mod palm;
mod pam;
mod params;
mod trace;

pub use backtracking::{
    backtrack_step, descent_holds, prox_descent_holds, Block, BlockProblem, StepInput, StepOutcome,
};
pub use objective::{
    data_fidelity, gaussian_init_kernel, grad_k, grad_u, is_feasible, objective, objective_terms,
    FusionProblem, Init, ObjectiveTerms,
};
pub use palm::{
    run_ipalm, run_ipalm_observed, run_palm, run_palm_observed, Observer, SolverOutput,
    SolverState, StepAudit,
};
pub use pam::{pam_image_update, pam_kernel_update, run_pam, AdmmState, PamUpdate};
pub use params::{step_size, PamParams, SolverParams};
pub use trace::{IterationRecord, SolverTrace, TRACE_CSV_HEADER};

/// Solver selection for front ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Palm,
    Ipalm,
    Pam,
}

impl Algorithm {
    pub fn run(self, problem: &FusionProblem, params: &SolverParams, init: &Init) -> crate::Result<SolverOutput> {
        match self {
            Algorithm::Palm => run_palm(problem, params, init),
            Algorithm::Ipalm => run_ipalm(problem, params, init),
            Algorithm::Pam => run_pam(problem, params, init),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Palm => "palm",
            Algorithm::Ipalm => "ipalm",
            Algorithm::Pam => "pam",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "palm" => Ok(Algorithm::Palm),
            "ipalm" => Ok(Algorithm::Ipalm),
            "pam" => Ok(Algorithm::Pam),
            other => Err(crate::Error::BadParams(format!("unknown algorithm {other:?}"))),
        }
    }
}
