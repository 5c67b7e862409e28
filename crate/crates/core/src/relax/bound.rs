use serde::Serialize;

use crate::error::Result;
use crate::exact::{solve_exact_or_heuristic, DEFAULT_BUDGET};
use crate::info::FGenerator;
use crate::model::{DetCode, Instance};

use super::{solve_relaxation_general_with, GeneralOptions, Status};

/// Sandwich of the team optimum between the relaxation and the best code.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundReport {
    pub lb: f64,
    pub ub: f64,
    pub gap: f64,
    /// `|lb + E μᵃ(S) + λ + μᵇ|`.
    pub multiplier_identity_residual: f64,
    /// DPI slack at the relaxation's pair.
    pub dpi_equality_slack: f64,
    pub lambda: f64,
    /// `ub` came from local search rather than enumeration.
    pub heuristic: bool,
    pub best_code: DetCode,
    pub relax_status: Status,
    /// Cost of the relaxation's own joint.
    pub relax_upper: f64,
}

pub fn bound_report(inst: &Instance, f: &FGenerator) -> Result<BoundReport> {
    bound_report_with(inst, f, super::DEFAULT_TOL, DEFAULT_BUDGET, 0)
}

pub fn bound_report_with(inst: &Instance, f: &FGenerator, tol: f64, budget: f64, seed: u64) -> Result<BoundReport> {
    let sol = solve_relaxation_general_with(inst, f, &GeneralOptions { tol, ..GeneralOptions::default() })?;
    let ex = solve_exact_or_heuristic(inst, budget, 16, seed)?;
    let lb = sol.value;
    Ok(BoundReport {
        lb,
        ub: ex.value,
        gap: ex.value - lb,
        multiplier_identity_residual: (lb - sol.mult.dual_value(&inst.p_s)).abs(),
        dpi_equality_slack: sol.dpi_slack,
        lambda: sol.mult.lambda,
        heuristic: ex.heuristic,
        best_code: ex.best_code,
        relax_status: sol.status,
        relax_upper: sol.upper_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Cost, SeparableCost};

    #[test]
    fn bsc_sandwich_is_tight() {
        let cost = SeparableCost::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.0, 0.0]);
        let inst = Instance::new(vec![0.5, 0.5], vec![vec![0.9, 0.1], vec![0.1, 0.9]], 2, Cost::Separable(cost)).unwrap();
        let r = bound_report(&inst, &FGenerator::NegLog).unwrap();
        assert!(r.gap.abs() <= 1e-6, "{r:?}");
        assert!(r.multiplier_identity_residual < 1e-6, "{r:?}");
    }
}
