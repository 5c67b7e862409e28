//! Convex relaxations of the team problem and their certificates.
//!
//! Three solvers share one Lagrangian scheme over the DPI multiplier `λ`:
//!
//! * [`solve_relaxation_separable`] for costs `δ(s,ŝ) + ρ(x)`, in the
//!   end-to-end pair `a = Q_{Ŝ|S}`, `b = Q_X`;
//! * [`solve_relaxation_bansal`] for the same plus the cross term handled
//!   through its Cauchy–Schwarz minorant `−α√⟨ρ,b⟩`;
//! * [`solve_relaxation_general`] for an arbitrary tensor cost, through a
//!   transport dual that reduces each step to the separable case.
//!
//! # Multiplier convention
//!
//! [`Multipliers`] holds unscaled values in the form
//!
//! ```text
//! δ(s,ŝ) = −λ·g(s,ŝ) − μᵃ(s) + νᵃ(ŝ|s)      g = ∂I_f(a·pS)/∂a(ŝ|s) / pS(s)
//! ρ(x)   =  λ·∂I_f(P·b)/∂b(x) − μᵇ + νᵇ(x)
//! ```
//!
//! so for the log generator `g = log(a(ŝ|s)/a(ŝ))` and
//! `∂I/∂b(x) = D(P(·|x)‖b_Y) − 1`. At an optimum the relaxation value is
//! `−(E[μᵃ(S)] + λ + μᵇ)`. The inverse-optimal synthesis module flips the
//! sign of both `μ` terms.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::model::{EndToEndPair, JointDist, Matrix};

mod bansal;
mod bound;
mod cg;
mod general;
mod kkt;
mod ot;
mod separable;

pub use bansal::solve_relaxation_bansal;
pub use bound::{bound_report, bound_report_with, BoundReport};
pub use general::{solve_relaxation_general, solve_relaxation_general_with, GeneralOptions};
pub use kkt::{kkt_residual_general, kkt_residual_separable, LambdaSearch};
pub use separable::{lambda_max, solve_relaxation_separable};
pub(crate) use separable::{check_generator, separable_parts as separable_parts_of};

pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Status {
    Optimal,
    MaxIter,
    Infeasible,
    /// The concave cross-term linearization has no interior point.
    Degenerate,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::MaxIter => "maxIter",
            Status::Infeasible => "infeasible",
            Status::Degenerate => "degenerate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Multipliers {
    pub lambda_a: Matrix,
    pub lambda_b: Vec<f64>,
    pub lambda: f64,
    pub lambda_p: Matrix,
    pub mu_a: Vec<f64>,
    pub mu_b: f64,
    pub nu_a: Matrix,
    pub nu_b: Vec<f64>,
    /// `ν(z)` in `(s,x,y,ŝ)` order; `None` means identically zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<Vec<f64>>,
}

impl Multipliers {
    pub fn zeros(n_s: usize, n_x: usize, n_y: usize, n_shat: usize) -> Self {
        Multipliers {
            lambda_a: vec![vec![0.0; n_shat]; n_s],
            lambda_b: vec![0.0; n_x],
            lambda: 0.0,
            lambda_p: vec![vec![0.0; n_y]; n_x],
            mu_a: vec![0.0; n_s],
            mu_b: 0.0,
            nu_a: vec![vec![0.0; n_shat]; n_s],
            nu_b: vec![0.0; n_x],
            nu: None,
        }
    }

    /// `−(Σ_s pS(s)·μᵃ(s) + λ + μᵇ)`.
    pub fn dual_value(&self, p_s: &[f64]) -> f64 {
        let e: f64 = self.mu_a.iter().zip(p_s).map(|(m, p)| m * p).sum();
        -(e + self.lambda + self.mu_b)
    }
}

/// Residuals of a KKT system. Every field is nonnegative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct KktReport {
    pub stationarity_a: f64,
    pub stationarity_b: f64,
    pub stationarity_q: f64,
    /// `Σ_s pS⟨a,νᵃ⟩ + ⟨b,νᵇ⟩ + ⟨Q,ν⟩`.
    pub complementarity: f64,
    /// `|λ·slack|`.
    pub dpi_complementarity: f64,
    pub sign_violations: f64,
    pub primal_feasibility: f64,
    pub max_residual: f64,
}

impl KktReport {
    pub(crate) fn finish(mut self) -> Self {
        let parts = [
            self.stationarity_a,
            self.stationarity_b,
            self.stationarity_q,
            self.complementarity,
            self.dpi_complementarity,
            self.sign_violations,
            self.primal_feasibility,
        ];
        self.max_residual = parts.iter().cloned().fold(0.0, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v) });
        self
    }
}

#[derive(Clone, Debug)]
pub struct RelaxSolution {
    pub pair: EndToEndPair,
    /// Joint realizing the bound, from the general solver.
    pub q: Option<JointDist>,
    /// Objective at `pair` (separable solvers) or the certified lower bound
    /// (general solver).
    pub value: f64,
    /// Weak-duality lower bound on the relaxation optimum.
    pub lower_bound: f64,
    /// Objective of a feasible point of the relaxation.
    pub upper_bound: f64,
    pub mult: Multipliers,
    pub status: Status,
    pub kkt: KktReport,
    /// `I_f(P·b) − I_f(a·pS)` at `pair`.
    pub dpi_slack: f64,
    pub iterations: usize,
}

impl RelaxSolution {
    pub fn gap(&self) -> f64 {
        self.upper_bound - self.lower_bound
    }

    pub fn to_json_value(&self) -> Value {
        let mut v = json!({
            "value": self.value,
            "a": self.pair.a,
            "b": self.pair.b,
            "lambda": self.mult.lambda,
            "kkt": self.kkt,
            "status": self.status.as_str(),
            "lowerBound": self.lower_bound,
            "upperBound": self.upper_bound,
            "gap": self.gap(),
            "dpiSlack": self.dpi_slack,
            "iterations": self.iterations,
            "multipliers": self.mult,
        });
        if let Some(q) = &self.q {
            v["q"] = json!(q.q);
            v["dims"] = json!(q.dims);
        }
        v
    }
}

pub(crate) fn joint_of(a: &Matrix, p_s: &[f64]) -> Matrix {
    a.iter().zip(p_s).map(|(r, p)| r.iter().map(|v| v * p).collect()).collect()
}

pub(crate) fn dot_ps(p_s: &[f64], m: &Matrix, a: &Matrix) -> f64 {
    let mut v = 0.0;
    for s in 0..a.len() {
        if p_s[s] == 0.0 {
            continue;
        }
        for (x, y) in m[s].iter().zip(&a[s]) {
            if *y != 0.0 {
                v += p_s[s] * x * y;
            }
        }
    }
    v
}

pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).filter(|(_, b)| **b != 0.0).map(|(a, b)| a * b).sum()
}
