use crate::error::{Error, Result};
use crate::info::FGenerator;
use crate::model::{EndToEndPair, Instance};

use super::kkt::{search, LambdaSearch};
use super::cg::{solve_cg, CgOutcome, CgProblem};
use super::separable::{check_tol, solve_parts, solve_relaxation_separable, status_of};
use super::{dot, dot_ps, RelaxSolution, Status};

const R_TOL: f64 = 1e-10;
const R_MAX_ITER: usize = 500;
const R_FLOOR: f64 = 1e-12;

/// Relaxation of a cost with the cross term `k·sgn(xs)·√(ρ(x)τ′(s))`.
///
/// The cross term is replaced by its Cauchy–Schwarz minorant `−α√⟨ρ,b⟩`
/// with `α = |k|·√(Σ_s τ′(s)pS(s))`, and the resulting convex program
/// `E δ + ⟨ρ,b⟩ − α√⟨ρ,b⟩` under the DPI is solved through a damped fixed
/// point on `R = √⟨ρ,b⟩`: each step solves the separable relaxation with
/// slope `(1 − α/2R)ρ`.
///
/// The lower bound uses `√t ≤ t/2R + R/2`, valid for every `R > 0`.
/// Multipliers belong to the linearized problem at the final `R`, so the
/// value identity reads `value = −(E μᵃ + λ + μᵇ) − αR/2`.
pub fn solve_relaxation_bansal(inst: &Instance, tol: f64) -> Result<RelaxSolution> {
    inst.validate()?;
    check_tol(tol)?;
    let sc = inst.separable().ok_or_else(|| Error::Invalid("cross-term solver needs a separable cost".into()))?;
    let f = FGenerator::NegLog;
    let alpha = sc.alpha(&inst.p_s);
    if alpha == 0.0 {
        let plain = inst.with_cost(crate::model::Cost::Separable(crate::model::SeparableCost::new(
            sc.delta.clone(),
            sc.rho.clone(),
        )))?;
        return solve_relaxation_separable(&plain, &f, tol);
    }
    if sc.rho.iter().any(|r| *r < 0.0) {
        return Err(Error::Invalid("rho must be nonnegative with a cross term".into()));
    }
    let delta = &sc.delta;
    let rho = &sc.rho;
    let nx = inst.n_x;

    if rho.iter().all(|r| *r == 0.0) {
        let (out, mult, kkt) = solve_parts(inst, delta, rho, &f, tol, None)?;
        return Ok(RelaxSolution {
            pair: EndToEndPair { a: out.a, b: out.b },
            q: None,
            value: out.value,
            lower_bound: out.lower.min(out.value),
            upper_bound: out.value,
            mult,
            status: Status::Degenerate,
            kkt,
            dpi_slack: out.slack,
            iterations: out.evaluations,
        });
    }

    // T(R) = √⟨ρ,b(R)⟩ does not increase with R, so T(R) − R has one
    // sign change; bracket it and close in with Illinois regula falsi.
    let mut hint = None;
    let mut evaluations = 0;
    let mut best_lower = f64::NEG_INFINITY;
    let mut last: Option<(f64, CgOutcome)> = None;
    let mut step = |r: f64, hint: &mut Option<f64>| -> f64 {
        let scale = 1.0 - alpha / (2.0 * r);
        let rho_eff: Vec<f64> = rho.iter().map(|v| scale * v).collect();
        let problem = CgProblem { p_s: &inst.p_s, delta, rho: &rho_eff, channel: &inst.channel, f: &f };
        let out = solve_cg(&problem, tol, *hint);
        evaluations += out.evaluations;
        *hint = Some(out.lambda).filter(|l| *l > 0.0);
        best_lower = best_lower.max(out.lower - alpha * r / 2.0);
        let t = dot(rho, &out.b).max(0.0).sqrt();
        last = Some((r, out));
        t - r
    };
    let r0 = dot(rho, &vec![1.0 / nx as f64; nx]).sqrt().max(R_FLOOR);
    let g0 = step(r0, &mut hint);
    let r1 = (r0 + g0).max(R_FLOOR);
    let mut converged = g0.abs() <= R_TOL;
    if !converged {
        let g1 = step(r1, &mut hint);
        let ((mut lo, mut g_lo), (mut hi, mut g_hi)) = if g0 > 0.0 { ((r0, g0), (r1, g1)) } else { ((r1, g1), (r0, g0)) };
        converged = g1.abs() <= R_TOL;
        let mut side = 0;
        for _ in 0..R_MAX_ITER {
            if converged || g_lo <= 0.0 || g_hi >= 0.0 || hi - lo <= R_TOL * hi.max(1.0) {
                converged = converged || (g_lo <= 0.0 && lo <= R_FLOOR) || hi - lo <= R_TOL * hi.max(1.0);
                break;
            }
            let r = (lo + g_lo * (hi - lo) / (g_lo - g_hi)).clamp(lo, hi);
            let g = step(r, &mut hint);
            if g.abs() <= R_TOL {
                converged = true;
                break;
            }
            if g > 0.0 {
                lo = r;
                g_lo = g;
                if side == 1 {
                    g_hi *= 0.5;
                }
                side = 1;
            } else {
                hi = r;
                g_hi = g;
                if side == -1 {
                    g_lo *= 0.5;
                }
                side = -1;
            }
        }
    }
    let r = last.as_ref().map_or(r0, |(r, _)| *r);
    let last = last.map(|(_, out)| out);
    let out = last.ok_or_else(|| Error::NonConvergence("cross-term fixed point never started".into()))?;
    let pair = EndToEndPair { a: out.a.clone(), b: out.b.clone() };
    let rb = dot(rho, &pair.b).max(0.0).sqrt();
    let value = dot_ps(&inst.p_s, delta, &pair.a) + rb * rb - alpha * rb;

    let degenerate = r < R_FLOOR || rb < R_FLOOR;
    let r_kkt = if rb > 0.0 { rb } else { r.max(R_FLOOR) };
    let rho_eff: Vec<f64> = rho.iter().map(|v| (1.0 - alpha / (2.0 * r_kkt)) * v).collect();
    let (mult, kkt) = search(&inst.p_s, delta, &rho_eff, &inst.channel, &pair, &f, &LambdaSearch::Fixed(out.lambda))?;
    let status = if degenerate {
        Status::Degenerate
    } else if converged {
        status_of(value, best_lower, out.slack, &kkt, tol)
    } else {
        Status::MaxIter
    };
    Ok(RelaxSolution {
        pair,
        q: None,
        value,
        lower_bound: best_lower.min(value),
        upper_bound: value,
        mult,
        status,
        kkt,
        dpi_slack: out.slack,
        iterations: evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Cost, SeparableCost};

    fn base(k: f64) -> Instance {
        let s_vals = vec![-1.0, 1.0];
        let x_vals = vec![-1.0, 0.0, 1.0];
        let mut sc = SeparableCost::new(
            vec![vec![0.0, 4.0], vec![4.0, 0.0]],
            x_vals.iter().map(|x| x * x).collect(),
        );
        sc.tau_prime = Some(s_vals.iter().map(|s| s * s).collect());
        sc.k_cross = k;
        let channel = vec![vec![0.8, 0.15, 0.05], vec![0.2, 0.6, 0.2], vec![0.05, 0.15, 0.8]];
        let mut inst = Instance::new(vec![0.5, 0.5], channel, 2, Cost::Separable(sc)).unwrap();
        inst.s_values = s_vals;
        inst.x_values = x_vals;
        inst
    }

    #[test]
    fn zero_cross_matches_separable() {
        let a = solve_relaxation_bansal(&base(0.0), 1e-8).unwrap();
        let inst = base(0.0);
        let sep = solve_relaxation_separable(&inst, &FGenerator::NegLog, 1e-8).unwrap();
        assert_eq!(a.value, sep.value);
    }

    #[test]
    fn cross_term_lowers_value_and_bounds_hold() {
        let with = solve_relaxation_bansal(&base(1.0), 1e-8).unwrap();
        let without = solve_relaxation_bansal(&base(0.0), 1e-8).unwrap();
        assert!(with.value < without.value);
        assert!(with.lower_bound <= with.value + 1e-12);
        assert!(with.value - with.lower_bound < 1e-6, "{} {}", with.value, with.lower_bound);
    }

    #[test]
    fn zero_rho_is_degenerate() {
        let mut inst = base(1.0);
        if let Cost::Separable(sc) = &mut inst.cost {
            sc.rho = vec![0.0; 3];
        }
        let sol = solve_relaxation_bansal(&inst, 1e-8).unwrap();
        assert_eq!(sol.status, Status::Degenerate);
    }
}
