use crate::error::{Error, Result};
use crate::info::{saddle_probe, FGenerator};
use crate::model::{separability_projection, Cost, EndToEndPair, Instance, Matrix};

use super::cg::{initial_lambda_max, solve_cg, CgOutcome, CgProblem};
use super::kkt::{search, LambdaSearch};
use super::{KktReport, Multipliers, RelaxSolution, Status};

/// Relative fit residual below which a tensor cost counts as `δ + ρ`.
pub(crate) const SEPARABLE_FIT_TOL: f64 = 1e-12;

/// Splits the cost into `δ(s,ŝ)` and `ρ(x)`, ignoring any cross term.
///
/// A tensor cost qualifies when its additive fit `f₁(x) + f₂(s,ŝ) + f₃(x,y)`
/// is exact; `f₃` is folded into `ρ` through the channel.
pub(crate) fn separable_parts(inst: &Instance) -> Result<(Matrix, Vec<f64>)> {
    match &inst.cost {
        Cost::Separable(sc) => Ok((sc.delta.clone(), sc.rho.clone())),
        Cost::Tensor(_) => {
            let fit = separability_projection(inst);
            if fit.residual > SEPARABLE_FIT_TOL * fit.norm.max(1.0) {
                return Err(Error::Invalid(format!(
                    "cost is not of the form delta(s,shat) + rho(x) (fit residual {:.3e})",
                    fit.residual
                )));
            }
            let rho = (0..inst.n_x)
                .map(|x| fit.f1[x] + (0..inst.n_y).map(|y| inst.channel[x][y] * fit.f3[x][y]).sum::<f64>())
                .collect();
            Ok((fit.f2, rho))
        }
    }
}

/// Refuses generators whose saddle property is neither known nor observed
/// on this channel.
pub(crate) fn check_generator(f: &FGenerator, channel: &Matrix) -> Result<()> {
    if f.saddle_certified() {
        return Ok(());
    }
    let probe = saddle_probe(f, channel, 200, 0);
    if probe.passed && probe.kernel_passed {
        Ok(())
    } else {
        Err(Error::Refused(format!(
            "{} failed the saddle probe on this channel (worst violation {:.3e})",
            f.name(),
            probe.worst_violation.max(probe.kernel_worst_violation)
        )))
    }
}

/// Initial upper end of the DPI multiplier search:
/// `2(max κ − min κ) / max(ε, smallest nonzero divergence between channel rows)`.
pub fn lambda_max(inst: &Instance) -> f64 {
    let (lo, hi) = inst.cost_range();
    initial_lambda_max(hi - lo, &inst.channel)
}

pub(crate) fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Invalid("tol must be positive".into()));
    }
    Ok(())
}

/// Separable relaxation with explicit costs, shared with the other solvers.
pub(crate) fn solve_parts(
    inst: &Instance,
    delta: &Matrix,
    rho: &[f64],
    f: &FGenerator,
    tol: f64,
    hint: Option<f64>,
) -> Result<(CgOutcome, Multipliers, KktReport)> {
    let problem = CgProblem { p_s: &inst.p_s, delta, rho, channel: &inst.channel, f };
    let out = solve_cg(&problem, tol, hint);
    let pair = EndToEndPair { a: out.a.clone(), b: out.b.clone() };
    let (mut mult, mut kkt) = search(&inst.p_s, delta, rho, &inst.channel, &pair, f, &LambdaSearch::Fixed(out.lambda))?;
    if kkt.max_residual > tol {
        let (m2, k2) = search(&inst.p_s, delta, rho, &inst.channel, &pair, f, &LambdaSearch::Auto)?;
        if k2.max_residual < kkt.max_residual {
            mult = m2;
            kkt = k2;
        }
    }
    Ok((out, mult, kkt))
}

pub(crate) fn status_of(value: f64, lower: f64, slack: f64, kkt: &KktReport, tol: f64) -> Status {
    let closed = value - lower <= tol * value.abs().max(1.0);
    if closed && kkt.max_residual <= tol && slack >= -tol {
        Status::Optimal
    } else {
        Status::MaxIter
    }
}

/// Minimizes `E[δ(S,Ŝ)] + E[ρ(X)]` over end-to-end pairs `(a, b)` that
/// satisfy the f-DPI `I_f(a·pS) ≤ I_f(P·b)`.
///
/// The returned `lower_bound` is a certified dual bound; `value` is the
/// objective at the returned feasible pair.
pub fn solve_relaxation_separable(inst: &Instance, f: &FGenerator, tol: f64) -> Result<RelaxSolution> {
    inst.validate()?;
    check_tol(tol)?;
    if inst.separable().is_some_and(|sc| sc.has_cross()) {
        return Err(Error::Invalid("cost has a cross term; use the cross-term solver".into()));
    }
    let (delta, rho) = separable_parts(inst)?;
    check_generator(f, &inst.channel)?;
    let (out, mult, kkt) = solve_parts(inst, &delta, &rho, f, tol, None)?;
    let status = if out.primal_certified {
        Status::Optimal
    } else if out.converged {
        status_of(out.value, out.lower, out.slack, &kkt, tol)
    } else {
        Status::MaxIter
    };
    Ok(RelaxSolution {
        pair: EndToEndPair { a: out.a, b: out.b },
        q: None,
        value: out.value,
        lower_bound: out.lower.min(out.value),
        upper_bound: out.value,
        mult,
        status,
        kkt,
        dpi_slack: out.slack,
        iterations: out.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SeparableCost;

    fn bsc() -> Instance {
        let cost = SeparableCost::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.0, 0.0]);
        Instance::new(vec![0.5, 0.5], vec![vec![0.9, 0.1], vec![0.1, 0.9]], 2, Cost::Separable(cost)).unwrap()
    }

    #[test]
    fn bsc_is_certified() {
        let sol = solve_relaxation_separable(&bsc(), &FGenerator::NegLog, 1e-8).unwrap();
        assert!((sol.value - 0.1).abs() < 1e-8);
        assert!(sol.kkt.max_residual < 1e-6, "{:?}", sol.kkt);
        assert_eq!(sol.status, Status::Optimal, "{:?} gap {}", sol.kkt, sol.gap());
        assert!((sol.mult.dual_value(&[0.5, 0.5]) - sol.value).abs() < 1e-6);
    }

    #[test]
    fn perturbed_pair_breaks_kkt() {
        let inst = bsc();
        let sol = solve_relaxation_separable(&inst, &FGenerator::NegLog, 1e-8).unwrap();
        let mut pair = sol.pair.clone();
        pair.a[0][0] += 0.05;
        let t: f64 = pair.a[0].iter().sum();
        pair.a[0].iter_mut().for_each(|v| *v /= t);
        let (_, rep) = crate::relax::kkt_residual_separable(&inst, &pair, &FGenerator::NegLog, LambdaSearch::Auto).unwrap();
        assert!(rep.max_residual > 1e-3, "{rep:?}");
    }

    #[test]
    fn tensor_sum_is_accepted() {
        let inst = bsc();
        let t = inst.cost_tensor().unwrap();
        let tensor = inst.with_cost(Cost::Tensor(t)).unwrap();
        let a = solve_relaxation_separable(&inst, &FGenerator::NegLog, 1e-8).unwrap();
        let b = solve_relaxation_separable(&tensor, &FGenerator::NegLog, 1e-8).unwrap();
        assert!((a.value - b.value).abs() < 1e-10);
    }

    #[test]
    fn total_variation_is_refused_or_solved() {
        let inst = bsc();
        match solve_relaxation_separable(&inst, &FGenerator::TotalVariation, 1e-8) {
            Ok(sol) => assert!(sol.value <= 0.1 + 1e-6),
            Err(Error::Refused(_)) => {}
            Err(e) => panic!("{e}"),
        }
    }
}
