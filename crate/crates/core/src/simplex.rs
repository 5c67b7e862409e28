//! Active-set Newton method for smooth convex functions on the simplex.
//!
//! Used to finish the Blahut–Arimoto loops, whose multiplicative updates
//! approach coordinates that vanish at the optimum only sublinearly.

use nalgebra::{DMatrix, DVector};

/// Coordinates that a full step would zero before `t = DROP_STEP` are
/// dropped outright.
const DROP_STEP: f64 = 1e-9;
/// Smallest Levenberg–Marquardt damping, relative to the largest diagonal
/// entry of the Hessian.
const MIN_DAMP: f64 = 1e-13;
/// Relative rounding noise assumed in objective values.
const NOISE: f64 = 1e-14;

/// Minimizes `F` over the simplex from `x0`.
///
/// Convergence is measured by the Frank–Wolfe gap `⟨x,∇F⟩ − min ∇F`, which
/// bounds `F(x) − min F`.
///
/// `grad_hess(x)` returns the full gradient and Hessian. Coordinates leave
/// the working set when a step drives them to zero and enter it when their
/// partial derivative undercuts the support. Stops at `gap ≤ tol` or when a
/// step fails to decrease `F`.
pub(crate) fn minimize<V, G>(x0: &[f64], value: V, grad_hess: G, tol: f64, max_iter: usize) -> Vec<f64>
where
    V: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> (Vec<f64>, DMatrix<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = value(&x);
    // Levenberg–Marquardt damping relative to the largest diagonal entry;
    // grows when the line search has to cut the step.
    let mut damp = MIN_DAMP;
    for _ in 0..max_iter {
        let (g, h) = grad_hess(&x);
        if g.iter().any(|v| !v.is_finite()) {
            break;
        }
        let gmin = g.iter().cloned().fold(f64::INFINITY, f64::min);
        let gap = x.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() - gmin;
        if gap <= tol {
            break;
        }
        let smin = (0..n).filter(|&i| x[i] > 0.0).map(|i| g[i]).fold(f64::INFINITY, f64::min);
        let mut work: Vec<usize> = (0..n).filter(|&i| x[i] > 0.0 || g[i] < smin).collect();

        // Equality-constrained Newton step on the working set. Coordinates
        // the step would drive to zero almost at once are zeroed and the step
        // redone without them.
        let mut dropped: Vec<usize> = Vec::new();
        let d = loop {
            let m = work.len();
            let diag = (0..m).map(|k| h[(work[k], work[k])].abs()).fold(0.0, f64::max).max(1e-300);
            let hw = DMatrix::from_fn(m, m, |i, j| h[(work[i], work[j])] + if i == j { damp * diag } else { 0.0 });
            let gw = DVector::from_fn(m, |i, _| g[work[i]]);
            let ones = DVector::from_element(m, 1.0);
            let solve = |rhs: &DVector<f64>| -> Option<DVector<f64>> {
                match hw.clone().cholesky() {
                    Some(c) => Some(c.solve(rhs)),
                    None => hw.clone().lu().solve(rhs),
                }
            };
            let (Some(u), Some(v)) = (solve(&gw), solve(&ones)) else { break None };
            let nu = u.sum() / v.sum();
            let dw = -(u - v * nu);
            let stuck: Vec<usize> = (0..m).filter(|&k| dw[k] < 0.0 && x[work[k]] <= DROP_STEP * -dw[k]).collect();
            if stuck.is_empty() || stuck.len() == m {
                let mut d = vec![0.0; n];
                for k in 0..m {
                    d[work[k]] = dw[k];
                }
                break Some(d);
            }
            dropped.extend(stuck.iter().map(|&k| work[k]));
            work = (0..m).filter(|k| !stuck.contains(k)).map(|k| work[k]).collect();
        };
        let Some(d) = d else { break };
        let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            break;
        }
        // Projected backtracking: clip at zero and renormalize. A full step
        // whose predicted decrease is below the rounding noise of `F` is
        // taken on trust, since `F` can no longer rank it.
        let noise = NOISE * fx.abs().max(1.0);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut cand: Vec<f64> =
                (0..n).map(|i| if dropped.contains(&i) { 0.0 } else { (x[i] + t * d[i]).max(0.0) }).collect();
            let s: f64 = cand.iter().sum();
            cand.iter_mut().for_each(|v| *v /= s);
            let pred: f64 = (0..n).map(|i| g[i] * (cand[i] - x[i])).sum();
            if pred < 0.0 {
                let fc = value(&cand);
                if (t == 1.0 && -pred <= noise && fc <= fx + noise) || fc <= fx + 1e-4 * pred {
                    accepted = Some((cand, fc));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((cand, fc)) = accepted else {
            if damp >= 1.0 {
                break;
            }
            damp = (damp * 1e3).min(1.0);
            continue;
        };
        damp = if t == 1.0 { (damp * 1e-2).max(MIN_DAMP) } else { (damp * 10.0).min(1.0) };
        x = cand;
        fx = fc;
    }
    x
}
