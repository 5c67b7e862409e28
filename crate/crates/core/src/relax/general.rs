//! Relaxation of an arbitrary tensor cost.
//!
//! For a fixed end-to-end pair the best joint is an optimal transport
//! between `μ(s,ŝ) = pS(s)a(ŝ|s)` and `ν(x,y) = b(x)P(y|x)`. Dualizing the
//! transport gives
//!
//! ```text
//! C_N = max_ψ C_G(φ_ψ, ψ̄),   φ_ψ(s,ŝ) = min_{(x,y): P(y|x)>0} κ − ψ,   ψ̄(x) = Σ_y P(y|x)ψ(x,y)
//! ```
//!
//! with the min/max exchange justified by convexity of the DPI set in
//! `(a,b)` and linearity in `ψ`. The outer problem is concave in `ψ` and is
//! climbed by projected-free supergradient steps; every evaluated `ψ`
//! yields a certified lower bound, and a transport plan at the current
//! pair yields a feasible joint and an upper bound.

use crate::error::{Error, Result};
use crate::info::FGenerator;
use crate::model::{separability_projection, EndToEndPair, Instance, JointDist, Matrix, MAX_TENSOR_ENTRIES};

use super::cg::CgOutcome;
use super::ot::Transport;
use super::separable::{check_generator, check_tol, solve_parts, SEPARABLE_FIT_TOL};
use super::{KktReport, Multipliers, RelaxSolution, Status};

/// Loosest accuracy asked of an inner separable solve.
const INNER_TOL_MAX: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct GeneralOptions {
    pub tol: f64,
    /// Supergradient steps.
    pub max_iter: usize,
    /// Transport upper bound every this many steps (and at the end).
    pub upper_every: usize,
}

impl Default for GeneralOptions {
    fn default() -> Self {
        GeneralOptions { tol: super::DEFAULT_TOL, max_iter: 300, upper_every: 25 }
    }
}

struct Layout<'a> {
    inst: &'a Instance,
    kappa: Vec<f64>,
    /// Valid `(x,y)` cells, `P(y|x) > 0`.
    valid: Vec<bool>,
}

impl Layout<'_> {
    fn nv(&self) -> usize {
        self.inst.n_x * self.inst.n_y
    }
    fn nu(&self) -> usize {
        self.inst.n_s * self.inst.n_shat
    }
    /// `κ` at `u = (s,ŝ)`, `v = (x,y)`.
    fn k(&self, u: usize, v: usize) -> f64 {
        let nsh = self.inst.n_shat;
        let (s, sh) = (u / nsh, u % nsh);
        let ny = self.inst.n_y;
        let (x, y) = (v / ny, v % ny);
        self.kappa[self.inst.idx(s, x, y, sh)]
    }

    /// `φ_ψ`, `ψ̄`, and for each `u` the minimizing cells of `κ(u,·) − ψ`.
    fn transform(&self, psi: &[f64]) -> (Matrix, Vec<f64>, Vec<Vec<usize>>) {
        let (ns, nsh, nx, ny) = (self.inst.n_s, self.inst.n_shat, self.inst.n_x, self.inst.n_y);
        let mut phi = vec![vec![0.0; nsh]; ns];
        let mut arg = vec![Vec::new(); self.nu()];
        for u in 0..self.nu() {
            let mut best = f64::INFINITY;
            for v in 0..self.nv() {
                if self.valid[v] {
                    best = best.min(self.k(u, v) - psi[v]);
                }
            }
            let tie = 1e-12 * best.abs().max(1.0);
            arg[u] = (0..self.nv()).filter(|&v| self.valid[v] && self.k(u, v) - psi[v] <= best + tie).collect();
            phi[u / nsh][u % nsh] = best;
        }
        let bar = (0..nx)
            .map(|x| (0..ny).map(|y| self.inst.channel[x][y] * psi[x * ny + y]).sum())
            .collect();
        (phi, bar, arg)
    }

    fn marginals(&self, pair: &EndToEndPair) -> (Vec<f64>, Vec<f64>) {
        let (ns, nsh, nx, ny) = (self.inst.n_s, self.inst.n_shat, self.inst.n_x, self.inst.n_y);
        let mu = (0..ns * nsh).map(|u| self.inst.p_s[u / nsh] * pair.a[u / nsh][u % nsh]).collect();
        let nu = (0..nx * ny).map(|v| pair.b[v / ny] * self.inst.channel[v / ny][v % ny]).collect();
        (mu, nu)
    }

    /// Joint with the pair's marginals: the product when `κ` is additive,
    /// otherwise a rounded entropic transport plan.
    fn couple(&self, pair: &EndToEndPair, additive: bool) -> (JointDist, f64) {
        let (mu, nu) = self.marginals(pair);
        let mut q = vec![0.0; self.inst.tensor_len()];
        let nsh = self.inst.n_shat;
        let ny = self.inst.n_y;
        let mut put = |u: usize, v: usize, m: f64| {
            q[self.inst.idx(u / nsh, v / ny, v % ny, u % nsh)] += m;
        };
        if additive {
            for u in 0..mu.len() {
                for v in 0..nu.len() {
                    if mu[u] > 0.0 && nu[v] > 0.0 {
                        put(u, v, mu[u] * nu[v]);
                    }
                }
            }
        } else {
            let t = Transport::new(&mu, &nu, |u, v| self.k(u, v));
            let plan = t.solve();
            let m = t.cols.len();
            for (i, &u) in t.rows.iter().enumerate() {
                for (j, &v) in t.cols.iter().enumerate() {
                    put(u, v, plan.mass[i * m + j]);
                }
            }
        }
        let value = q.iter().zip(&self.kappa).filter(|(m, _)| **m != 0.0).map(|(m, k)| m * k).sum();
        (JointDist { dims: self.inst.dims(), q }, value)
    }
}

/// Relaxation of the tensor-cost problem under the f-DPI, with default
/// options and the given tolerance.
pub fn solve_relaxation_general(inst: &Instance, f: &FGenerator, tol: f64) -> Result<RelaxSolution> {
    solve_relaxation_general_with(inst, f, &GeneralOptions { tol, ..GeneralOptions::default() })
}

/// Maximizes the transport dual of the tensor relaxation.
///
/// `value` and `lower_bound` are the best certified dual value; `q` is a
/// joint satisfying the linear constraints and the DPI, and `upper_bound`
/// its cost. The status is optimal once the two meet within `tol`.
pub fn solve_relaxation_general_with(inst: &Instance, f: &FGenerator, opts: &GeneralOptions) -> Result<RelaxSolution> {
    inst.validate()?;
    check_tol(opts.tol)?;
    if inst.tensor_len() > MAX_TENSOR_ENTRIES {
        return Err(Error::Budget { count: inst.tensor_len() as f64, budget: MAX_TENSOR_ENTRIES as f64 });
    }
    check_generator(f, &inst.channel)?;
    let tol = opts.tol;
    let (ns, nx, ny, nsh) = (inst.n_s, inst.n_x, inst.n_y, inst.n_shat);
    let kappa = inst.cost_tensor()?;
    let valid: Vec<bool> = (0..nx * ny).map(|v| inst.channel[v / ny][v % ny] > 0.0).collect();
    let lay = Layout { inst, kappa, valid };
    let fit = separability_projection(inst);
    let additive = fit.residual <= SEPARABLE_FIT_TOL * fit.norm.max(1.0);

    // ψ(x,y) = mean over (s,ŝ) of κ is exact for additive costs; ψ = 0
    // gives at least min κ. Start from the better of the two.
    let mean_psi: Vec<f64> = (0..nx * ny)
        .map(|v| (0..lay.nu()).map(|u| lay.k(u, v)).sum::<f64>() / lay.nu() as f64)
        .collect();
    let mut psi = if additive {
        mean_psi
    } else {
        let zero = vec![0.0; nx * ny];
        let at = |psi: &[f64]| -> Result<f64> {
            let (phi, bar, _) = lay.transform(psi);
            Ok(solve_parts(inst, &phi, &bar, f, tol, None)?.0.lower)
        };
        if at(&zero)? > at(&mean_psi)? {
            zero
        } else {
            mean_psi
        }
    };

    struct Best {
        lower: f64,
        psi: Vec<f64>,
        out: CgOutcome,
        phi: Matrix,
        bar: Vec<f64>,
        mult: Multipliers,
        kkt: KktReport,
    }
    let mut best: Option<Best> = None;
    let mut upper = f64::INFINITY;
    let mut upper_q: Option<(JointDist, EndToEndPair, f64)> = None;
    let mut theta = 1.0;
    let mut stall = 0;
    let mut hint = None;
    let mut iterations = 0;

    for it in 0..opts.max_iter.max(1) {
        iterations = it + 1;
        let (phi, bar, arg) = lay.transform(&psi);
        // Every inner solve certifies its own lower bound, so it only needs
        // to be accurate relative to the current outer gap.
        let gap = best.as_ref().map_or(f64::INFINITY, |b| (upper - b.lower) / b.lower.abs().max(1.0));
        let inner_tol = (1e-2 * gap).clamp(tol, INNER_TOL_MAX);
        let (out, mult, kkt) = solve_parts(inst, &phi, &bar, f, inner_tol, hint)?;
        hint = Some(out.lambda).filter(|l| *l > 0.0);
        let g_val = out.lower;
        if !g_val.is_finite() || !out.value.is_finite() {
            // overshoot; step back to the best point with a shorter step
            let b = best.as_ref().ok_or_else(|| Error::NonConvergence("non-finite dual value at the start".into()))?;
            psi = b.psi.clone();
            theta *= 0.5;
            stall = 0;
            continue;
        }
        let pair = EndToEndPair { a: out.a.clone(), b: out.b.clone() };

        if it % opts.upper_every.max(1) == 0 || additive {
            let (q, u) = lay.couple(&pair, additive);
            if u < upper {
                upper = u;
                upper_q = Some((q, pair.clone(), out.slack));
            }
        }

        let improved = best.as_ref().map_or(true, |b| g_val > b.lower);
        if improved {
            best = Some(Best { lower: g_val, psi: psi.clone(), out: out.clone(), phi, bar, mult, kkt });
            stall = 0;
        } else {
            stall += 1;
            if stall >= 5 {
                theta *= 0.5;
                stall = 0;
                psi = best.as_ref().unwrap().psi.clone();
                continue;
            }
        }
        let lower = best.as_ref().unwrap().lower;
        if upper - lower <= tol * lower.abs().max(1.0) || theta < 1e-10 {
            break;
        }

        // Supergradient: ν(v) − Σ_u μ(u)·π(v|u), π splitting ties evenly.
        let (mu, nu) = lay.marginals(&pair);
        let mut grad = nu;
        for (u, cells) in arg.iter().enumerate() {
            if mu[u] > 0.0 {
                let w = mu[u] / cells.len() as f64;
                for &v in cells {
                    grad[v] -= w;
                }
            }
        }
        for v in 0..grad.len() {
            if !lay.valid[v] {
                grad[v] = 0.0;
            }
        }
        let norm2: f64 = grad.iter().map(|g| g * g).sum();
        if norm2 <= 1e-30 {
            break;
        }
        let target = if upper.is_finite() { upper } else { g_val + (g_val.abs().max(1.0)) };
        let step = theta * (target - g_val).max(tol) / norm2;
        for v in 0..psi.len() {
            psi[v] += step * grad[v];
        }
    }

    let best = best.ok_or_else(|| Error::NonConvergence("no dual evaluation".into()))?;
    // Final upper bound at the best dual pair.
    let best_pair = EndToEndPair { a: best.out.a.clone(), b: best.out.b.clone() };
    let (q_best, u_best) = lay.couple(&best_pair, additive);
    let (q, pair, slack, upper) = match upper_q {
        Some((q, p, s)) if upper < u_best => (q, p, s, upper),
        _ => (q_best, best_pair, best.out.slack, u_best),
    };

    // Tensor multipliers from the transport potentials.
    let mut mult = best.mult.clone();
    mult.lambda_a = best.phi.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
    mult.lambda_b = best.bar.iter().map(|v| -v).collect();
    mult.lambda_p = (0..nx)
        .map(|x| (0..ny).map(|y| if lay.valid[x * ny + y] { -best.psi[x * ny + y] } else { 0.0 }).collect())
        .collect();
    let mut nu_t = vec![0.0; inst.tensor_len()];
    for s in 0..ns {
        for x in 0..nx {
            for y in 0..ny {
                if !lay.valid[x * ny + y] {
                    continue;
                }
                for sh in 0..nsh {
                    let i = inst.idx(s, x, y, sh);
                    nu_t[i] = lay.kappa[i] - best.phi[s][sh] - best.psi[x * ny + y];
                }
            }
        }
    }
    mult.nu = Some(nu_t);

    let lower = best.lower;
    let status = if upper - lower <= tol * lower.abs().max(1.0) && slack >= -tol {
        Status::Optimal
    } else {
        Status::MaxIter
    };
    let kkt = super::kkt::kkt_residual_general(inst, &q, f, &mult).unwrap_or(best.kkt);
    Ok(RelaxSolution {
        pair,
        q: Some(q),
        value: lower,
        lower_bound: lower,
        upper_bound: upper,
        mult,
        status,
        kkt,
        dpi_slack: slack,
        iterations,
    })
}
