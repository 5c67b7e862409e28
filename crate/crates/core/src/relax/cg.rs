//! Lagrangian scheme for `min ⟨δ,a·pS⟩ + ⟨ρ,b⟩` s.t. `I_f(a·pS) ≤ I_f(P·b)`.
//!
//! For a fixed `λ` the problem splits into a rate-distortion Lagrangian in
//! `a` and a capacity-cost Lagrangian in `b`. Each split also yields a
//! rigorous lower bound on its own minimum, so every evaluated `λ` gives a
//! valid bound on the relaxation.

use crate::info::{
    cc_iterate, f_mutual_information, grad_a_cells, grad_b, mutual_information, rd_iterate, FGenerator, BA_MAX_ITER, BA_REL_TOL,
};
use crate::model::Matrix;

use super::{dot, dot_ps, joint_of};

pub(crate) struct CgProblem<'a> {
    pub p_s: &'a [f64],
    pub delta: &'a Matrix,
    pub rho: &'a [f64],
    pub channel: &'a Matrix,
    pub f: &'a FGenerator,
}

impl CgProblem<'_> {
    fn ns(&self) -> usize {
        self.delta.len()
    }
    fn nsh(&self) -> usize {
        self.delta[0].len()
    }
    fn nx(&self) -> usize {
        self.channel.len()
    }

    pub fn info_a(&self, a: &Matrix) -> f64 {
        f_mutual_information(self.f, &joint_of(a, self.p_s))
    }

    pub fn info_b(&self, b: &[f64]) -> f64 {
        f_mutual_information(self.f, &joint_of(self.channel, b))
    }

    pub fn cost(&self, a: &Matrix, b: &[f64]) -> f64 {
        dot_ps(self.p_s, self.delta, a) + dot(self.rho, b)
    }
}

/// Subproblem solutions at one multiplier value.
#[derive(Clone, Debug)]
pub(crate) struct Point {
    pub lambda: f64,
    pub a: Matrix,
    pub b: Vec<f64>,
    pub ia: f64,
    pub ib: f64,
    pub cost: f64,
    /// Certified lower bound on the dual function at `lambda`.
    pub lower: f64,
    pub converged: bool,
}

impl Point {
    pub fn slack(&self) -> f64 {
        self.ib - self.ia
    }

    /// Slack negative beyond rounding; both informations can sit at zero
    /// with a difference of a few ulps.
    fn violates(&self) -> bool {
        self.slack() < -SLACK_ROUNDING * self.ia.abs().max(self.ib.abs()).max(1.0)
    }

    pub fn lagrangian(&self) -> f64 {
        self.cost + self.lambda * (self.ia - self.ib)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct CgOutcome {
    pub a: Matrix,
    pub b: Vec<f64>,
    pub lambda: f64,
    pub value: f64,
    pub lower: f64,
    pub slack: f64,
    pub converged: bool,
    pub evaluations: usize,
    /// Optimality proved directly rather than by a finite multiplier.
    pub primal_certified: bool,
}

struct Warm {
    q: Vec<f64>,
    a: Matrix,
    b: Vec<f64>,
}

fn blend_uniform(v: &[f64], w: f64) -> Vec<f64> {
    let u = 1.0 / v.len() as f64;
    v.iter().map(|x| (1.0 - w) * x + w * u).collect()
}

fn argmin_set(v: &[f64]) -> Vec<bool> {
    let m = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * m.abs().max(1.0);
    v.iter().map(|x| *x <= m + tol).collect()
}

fn log_sum_exp(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

const MD_MAX_ITER: usize = 20_000;

/// Exponentiated-gradient minimization of a convex function over a product
/// of simplices. Returns the point and its Frank–Wolfe gap.
fn mirror_descent<F, G>(mut x: Matrix, weights: &[f64], value: F, grad: G) -> (Matrix, f64, bool)
where
    F: Fn(&Matrix) -> f64,
    G: Fn(&Matrix) -> Option<Matrix>,
{
    let mut fx = value(&x);
    let mut eta = 1.0;
    let mut gap = f64::INFINITY;
    for _ in 0..MD_MAX_ITER {
        let Some(g) = grad(&x) else { break };
        gap = 0.0;
        let mut spread: f64 = 0.0;
        for (r, (row, gr)) in x.iter().zip(&g).enumerate() {
            if weights[r] == 0.0 {
                continue;
            }
            let lo = gr.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = gr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            spread = spread.max(hi - lo);
            gap += weights[r] * (dot(gr, row) - lo);
        }
        if !gap.is_finite() || gap <= 1e-13 * fx.abs().max(1.0) {
            break;
        }
        if eta * spread > 50.0 {
            eta = 50.0 / spread;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Matrix = x
                .iter()
                .zip(&g)
                .enumerate()
                .map(|(r, (row, gr))| {
                    if weights[r] == 0.0 {
                        return row.clone();
                    }
                    let lo = gr.iter().cloned().fold(f64::INFINITY, f64::min);
                    let mut nr: Vec<f64> = row.iter().zip(gr).map(|(v, gv)| v * (-eta * (gv - lo)).exp()).collect();
                    let t: f64 = nr.iter().sum();
                    nr.iter_mut().for_each(|v| *v = (*v / t).max(1e-300));
                    nr
                })
                .collect();
            let fc = value(&cand);
            if fc <= fx {
                x = cand;
                fx = fc;
                eta *= 1.5;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let converged = gap <= 1e-9 * fx.abs().max(1.0);
    (x, gap, converged)
}

impl CgProblem<'_> {
    fn eval(&self, lambda: f64, warm: &mut Warm, ba_tol: f64) -> Point {
        if lambda <= 0.0 {
            return self.eval_zero();
        }
        if self.f.is_neg_log() {
            self.eval_log(lambda, warm, ba_tol)
        } else {
            self.eval_generic(lambda, warm)
        }
    }

    /// Cheapest `a` and `b`; among ties, least informative `a` and most
    /// informative `b` so that the DPI has the best chance to hold.
    fn eval_zero(&self) -> Point {
        let (ns, nsh, nx) = (self.ns(), self.nsh(), self.nx());
        let masks: Vec<Vec<bool>> = self.delta.iter().map(|r| argmin_set(r)).collect();
        let bmask = argmin_set(self.rho);
        let (a, b) = if self.f.is_neg_log() {
            let restricted: Matrix = masks
                .iter()
                .map(|m| m.iter().map(|t| if *t { 0.0 } else { f64::INFINITY }).collect())
                .collect();
            let run = rd_iterate(self.p_s, &restricted, 1.0, &vec![1.0 / nsh as f64; nsh], BA_REL_TOL, BA_MAX_ITER);
            let count = bmask.iter().filter(|t| **t).count() as f64;
            let b0: Vec<f64> = bmask.iter().map(|t| if *t { 1.0 / count } else { 0.0 }).collect();
            let zero = vec![0.0; nx];
            (run.a, cc_iterate(self.channel, &zero, 0.0, &b0, BA_REL_TOL, BA_MAX_ITER).b)
        } else {
            let a = masks
                .iter()
                .map(|m| {
                    let c = m.iter().filter(|t| **t).count() as f64;
                    m.iter().map(|t| if *t { 1.0 / c } else { 0.0 }).collect()
                })
                .collect();
            let c = bmask.iter().filter(|t| **t).count() as f64;
            (a, bmask.iter().map(|t| if *t { 1.0 / c } else { 0.0 }).collect())
        };
        let lower: f64 = (0..ns)
            .map(|s| self.p_s[s] * self.delta[s].iter().cloned().fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            + self.rho.iter().cloned().fold(f64::INFINITY, f64::min);
        Point {
            lambda: 0.0,
            ia: self.info_a(&a),
            ib: self.info_b(&b),
            cost: self.cost(&a, &b),
            a,
            b,
            lower,
            converged: true,
        }
    }

    fn eval_log(&self, lambda: f64, warm: &mut Warm, ba_tol: f64) -> Point {
        let q0 = blend_uniform(&warm.q, 1e-12);
        let rd = rd_iterate(self.p_s, self.delta, lambda, &q0, ba_tol, BA_MAX_ITER);
        // Blahut's bound: E δ + λI ≥ −λ[Σ pS log Z + log max_ŝ c(ŝ)]
        let log_c = (0..self.nsh())
            .map(|sh| {
                log_sum_exp(
                    (0..self.ns())
                        .filter(|&s| self.p_s[s] > 0.0)
                        .map(|s| self.p_s[s].ln() - self.delta[s][sh] / lambda - rd.log_z[s]),
                )
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let ez: f64 = self.p_s.iter().zip(&rd.log_z).map(|(p, z)| if *p > 0.0 { p * z } else { 0.0 }).sum();
        let lower_a = -lambda * (ez + log_c);

        let b0 = blend_uniform(&warm.b, 1e-12);
        let cc = cc_iterate(self.channel, self.rho, 1.0 / lambda, &b0, ba_tol, BA_MAX_ITER);
        let top = (0..self.nx()).map(|x| cc.div[x] - self.rho[x] / lambda).fold(f64::NEG_INFINITY, f64::max);
        let lower_b = -lambda * top;

        let ia = mutual_information(&joint_of(&rd.a, self.p_s));
        let ib = mutual_information(&joint_of(self.channel, &cc.b));
        warm.q.clone_from(&rd.q);
        warm.b.clone_from(&cc.b);
        Point {
            lambda,
            cost: self.cost(&rd.a, &cc.b),
            a: rd.a,
            b: cc.b,
            ia,
            ib,
            lower: lower_a + lower_b,
            converged: rd.converged && cc.converged,
        }
    }

    fn eval_generic(&self, lambda: f64, warm: &mut Warm) -> Point {
        let p_s = self.p_s;
        let a0: Matrix = warm.a.iter().map(|r| blend_uniform(r, 1e-9)).collect();
        let fa = |a: &Matrix| dot_ps(p_s, self.delta, a) + lambda * self.info_a(a);
        let ga = |a: &Matrix| -> Option<Matrix> {
            let d = grad_a_cells(self.f, p_s, a).ok()?;
            let g: Matrix = (0..a.len())
                .map(|s| {
                    (0..a[s].len())
                        .map(|sh| if p_s[s] > 0.0 { self.delta[s][sh] + lambda * d[s][sh] / p_s[s] } else { 0.0 })
                        .collect()
                })
                .collect();
            g.iter().flatten().all(|v| v.is_finite()).then_some(g)
        };
        let (a, gap_a, conv_a) = mirror_descent(a0, p_s, fa, ga);

        let b0 = vec![blend_uniform(&warm.b, 1e-9)];
        let fb = |b: &Matrix| dot(self.rho, &b[0]) - lambda * self.info_b(&b[0]);
        let gb = |b: &Matrix| -> Option<Matrix> {
            let d = grad_b(self.f, self.channel, &b[0]).ok()?;
            let g: Vec<f64> = self.rho.iter().zip(&d).map(|(r, v)| r - lambda * v).collect();
            g.iter().all(|v| v.is_finite()).then_some(vec![g])
        };
        let (bm, gap_b, conv_b) = mirror_descent(b0, &[1.0], fb, gb);
        let b = bm.into_iter().next().unwrap();

        let ia = self.info_a(&a);
        let ib = self.info_b(&b);
        let cost = self.cost(&a, &b);
        warm.a.clone_from(&a);
        warm.b.clone_from(&b);
        Point {
            lambda,
            lower: cost + lambda * (ia - ib) - gap_a - gap_b,
            a,
            b,
            ia,
            ib,
            cost,
            converged: conv_a && conv_b,
        }
    }
}

/// Initial upper end of the multiplier search.
pub(crate) fn initial_lambda_max(cost_spread: f64, channel: &Matrix) -> f64 {
    let mut min_div = f64::INFINITY;
    for (i, p) in channel.iter().enumerate() {
        for (j, q) in channel.iter().enumerate() {
            if i != j {
                let d = crate::info::kl_divergence(p, q);
                if d > 1e-12 && d.is_finite() {
                    min_div = min_div.min(d);
                }
            }
        }
    }
    let denom = if min_div.is_finite() { min_div.max(1e-6) } else { 1e-6 };
    (2.0 * cost_spread / denom).max(1e-6)
}

fn spread(problem: &CgProblem) -> f64 {
    let lo = problem.delta.iter().flatten().cloned().fold(f64::INFINITY, f64::min)
        + problem.rho.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = problem.delta.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max)
        + problem.rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

/// Identical channel rows make `I_f(X;Y)` vanish for every input law.
fn zero_capacity(channel: &Matrix) -> bool {
    channel.iter().all(|row| row.iter().zip(&channel[0]).all(|(u, v)| (u - v).abs() <= 1e-15))
}

/// With `I_f(X;Y) ≡ 0` the constraint forces `Ŝ` independent of `S`, so the
/// optimum is the best constant estimate plus the cheapest input. The dual
/// sup is only reached as `λ → ∞`; the reported `λ` is the search's
/// starting upper end.
fn independent_optimum(problem: &CgProblem, evals: usize) -> CgOutcome {
    let (ns, nsh, nx) = (problem.ns(), problem.nsh(), problem.nx());
    let risk = |sh: usize| (0..ns).map(|s| problem.p_s[s] * problem.delta[s][sh]).sum::<f64>();
    let best_sh = (0..nsh).min_by(|&i, &j| risk(i).total_cmp(&risk(j))).unwrap();
    let best_x = (0..nx).min_by(|&i, &j| problem.rho[i].total_cmp(&problem.rho[j])).unwrap();
    let value = risk(best_sh) + problem.rho[best_x];
    let mut a = vec![vec![0.0; nsh]; ns];
    a.iter_mut().for_each(|row| row[best_sh] = 1.0);
    let mut b = vec![0.0; nx];
    b[best_x] = 1.0;
    CgOutcome {
        a,
        b,
        lambda: initial_lambda_max(spread(problem), problem.channel),
        value,
        lower: value,
        slack: 0.0,
        converged: true,
        evaluations: evals,
        primal_certified: true,
    }
}

/// Probabilities below this are treated as numerical zeros in a returned pair.
const SNAP_MASS: f64 = 1e-10;

fn snap(row: &[f64]) -> Vec<f64> {
    let kept: Vec<f64> = row.iter().map(|v| if *v < SNAP_MASS { 0.0 } else { *v }).collect();
    let t: f64 = kept.iter().sum();
    kept.iter().map(|v| v / t).collect()
}

const SLACK_ROUNDING: f64 = 1e-13;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Solves the separable relaxation by the dual scheme.
///
/// `hint` is a multiplier near the expected optimum; it narrows the search
/// when the same problem is solved repeatedly with small changes.
pub(crate) fn solve_cg(problem: &CgProblem, tol: f64, hint: Option<f64>) -> CgOutcome {
    let (ns, nsh, nx) = (problem.ns(), problem.nsh(), problem.nx());
    let mut warm = Warm { q: vec![1.0 / nsh as f64; nsh], a: vec![vec![1.0 / nsh as f64; nsh]; ns], b: vec![1.0 / nx as f64; nx] };
    let mut points: Vec<Point> = Vec::new();
    let mut evals = 0;
    // Inner loops only need to be accurate well inside `tol`.
    let ba_tol = (1e-2 * tol).max(BA_REL_TOL);
    let mut eval = |lambda: f64, warm: &mut Warm, points: &mut Vec<Point>| -> usize {
        evals += 1;
        let p = problem.eval(lambda, warm, ba_tol);
        points.push(p);
        points.len() - 1
    };

    let i0 = eval(0.0, &mut warm, &mut points);
    if points[i0].slack() >= -tol {
        let p = &points[i0];
        return CgOutcome {
            a: p.a.clone(),
            b: p.b.clone(),
            lambda: 0.0,
            value: p.cost,
            lower: p.lower,
            slack: p.slack(),
            converged: true,
            evaluations: evals,
            primal_certified: false,
        };
    }
    if zero_capacity(problem.channel) {
        return independent_optimum(problem, evals);
    }

    let mut hi = initial_lambda_max(spread(problem), problem.channel);
    let mut lo = 0.0;
    if let Some(h) = hint.filter(|h| *h > 0.0 && h.is_finite()) {
        let i = eval(h, &mut warm, &mut points);
        if points[i].violates() {
            lo = h;
            hi = hi.max(2.0 * h);
        } else {
            let j = eval(0.5 * h, &mut warm, &mut points);
            if points[j].violates() {
                lo = 0.5 * h;
                hi = h;
            } else {
                hi = h;
            }
        }
    }
    let mut ih = eval(hi, &mut warm, &mut points);
    let mut guard = 0;
    while points[ih].violates() && guard < 200 {
        lo = hi;
        hi *= 2.0;
        ih = eval(hi, &mut warm, &mut points);
        guard += 1;
    }

    // Golden-section on the concave dual for a coarse bracket.
    let width0 = hi - lo;
    // A sign change pinned at λ = 0⁺ would otherwise pull the search into
    // denormals, where 1/λ overflows.
    let lambda_floor = 1e-12 * hi;
    let (mut gl, mut gh) = (lo, hi);
    let mut x1 = gh - INV_PHI * (gh - gl);
    let mut x2 = gl + INV_PHI * (gh - gl);
    let i1 = eval(x1, &mut warm, &mut points);
    let i2 = eval(x2, &mut warm, &mut points);
    let (mut f1, mut f2) = (points[i1].lagrangian(), points[i2].lagrangian());
    while gh - gl > 1e-3 * width0 {
        if f1 < f2 {
            gl = x1;
            x1 = x2;
            f1 = f2;
            x2 = gl + INV_PHI * (gh - gl);
            let i = eval(x2, &mut warm, &mut points);
            f2 = points[i].lagrangian();
        } else {
            gh = x2;
            x2 = x1;
            f2 = f1;
            x1 = gh - INV_PHI * (gh - gl);
            let i = eval(x1, &mut warm, &mut points);
            f1 = points[i].lagrangian();
        }
    }

    // Slack is nondecreasing in λ: locate its sign change between the
    // tightest evaluated pair by regula falsi with the Illinois weighting,
    // stopping once the cost at the feasible end meets the dual bound.
    let bracket = |points: &Vec<Point>| {
        let mut l: Option<usize> = None;
        let mut h: Option<usize> = None;
        for (i, p) in points.iter().enumerate() {
            if p.violates() {
                if l.map_or(true, |j| p.lambda > points[j].lambda) {
                    l = Some(i);
                }
            } else if h.map_or(true, |j| p.lambda < points[j].lambda) {
                h = Some(i);
            }
        }
        (l.unwrap(), h.unwrap())
    };
    let (mut il, mut ih) = bracket(&points);
    let (mut wl, mut wh) = (points[il].slack(), points[ih].slack());
    let mut side = 0i8;
    for _ in 0..200 {
        let (l, h) = (points[il].lambda, points[ih].lambda);
        let best = points.iter().map(|p| p.lower).fold(f64::NEG_INFINITY, f64::max);
        let closed = points[ih].cost - best <= 1e-3 * tol * points[ih].cost.abs().max(1.0);
        if h - l <= 1e-13 * h || h <= lambda_floor || points[ih].slack() <= 1e-14 || closed {
            break;
        }
        let mut next = h - wh * (h - l) / (wh - wl);
        if !(next > l && next < h) || !next.is_finite() {
            next = 0.5 * (l + h);
        }
        let i = eval(next, &mut warm, &mut points);
        let sl = points[i].slack();
        if points[i].violates() {
            il = i;
            wl = sl;
            if side == -1 {
                wh *= 0.5;
            }
            side = -1;
        } else {
            ih = i;
            wh = sl;
            if side == 1 {
                wl *= 0.5;
            }
            side = 1;
        }
    }

    let (pl, ph) = (&points[il], &points[ih]);
    let lower = points.iter().map(|p| p.lower).fold(f64::NEG_INFINITY, f64::max);
    // Largest weight on the cheaper side that keeps the DPI.
    let mix = |t: f64| -> (Matrix, Vec<f64>) {
        let a = pl
            .a
            .iter()
            .zip(&ph.a)
            .map(|(u, v)| u.iter().zip(v).map(|(x, y)| t * x + (1.0 - t) * y).collect())
            .collect();
        let b = pl.b.iter().zip(&ph.b).map(|(x, y)| t * x + (1.0 - t) * y).collect();
        (a, b)
    };
    let slack_at = |t: f64| {
        let (a, b) = mix(t);
        problem.info_b(&b) - problem.info_a(&a)
    };
    let (mut tl, mut th) = (0.0, 1.0);
    for _ in 0..80 {
        let m = 0.5 * (tl + th);
        if slack_at(m) >= 0.0 {
            tl = m;
        } else {
            th = m;
        }
    }
    let (mut a, mut b) = mix(tl);
    let mut slack = problem.info_b(&b) - problem.info_a(&a);
    // Mass left at rounding level on cells the optimum does not use makes
    // the gradient there a 0/0 ratio; drop it when the DPI survives.
    let (sa, sb): (Matrix, Vec<f64>) = (a.iter().map(|r| snap(r)).collect(), snap(&b));
    let snapped = problem.info_b(&sb) - problem.info_a(&sa);
    if snapped >= slack.min(0.0) - SLACK_ROUNDING {
        (a, b, slack) = (sa, sb, snapped);
    }
    let value = problem.cost(&a, &b);
    let converged = pl.converged && ph.converged;
    CgOutcome { a, b, lambda: ph.lambda, value, lower, slack, converged, evaluations: evals, primal_certified: false }
}
