//! Residuals of the KKT systems for the separable and tensor relaxations.

use crate::error::Result;
use crate::info::{f_mutual_information, grad_a_cells, grad_b, FGenerator};
use crate::model::{induced_endtoend, membership_check, EndToEndPair, Instance, JointDist, Matrix};

use super::{joint_of, KktReport, Multipliers};

/// How [`kkt_residual_separable`] picks the DPI multiplier.
#[derive(Clone, Debug)]
pub enum LambdaSearch {
    Fixed(f64),
    /// Best of the listed values.
    Grid(Vec<f64>),
    /// Geometric grid over `[1e-6, 1e6]` and zero, refined by golden section.
    Auto,
}

/// Gradient terms evaluated once per pair; the residual is then cheap for
/// every trial `λ`.
pub(crate) struct PairTerms {
    /// `∂I_f(a·pS)/∂a / pS`; NaN on unused columns.
    g: Matrix,
    /// `∂I_f(P·b)/∂b`, or `None` when some reachable output has no mass.
    db: Option<Vec<f64>>,
    slack: f64,
    feas: f64,
}

pub(crate) fn pair_terms(p_s: &[f64], channel: &Matrix, pair: &EndToEndPair, f: &FGenerator) -> Result<PairTerms> {
    let raw = grad_a_cells(f, p_s, &pair.a)?;
    let g = raw
        .iter()
        .zip(p_s)
        .map(|(r, p)| r.iter().map(|v| if *p > 0.0 { v / p } else { 0.0 }).collect())
        .collect();
    let db = grad_b(f, channel, &pair.b).ok();
    let ia = f_mutual_information(f, &joint_of(&pair.a, p_s));
    let ib = f_mutual_information(f, &joint_of(channel, &pair.b));
    let mut feas: f64 = 0.0;
    for r in pair.a.iter().chain(std::iter::once(&pair.b)) {
        feas = feas.max((r.iter().sum::<f64>() - 1.0).abs());
        feas = feas.max(r.iter().cloned().fold(0.0, |m, v| m.max(-v)));
    }
    let slack = ib - ia;
    feas = feas.max(-slack);
    Ok(PairTerms { g, db, slack, feas })
}

/// Multipliers and residuals of the separable KKT system at a fixed `λ`.
pub(crate) fn residual_at(
    p_s: &[f64],
    delta: &Matrix,
    rho: &[f64],
    pair: &EndToEndPair,
    f: &FGenerator,
    terms: &PairTerms,
    lambda: f64,
) -> (Multipliers, KktReport) {
    let (ns, nsh, nx) = (delta.len(), delta[0].len(), rho.len());
    let neg_log = f.is_neg_log();
    let mut mult = Multipliers::zeros(ns, nx, 0, nsh);
    mult.lambda = lambda;
    mult.lambda_p = vec![Vec::new(); nx];
    let mut rep = KktReport::default();

    let term = |s: usize, sh: usize| -> f64 {
        if lambda == 0.0 {
            delta[s][sh]
        } else {
            delta[s][sh] + lambda * terms.g[s][sh]
        }
    };
    for s in 0..ns {
        let mu = -(0..nsh).map(|sh| term(s, sh)).filter(|v| !v.is_nan()).fold(f64::INFINITY, f64::min);
        mult.mu_a[s] = if mu.is_finite() { mu } else { 0.0 };
        if !mu.is_finite() && p_s[s] > 0.0 {
            rep.stationarity_a = f64::INFINITY;
        }
        for sh in 0..nsh {
            let t = term(s, sh);
            let nu = if t.is_nan() { 0.0 } else { t + mult.mu_a[s] };
            mult.nu_a[s][sh] = nu;
            mult.lambda_a[s][sh] = -delta[s][sh];
            if p_s[s] > 0.0 && pair.a[s][sh] > 0.0 {
                rep.stationarity_a += p_s[s] * pair.a[s][sh] * nu;
            }
        }
    }
    // Unused columns: mass stays out only if Σ_s pS e^{−(δ+μ)/λ} ≤ 1.
    if neg_log && lambda > 0.0 {
        for sh in 0..nsh {
            let used = (0..ns).any(|s| p_s[s] > 0.0 && pair.a[s][sh] > 0.0);
            if used {
                continue;
            }
            let z: f64 = (0..ns)
                .filter(|&s| p_s[s] > 0.0)
                .map(|s| p_s[s] * (-(delta[s][sh] + mult.mu_a[s]) / lambda).exp())
                .sum();
            rep.sign_violations = rep.sign_violations.max(z.ln().max(0.0));
        }
    }

    match &terms.db {
        Some(db) => {
            let t: Vec<f64> = (0..nx).map(|x| if lambda == 0.0 { rho[x] } else { rho[x] - lambda * db[x] }).collect();
            mult.mu_b = -t.iter().cloned().fold(f64::INFINITY, f64::min);
            for x in 0..nx {
                mult.nu_b[x] = t[x] + mult.mu_b;
                mult.lambda_b[x] = -rho[x];
                rep.stationarity_b += pair.b[x] * mult.nu_b[x];
            }
        }
        None => {
            rep.stationarity_b = if lambda == 0.0 { 0.0 } else { f64::INFINITY };
            if lambda == 0.0 {
                mult.mu_b = -rho.iter().cloned().fold(f64::INFINITY, f64::min);
                for x in 0..nx {
                    mult.nu_b[x] = rho[x] + mult.mu_b;
                    mult.lambda_b[x] = -rho[x];
                    rep.stationarity_b += pair.b[x] * mult.nu_b[x];
                }
            }
        }
    }
    rep.complementarity = rep.stationarity_a + rep.stationarity_b;
    rep.dpi_complementarity = (lambda * terms.slack).abs();
    rep.sign_violations = rep.sign_violations.max((-lambda).max(0.0));
    rep.primal_feasibility = terms.feas;
    (mult, rep.finish())
}

fn golden<F: Fn(f64) -> f64>(mut lo: f64, mut hi: f64, f: F, steps: usize) -> f64 {
    const R: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - R * (hi - lo);
    let mut x2 = lo + R * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..steps {
        if f1 > f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + R * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - R * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 < f2 {
        x1
    } else {
        x2
    }
}

pub(crate) fn search(
    p_s: &[f64],
    delta: &Matrix,
    rho: &[f64],
    channel: &Matrix,
    pair: &EndToEndPair,
    f: &FGenerator,
    how: &LambdaSearch,
) -> Result<(Multipliers, KktReport)> {
    let terms = pair_terms(p_s, channel, pair, f)?;
    let at = |l: f64| residual_at(p_s, delta, rho, pair, f, &terms, l);
    let score = |l: f64| at(l).1.max_residual;
    let best_of = |ls: &[f64]| -> f64 {
        let mut best = (f64::INFINITY, ls.first().copied().unwrap_or(0.0));
        for &l in ls {
            let r = score(l);
            if r < best.0 {
                best = (r, l);
            }
        }
        best.1
    };
    let lambda = match how {
        LambdaSearch::Fixed(l) => *l,
        LambdaSearch::Grid(ls) => best_of(ls),
        LambdaSearch::Auto => {
            let mut grid = vec![0.0];
            let n = 200;
            grid.extend((0..n).map(|i| 10f64.powf(-6.0 + 12.0 * i as f64 / (n - 1) as f64)));
            let l0 = best_of(&grid);
            if l0 == 0.0 {
                0.0
            } else {
                let step = 10f64.powf(12.0 / (n - 1) as f64);
                let l1 = golden(l0 / step, l0 * step, score, 100);
                if score(l1) < score(l0) {
                    l1
                } else {
                    l0
                }
            }
        }
    };
    let (mut mult, rep) = at(lambda);
    mult.lambda_p = vec![vec![0.0; channel.first().map_or(0, |r| r.len())]; channel.len()];
    Ok((mult, rep))
}

/// Reconstructs multipliers for `pair` under the instance's separable
/// cost and reports the residuals of the separable KKT system.
///
/// `μᵃ`, `μᵇ` are chosen to make `νᵃ`, `νᵇ` nonnegative with zero row
/// minima, so stationarity and sign conditions hold by construction and the
/// remaining content is complementarity: `stationarity_a = Σ_s pS⟨a,νᵃ⟩`,
/// `stationarity_b = ⟨b,νᵇ⟩`. Cross-term costs use the effective
/// `(1 − α/2R)ρ` slope at `R = √⟨ρ,b⟩`.
pub fn kkt_residual_separable(
    inst: &Instance,
    pair: &EndToEndPair,
    f: &FGenerator,
    how: LambdaSearch,
) -> Result<(Multipliers, KktReport)> {
    inst.validate()?;
    pair.validate(inst.n_s, inst.n_x, inst.n_shat)?;
    let (delta, rho) = super::separable::separable_parts(inst)?;
    let rho = match inst.separable() {
        Some(sc) if sc.has_cross() => {
            let alpha = sc.alpha(&inst.p_s);
            let r = super::dot(&rho, &pair.b).max(0.0).sqrt();
            if r > 0.0 {
                rho.iter().map(|v| (1.0 - alpha / (2.0 * r)) * v).collect()
            } else {
                rho
            }
        }
        _ => rho,
    };
    search(&inst.p_s, &delta, &rho, &inst.channel, pair, f, &how)
}

/// Evaluates every equation of the tensor KKT system at `q`.
///
/// `stationarity_q` is the sup-norm mismatch of
/// `ν(z) = κ(z) + λᵃ(s,ŝ) + λᵇ(x) + λᵖ(x,y) − Σ_ȳ λᵖ(x,ȳ)P(ȳ|x)` over cells
/// with `P(y|x) > 0`; cells the channel cannot reach are skipped.
pub fn kkt_residual_general(inst: &Instance, q: &JointDist, f: &FGenerator, mult: &Multipliers) -> Result<KktReport> {
    inst.validate()?;
    let (ns, nx, ny, nsh) = (inst.n_s, inst.n_x, inst.n_y, inst.n_shat);
    if q.dims != inst.dims() {
        return Err(crate::Error::Dimension("joint shape differs from instance".into()));
    }
    let shapes_ok = mult.lambda_a.len() == ns
        && mult.lambda_a.iter().all(|r| r.len() == nsh)
        && mult.nu_a.len() == ns
        && mult.nu_a.iter().all(|r| r.len() == nsh)
        && mult.mu_a.len() == ns
        && mult.lambda_b.len() == nx
        && mult.nu_b.len() == nx
        && mult.lambda_p.len() == nx
        && mult.lambda_p.iter().all(|r| r.len() == ny)
        && mult.nu.as_ref().map_or(true, |v| v.len() == inst.tensor_len());
    if !shapes_ok {
        return Err(crate::Error::Dimension("multipliers do not match the instance".into()));
    }
    let pair = induced_endtoend(q, &inst.p_s)?;
    let terms = pair_terms(&inst.p_s, &inst.channel, &pair, f)?;
    let lambda = mult.lambda;
    let mut rep = KktReport::default();

    for s in 0..ns {
        if inst.p_s[s] == 0.0 {
            continue;
        }
        for sh in 0..nsh {
            if pair.a[s][sh] <= 0.0 {
                continue;
            }
            let g = if lambda == 0.0 { 0.0 } else { lambda * terms.g[s][sh] };
            let r = (mult.lambda_a[s][sh] - (g + mult.mu_a[s] - mult.nu_a[s][sh])).abs();
            rep.stationarity_a = rep.stationarity_a.max(if r.is_nan() { f64::INFINITY } else { r });
        }
    }
    for x in 0..nx {
        let d = match (&terms.db, lambda == 0.0) {
            (_, true) => 0.0,
            (Some(db), false) => lambda * db[x],
            (None, false) => f64::INFINITY,
        };
        let r = (mult.lambda_b[x] - (-d + mult.mu_b - mult.nu_b[x])).abs();
        rep.stationarity_b = rep.stationarity_b.max(if r.is_nan() { f64::INFINITY } else { r });
    }

    let mut nu_q = 0.0;
    let mut nu_neg: f64 = 0.0;
    for x in 0..nx {
        let avg: f64 = (0..ny).map(|y| mult.lambda_p[x][y] * inst.channel[x][y]).sum();
        for y in 0..ny {
            if inst.channel[x][y] == 0.0 {
                continue;
            }
            for s in 0..ns {
                for sh in 0..nsh {
                    let i = inst.idx(s, x, y, sh);
                    let nu = mult.nu.as_ref().map_or(0.0, |v| v[i]);
                    let rhs = inst.kappa(s, x, y, sh) + mult.lambda_a[s][sh] + mult.lambda_b[x] + mult.lambda_p[x][y] - avg;
                    rep.stationarity_q = rep.stationarity_q.max((nu - rhs).abs());
                    nu_q += nu * q.q[i];
                    nu_neg = nu_neg.max(-nu);
                }
            }
        }
    }

    let mut comp_a = 0.0;
    for s in 0..ns {
        for sh in 0..nsh {
            comp_a += inst.p_s[s] * pair.a[s][sh] * mult.nu_a[s][sh];
            nu_neg = nu_neg.max(-mult.nu_a[s][sh]);
        }
    }
    let mut comp_b = 0.0;
    for x in 0..nx {
        comp_b += pair.b[x] * mult.nu_b[x];
        nu_neg = nu_neg.max(-mult.nu_b[x]);
    }
    rep.complementarity = comp_a.abs() + comp_b.abs() + nu_q.abs();
    rep.sign_violations = nu_neg.max((-lambda).max(0.0));
    rep.dpi_complementarity = (lambda * terms.slack).abs();
    let m = membership_check(inst, q, 0.0);
    let mass = (q.q.iter().sum::<f64>() - 1.0).abs();
    let neg = q.q.iter().cloned().fold(0.0, |m: f64, v| m.max(-v));
    rep.primal_feasibility = terms.feas.max(m.source_deviation).max(m.channel_deviation).max(mass).max(neg);
    Ok(rep.finish())
}
