//! Cost pairs that make a given code optimal.
//!
//! Given an end-to-end pair `(a, b)` induced by a feasible code, any
//! `(δ, ρ)` built from the f-DPI gradients with admissible multipliers
//! satisfies the relaxation's KKT conditions at `(a, b)`. Since the pair is
//! itself achievable, the code is optimal for the team problem with that
//! cost.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::exact::{solve_exact_or_heuristic, DEFAULT_BUDGET};
use crate::info::{f_mi_gradients, grad_a_cells, grad_b, kl_divergence, pair_informations, FGenerator};
use crate::model::{det_code_cost, random_code_cost, Cost, DetCode, EndToEndPair, Instance, Matrix, RandomCode, SeparableCost};

/// Largest `|I_f(P·b) − I_f(a·pS)|` accepted as DPI equality when `λ > 0`.
pub const DPI_EQUALITY_TOL: f64 = 1e-9;
/// Largest `⟨ν, pair⟩` accepted as complementary.
pub const COMPLEMENTARITY_TOL: f64 = 1e-12;
/// Margin in [`verify_inverse_optimality`].
pub const OPTIMALITY_TOL: f64 = 1e-9;

/// Multipliers for [`synthesize_costs`], in the convention
/// `δ = −λ·∂I_f(a·pS)/∂a / pS + μᵃ + νᵃ` and `ρ = λ·∂I_f(P·b)/∂b + μᵇ + νᵇ`.
#[derive(Clone, Debug)]
pub struct SynthesisSpec {
    pub f: FGenerator,
    pub lambda: f64,
    pub mu_a: Vec<f64>,
    pub mu_b: f64,
    /// Must vanish wherever `a > 0`.
    pub nu_a: Matrix,
    /// Must vanish wherever `b > 0`.
    pub nu_b: Vec<f64>,
}

impl SynthesisSpec {
    /// Multipliers with `ν ≡ 0`.
    pub fn new(f: FGenerator, lambda: f64, mu_a: Vec<f64>, mu_b: f64, n_x: usize, n_shat: usize) -> Self {
        let n_s = mu_a.len();
        SynthesisSpec { f, lambda, mu_a, mu_b, nu_a: vec![vec![0.0; n_shat]; n_s], nu_b: vec![0.0; n_x] }
    }

    /// Puts `νᵃ = 1` on every cell where `a` vanishes, so those cells end up
    /// one unit above the largest defined `δ` in their row.
    pub fn cover_zero_cells(mut self, pair: &EndToEndPair) -> Self {
        for (nu_row, a_row) in self.nu_a.iter_mut().zip(&pair.a) {
            for (nu, a) in nu_row.iter_mut().zip(a_row) {
                if *a <= 0.0 && *nu <= 0.0 {
                    *nu = 1.0;
                }
            }
        }
        self
    }

    fn check(&self, inst: &Instance, pair: &EndToEndPair) -> Result<()> {
        let (ns, nx, nsh) = (inst.n_s, inst.n_x, inst.n_shat);
        if self.mu_a.len() != ns || self.nu_b.len() != nx || self.nu_a.len() != ns || self.nu_a.iter().any(|r| r.len() != nsh)
        {
            return Err(Error::Dimension("multipliers do not match the instance".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return invalid("lambda must be a finite nonnegative number");
        }
        let finite = self.mu_a.iter().chain(std::iter::once(&self.mu_b)).all(|v| v.is_finite());
        if !finite {
            return invalid("mu must be finite");
        }
        if self.nu_a.iter().flatten().chain(&self.nu_b).any(|v| !(*v >= 0.0 && v.is_finite())) {
            return invalid("nu must be finite and nonnegative");
        }
        for (s, (nu_row, a_row)) in self.nu_a.iter().zip(&pair.a).enumerate() {
            let c: f64 = nu_row.iter().zip(a_row).map(|(n, a)| n * a).sum();
            if c > COMPLEMENTARITY_TOL {
                return Err(Error::Refused(format!("nu_a is not complementary to a in row {s} ({c:.3e})")));
            }
        }
        let c: f64 = self.nu_b.iter().zip(&pair.b).map(|(n, b)| n * b).sum();
        if c > COMPLEMENTARITY_TOL {
            return Err(Error::Refused(format!("nu_b is not complementary to b ({c:.3e})")));
        }
        if self.lambda > 0.0 {
            let (ia, ib) = pair_informations(&self.f, &inst.p_s, &pair.a, &inst.channel, &pair.b);
            let slack = ib - ia;
            if !(slack.abs() <= DPI_EQUALITY_TOL) {
                return Err(Error::Refused(format!("lambda > 0 needs DPI equality, slack is {slack:.3e}")));
            }
        }
        Ok(())
    }
}

/// Builds `(δ, ρ)` for which `pair` satisfies the relaxation's KKT
/// conditions with the multipliers in `spec`.
///
/// Where `λ > 0` and `a(ŝ|s) = 0` the gradient is undefined; such a cell
/// must carry `νᵃ > 0` and gets `δ = (largest defined δ in the row) + νᵃ`.
/// Generators without certified saddle behaviour must pass the saddle
/// probe on the instance's channel.
pub fn synthesize_costs(inst: &Instance, pair: &EndToEndPair, spec: &SynthesisSpec) -> Result<(Matrix, Vec<f64>)> {
    inst.validate()?;
    pair.validate(inst.n_s, inst.n_x, inst.n_shat)?;
    spec.check(inst, pair)?;
    if spec.lambda > 0.0 {
        crate::relax::check_generator(&spec.f, &inst.channel)?;
    }
    let (ns, nsh) = (inst.n_s, inst.n_shat);
    let lambda = spec.lambda;

    let mut delta = vec![vec![0.0; nsh]; ns];
    if lambda > 0.0 {
        let g = grad_a_cells(&spec.f, &inst.p_s, &pair.a)?;
        for s in 0..ns {
            let p = inst.p_s[s];
            let mut defined = vec![None; nsh];
            for sh in 0..nsh {
                if p > 0.0 && pair.a[s][sh] > 0.0 && g[s][sh].is_finite() {
                    defined[sh] = Some(-lambda * g[s][sh] / p + spec.mu_a[s] + spec.nu_a[s][sh]);
                } else if p == 0.0 {
                    // an unweighted row never enters the objective
                    defined[sh] = Some(spec.mu_a[s] + spec.nu_a[s][sh]);
                }
            }
            let top = defined.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
            let top = if top.is_finite() { top } else { spec.mu_a[s] };
            for sh in 0..nsh {
                delta[s][sh] = match defined[sh] {
                    Some(v) => v,
                    None if spec.nu_a[s][sh] > 0.0 => top + spec.nu_a[s][sh],
                    None => {
                        return Err(Error::Refused(format!(
                            "gradient undefined at a({sh}|{s}) = 0 and nu_a does not cover it"
                        )))
                    }
                };
            }
        }
    } else {
        for s in 0..ns {
            for sh in 0..nsh {
                delta[s][sh] = spec.mu_a[s] + spec.nu_a[s][sh];
            }
        }
    }

    let rho = if lambda > 0.0 {
        let db = grad_b(&spec.f, &inst.channel, &pair.b)?;
        db.iter().zip(&spec.nu_b).map(|(d, nu)| lambda * d + spec.mu_b + nu).collect()
    } else {
        spec.nu_b.iter().map(|nu| spec.mu_b + nu).collect()
    };
    Ok((delta, rho))
}

/// Copy of `inst` whose cost is the separable pair `(δ, ρ)`; its JSON
/// form feeds straight back into the exact solver.
pub fn synthesized_instance(inst: &Instance, delta: Matrix, rho: Vec<f64>) -> Result<Instance> {
    inst.with_cost(Cost::Separable(SeparableCost::new(delta, rho)))
}

/// Costs in the classical source–channel matching form
/// `ρ(x) = c₁·D(P(·|x) ‖ P_Y) + ρ₀ + β(x)·1{b(x) = 0}` and
/// `δ(s,ŝ) = −c₂·log p(s|ŝ) + d₀(s)`, where `P_Y` and `p(s|ŝ)` come from
/// the pair.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GastparCosts {
    pub rho: Vec<f64>,
    pub delta: Matrix,
    /// `(s, ŝ)` cells with `p(s|ŝ) = 0`; their `δ` is one above the row's
    /// largest finite entry.
    pub flagged_delta: Vec<(usize, usize)>,
    /// Inputs whose divergence is infinite; their `ρ` is one above the
    /// largest finite entry, plus `β`.
    pub flagged_rho: Vec<usize>,
}

#[allow(clippy::too_many_arguments)]
pub fn gastpar_costs(
    inst: &Instance,
    pair: &EndToEndPair,
    c1: f64,
    c2: f64,
    rho0: f64,
    d0: &[f64],
    beta: &[f64],
) -> Result<GastparCosts> {
    inst.validate()?;
    pair.validate(inst.n_s, inst.n_x, inst.n_shat)?;
    let (ns, nx, ny, nsh) = (inst.n_s, inst.n_x, inst.n_y, inst.n_shat);
    if !(c1 > 0.0 && c2 > 0.0 && c1.is_finite() && c2.is_finite()) {
        return invalid("c1 and c2 must be positive");
    }
    if d0.len() != ns || beta.len() != nx {
        return Err(Error::Dimension("d0 must have nS entries and beta nX".into()));
    }
    if beta.iter().any(|v| !(*v >= 0.0)) {
        return invalid("beta must be nonnegative");
    }
    let p_y: Vec<f64> = (0..ny).map(|y| (0..nx).map(|x| pair.b[x] * inst.channel[x][y]).sum()).collect();
    let div: Vec<f64> = (0..nx).map(|x| kl_divergence(&inst.channel[x], &p_y)).collect();
    let top = div.iter().cloned().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    let mut flagged_rho = Vec::new();
    let rho = (0..nx)
        .map(|x| {
            let d = if div[x].is_finite() {
                div[x]
            } else {
                flagged_rho.push(x);
                if top.is_finite() {
                    top + 1.0
                } else {
                    1.0
                }
            };
            c1 * d + rho0 + if pair.b[x] == 0.0 { beta[x] } else { 0.0 }
        })
        .collect();

    let m: Vec<f64> = (0..nsh).map(|sh| (0..ns).map(|s| inst.p_s[s] * pair.a[s][sh]).sum()).collect();
    let mut flagged_delta = Vec::new();
    let delta = (0..ns)
        .map(|s| {
            let row: Vec<Option<f64>> = (0..nsh)
                .map(|sh| {
                    let post = if m[sh] > 0.0 { pair.a[s][sh] * inst.p_s[s] / m[sh] } else { 0.0 };
                    (post > 0.0).then(|| -c2 * post.ln() + d0[s])
                })
                .collect();
            let top = row.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
            let top = if top.is_finite() { top } else { d0[s] };
            row.iter()
                .enumerate()
                .map(|(sh, v)| {
                    v.unwrap_or_else(|| {
                        flagged_delta.push((s, sh));
                        top + 1.0
                    })
                })
                .collect()
        })
        .collect();
    Ok(GastparCosts { rho, delta, flagged_delta, flagged_rho })
}

/// Least-squares fit of `(δ, ρ)` by the classical form with free per-row
/// constants, over cells where both forms are defined.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GastparFit {
    pub c1: f64,
    pub c2: f64,
    pub rho0: f64,
    pub d0: Vec<f64>,
    /// Root of the summed squared residuals.
    pub residual: f64,
    /// `residual` over the norm of the centered target.
    pub relative_residual: f64,
}

/// Fits `c₁, c₂ ≥ 0`, `ρ₀` and `d₀(s)`; the fit is exact iff `(δ, ρ)` is a
/// classical pair up to per-row constants.
pub fn gastpar_fit(inst: &Instance, pair: &EndToEndPair, delta: &Matrix, rho: &[f64]) -> Result<GastparFit> {
    inst.validate()?;
    pair.validate(inst.n_s, inst.n_x, inst.n_shat)?;
    let (ns, nx, ny, nsh) = (inst.n_s, inst.n_x, inst.n_y, inst.n_shat);
    if delta.len() != ns || delta.iter().any(|r| r.len() != nsh) || rho.len() != nx {
        return Err(Error::Dimension("costs do not match the instance".into()));
    }
    // ρ ≈ c₁·D + ρ₀ over inputs with b > 0
    let p_y: Vec<f64> = (0..ny).map(|y| (0..nx).map(|x| pair.b[x] * inst.channel[x][y]).sum()).collect();
    let pts: Vec<(f64, f64)> = (0..nx)
        .filter(|&x| pair.b[x] > 0.0)
        .map(|x| (kl_divergence(&inst.channel[x], &p_y), rho[x]))
        .filter(|(d, _)| d.is_finite())
        .collect();
    let k = pts.len().max(1) as f64;
    let (md, mr) = (pts.iter().map(|p| p.0).sum::<f64>() / k, pts.iter().map(|p| p.1).sum::<f64>() / k);
    let sdd: f64 = pts.iter().map(|(d, _)| (d - md).powi(2)).sum();
    let sdr: f64 = pts.iter().map(|(d, r)| (d - md) * (r - mr)).sum();
    let c1 = if sdd > 0.0 { (sdr / sdd).max(0.0) } else { 0.0 };
    let rho0 = mr - c1 * md;
    let mut sq = pts.iter().map(|(d, r)| (r - c1 * d - rho0).powi(2)).sum::<f64>();
    let mut norm = pts.iter().map(|(_, r)| (r - mr).powi(2)).sum::<f64>();

    // δ(s,·) ≈ −c₂·log p(s|·) + d₀(s) over cells with a > 0
    let m: Vec<f64> = (0..nsh).map(|sh| (0..ns).map(|s| inst.p_s[s] * pair.a[s][sh]).sum()).collect();
    let rows: Vec<Vec<(f64, f64)>> = (0..ns)
        .map(|s| {
            (0..nsh)
                .filter(|&sh| inst.p_s[s] > 0.0 && pair.a[s][sh] > 0.0)
                .map(|sh| (-(pair.a[s][sh] * inst.p_s[s] / m[sh]).ln(), delta[s][sh]))
                .collect()
        })
        .collect();
    let centered: Vec<Vec<(f64, f64)>> = rows
        .iter()
        .map(|r| {
            let k = r.len().max(1) as f64;
            let (ml, md) = (r.iter().map(|p| p.0).sum::<f64>() / k, r.iter().map(|p| p.1).sum::<f64>() / k);
            r.iter().map(|(l, d)| (l - ml, d - md)).collect()
        })
        .collect();
    let sll: f64 = centered.iter().flatten().map(|(l, _)| l * l).sum();
    let sld: f64 = centered.iter().flatten().map(|(l, d)| l * d).sum();
    let c2 = if sll > 0.0 { (sld / sll).max(0.0) } else { 0.0 };
    let d0: Vec<f64> = rows
        .iter()
        .map(|r| {
            let k = r.len().max(1) as f64;
            r.iter().map(|(l, d)| d - c2 * l).sum::<f64>() / k
        })
        .collect();
    sq += centered.iter().flatten().map(|(l, d)| (d - c2 * l).powi(2)).sum::<f64>();
    norm += centered.iter().flatten().map(|(_, d)| d * d).sum::<f64>();
    let residual = sq.sqrt();
    let relative_residual = if norm > 0.0 { residual / norm.sqrt() } else { 0.0 };
    Ok(GastparFit { c1, c2, rho0, d0, residual, relative_residual })
}

#[derive(Clone, Debug)]
pub enum Candidate {
    Det(DetCode),
    Random(RandomCode),
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifyReport {
    pub candidate_value: f64,
    pub global_min: f64,
    pub optimal: bool,
    /// `global_min` came from local search, so `optimal` is only evidence.
    pub heuristic: bool,
}

/// Compares the candidate's cost with the best deterministic code. A
/// random code can never beat the best deterministic one, so enumeration
/// settles optimality over all codes.
pub fn verify_inverse_optimality(inst: &Instance, candidate: &Candidate) -> Result<VerifyReport> {
    verify_with_budget(inst, candidate, DEFAULT_BUDGET, 0)
}

pub fn verify_with_budget(inst: &Instance, candidate: &Candidate, budget: f64, seed: u64) -> Result<VerifyReport> {
    inst.validate()?;
    let candidate_value = match candidate {
        Candidate::Det(c) => {
            c.validate(inst)?;
            det_code_cost(inst, c)
        }
        Candidate::Random(c) => {
            c.validate(inst)?;
            random_code_cost(inst, c)
        }
    };
    let ex = solve_exact_or_heuristic(inst, budget, 16, seed)?;
    Ok(VerifyReport {
        candidate_value,
        global_min: ex.value,
        optimal: candidate_value <= ex.value + OPTIMALITY_TOL,
        heuristic: ex.heuristic,
    })
}

/// Random code whose encoder and decoder are both bijections, on an
/// instance with `nS = nX = nY = nŜ`. The `(s, ŝ)` joint is then a
/// relabeling of the `(x, y)` joint, so the f-DPI holds with equality for
/// every generator.
pub fn bijective_code(inst: &Instance, seed: u64) -> Result<DetCode> {
    let n = inst.n_s;
    if inst.n_x != n || inst.n_y != n || inst.n_shat != n {
        return invalid("a bijective code needs all four alphabets of equal size");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f: Vec<usize> = (0..n).collect();
    let mut g: Vec<usize> = (0..n).collect();
    f.shuffle(&mut rng);
    g.shuffle(&mut rng);
    Ok(DetCode { f, g })
}

/// KKT residual check for a synthesized pair: the gradients at the pair
/// must reproduce `(δ, ρ)` through the multipliers, on cells with positive
/// mass.
pub fn synthesis_residual(
    inst: &Instance,
    pair: &EndToEndPair,
    spec: &SynthesisSpec,
    delta: &Matrix,
    rho: &[f64],
) -> Result<f64> {
    if spec.lambda == 0.0 {
        let mut worst: f64 = 0.0;
        for s in 0..inst.n_s {
            for sh in 0..inst.n_shat {
                worst = worst.max((delta[s][sh] - spec.mu_a[s] - spec.nu_a[s][sh]).abs());
            }
        }
        for x in 0..inst.n_x {
            worst = worst.max((rho[x] - spec.mu_b - spec.nu_b[x]).abs());
        }
        return Ok(worst);
    }
    let g = f_mi_gradients(&spec.f, &inst.p_s, &pair.a, &inst.channel, &pair.b)?;
    let mut worst: f64 = 0.0;
    for s in 0..inst.n_s {
        if inst.p_s[s] == 0.0 {
            continue;
        }
        for sh in 0..inst.n_shat {
            let want = -spec.lambda * g.d_a[s][sh] / inst.p_s[s] + spec.mu_a[s] + spec.nu_a[s][sh];
            worst = worst.max((delta[s][sh] - want).abs());
        }
    }
    for x in 0..inst.n_x {
        let want = spec.lambda * g.d_b[x] + spec.mu_b + spec.nu_b[x];
        worst = worst.max((rho[x] - want).abs());
    }
    Ok(worst)
}
