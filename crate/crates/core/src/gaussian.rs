//! Discretized scalar Gaussian instances and their closed-form references.
//!
//! `S ~ N(0, σ₀²)`, `Y = X + W` with `W ~ N(0, σw²)`. Three cost shapes:
//!
//! | problem        | cost                         |
//! |----------------|------------------------------|
//! | test channel   | `k₀x² + (ŝ−s)²`              |
//! | Bansal–Başar   | `k₀x² + s₀₁xs + (ŝ−s)²`      |
//! | Witsenhausen   | `(x−ŝ)² + (x−s)²`            |
//!
//! The first two are stored as separable costs so that 65-point grids do
//! not need a dense tensor.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{Cost, DetCode, Instance, SeparableCost, MAX_TENSOR_ENTRIES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Problem {
    TestChannel,
    BansalBasar,
    Witsenhausen,
}

impl Problem {
    /// Accepts the CLI preset names.
    pub fn parse(name: &str) -> Result<Problem> {
        match name {
            "test-channel" | "testChannel" => Ok(Problem::TestChannel),
            "bansal-basar" | "bansalBasar" => Ok(Problem::BansalBasar),
            "witsenhausen" => Ok(Problem::Witsenhausen),
            _ => invalid(format!("unknown preset {name:?}")),
        }
    }
}

/// How grid probabilities are assigned to the source and the noise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Weighting {
    /// Mass of the cell around each point, tails folded into the end cells.
    /// Relaxation values approach the continuous optimum from above as the
    /// grid refines.
    #[default]
    CellMass,
    /// Density at each point, renormalized. Accurate to the truncation at
    /// `±hσ`, so refined grids settle on the truncated problem instead.
    Density,
}

impl Weighting {
    pub fn parse(name: &str) -> Result<Weighting> {
        match name {
            "cell-mass" | "cellMass" => Ok(Weighting::CellMass),
            "density" => Ok(Weighting::Density),
            _ => invalid(format!("unknown weighting {name:?}")),
        }
    }

    /// Probabilities on `values` for `N(mean, sigma²)`.
    pub fn weights(self, values: &[f64], mean: f64, sigma: f64) -> Vec<f64> {
        match self {
            Weighting::CellMass => cell_masses(values, mean, sigma),
            Weighting::Density => {
                let w: Vec<f64> = values.iter().map(|v| (-0.5 * ((v - mean) / sigma).powi(2)).exp()).collect();
                let t: f64 = w.iter().sum();
                w.iter().map(|v| v / t).collect()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GaussianSpec {
    pub sigma0: f64,
    pub sigma_w: f64,
    pub k0: f64,
    pub s01: f64,
    pub grid_points: usize,
    pub grid_half_width_sigmas: f64,
    pub problem: Problem,
    #[serde(default)]
    pub weighting: Weighting,
}

impl GaussianSpec {
    pub fn test_channel(sigma0: f64, sigma_w: f64, k0: f64, grid_points: usize) -> Self {
        GaussianSpec {
            sigma0,
            sigma_w,
            k0,
            s01: 0.0,
            grid_points,
            grid_half_width_sigmas: 5.0,
            problem: Problem::TestChannel,
            weighting: Weighting::CellMass,
        }
    }

    pub fn bansal_basar(sigma0: f64, sigma_w: f64, k0: f64, s01: f64, grid_points: usize) -> Self {
        GaussianSpec { s01, problem: Problem::BansalBasar, ..Self::test_channel(sigma0, sigma_w, k0, grid_points) }
    }

    pub fn witsenhausen(sigma0: f64, sigma_w: f64, grid_points: usize) -> Self {
        GaussianSpec { problem: Problem::Witsenhausen, ..Self::test_channel(sigma0, sigma_w, 0.25, grid_points) }
    }

    /// The cross coefficient actually used; the test channel has none.
    pub fn effective_s01(&self) -> f64 {
        match self.problem {
            Problem::TestChannel => 0.0,
            _ => self.s01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) || !(self.sigma_w > 0.0 && self.sigma_w.is_finite()) {
            return invalid("sigma0 and sigmaW must be positive");
        }
        if !(self.k0 > 0.0 && self.k0.is_finite()) {
            return invalid("k0 must be positive");
        }
        if !self.s01.is_finite() {
            return invalid("s01 must be finite");
        }
        if self.grid_points < 9 || self.grid_points % 2 == 0 {
            return invalid(format!("gridPoints must be odd and at least 9, got {}", self.grid_points));
        }
        if !(self.grid_half_width_sigmas >= 3.0) {
            return invalid("grid half width must be at least 3 sigmas");
        }
        Ok(())
    }
}

fn centered_grid(n: usize, step: f64) -> Vec<f64> {
    let mid = (n / 2) as f64;
    (0..n).map(|i| (i as f64 - mid) * step).collect()
}

/// Uniform grid on `[−hσ, hσ]` with Gaussian weights renormalized to one.
pub fn discretize_gaussian(sigma: f64, grid_points: usize, half_width_sigmas: f64) -> (Vec<f64>, Vec<f64>) {
    let n = grid_points;
    if n == 1 {
        return (vec![0.0], vec![1.0]);
    }
    let step = 2.0 * half_width_sigmas / (n - 1) as f64;
    let mid = (n - 1) as f64 / 2.0;
    let z: Vec<f64> = (0..n).map(|i| (i as f64 - mid) * step).collect();
    let w: Vec<f64> = z.iter().map(|t| (-0.5 * t * t).exp()).collect();
    let total: f64 = w.iter().sum();
    let probs = w.iter().map(|v| v / total).collect();
    (z.iter().map(|t| t * sigma).collect(), probs)
}

/// Probability of each cell of the uniform grid `centers` under
/// `N(mean, sigma²)`; cells split halfway between points and the two end
/// cells absorb the tails.
pub fn cell_masses(centers: &[f64], mean: f64, sigma: f64) -> Vec<f64> {
    let n = centers.len();
    // upper tail P(Z > t); the lower tail is its mirror image
    let upper = |t: f64| 0.5 * statrs::function::erf::erfc((t - mean) / (sigma * std::f64::consts::SQRT_2));
    let lower = |t: f64| upper(2.0 * mean - t);
    (0..n)
        .map(|i| {
            let lo = if i == 0 { f64::NEG_INFINITY } else { 0.5 * (centers[i - 1] + centers[i]) };
            let hi = if i + 1 == n { f64::INFINITY } else { 0.5 * (centers[i] + centers[i + 1]) };
            // difference of whichever tail is small, to keep relative precision
            if centers[i] > mean {
                upper(lo) - upper(hi)
            } else {
                lower(hi) - lower(lo)
            }
        })
        .collect()
}

pub fn xi0(spec: &GaussianSpec, gamma0: f64) -> f64 {
    let (s2, w2) = (spec.sigma0.powi(2), spec.sigma_w.powi(2));
    s2 * w2 / (gamma0 * gamma0 * s2 + w2).powi(2)
}

pub fn xi1(spec: &GaussianSpec, gamma0: f64) -> f64 {
    let (s2, w2) = (spec.sigma0.powi(2), spec.sigma_w.powi(2));
    gamma0 * s2 / (gamma0 * gamma0 * s2 + w2)
}

/// `(γ₀²σ₀² + σw²)/(γ₀²σ₀²)`; infinite at `γ₀ = 0`.
pub fn p_bar(spec: &GaussianSpec, gamma0: f64) -> f64 {
    let px = gamma0 * gamma0 * spec.sigma0.powi(2);
    (px + spec.sigma_w.powi(2)) / px
}

/// Stationarity equation for the encoder gain. Zero at the optimum.
pub fn gain_equation_residual(spec: &GaussianSpec, gamma0: f64) -> f64 {
    let (s0, w2) = (spec.sigma0, spec.sigma_w.powi(2));
    let v = gamma0 * gamma0 * s0 * s0 + w2;
    (2.0 * spec.k0 * gamma0 * s0 - spec.effective_s01().abs() * s0) * v * v - 2.0 * gamma0 * s0.powi(3) * w2
}

/// Same equation written for the transmit amplitude `P`.
pub fn power_equation_residual(spec: &GaussianSpec, p: f64) -> f64 {
    let (s0, w2) = (spec.sigma0, spec.sigma_w.powi(2));
    let v = p * p + w2;
    (2.0 * spec.k0 * p - spec.effective_s01().abs() * s0) * v * v - 2.0 * p * s0 * s0 * w2
}

/// Closed-form cost of the linear pair `(γ₀, ξ₁(γ₀))` including the cross term.
pub fn linear_value(spec: &GaussianSpec, gamma0: f64) -> f64 {
    let (s2, w2) = (spec.sigma0.powi(2), spec.sigma_w.powi(2));
    w2 * s2 / (gamma0 * gamma0 * s2 + w2) + spec.k0 * gamma0 * gamma0 * s2 - spec.effective_s01().abs() * gamma0.abs() * s2
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ClosedForms {
    pub gamma0_star: f64,
    pub gamma1_star: f64,
    /// Signed encoder gain of the original problem.
    pub gamma0_star_star: f64,
    pub xi0: f64,
    pub xi1: f64,
    pub p_bar: f64,
    pub opt_b: f64,
    pub lambda_star: f64,
    pub gain_residual: f64,
    pub power_residual: f64,
    /// No positive root: the encoder stays silent.
    pub degenerate: bool,
}

const GAMMA_CAP: f64 = 1e12;

/// Positive root of the gain equation by bracketing bisection.
pub fn gamma_star(spec: &GaussianSpec) -> Result<ClosedForms> {
    spec.validate()?;
    let s01 = spec.effective_s01();
    // With s₀₁ = 0 the equation has the trivial factor γ; divide it out.
    let h = |g: f64| {
        if s01 == 0.0 {
            let (s0, w2) = (spec.sigma0, spec.sigma_w.powi(2));
            let v = g * g * s0 * s0 + w2;
            2.0 * spec.k0 * s0 * v * v - 2.0 * s0.powi(3) * w2
        } else {
            gain_equation_residual(spec, g)
        }
    };
    let degenerate_forms = || {
        let (s2, w2) = (spec.sigma0.powi(2), spec.sigma_w.powi(2));
        ClosedForms {
            gamma0_star: 0.0,
            gamma1_star: 0.0,
            gamma0_star_star: 0.0,
            xi0: xi0(spec, 0.0),
            xi1: 0.0,
            p_bar: f64::INFINITY,
            opt_b: s2,
            lambda_star: 2.0 * w2 * s2 / w2,
            gain_residual: gain_equation_residual(spec, 0.0),
            power_residual: power_equation_residual(spec, 0.0),
            degenerate: true,
        }
    };
    if h(0.0) >= 0.0 {
        return Ok(degenerate_forms());
    }
    let mut hi = 1.0;
    while h(hi) <= 0.0 {
        hi *= 2.0;
        if hi > GAMMA_CAP {
            return Ok(degenerate_forms());
        }
    }
    let mut lo = 0.0;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let g = if gain_equation_residual(spec, lo).abs() <= gain_equation_residual(spec, hi).abs() { lo } else { hi };
    let (s2, w2) = (spec.sigma0.powi(2), spec.sigma_w.powi(2));
    let g1 = xi1(spec, g);
    let sign = if s01 > 0.0 { -1.0 } else { 1.0 };
    Ok(ClosedForms {
        gamma0_star: g,
        gamma1_star: g1,
        gamma0_star_star: sign * g,
        xi0: xi0(spec, g),
        xi1: g1,
        p_bar: p_bar(spec, g),
        opt_b: linear_value(spec, g),
        lambda_star: 2.0 * w2 * s2 / (g * g * s2 + w2),
        gain_residual: gain_equation_residual(spec, g),
        power_residual: power_equation_residual(spec, g * spec.sigma0),
        degenerate: false,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Bounds {
    pub rd_lhs: f64,
    pub cc_rhs: f64,
    pub distortion_lb: f64,
}

/// Rate at the distortion floor, capacity at amplitude `p`, and the floor.
pub fn gaussian_bounds(spec: &GaussianSpec, p: f64) -> Bounds {
    let (s2, w2) = (spec.sigma0.powi(2), spec.sigma_w.powi(2));
    let distortion_lb = s2 * w2 / (p * p + w2);
    Bounds {
        rd_lhs: 0.5 * (s2 / distortion_lb).ln(),
        cc_rhs: 0.5 * ((p * p + w2) / w2).ln(),
        distortion_lb,
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Refs {
    pub kl_at_x: f64,
    pub log_ratio_at_s_shat: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Output divergence at input `x` and end-to-end log-likelihood ratio at
/// `(s, ŝ)` under the linear pair `(γ₀, ξ₁(γ₀))`, with their constants.
///
/// With `V = γ₀²σ₀² + σw²`:
/// `c₁ = ½[ln(V/σw²) + σw²/V − 1]` and `c₂(s) = ½ln(V/σw²) + s²/(2σ₀²)`.
pub fn linear_pair_references(spec: &GaussianSpec, gamma0: f64, x: f64, s: f64, shat: f64) -> Refs {
    let (s2, w2) = (spec.sigma0.powi(2), spec.sigma_w.powi(2));
    let v = gamma0 * gamma0 * s2 + w2;
    let pb = p_bar(spec, gamma0);
    let g1 = xi1(spec, gamma0);
    let c1 = 0.5 * ((v / w2).ln() + w2 / v - 1.0);
    let c2 = 0.5 * (v / w2).ln() + s * s / (2.0 * s2);
    let dev = shat - pb * gamma0 * g1 * s;
    Refs {
        kl_at_x: c1 + x * x / (2.0 * gamma0 * gamma0 * s2 * pb),
        log_ratio_at_s_shat: -dev * dev / (2.0 * g1 * g1 * w2 * pb) + c2,
        c1,
        c2,
    }
}

/// Grid sizes for a spec: `(nS, nX, nY, nŜ)`.
pub fn grid_dims(spec: &GaussianSpec) -> Result<[usize; 4]> {
    let (_, _, m) = x_grid_params(spec)?;
    let n = spec.grid_points;
    Ok([n, n, n + 2 * m, n])
}

fn x_grid_params(spec: &GaussianSpec) -> Result<(f64, f64, usize)> {
    let cf = gamma_star(spec)?;
    let sigma_x = spec.sigma0 * cf.gamma0_star.abs().max(1.0);
    let h = spec.grid_half_width_sigmas;
    let step = 2.0 * h * sigma_x / (spec.grid_points - 1) as f64;
    let m = (h * spec.sigma_w / step).ceil() as usize;
    Ok((sigma_x, step, m))
}

pub fn build_instance(spec: &GaussianSpec) -> Result<Instance> {
    spec.validate()?;
    let [ns, nx, ny, nsh] = grid_dims(spec)?;
    let entries = (ns * nx) as f64 * (ny * nsh) as f64;
    if entries > MAX_TENSOR_ENTRIES as f64 {
        return Err(Error::Budget { count: entries, budget: MAX_TENSOR_ENTRIES as f64 });
    }
    let (_, step, _) = x_grid_params(spec)?;
    let (s_values, _) = discretize_gaussian(spec.sigma0, spec.grid_points, spec.grid_half_width_sigmas);
    let p_s = spec.weighting.weights(&s_values, 0.0, spec.sigma0);
    let x_values = centered_grid(nx, step);
    let y_values = centered_grid(ny, step);
    let channel: Vec<Vec<f64>> = x_values
        .iter()
        .map(|x| spec.weighting.weights(&y_values, *x, spec.sigma_w))
        .collect();
    let shat_values = s_values.clone();
    let cost = match spec.problem {
        Problem::TestChannel | Problem::BansalBasar => {
            let delta = s_values
                .iter()
                .map(|s| shat_values.iter().map(|sh| (sh - s) * (sh - s)).collect())
                .collect();
            let rho = x_values.iter().map(|x| spec.k0 * x * x).collect();
            let s01 = spec.effective_s01();
            let mut sc = SeparableCost::new(delta, rho);
            if s01 != 0.0 {
                sc.tau_prime = Some(s_values.iter().map(|s| s * s / spec.k0).collect());
                sc.k_cross = s01;
            }
            Cost::Separable(sc)
        }
        Problem::Witsenhausen => {
            let mut t = Vec::with_capacity(ns * nx * ny * nsh);
            for s in &s_values {
                for x in &x_values {
                    for _ in 0..ny {
                        for sh in &shat_values {
                            t.push((x - sh) * (x - sh) + (x - s) * (x - s));
                        }
                    }
                }
            }
            Cost::Tensor(t)
        }
    };
    let inst = Instance {
        n_s: ns,
        n_x: nx,
        n_y: ny,
        n_shat: nsh,
        s_values,
        x_values,
        y_values,
        shat_values,
        p_s,
        channel,
        cost,
    };
    inst.validate()?;
    Ok(inst)
}

fn nearest(grid: &[f64], v: f64) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, g) in grid.iter().enumerate() {
        let d = (g - v).abs();
        // ascending labels: strict improvement keeps ties on the smaller one
        if d < best.0 - 1e-12 * (1.0 + d) {
            best = (d, i);
        }
    }
    best.1
}

/// `f(s)` = nearest X label to `γ₀·s`, `g(y)` = nearest Ŝ label to `γ₁·y`.
pub fn linear_code_on_grid(inst: &Instance, gamma0: f64, gamma1: f64) -> DetCode {
    DetCode {
        f: inst.s_values.iter().map(|s| nearest(&inst.x_values, gamma0 * s)).collect(),
        g: inst.y_values.iter().map(|y| nearest(&inst.shat_values, gamma1 * y)).collect(),
    }
}

/// `(E[X²], E[(Ŝ−S)²])` under a deterministic code.
pub fn code_moments(inst: &Instance, code: &DetCode) -> (f64, f64) {
    let mut power = 0.0;
    let mut dist = 0.0;
    for s in 0..inst.n_s {
        let x = code.f[s];
        power += inst.p_s[s] * inst.x_values[x].powi(2);
        for y in 0..inst.n_y {
            let e = inst.shat_values[code.g[y]] - inst.s_values[s];
            dist += inst.p_s[s] * inst.channel[x][y] * e * e;
        }
    }
    (power, dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::det_code_cost;
    use approx::assert_abs_diff_eq;

    #[test]
    fn three_point_grid() {
        let (v, p) = discretize_gaussian(1.0, 3, 1.0);
        assert_eq!(v, vec![-1.0, 0.0, 1.0]);
        assert_eq!(p[0], p[2]);
        assert!(p[1] > p[0]);
    }

    #[test]
    fn fine_grid_variance() {
        let (v, p) = discretize_gaussian(1.0, 65, 5.0);
        let var: f64 = v.iter().zip(&p).map(|(x, q)| x * x * q).sum();
        assert!((var - 1.0).abs() < 0.01);
        let mean: f64 = v.iter().zip(&p).map(|(x, q)| x * q).sum();
        assert!(mean.abs() < 1e-15);
    }

    #[test]
    fn scaling_keeps_weights() {
        let (v1, p1) = discretize_gaussian(1.0, 17, 5.0);
        let (v2, p2) = discretize_gaussian(2.0, 17, 5.0);
        assert_eq!(p1, p2);
        for (a, b) in v1.iter().zip(&v2) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn test_channel_gains() {
        let cf = gamma_star(&GaussianSpec::test_channel(1.0, 1.0, 0.25, 17)).unwrap();
        assert_abs_diff_eq!(cf.gamma0_star, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cf.gamma1_star, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(cf.opt_b, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(cf.lambda_star, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cf.xi0, 0.25, epsilon = 1e-12);

        let cf = gamma_star(&GaussianSpec::test_channel(1.0, 1.0, 1.0 / 16.0, 17)).unwrap();
        assert_abs_diff_eq!(cf.gamma0_star, 3f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(cf.gamma1_star, 3f64.sqrt() / 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cf.opt_b, 0.4375, epsilon = 1e-12);
    }

    #[test]
    fn bansal_basar_root() {
        let cf = gamma_star(&GaussianSpec::bansal_basar(1.0, 1.0, 1.0, 2.0, 17)).unwrap();
        assert!(cf.gain_residual.abs() <= 1e-12);
        assert!(cf.power_residual.abs() <= 1e-10);
        // independent root of (2γ−2)(γ²+1)² = 2γ
        assert_abs_diff_eq!(cf.gamma0_star, 1.2012688724469542, epsilon = 1e-12);
        assert_eq!(cf.gamma0_star_star, -cf.gamma0_star);
    }

    #[test]
    fn silent_encoder_when_power_too_costly() {
        let cf = gamma_star(&GaussianSpec::test_channel(1.0, 1.0, 2.0, 17)).unwrap();
        assert!(cf.degenerate);
        assert_eq!(cf.opt_b, 1.0);
    }

    #[test]
    fn bounds_examples() {
        let spec = GaussianSpec::test_channel(1.0, 1.0, 0.25, 17);
        let b0 = gaussian_bounds(&spec, 0.0);
        assert_eq!(b0.cc_rhs, 0.0);
        assert_eq!(b0.distortion_lb, 1.0);
        let b1 = gaussian_bounds(&spec, 1.0);
        assert_abs_diff_eq!(b1.cc_rhs, 0.5 * 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(b1.distortion_lb, 0.5, epsilon = 1e-15);
        assert!(gaussian_bounds(&spec, 1e6).distortion_lb < 1e-11);
    }

    #[test]
    fn reference_vertex_and_difference() {
        let spec = GaussianSpec::test_channel(1.0, 1.0, 0.25, 17);
        let r0 = linear_pair_references(&spec, 1.0, 0.0, 0.7, 0.7);
        assert_eq!(r0.kl_at_x, r0.c1);
        assert_abs_diff_eq!(r0.log_ratio_at_s_shat, r0.c2, epsilon = 1e-15);
        let r2 = linear_pair_references(&spec, 1.0, 2.0, 0.0, 0.0);
        assert_abs_diff_eq!(r2.kl_at_x - r0.kl_at_x, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn instance_shapes_and_costs() {
        let g = build_instance(&GaussianSpec::test_channel(1.0, 1.0, 0.25, 17)).unwrap();
        assert_eq!(g.dims(), [17, 17, 33, 17]);
        assert_eq!(g.kappa(8, 8, 3, 8), 0.0);
        let b = build_instance(&GaussianSpec::bansal_basar(1.0, 1.0, 0.25, 2.0, 17)).unwrap();
        let mut plain = b.separable().unwrap().clone();
        plain.tau_prime = None;
        let g_on_b = b.with_cost(Cost::Separable(plain)).unwrap();
        for (s, x, sh) in [(3, 12, 5), (10, 2, 0), (16, 16, 16)] {
            let d = b.kappa(s, x, 0, sh) - g_on_b.kappa(s, x, 0, sh);
            assert_abs_diff_eq!(d, 2.0 * b.x_values[x] * b.s_values[s], epsilon = 1e-12);
        }
        let w = build_instance(&GaussianSpec::witsenhausen(1.0, 1.0, 9)).unwrap();
        assert_eq!(w.dims(), [9, 9, 17, 9]);
    }

    #[test]
    fn linear_codes() {
        let g = build_instance(&GaussianSpec::test_channel(1.0, 1.0, 0.25, 17)).unwrap();
        let c = linear_code_on_grid(&g, 1.0, 0.5);
        assert_eq!(c.f, (0..17).collect::<Vec<_>>());
        let z = linear_code_on_grid(&g, 0.0, 0.5);
        assert!(z.f.iter().all(|&i| i == 8));
        let v = det_code_cost(&g, &c);
        assert!((v - 0.75).abs() / 0.75 < 0.15);
    }
}
