//! Problem instances, codes and joint distributions over `(s, x, y, ŝ)`.
//!
//! Everything is dense. Tensors are flat, row-major in the order
//! `(s, x, y, ŝ)`; matrices are `Vec<Vec<f64>>` with the conditioning
//! variable as the row.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type Matrix = Vec<Vec<f64>>;

/// Largest dense tensor any builder will materialize.
pub const MAX_TENSOR_ENTRIES: usize = 100_000_000;

const SIMPLEX_TOL: f64 = 1e-12;

/// Cost of the form `δ(s,ŝ) + ρ(x) + k·sgn(x·s)·√(ρ(x)·τ′(s))`.
///
/// The sign factor uses the real labels of `x` and `s`. With `ρ = k₀x²`,
/// `τ′ = s²/k₀` and `k = s₀₁` the last term is exactly `s₀₁·x·s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SeparableCost {
    pub delta: Matrix,
    pub rho: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_prime: Option<Vec<f64>>,
    #[serde(default)]
    pub k_cross: f64,
}

impl SeparableCost {
    pub fn new(delta: Matrix, rho: Vec<f64>) -> Self {
        SeparableCost { delta, rho, tau_prime: None, k_cross: 0.0 }
    }

    pub fn has_cross(&self) -> bool {
        self.tau_prime.is_some() && self.k_cross != 0.0
    }

    /// Cross term `τ(x, s)` for label values `xv`, `sv`.
    pub fn cross(&self, x: usize, s: usize, xv: f64, sv: f64) -> f64 {
        match &self.tau_prime {
            Some(tp) if self.k_cross != 0.0 => {
                let sign = sgn(xv * sv);
                self.k_cross * sign * (self.rho[x] * tp[s]).sqrt()
            }
            _ => 0.0,
        }
    }

    /// Cauchy–Schwarz coefficient: `Σ_{x,s} τ Q ≥ −α·√⟨ρ, b⟩`.
    pub fn alpha(&self, p_s: &[f64]) -> f64 {
        match &self.tau_prime {
            Some(tp) => {
                let m: f64 = tp.iter().zip(p_s).map(|(t, p)| t * p).sum();
                self.k_cross.abs() * m.max(0.0).sqrt()
            }
            None => 0.0,
        }
    }
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cost {
    /// Flat row-major `(s, x, y, ŝ)` tensor.
    Tensor(Vec<f64>),
    Separable(SeparableCost),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub n_s: usize,
    pub n_x: usize,
    pub n_y: usize,
    pub n_shat: usize,
    pub s_values: Vec<f64>,
    pub x_values: Vec<f64>,
    pub y_values: Vec<f64>,
    pub shat_values: Vec<f64>,
    pub p_s: Vec<f64>,
    /// Row `x` is `P(·|x)`.
    pub channel: Matrix,
    pub cost: Cost,
}

fn labels(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64).collect()
}

impl Instance {
    /// Builds and validates an instance with index labels `0..n`.
    pub fn new(p_s: Vec<f64>, channel: Matrix, n_shat: usize, cost: Cost) -> Result<Self> {
        let n_s = p_s.len();
        let n_x = channel.len();
        let n_y = channel.first().map_or(0, |r| r.len());
        let inst = Instance {
            n_s,
            n_x,
            n_y,
            n_shat,
            s_values: labels(n_s),
            x_values: labels(n_x),
            y_values: labels(n_y),
            shat_values: labels(n_shat),
            p_s,
            channel,
            cost,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.n_s, self.n_x, self.n_y, self.n_shat]
    }

    pub fn tensor_len(&self) -> usize {
        self.n_s * self.n_x * self.n_y * self.n_shat
    }

    #[inline]
    pub fn idx(&self, s: usize, x: usize, y: usize, sh: usize) -> usize {
        ((s * self.n_x + x) * self.n_y + y) * self.n_shat + sh
    }

    pub fn validate(&self) -> Result<()> {
        let [ns, nx, ny, nsh] = self.dims();
        if ns == 0 || nx == 0 || ny == 0 || nsh == 0 {
            return invalid("alphabet sizes must be positive");
        }
        if self.s_values.len() != ns
            || self.x_values.len() != nx
            || self.y_values.len() != ny
            || self.shat_values.len() != nsh
        {
            return Err(Error::Dimension("label arrays do not match alphabet sizes".into()));
        }
        check_simplex(&self.p_s, "pS")?;
        if self.channel.len() != nx {
            return Err(Error::Dimension(format!("channel has {} rows, nX = {nx}", self.channel.len())));
        }
        for (x, row) in self.channel.iter().enumerate() {
            if row.len() != ny {
                return Err(Error::Dimension(format!("channel row {x} has length {}, nY = {ny}", row.len())));
            }
            check_simplex(row, &format!("channel row {x}"))?;
        }
        if [&self.s_values, &self.x_values, &self.y_values, &self.shat_values]
            .iter()
            .any(|v| v.iter().any(|t| !t.is_finite()))
        {
            return invalid("labels must be finite");
        }
        match &self.cost {
            Cost::Tensor(t) => {
                if t.len() != self.tensor_len() {
                    return Err(Error::Dimension(format!(
                        "cost has {} entries, expected {}",
                        t.len(),
                        self.tensor_len()
                    )));
                }
                if t.iter().any(|c| !c.is_finite()) {
                    return invalid("cost entries must be finite");
                }
            }
            Cost::Separable(sc) => {
                if sc.delta.len() != ns || sc.delta.iter().any(|r| r.len() != nsh) {
                    return Err(Error::Dimension("separable delta must be nS x nShat".into()));
                }
                if sc.rho.len() != nx {
                    return Err(Error::Dimension("separable rho must have length nX".into()));
                }
                let finite = sc.delta.iter().flatten().chain(&sc.rho).all(|c| c.is_finite());
                if !finite || !sc.k_cross.is_finite() {
                    return invalid("separable cost entries must be finite");
                }
                if let Some(tp) = &sc.tau_prime {
                    if tp.len() != ns {
                        return Err(Error::Dimension("tauPrime must have length nS".into()));
                    }
                    if tp.iter().any(|t| !t.is_finite() || *t < 0.0) || sc.rho.iter().any(|r| *r < 0.0) {
                        return invalid("cross term needs rho >= 0 and tauPrime >= 0");
                    }
                }
            }
        }
        Ok(())
    }

    /// Cost `κ(s, x, y, ŝ)`.
    #[inline]
    pub fn kappa(&self, s: usize, x: usize, y: usize, sh: usize) -> f64 {
        match &self.cost {
            Cost::Tensor(t) => t[self.idx(s, x, y, sh)],
            Cost::Separable(sc) => {
                sc.delta[s][sh] + sc.rho[x] + sc.cross(x, s, self.x_values[x], self.s_values[s])
            }
        }
    }

    pub fn separable(&self) -> Option<&SeparableCost> {
        match &self.cost {
            Cost::Separable(sc) => Some(sc),
            Cost::Tensor(_) => None,
        }
    }

    /// Dense cost tensor, expanding a separable cost if needed.
    pub fn cost_tensor(&self) -> Result<Vec<f64>> {
        if let Cost::Tensor(t) = &self.cost {
            return Ok(t.clone());
        }
        if self.tensor_len() > MAX_TENSOR_ENTRIES {
            return Err(Error::Budget { count: self.tensor_len() as f64, budget: MAX_TENSOR_ENTRIES as f64 });
        }
        let mut t = Vec::with_capacity(self.tensor_len());
        for s in 0..self.n_s {
            for x in 0..self.n_x {
                for y in 0..self.n_y {
                    for sh in 0..self.n_shat {
                        t.push(self.kappa(s, x, y, sh));
                    }
                }
            }
        }
        Ok(t)
    }

    pub fn with_cost(&self, cost: Cost) -> Result<Instance> {
        let inst = Instance { cost, ..self.clone() };
        inst.validate()?;
        Ok(inst)
    }

    /// `(min κ, max κ)` over all cells.
    pub fn cost_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        match &self.cost {
            Cost::Tensor(t) => {
                for &c in t {
                    lo = lo.min(c);
                    hi = hi.max(c);
                }
            }
            Cost::Separable(_) => {
                for s in 0..self.n_s {
                    for x in 0..self.n_x {
                        for sh in 0..self.n_shat {
                            // y never enters a separable cost
                            let c = self.kappa(s, x, 0, sh);
                            lo = lo.min(c);
                            hi = hi.max(c);
                        }
                    }
                }
            }
        }
        (lo, hi)
    }

    pub fn from_json(text: &str) -> Result<Instance> {
        let file: InstanceFile = serde_json::from_str(text)?;
        file.into_instance()
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(InstanceFile::from_instance(self)).expect("instance serializes")
    }
}

pub(crate) fn check_simplex(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return invalid(format!("{what} has negative or non-finite entries"));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return invalid(format!("{what} sums to {sum}, not 1"));
    }
    Ok(())
}

/// On-disk shape of an instance.
#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct InstanceFile {
    n_s: usize,
    n_x: usize,
    n_y: usize,
    n_shat: usize,
    #[serde(default)]
    s_values: Option<Vec<f64>>,
    #[serde(default)]
    x_values: Option<Vec<f64>>,
    #[serde(default)]
    y_values: Option<Vec<f64>>,
    #[serde(default)]
    shat_values: Option<Vec<f64>>,
    p_s: Vec<f64>,
    channel: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cost: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    separable: Option<SeparableCost>,
}

impl InstanceFile {
    fn into_instance(self) -> Result<Instance> {
        let cost = match (self.cost, self.separable) {
            (Some(t), None) => Cost::Tensor(t),
            (None, Some(sc)) => Cost::Separable(sc),
            (Some(_), Some(_)) => return invalid("give either \"cost\" or \"separable\", not both"),
            (None, None) => return invalid("missing \"cost\" or \"separable\""),
        };
        let inst = Instance {
            n_s: self.n_s,
            n_x: self.n_x,
            n_y: self.n_y,
            n_shat: self.n_shat,
            s_values: self.s_values.unwrap_or_else(|| labels(self.n_s)),
            x_values: self.x_values.unwrap_or_else(|| labels(self.n_x)),
            y_values: self.y_values.unwrap_or_else(|| labels(self.n_y)),
            shat_values: self.shat_values.unwrap_or_else(|| labels(self.n_shat)),
            p_s: self.p_s,
            channel: self.channel,
            cost,
        };
        if inst.p_s.len() != inst.n_s {
            return Err(Error::Dimension(format!("pS has length {}, nS = {}", inst.p_s.len(), inst.n_s)));
        }
        inst.validate()?;
        Ok(inst)
    }

    fn from_instance(inst: &Instance) -> InstanceFile {
        let (cost, separable) = match &inst.cost {
            Cost::Tensor(t) => (Some(t.clone()), None),
            Cost::Separable(sc) => (None, Some(sc.clone())),
        };
        InstanceFile {
            n_s: inst.n_s,
            n_x: inst.n_x,
            n_y: inst.n_y,
            n_shat: inst.n_shat,
            s_values: Some(inst.s_values.clone()),
            x_values: Some(inst.x_values.clone()),
            y_values: Some(inst.y_values.clone()),
            shat_values: Some(inst.shat_values.clone()),
            p_s: inst.p_s.clone(),
            channel: inst.channel.clone(),
            cost,
            separable,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetCode {
    /// Encoder `s ↦ x`.
    pub f: Vec<usize>,
    /// Decoder `y ↦ ŝ`.
    pub g: Vec<usize>,
}

impl DetCode {
    pub fn validate(&self, inst: &Instance) -> Result<()> {
        if self.f.len() != inst.n_s || self.g.len() != inst.n_y {
            return Err(Error::Dimension("code lengths must be nS and nY".into()));
        }
        if self.f.iter().any(|&x| x >= inst.n_x) || self.g.iter().any(|&sh| sh >= inst.n_shat) {
            return invalid("code entry out of range");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RandomCode {
    /// `Q(x|s)`, nS × nX.
    pub q_x_given_s: Matrix,
    /// `Q(ŝ|y)`, nY × nŜ.
    pub q_shat_given_y: Matrix,
}

impl RandomCode {
    pub fn validate(&self, inst: &Instance) -> Result<()> {
        let shape_ok = self.q_x_given_s.len() == inst.n_s
            && self.q_x_given_s.iter().all(|r| r.len() == inst.n_x)
            && self.q_shat_given_y.len() == inst.n_y
            && self.q_shat_given_y.iter().all(|r| r.len() == inst.n_shat);
        if !shape_ok {
            return Err(Error::Dimension("kernels must be nS x nX and nY x nShat".into()));
        }
        for r in self.q_x_given_s.iter().chain(&self.q_shat_given_y) {
            check_simplex(r, "kernel row")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointDist {
    pub dims: [usize; 4],
    pub q: Vec<f64>,
}

impl JointDist {
    pub fn new(dims: [usize; 4], q: Vec<f64>) -> Result<Self> {
        if q.len() != dims.iter().product::<usize>() {
            return Err(Error::Dimension("joint length does not match dims".into()));
        }
        if q.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return invalid("joint has negative or non-finite entries");
        }
        let sum: f64 = q.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return invalid(format!("joint sums to {sum}"));
        }
        Ok(JointDist { dims, q })
    }

    #[inline]
    pub fn idx(&self, s: usize, x: usize, y: usize, sh: usize) -> usize {
        let [_, nx, ny, nsh] = self.dims;
        ((s * nx + x) * ny + y) * nsh + sh
    }

    fn fold2(&self, mut key: impl FnMut(usize, usize, usize, usize) -> (usize, usize), rows: usize, cols: usize) -> Matrix {
        let [ns, nx, ny, nsh] = self.dims;
        let mut m = vec![vec![0.0; cols]; rows];
        let mut i = 0;
        for s in 0..ns {
            for x in 0..nx {
                for y in 0..ny {
                    for sh in 0..nsh {
                        let (r, c) = key(s, x, y, sh);
                        m[r][c] += self.q[i];
                        i += 1;
                    }
                }
            }
        }
        m
    }

    /// Joint of `(s, ŝ)`.
    pub fn marginal_s_shat(&self) -> Matrix {
        self.fold2(|s, _, _, sh| (s, sh), self.dims[0], self.dims[3])
    }

    /// Joint of `(x, y)`.
    pub fn marginal_x_y(&self) -> Matrix {
        self.fold2(|_, x, y, _| (x, y), self.dims[1], self.dims[2])
    }

    pub fn marginal_s_x(&self) -> Matrix {
        self.fold2(|s, x, _, _| (s, x), self.dims[0], self.dims[1])
    }

    pub fn marginal_y_shat(&self) -> Matrix {
        self.fold2(|_, _, y, sh| (y, sh), self.dims[2], self.dims[3])
    }

    pub fn mix(&self, other: &JointDist, t: f64) -> Result<JointDist> {
        if self.dims != other.dims {
            return Err(Error::Dimension("cannot mix joints of different shape".into()));
        }
        let q = self.q.iter().zip(&other.q).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        Ok(JointDist { dims: self.dims, q })
    }
}

/// End-to-end pair `a(ŝ|s) = Q(ŝ|s)`, `b(x) = Q(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndToEndPair {
    pub a: Matrix,
    pub b: Vec<f64>,
}

impl EndToEndPair {
    pub fn validate(&self, n_s: usize, n_x: usize, n_shat: usize) -> Result<()> {
        if self.a.len() != n_s || self.a.iter().any(|r| r.len() != n_shat) || self.b.len() != n_x {
            return Err(Error::Dimension("pair shape does not match instance".into()));
        }
        for r in &self.a {
            check_simplex(r, "a row")?;
        }
        check_simplex(&self.b, "b")
    }

    /// `(s, ŝ)` joint `a(ŝ|s)·pS(s)`.
    pub fn joint_s_shat(&self, p_s: &[f64]) -> Matrix {
        self.a.iter().zip(p_s).map(|(row, p)| row.iter().map(|v| v * p).collect()).collect()
    }

    /// `(x, y)` joint `b(x)·P(y|x)`.
    pub fn joint_x_y(&self, channel: &Matrix) -> Matrix {
        channel.iter().zip(&self.b).map(|(row, p)| row.iter().map(|v| v * p).collect()).collect()
    }

    /// Separable objective `⟨δ, a·pS⟩ + ⟨ρ, b⟩`.
    pub fn objective(&self, p_s: &[f64], delta: &Matrix, rho: &[f64]) -> f64 {
        let mut v = 0.0;
        for s in 0..self.a.len() {
            for (sh, a) in self.a[s].iter().enumerate() {
                v += p_s[s] * a * delta[s][sh];
            }
        }
        v + self.b.iter().zip(rho).map(|(b, r)| b * r).sum::<f64>()
    }
}

/// `Q(s,x,y,ŝ) = pS(s)·Q(x|s)·P(y|x)·Q(ŝ|y)`.
pub fn build_joint_from_code(inst: &Instance, code: &RandomCode) -> Result<JointDist> {
    code.validate(inst)?;
    if inst.tensor_len() > MAX_TENSOR_ENTRIES {
        return Err(Error::Budget { count: inst.tensor_len() as f64, budget: MAX_TENSOR_ENTRIES as f64 });
    }
    let mut q = vec![0.0; inst.tensor_len()];
    for s in 0..inst.n_s {
        for x in 0..inst.n_x {
            let w = inst.p_s[s] * code.q_x_given_s[s][x];
            if w == 0.0 {
                continue;
            }
            for y in 0..inst.n_y {
                let wy = w * inst.channel[x][y];
                if wy == 0.0 {
                    continue;
                }
                let base = inst.idx(s, x, y, 0);
                for (sh, d) in code.q_shat_given_y[y].iter().enumerate() {
                    q[base + sh] = wy * d;
                }
            }
        }
    }
    Ok(JointDist { dims: inst.dims(), q })
}

pub fn det_code_to_random(code: &DetCode, inst: &Instance) -> Result<RandomCode> {
    code.validate(inst)?;
    let one_hot = |i: usize, n: usize| {
        let mut r = vec![0.0; n];
        r[i] = 1.0;
        r
    };
    Ok(RandomCode {
        q_x_given_s: code.f.iter().map(|&x| one_hot(x, inst.n_x)).collect(),
        q_shat_given_y: code.g.iter().map(|&sh| one_hot(sh, inst.n_shat)).collect(),
    })
}

/// Reads `(a, b)` off a joint. Rows with `pS(s) = 0` come back uniform.
pub fn induced_endtoend(q: &JointDist, p_s: &[f64]) -> Result<EndToEndPair> {
    let [ns, nx, _, nsh] = q.dims;
    if p_s.len() != ns {
        return Err(Error::Dimension("pS length differs from joint".into()));
    }
    let ss = q.marginal_s_shat();
    let dev = ss
        .iter()
        .zip(p_s)
        .map(|(row, p)| (row.iter().sum::<f64>() - p).abs())
        .fold(0.0, f64::max);
    if dev > 1e-8 {
        return Err(Error::Inconsistent(dev));
    }
    let a = ss
        .iter()
        .map(|row| {
            let m: f64 = row.iter().sum();
            if m > 0.0 {
                row.iter().map(|v| v / m).collect()
            } else {
                vec![1.0 / nsh as f64; nsh]
            }
        })
        .collect();
    let xy = q.marginal_x_y();
    let mut b: Vec<f64> = xy.iter().map(|r| r.iter().sum()).collect();
    let total: f64 = b.iter().sum();
    b.iter_mut().for_each(|v| *v /= total);
    debug_assert_eq!(b.len(), nx);
    Ok(EndToEndPair { a, b })
}

/// `⟨κ, Q⟩`.
pub fn expected_cost(inst: &Instance, q: &JointDist) -> Result<f64> {
    if q.dims != inst.dims() {
        return Err(Error::Dimension("joint shape differs from instance".into()));
    }
    let mut v = 0.0;
    let mut i = 0;
    for s in 0..inst.n_s {
        for x in 0..inst.n_x {
            for y in 0..inst.n_y {
                for sh in 0..inst.n_shat {
                    let m = q.q[i];
                    if m != 0.0 {
                        v += m * inst.kappa(s, x, y, sh);
                    }
                    i += 1;
                }
            }
        }
    }
    Ok(v)
}

/// Expected cost of a deterministic code without building the joint.
pub fn det_code_cost(inst: &Instance, code: &DetCode) -> f64 {
    let mut v = 0.0;
    for s in 0..inst.n_s {
        let x = code.f[s];
        for y in 0..inst.n_y {
            v += inst.p_s[s] * inst.channel[x][y] * inst.kappa(s, x, y, code.g[y]);
        }
    }
    v
}

/// Expected cost of a random code without building the joint.
pub fn random_code_cost(inst: &Instance, code: &RandomCode) -> f64 {
    let mut v = 0.0;
    for s in 0..inst.n_s {
        for x in 0..inst.n_x {
            let w = inst.p_s[s] * code.q_x_given_s[s][x];
            if w == 0.0 {
                continue;
            }
            for y in 0..inst.n_y {
                let wy = w * inst.channel[x][y];
                if wy == 0.0 {
                    continue;
                }
                for (sh, d) in code.q_shat_given_y[y].iter().enumerate() {
                    if *d != 0.0 {
                        v += wy * d * inst.kappa(s, x, y, sh);
                    }
                }
            }
        }
    }
    v
}

/// End-to-end pair of a code, computed from the kernels directly.
pub fn code_pair(inst: &Instance, code: &RandomCode) -> EndToEndPair {
    let mut a = vec![vec![0.0; inst.n_shat]; inst.n_s];
    let mut b = vec![0.0; inst.n_x];
    for s in 0..inst.n_s {
        for x in 0..inst.n_x {
            let w = code.q_x_given_s[s][x];
            b[x] += inst.p_s[s] * w;
            if w == 0.0 {
                continue;
            }
            for y in 0..inst.n_y {
                let wy = w * inst.channel[x][y];
                for sh in 0..inst.n_shat {
                    a[s][sh] += wy * code.q_shat_given_y[y][sh];
                }
            }
        }
    }
    EndToEndPair { a, b }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MembershipReport {
    pub l1_residual: f64,
    pub source_deviation: f64,
    pub channel_deviation: f64,
    pub in_q: bool,
}

fn normalize_rows(m: &Matrix) -> Matrix {
    m.iter()
        .map(|row| {
            let t: f64 = row.iter().sum();
            if t > 0.0 {
                row.iter().map(|v| v / t).collect()
            } else {
                vec![1.0 / row.len() as f64; row.len()]
            }
        })
        .collect()
}

/// Distance from `q` to the four-factor product rebuilt from its own kernels.
pub fn membership_check(inst: &Instance, q: &JointDist, tol: f64) -> MembershipReport {
    assert_eq!(q.dims, inst.dims(), "joint shape differs from instance");
    let sx = q.marginal_s_x();
    let ysh = q.marginal_y_shat();
    let xy = q.marginal_x_y();
    let enc = normalize_rows(&sx);
    let dec = normalize_rows(&ysh);

    let mut l1 = 0.0;
    let mut i = 0;
    for s in 0..inst.n_s {
        for x in 0..inst.n_x {
            for y in 0..inst.n_y {
                let w = inst.p_s[s] * enc[s][x] * inst.channel[x][y];
                for sh in 0..inst.n_shat {
                    l1 += (q.q[i] - w * dec[y][sh]).abs();
                    i += 1;
                }
            }
        }
    }

    let source_deviation = sx
        .iter()
        .zip(&inst.p_s)
        .map(|(r, p)| (r.iter().sum::<f64>() - p).abs())
        .fold(0.0, f64::max);
    let mut channel_deviation: f64 = 0.0;
    for (x, row) in xy.iter().enumerate() {
        let mx: f64 = row.iter().sum();
        if mx > 0.0 {
            for (y, v) in row.iter().enumerate() {
                channel_deviation = channel_deviation.max((v / mx - inst.channel[x][y]).abs());
            }
        }
    }
    MembershipReport {
        l1_residual: l1,
        source_deviation,
        channel_deviation,
        in_q: l1 <= tol && source_deviation <= tol && channel_deviation <= tol,
    }
}

#[derive(Clone, Debug)]
pub struct Witness {
    pub q1: JointDist,
    pub q2: JointDist,
    pub t: f64,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub enum WitnessOutcome {
    Found(Witness),
    /// Distinct encoder and decoder kernels need `nX ≥ 2` and `nŜ ≥ 2`.
    NotApplicable,
}

/// Two codes in 𝒬 whose midpoint leaves 𝒬: the index-identity code and
/// the code with both maps index-reversed.
pub fn nonconvexity_witness(inst: &Instance) -> Result<WitnessOutcome> {
    if inst.n_x < 2 || inst.n_shat < 2 {
        return Ok(WitnessOutcome::NotApplicable);
    }
    let c1 = DetCode {
        f: (0..inst.n_s).map(|s| s % inst.n_x).collect(),
        g: (0..inst.n_y).map(|y| y % inst.n_shat).collect(),
    };
    let c2 = DetCode {
        f: c1.f.iter().map(|x| inst.n_x - 1 - x).collect(),
        g: c1.g.iter().map(|sh| inst.n_shat - 1 - sh).collect(),
    };
    let q1 = build_joint_from_code(inst, &det_code_to_random(&c1, inst)?)?;
    let q2 = build_joint_from_code(inst, &det_code_to_random(&c2, inst)?)?;
    let t = 0.5;
    let mid = q1.mix(&q2, t)?;
    let residual = membership_check(inst, &mid, 0.0).l1_residual;
    Ok(WitnessOutcome::Found(Witness { q1, q2, t, residual }))
}

#[derive(Clone, Debug, Serialize)]
pub struct SepReport {
    /// Part depending on `x` only.
    pub f1: Vec<f64>,
    /// Part depending on `(s, ŝ)`.
    pub f2: Matrix,
    /// Part depending on `(x, y)` with zero mean over `y` for every `x`.
    pub f3: Matrix,
    /// L2 norm of `κ` minus its projection.
    pub residual: f64,
    /// L2 norm of `κ`.
    pub norm: f64,
}

/// Least-squares projection of `κ` onto `f₁(x) + f₂(s,ŝ) + f₃(x,y)`.
///
/// Functions of `x` sit inside functions of `(x,y)`, so the span is the
/// additive two-factor model over `u = (s,ŝ)` and `v = (x,y)`; its
/// projection is row mean + column mean − grand mean.
pub fn separability_projection(inst: &Instance) -> SepReport {
    let (ns, nx, ny, nsh) = (inst.n_s, inst.n_x, inst.n_y, inst.n_shat);
    let nu = (ns * nsh) as f64;
    let nv = (nx * ny) as f64;
    let mut row = vec![vec![0.0; nsh]; ns];
    let mut col = vec![vec![0.0; ny]; nx];
    let mut grand = 0.0;
    for s in 0..ns {
        for x in 0..nx {
            for y in 0..ny {
                for sh in 0..nsh {
                    let k = inst.kappa(s, x, y, sh);
                    row[s][sh] += k / nv;
                    col[x][y] += k / nu;
                    grand += k;
                }
            }
        }
    }
    grand /= nu * nv;
    let mut res2 = 0.0;
    let mut norm2 = 0.0;
    for s in 0..ns {
        for x in 0..nx {
            for y in 0..ny {
                for sh in 0..nsh {
                    let k = inst.kappa(s, x, y, sh);
                    let fit = row[s][sh] + col[x][y] - grand;
                    res2 += (k - fit) * (k - fit);
                    norm2 += k * k;
                }
            }
        }
    }
    let f2: Matrix = row.iter().map(|r| r.iter().map(|v| v - grand).collect()).collect();
    let f1: Vec<f64> = col.iter().map(|r| r.iter().sum::<f64>() / ny as f64).collect();
    let f3: Matrix = col.iter().zip(&f1).map(|(r, m)| r.iter().map(|v| v - m).collect()).collect();
    SepReport { f1, f2, f3, residual: res2.sqrt(), norm: norm2.sqrt() }
}
