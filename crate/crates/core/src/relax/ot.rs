//! Entropic transport between `(s,ŝ)` and `(x,y)` marginals, used to turn
//! a relaxed pair into a joint with exactly those marginals.

use rayon::prelude::*;

/// Dense problem restricted to the supports of both marginals.
pub(crate) struct Transport {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    mu: Vec<f64>,
    nu: Vec<f64>,
    /// `cost[i * cols.len() + j]`
    cost: Vec<f64>,
}

pub(crate) struct Plan {
    /// Mass on `(rows[i], cols[j])`, row-major.
    pub mass: Vec<f64>,
}

/// Below this many cells thread handoff costs more than the sweep itself.
const PAR_MIN_CELLS: usize = 1 << 14;

fn sweep<F: Fn(usize) -> f64 + Sync + Send>(len: usize, parallel: bool, f: F) -> Vec<f64> {
    if parallel {
        (0..len).into_par_iter().map(f).collect()
    } else {
        (0..len).map(f).collect()
    }
}

fn lse(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl Transport {
    pub fn new<F: Fn(usize, usize) -> f64 + Sync + Send>(mu: &[f64], nu: &[f64], cost: F) -> Self {
        let rows: Vec<usize> = (0..mu.len()).filter(|&i| mu[i] > 0.0).collect();
        let cols: Vec<usize> = (0..nu.len()).filter(|&j| nu[j] > 0.0).collect();
        let m = cols.len();
        let c = sweep(rows.len() * m, rows.len() * m >= PAR_MIN_CELLS, |k| cost(rows[k / m], cols[k % m]));
        let tm: f64 = rows.iter().map(|&i| mu[i]).sum();
        let tn: f64 = cols.iter().map(|&j| nu[j]).sum();
        Transport {
            mu: rows.iter().map(|&i| mu[i] / tm).collect(),
            nu: cols.iter().map(|&j| nu[j] / tn).collect(),
            rows,
            cols,
            cost: c,
        }
    }

    fn c(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.cols.len() + j]
    }

    /// Log-domain Sinkhorn with `ε` annealed from `0.1·range` to
    /// `1e-7·range`, then rounded onto the exact marginals.
    pub fn solve(&self) -> Plan {
        let (n, m) = (self.rows.len(), self.cols.len());
        let lo = self.cost.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.cost.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let range = (hi - lo).max(1e-300);
        if hi - lo <= 0.0 || n == 1 || m == 1 {
            return self.round(vec![0.0; n], vec![0.0; m], f64::INFINITY);
        }
        let log_mu: Vec<f64> = self.mu.iter().map(|v| v.ln()).collect();
        let log_nu: Vec<f64> = self.nu.iter().map(|v| v.ln()).collect();
        let mut f = vec![0.0; n];
        let mut g = vec![0.0; m];
        let par = n * m >= PAR_MIN_CELLS;
        let mut eps = 0.1 * range;
        let floor = 1e-7 * range;
        loop {
            for _ in 0..1000 {
                f = sweep(n, par, |i| eps * log_mu[i] - eps * lse((0..m).map(|j| (g[j] - self.c(i, j)) / eps)));
                g = sweep(m, par, |j| eps * log_nu[j] - eps * lse((0..n).map(|i| (f[i] - self.c(i, j)) / eps)));
                // columns are exact after the g update; check the rows
                let err: f64 = sweep(n, par, |i| {
                    let r: f64 = (0..m).map(|j| ((f[i] + g[j] - self.c(i, j)) / eps).exp()).sum();
                    (r - self.mu[i]).abs()
                })
                .iter()
                .sum();
                if err < 1e-12 {
                    break;
                }
            }
            if eps <= floor {
                break;
            }
            eps = (0.5 * eps).max(floor);
        }
        self.round(f, g, eps)
    }

    /// Rounds the scaled kernel onto the marginals (Altschuler et al.).
    fn round(&self, f: Vec<f64>, g: Vec<f64>, eps: f64) -> Plan {
        let (n, m) = (self.rows.len(), self.cols.len());
        let mut p: Vec<f64> = if eps.is_finite() {
            (0..n * m).map(|k| ((f[k / m] + g[k % m] - self.cost[k]) / eps).exp()).collect()
        } else {
            (0..n * m).map(|k| self.mu[k / m] * self.nu[k % m]).collect()
        };
        for i in 0..n {
            let r: f64 = p[i * m..(i + 1) * m].iter().sum();
            if r > self.mu[i] {
                let s = self.mu[i] / r;
                p[i * m..(i + 1) * m].iter_mut().for_each(|v| *v *= s);
            }
        }
        for j in 0..m {
            let c: f64 = (0..n).map(|i| p[i * m + j]).sum();
            if c > self.nu[j] {
                let s = self.nu[j] / c;
                (0..n).for_each(|i| p[i * m + j] *= s);
            }
        }
        let er: Vec<f64> = (0..n).map(|i| self.mu[i] - p[i * m..(i + 1) * m].iter().sum::<f64>()).collect();
        let ec: Vec<f64> = (0..m).map(|j| self.nu[j] - (0..n).map(|i| p[i * m + j]).sum::<f64>()).collect();
        let tot: f64 = er.iter().sum();
        if tot > 0.0 {
            for i in 0..n {
                for j in 0..m {
                    p[i * m + j] += (er[i] * ec[j] / tot).max(0.0);
                }
            }
        }
        Plan { mass: p }
    }
}
