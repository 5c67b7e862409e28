//! Ground truth for the nonconvex problem at desk scale.
//!
//! The optimum over random codes is attained by a deterministic code, so
//! exhaustive enumeration of `(f, g)` is exact. For larger alphabets the
//! bilinear structure gives a cheap coordinate descent between vertex best
//! responses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{det_code_cost, random_code_cost, DetCode, Instance, RandomCode};

pub const DEFAULT_BUDGET: f64 = 1e8;

/// Two values closer than this (relative to `max(1, |v|)`) count as a tie.
const TIE_TOL: f64 = 1e-12;

fn beats(v: f64, best: f64) -> bool {
    if best.is_infinite() {
        return v < best;
    }
    v < best - TIE_TOL * best.abs().max(1.0)
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExactResult {
    pub best_code: DetCode,
    pub value: f64,
    /// Number of codes whose cost was evaluated.
    pub evaluated: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<(DetCode, f64)>>,
    /// True when the value comes from local search rather than enumeration.
    pub heuristic: bool,
    /// Value after every half-step of the winning local-search run.
    pub history: Vec<f64>,
}

/// `nX^nS · nŜ^nY` as a float, so it cannot overflow.
pub fn code_count(inst: &Instance) -> f64 {
    (inst.n_x as f64).powi(inst.n_s as i32) * (inst.n_shat as f64).powi(inst.n_y as i32)
}

#[derive(Clone, Copy, Debug)]
pub struct EnumOptions {
    pub keep_table: bool,
    pub budget: f64,
    pub parallel: bool,
}

impl Default for EnumOptions {
    fn default() -> Self {
        EnumOptions { keep_table: false, budget: DEFAULT_BUDGET, parallel: true }
    }
}

/// Exhaustive minimum over deterministic codes.
pub fn enumerate_optimal(inst: &Instance, keep_table: bool) -> Result<ExactResult> {
    enumerate_with(inst, EnumOptions { keep_table, ..Default::default() })
}

struct Partial {
    best: Option<(f64, DetCode)>,
    evaluated: u64,
    table: Vec<(DetCode, f64)>,
}

pub fn enumerate_with(inst: &Instance, opts: EnumOptions) -> Result<ExactResult> {
    let count = code_count(inst);
    if count > opts.budget {
        return Err(Error::Budget { count, budget: opts.budget });
    }
    // One partition per value of f(0); fixed regardless of thread count.
    let run = |first: usize| scan_partition(inst, first, opts.keep_table);
    let parts: Vec<Partial> = if opts.parallel {
        (0..inst.n_x).into_par_iter().map(run).collect()
    } else {
        (0..inst.n_x).map(run).collect()
    };
    let mut best: Option<(f64, DetCode)> = None;
    let mut evaluated = 0;
    let mut table = Vec::new();
    for p in parts {
        evaluated += p.evaluated;
        if let Some((v, c)) = p.best {
            if best.as_ref().map_or(true, |(bv, _)| beats(v, *bv)) {
                best = Some((v, c));
            }
        }
        table.extend(p.table);
    }
    let (_, best_code) = best.expect("at least one code");
    Ok(ExactResult {
        value: det_code_cost(inst, &best_code),
        best_code,
        evaluated,
        table: opts.keep_table.then_some(table),
        heuristic: false,
        history: Vec::new(),
    })
}

/// Advances a base-`base` odometer; returns the leftmost changed digit.
fn odometer(digits: &mut [usize], base: usize) -> Option<usize> {
    for k in (0..digits.len()).rev() {
        digits[k] += 1;
        if digits[k] < base {
            return Some(k);
        }
        digits[k] = 0;
    }
    None
}

fn scan_partition(inst: &Instance, first: usize, keep_table: bool) -> Partial {
    let (ns, ny, nsh) = (inst.n_s, inst.n_y, inst.n_shat);
    let mut f = vec![0; ns];
    f[0] = first;
    let mut out = Partial { best: None, evaluated: 0, table: Vec::new() };
    let mut cf = vec![vec![0.0; nsh]; ny];
    loop {
        // C_f(y, ŝ) = Σ_s pS(s)·P(y|f(s))·κ(s, f(s), y, ŝ)
        for y in 0..ny {
            for sh in 0..nsh {
                let mut c = 0.0;
                for s in 0..ns {
                    let w = inst.p_s[s] * inst.channel[f[s]][y];
                    if w != 0.0 {
                        c += w * inst.kappa(s, f[s], y, sh);
                    }
                }
                cf[y][sh] = c;
            }
        }
        let mut g = vec![0; ny];
        // prefix[k] = Σ_{y<k} C_f(y, g(y))
        let mut prefix = vec![0.0; ny + 1];
        let mut from = 0;
        loop {
            for y in from..ny {
                prefix[y + 1] = prefix[y] + cf[y][g[y]];
            }
            let v = prefix[ny];
            out.evaluated += 1;
            if keep_table {
                out.table.push((DetCode { f: f.clone(), g: g.clone() }, v));
            }
            if out.best.as_ref().map_or(true, |(bv, _)| beats(v, *bv)) {
                out.best = Some((v, DetCode { f: f.clone(), g: g.clone() }));
            }
            match odometer(&mut g, nsh) {
                Some(k) => from = k,
                None => break,
            }
        }
        // advance f over positions 1.. only; position 0 is the partition
        match odometer(&mut f[1..], inst.n_x) {
            Some(_) => {}
            None => break,
        }
    }
    out
}

/// Per-`s` encoder minimizing the cost against a decoder kernel.
pub fn best_encoder(inst: &Instance, dec: &[Vec<f64>]) -> Vec<usize> {
    (0..inst.n_s)
        .map(|s| {
            let mut best = (f64::INFINITY, 0);
            for x in 0..inst.n_x {
                let mut c = 0.0;
                for y in 0..inst.n_y {
                    let p = inst.channel[x][y];
                    if p == 0.0 {
                        continue;
                    }
                    let mut inner = 0.0;
                    for (sh, d) in dec[y].iter().enumerate() {
                        if *d != 0.0 {
                            inner += d * inst.kappa(s, x, y, sh);
                        }
                    }
                    c += p * inner;
                }
                if beats(c, best.0) {
                    best = (c, x);
                }
            }
            best.1
        })
        .collect()
}

/// Per-`y` decoder minimizing the cost against a deterministic encoder.
pub fn best_decoder(inst: &Instance, f: &[usize]) -> Vec<usize> {
    (0..inst.n_y)
        .map(|y| {
            let mut best = (f64::INFINITY, 0);
            for sh in 0..inst.n_shat {
                let mut c = 0.0;
                for s in 0..inst.n_s {
                    let w = inst.p_s[s] * inst.channel[f[s]][y];
                    if w != 0.0 {
                        c += w * inst.kappa(s, f[s], y, sh);
                    }
                }
                if beats(c, best.0) {
                    best = (c, sh);
                }
            }
            best.1
        })
        .collect()
}

fn one_hot_rows(idx: &[usize], n: usize) -> Vec<Vec<f64>> {
    idx.iter()
        .map(|&i| {
            let mut r = vec![0.0; n];
            r[i] = 1.0;
            r
        })
        .collect()
}

/// One descent run from a random code; returns the code and value history.
fn descend(inst: &Instance, init: &RandomCode) -> (DetCode, Vec<f64>, u64) {
    let mut history = vec![random_code_cost(inst, init)];
    let mut f = best_encoder(inst, &init.q_shat_given_y);
    let mut evals = 1;
    let mut g = best_decoder(inst, &f);
    let mut value = det_code_cost(inst, &DetCode { f: f.clone(), g: g.clone() });
    history.push(value);
    evals += 1;
    loop {
        let nf = best_encoder(inst, &one_hot_rows(&g, inst.n_shat));
        let v1 = det_code_cost(inst, &DetCode { f: nf.clone(), g: g.clone() });
        let ng = best_decoder(inst, &nf);
        let v2 = det_code_cost(inst, &DetCode { f: nf.clone(), g: ng.clone() });
        evals += 2;
        if !beats(v2, value) {
            break;
        }
        history.push(v1);
        history.push(v2);
        f = nf;
        g = ng;
        value = v2;
    }
    (DetCode { f, g }, history, evals)
}

/// Coordinate descent on the bilinear objective, from `init` and from
/// `restarts` extra random deterministic decoders.
pub fn alternating_best_response(inst: &Instance, init: &RandomCode, restarts: usize, seed: u64) -> Result<ExactResult> {
    init.validate(inst)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![init.clone()];
    for _ in 0..restarts {
        let g: Vec<usize> = (0..inst.n_y).map(|_| rng.gen_range(0..inst.n_shat)).collect();
        let f: Vec<usize> = (0..inst.n_s).map(|_| rng.gen_range(0..inst.n_x)).collect();
        starts.push(RandomCode {
            q_x_given_s: one_hot_rows(&f, inst.n_x),
            q_shat_given_y: one_hot_rows(&g, inst.n_shat),
        });
    }
    let mut best: Option<(f64, DetCode, Vec<f64>)> = None;
    let mut evaluated = 0;
    for st in &starts {
        let (code, hist, ev) = descend(inst, st);
        evaluated += ev;
        let v = *hist.last().unwrap();
        let better = match &best {
            None => true,
            Some((bv, bc, _)) => beats(v, *bv) || (!beats(*bv, v) && (&code.f, &code.g) < (&bc.f, &bc.g)),
        };
        if better {
            best = Some((v, code, hist));
        }
    }
    let (_, best_code, history) = best.unwrap();
    Ok(ExactResult {
        value: det_code_cost(inst, &best_code),
        best_code,
        evaluated,
        table: None,
        heuristic: true,
        history,
    })
}

/// Enumeration when the budget allows it, local search otherwise.
pub fn solve_exact_or_heuristic(inst: &Instance, budget: f64, restarts: usize, seed: u64) -> Result<ExactResult> {
    if code_count(inst) <= budget {
        return enumerate_with(inst, EnumOptions { budget, ..Default::default() });
    }
    let init = RandomCode {
        q_x_given_s: one_hot_rows(&(0..inst.n_s).map(|s| s % inst.n_x).collect::<Vec<_>>(), inst.n_x),
        q_shat_given_y: one_hot_rows(&(0..inst.n_y).map(|y| y % inst.n_shat).collect::<Vec<_>>(), inst.n_shat),
    };
    alternating_best_response(inst, &init, restarts, seed)
}
