//! Command-line front end behind the `teamrelax` binary.
//!
//! Every command reads an instance from a path or `-` (stdin) and writes
//! canonical JSON (sorted keys, 17 significant digits), except `sweep`,
//! which defaults to CSV. Exit codes: 0 success, 2 invalid input or
//! refusal, 3 non-convergence, 4 enumeration budget exceeded.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{invalid, Error, Result};
use crate::exact::{alternating_best_response, enumerate_with, solve_exact_or_heuristic, EnumOptions, DEFAULT_BUDGET};
use crate::gaussian::{build_instance, gamma_star, linear_code_on_grid, GaussianSpec, Problem, Weighting};
use crate::info::{
    blahut_arimoto_cc, blahut_arimoto_rd, f_divergence, f_mutual_information, kl_divergence, mutual_information,
    saddle_probe, CcMode, FGenerator, RdMode,
};
use crate::inverse::{bijective_code, synthesize_costs, synthesized_instance, verify_with_budget, Candidate, SynthesisSpec};
use crate::json::to_canonical_string;
use crate::model::{
    code_pair, det_code_to_random, separability_projection, DetCode, EndToEndPair, Instance, JointDist, Matrix,
    RandomCode,
};
use crate::relax::{
    kkt_residual_general, kkt_residual_separable, lambda_max, solve_relaxation_bansal, solve_relaxation_general,
    solve_relaxation_separable, bound_report_with, LambdaSearch, Multipliers, RelaxSolution, Status,
};

/// Environment variable overriding the enumeration budget.
pub const BUDGET_VAR: &str = "TEAMRELAX_BUDGET";

#[derive(Parser, Debug)]
#[command(name = "teamrelax", version, about = "Relaxations, bounds and inverse-optimal costs for S-X-Y-Ŝ team problems")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
    /// f-divergence generator: negLog, totalVariation, squaredHellinger, chiSquareLike, affine.
    #[arg(long, global = true, default_value = "negLog")]
    pub f: String,
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Pick from the cost: cross term → bansal, δ+ρ → separable, tensor → general.
    Auto,
    Separable,
    Bansal,
    General,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InfoWhat {
    /// Sizes, cost structure, multiplier range and saddle probe.
    Summary,
    /// Capacity(-cost) of the channel with the instance's ρ.
    Capacity,
    /// Rate-distortion of the source with the instance's δ.
    RateDistortion,
    /// `D_f(p‖q) = Σ q·f(p/q)` for `--p`, `--q` (negLog gives `KL(q‖p)`).
    Divergence,
    /// f-mutual information of the joint in `--joint`.
    Mi,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Best deterministic code by enumeration.
    Solve {
        instance: String,
        /// Fall back to alternating best response instead of refusing over budget.
        #[arg(long)]
        heuristic: bool,
        #[arg(long, default_value_t = 16)]
        restarts: usize,
        /// Include every code's cost in the report.
        #[arg(long)]
        table: bool,
    },
    /// Convex relaxation with its KKT certificate.
    Relax {
        instance: String,
        #[arg(long, value_enum, default_value = "auto")]
        mode: Mode,
    },
    /// Lower bound from the relaxation against the best code.
    Bound { instance: String },
    /// Synthesize costs under which a code is optimal and check it.
    Inverse {
        instance: String,
        /// JSON code: `{"f": [...], "g": [...]}` or `{"qXGivenS": ..., "qShatGivenY": ...}`.
        /// Defaults to a random bijective code on square instances.
        #[arg(long)]
        code: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Comma-separated `μᵃ(s)`; zeros when omitted.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        mu_a: Vec<f64>,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        mu_b: f64,
    },
    /// KKT residuals of a supplied solution (a relax report or `{"a","b"}`).
    Kkt {
        instance: String,
        #[arg(long)]
        solution: String,
        /// Fix `λ` instead of taking it from the solution or searching.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Emit a discretized Gaussian instance.
    Gaussian(GaussianArgs),
    /// Grid-refinement study, one row per grid size.
    Sweep {
        #[command(flatten)]
        gaussian: GaussianArgs,
        #[arg(long, value_delimiter = ',', default_value = "17,33,65")]
        grids: Vec<usize>,
        /// Random restarts of the local search besides the linear code.
        #[arg(long, default_value_t = 4)]
        restarts: usize,
    },
    /// Information-measure utilities.
    Info {
        instance: Option<String>,
        #[arg(long, value_enum, default_value = "summary")]
        what: InfoWhat,
        /// Blahut–Arimoto slope.
        #[arg(long)]
        slope: Option<f64>,
        /// Target distortion or cost.
        #[arg(long)]
        target: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        q: Vec<f64>,
        /// JSON matrix file for `--what mi`.
        #[arg(long)]
        joint: Option<String>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct GaussianArgs {
    /// test-channel, bansal-basar or witsenhausen.
    #[arg(long)]
    pub preset: String,
    #[arg(long, default_value_t = 1.0)]
    pub sigma0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigmaw: f64,
    #[arg(long, default_value_t = 0.25)]
    pub k0: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub s01: f64,
    #[arg(long, default_value_t = 17)]
    pub grid: usize,
    #[arg(long, default_value_t = 5.0)]
    pub halfwidth: f64,
    /// cell-mass or density.
    #[arg(long, default_value = "cell-mass")]
    pub weighting: String,
}

impl GaussianArgs {
    pub fn spec(&self, grid: usize) -> Result<GaussianSpec> {
        let spec = GaussianSpec {
            sigma0: self.sigma0,
            sigma_w: self.sigmaw,
            k0: self.k0,
            s01: self.s01,
            grid_points: grid,
            grid_half_width_sigmas: self.halfwidth,
            problem: Problem::parse(&self.preset)?,
            weighting: Weighting::parse(&self.weighting)?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Runs one command and returns the process exit code. Diagnostics go to
/// stderr.
pub fn run(config: &RunConfig) -> i32 {
    match execute(config) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("teamrelax: {e}");
            e.exit_code()
        }
    }
}

/// Enumeration budget from the environment, or the default.
pub fn budget_from_env() -> Result<f64> {
    match std::env::var(BUDGET_VAR) {
        Ok(v) => match v.trim().parse::<f64>() {
            Ok(b) if b >= 0.0 => Ok(b),
            _ => invalid(format!("{BUDGET_VAR} must be a nonnegative number, got {v:?}")),
        },
        Err(_) => Ok(DEFAULT_BUDGET),
    }
}

fn read_text(path: &str) -> Result<String> {
    let mut text = String::new();
    if path == "-" {
        std::io::stdin().read_to_string(&mut text)?;
    } else {
        text = std::fs::read_to_string(path)?;
    }
    Ok(text)
}

fn load_instance(path: &str) -> Result<Instance> {
    Instance::from_json(&read_text(path)?)
}

fn emit(config: &RunConfig, text: &str) -> Result<()> {
    match &config.output {
        Some(path) => std::fs::write(path, format!("{text}\n"))?,
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}")?;
        }
    }
    Ok(())
}

fn emit_json<T: Serialize>(config: &RunConfig, value: &T) -> Result<()> {
    if config.format == Some(Format::Csv) {
        return invalid("this command only writes JSON");
    }
    emit(config, &to_canonical_string(value)?)
}

fn relax_with(inst: &Instance, f: &FGenerator, mode: Mode, tol: f64) -> Result<RelaxSolution> {
    let mode = match mode {
        Mode::Auto => match inst.separable() {
            Some(sc) if sc.has_cross() => Mode::Bansal,
            Some(_) => Mode::Separable,
            None => Mode::General,
        },
        m => m,
    };
    match mode {
        Mode::Separable => solve_relaxation_separable(inst, f, tol),
        Mode::Bansal => {
            if !f.is_neg_log() {
                return invalid("the cross-term relaxation is defined for negLog only");
            }
            solve_relaxation_bansal(inst, tol)
        }
        _ => solve_relaxation_general(inst, f, tol),
    }
}

fn status_code(status: Status) -> i32 {
    match status {
        Status::MaxIter => 3,
        _ => 0,
    }
}

fn execute(config: &RunConfig) -> Result<i32> {
    if !(config.tol > 0.0 && config.tol.is_finite()) {
        return invalid("tol must be positive");
    }
    let f = FGenerator::parse(&config.f)?;
    match &config.command {
        Command::Solve { instance, heuristic, restarts, table } => {
            let inst = load_instance(instance)?;
            let budget = budget_from_env()?;
            let res = if *heuristic {
                solve_exact_or_heuristic(&inst, budget, *restarts, config.seed)?
            } else {
                enumerate_with(&inst, EnumOptions { keep_table: *table, budget, parallel: true })?
            };
            emit_json(config, &res)?;
            Ok(0)
        }
        Command::Relax { instance, mode } => {
            let inst = load_instance(instance)?;
            let sol = relax_with(&inst, &f, *mode, config.tol)?;
            emit_json(config, &sol.to_json_value())?;
            Ok(status_code(sol.status))
        }
        Command::Bound { instance } => {
            let inst = load_instance(instance)?;
            let rep = bound_report_with(&inst, &f, config.tol, budget_from_env()?, config.seed)?;
            emit_json(config, &rep)?;
            Ok(0)
        }
        Command::Inverse { instance, code, lambda, mu_a, mu_b } => {
            let inst = load_instance(instance)?;
            let out = inverse_round_trip(&inst, &f, code.as_deref(), *lambda, mu_a, *mu_b, config.seed)?;
            emit_json(config, &out)?;
            Ok(0)
        }
        Command::Kkt { instance, solution, lambda } => {
            let inst = load_instance(instance)?;
            let sol: Value = serde_json::from_str(&read_text(solution)?)?;
            let out = kkt_of(&inst, &f, &sol, *lambda)?;
            emit_json(config, &out)?;
            Ok(0)
        }
        Command::Gaussian(args) => {
            let inst = build_instance(&args.spec(args.grid)?)?;
            emit_json(config, &inst.to_json_value())?;
            Ok(0)
        }
        Command::Sweep { gaussian, grids, restarts } => {
            let rows = sweep(gaussian, grids, *restarts, config.tol, config.seed)?;
            if config.format == Some(Format::Json) {
                emit(config, &to_canonical_string(&rows)?)?;
            } else {
                emit(config, sweep_csv(&rows).trim_end())?;
            }
            Ok(rows.iter().map(|r| status_code(r.status)).max().unwrap_or(0))
        }
        Command::Info { instance, what, slope, target, p, q, joint } => {
            let out = info(&f, instance.as_deref(), *what, *slope, *target, p, q, joint.as_deref(), config.seed)?;
            emit_json(config, &out)?;
            Ok(0)
        }
    }
}

fn parse_code(inst: &Instance, text: &str) -> Result<Candidate> {
    let v: Value = serde_json::from_str(text)?;
    if v.get("f").is_some() {
        let c: DetCode = serde_json::from_value(v)?;
        c.validate(inst)?;
        Ok(Candidate::Det(c))
    } else {
        let c: RandomCode = serde_json::from_value(v)?;
        c.validate(inst)?;
        Ok(Candidate::Random(c))
    }
}

/// `synthesize_costs` followed by `verify_inverse_optimality` on the
/// synthesized instance.
pub fn inverse_round_trip(
    inst: &Instance,
    f: &FGenerator,
    code: Option<&str>,
    lambda: f64,
    mu_a: &[f64],
    mu_b: f64,
    seed: u64,
) -> Result<Value> {
    let candidate = match code {
        Some(path) => parse_code(inst, &read_text(path)?)?,
        None => Candidate::Det(bijective_code(inst, seed)?),
    };
    let random = match &candidate {
        Candidate::Det(c) => det_code_to_random(c, inst)?,
        Candidate::Random(c) => c.clone(),
    };
    let pair = code_pair(inst, &random);
    let mu_a = if mu_a.is_empty() { vec![0.0; inst.n_s] } else { mu_a.to_vec() };
    let spec = SynthesisSpec::new(f.clone(), lambda, mu_a, mu_b, inst.n_x, inst.n_shat).cover_zero_cells(&pair);
    let (delta, rho) = synthesize_costs(inst, &pair, &spec)?;
    let syn = synthesized_instance(inst, delta.clone(), rho.clone())?;
    let report = verify_with_budget(&syn, &candidate, budget_from_env()?, seed)?;
    let code_json = match &candidate {
        Candidate::Det(c) => json!(c),
        Candidate::Random(c) => json!(c),
    };
    Ok(json!({
        "f": f.name(),
        "lambda": lambda,
        "code": code_json,
        "delta": delta,
        "rho": rho,
        "instance": syn.to_json_value(),
        "verify": report,
    }))
}

fn matrix_field(v: &Value, key: &str) -> Result<Option<Matrix>> {
    v.get(key).map(|m| serde_json::from_value(m.clone()).map_err(Error::from)).transpose()
}

/// KKT residuals for a relax report, a `{"a","b"}` pair, or a joint `q`
/// with `multipliers`.
pub fn kkt_of(inst: &Instance, f: &FGenerator, sol: &Value, lambda: Option<f64>) -> Result<Value> {
    if let (Some(q), Some(m)) = (sol.get("q"), sol.get("multipliers")) {
        let dims: [usize; 4] = match sol.get("dims") {
            Some(d) => serde_json::from_value(d.clone())?,
            None => inst.dims(),
        };
        let q = JointDist::new(dims, serde_json::from_value(q.clone())?)?;
        let mut mult: Multipliers = serde_json::from_value(m.clone())?;
        if let Some(l) = lambda {
            mult.lambda = l;
        }
        let rep = kkt_residual_general(inst, &q, f, &mult)?;
        return Ok(json!({ "kkt": rep, "multipliers": mult }));
    }
    let a = matrix_field(sol, "a")?.ok_or_else(|| Error::Invalid("solution needs \"a\" and \"b\" or \"q\"".into()))?;
    let b: Vec<f64> = match sol.get("b") {
        Some(b) => serde_json::from_value(b.clone())?,
        None => return invalid("solution needs \"b\""),
    };
    let pair = EndToEndPair { a, b };
    let how = match lambda.or_else(|| sol.get("lambda").and_then(Value::as_f64)) {
        Some(l) => LambdaSearch::Fixed(l),
        None => LambdaSearch::Auto,
    };
    let (mult, rep) = kkt_residual_separable(inst, &pair, f, how)?;
    Ok(json!({ "kkt": rep, "multipliers": mult }))
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepRow {
    pub grid: usize,
    pub n_s: usize,
    pub n_x: usize,
    pub n_y: usize,
    pub n_shat: usize,
    pub relax_value: f64,
    pub heuristic_exact_value: f64,
    /// NaN where no closed form is known.
    pub closed_form: f64,
    /// `|relaxValue − closedForm|`.
    pub gap: f64,
    pub dpi_slack: f64,
    pub seconds: f64,
    #[serde(skip)]
    pub status: Status,
}

fn sweep_row(g: &GaussianArgs, grid: usize, restarts: usize, tol: f64, seed: u64) -> Result<SweepRow> {
    let start = Instant::now();
    let spec = g.spec(grid)?;
    let inst = build_instance(&spec)?;
    let sol = relax_with(&inst, &FGenerator::NegLog, Mode::Auto, tol)?;
    let forms = match spec.problem {
        Problem::Witsenhausen => None,
        _ => Some(gamma_star(&spec)?),
    };
    let (g0, g1) = forms.as_ref().map_or((1.0, 0.5), |c| (c.gamma0_star_star, c.gamma1_star));
    let init = det_code_to_random(&linear_code_on_grid(&inst, g0, g1), &inst)?;
    let ex = alternating_best_response(&inst, &init, restarts, seed)?;
    let closed_form = forms.map_or(f64::NAN, |c| c.opt_b);
    let [n_s, n_x, n_y, n_shat] = inst.dims();
    Ok(SweepRow {
        grid,
        n_s,
        n_x,
        n_y,
        n_shat,
        relax_value: sol.value,
        heuristic_exact_value: ex.value,
        closed_form,
        gap: (sol.value - closed_form).abs(),
        dpi_slack: sol.dpi_slack,
        seconds: start.elapsed().as_secs_f64(),
        status: sol.status,
    })
}

/// Rows in the order of `grids`; grids run in parallel.
pub fn sweep(g: &GaussianArgs, grids: &[usize], restarts: usize, tol: f64, seed: u64) -> Result<Vec<SweepRow>> {
    if grids.is_empty() {
        return invalid("--grids is empty");
    }
    grids.par_iter().map(|&n| sweep_row(g, n, restarts, tol, seed)).collect()
}

fn csv_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.12e}")
    } else {
        String::new()
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("grid,nS,nX,nY,nShat,relaxValue,heuristicExactValue,closedForm,gap,dpiSlack,seconds\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{:.3}",
            r.grid,
            r.n_s,
            r.n_x,
            r.n_y,
            r.n_shat,
            csv_num(r.relax_value),
            csv_num(r.heuristic_exact_value),
            csv_num(r.closed_form),
            csv_num(r.gap),
            csv_num(r.dpi_slack),
            r.seconds
        );
    }
    s
}

#[allow(clippy::too_many_arguments)]
fn info(
    f: &FGenerator,
    instance: Option<&str>,
    what: InfoWhat,
    slope: Option<f64>,
    target: Option<f64>,
    p: &[f64],
    q: &[f64],
    joint: Option<&str>,
    seed: u64,
) -> Result<Value> {
    let need = || -> Result<Instance> {
        match instance {
            Some(path) => load_instance(path),
            None => invalid("this query needs an instance"),
        }
    };
    match what {
        InfoWhat::Summary => {
            let inst = need()?;
            let sep = separability_projection(&inst);
            let probe = saddle_probe(f, &inst.channel, 200, seed);
            let (lo, hi) = inst.cost_range();
            Ok(json!({
                "dims": inst.dims(),
                "codeCount": crate::exact::code_count(&inst),
                "separableCost": inst.separable().is_some(),
                "crossTerm": inst.separable().is_some_and(|s| s.has_cross()),
                "separabilityResidual": sep.residual,
                "costNorm": sep.norm,
                "costRange": [lo, hi],
                "lambdaMax": lambda_max(&inst),
                "f": f.name(),
                "saddleCertified": f.saddle_certified(),
                "saddleProbe": probe,
            }))
        }
        InfoWhat::Capacity => {
            let inst = need()?;
            let rho = match crate::relax::separable_parts_of(&inst) {
                Ok((_, rho)) => rho,
                Err(_) => vec![0.0; inst.n_x],
            };
            let mode = match (target, slope) {
                (Some(t), _) => CcMode::TargetCost(t),
                (None, Some(s)) => CcMode::Slope(s),
                (None, None) => CcMode::Unconstrained,
            };
            Ok(json!(blahut_arimoto_cc(&inst.channel, &rho, mode)?))
        }
        InfoWhat::RateDistortion => {
            let inst = need()?;
            let (delta, _) = crate::relax::separable_parts_of(&inst)?;
            let mode = match (target, slope) {
                (Some(t), _) => RdMode::TargetDistortion(t),
                (None, Some(s)) => RdMode::Slope(s),
                (None, None) => return invalid("rate-distortion needs --target or --slope"),
            };
            Ok(json!(blahut_arimoto_rd(&inst.p_s, &delta, mode)?))
        }
        InfoWhat::Divergence => {
            if p.is_empty() || p.len() != q.len() {
                return invalid("--p and --q must be nonempty and of equal length");
            }
            crate::model::check_simplex(p, "p")?;
            crate::model::check_simplex(q, "q")?;
            Ok(json!({ "f": f.name(), "fDivergence": f_divergence(f, p, q), "kl": kl_divergence(p, q) }))
        }
        InfoWhat::Mi => {
            let Some(path) = joint else { return invalid("mi needs --joint") };
            let m: Matrix = serde_json::from_str(&read_text(path)?)?;
            if m.is_empty() || m.iter().any(|r| r.len() != m[0].len()) {
                return invalid("joint must be a nonempty rectangular matrix");
            }
            let flat: Vec<f64> = m.iter().flatten().cloned().collect();
            crate::model::check_simplex(&flat, "joint")?;
            Ok(json!({ "f": f.name(), "fMutualInformation": f_mutual_information(f, &m), "mutualInformation": mutual_information(&m) }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pipeline_flags() {
        let c = RunConfig::try_parse_from([
            "teamrelax", "gaussian", "--preset", "bansal-basar", "--k0", "1", "--s01", "-2", "--grid", "33",
        ])
        .unwrap();
        let Command::Gaussian(g) = c.command else { panic!() };
        let spec = g.spec(g.grid).unwrap();
        assert_eq!(spec.s01, -2.0);
        assert_eq!(spec.grid_points, 33);
        let c = RunConfig::try_parse_from(["teamrelax", "relax", "--mode", "separable", "-"]).unwrap();
        assert!(matches!(c.command, Command::Relax { mode: Mode::Separable, .. }));
    }

    #[test]
    fn csv_header_and_blank_closed_form() {
        let row = SweepRow {
            grid: 9,
            n_s: 9,
            n_x: 9,
            n_y: 17,
            n_shat: 9,
            relax_value: 1.0,
            heuristic_exact_value: 1.5,
            closed_form: f64::NAN,
            gap: f64::NAN,
            dpi_slack: 0.0,
            seconds: 0.25,
            status: Status::Optimal,
        };
        let s = sweep_csv(&[row]);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "grid,nS,nX,nY,nShat,relaxValue,heuristicExactValue,closedForm,gap,dpiSlack,seconds");
        assert_eq!(lines[1].split(',').count(), 11);
        assert!(lines[1].contains(",,"));
    }
}
