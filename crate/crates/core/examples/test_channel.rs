//! Gaussian test channel: source N(0,σ₀²), additive noise N(0,σw²),
//! cost k₀x² + (ŝ − s)². Linear codes are optimal and the optimum is
//! available in closed form; the relaxation on refined grids approaches it
//! from above, and the grid-rounded linear code sits just above that.
//!
//! Run: cargo run --release --example test_channel [-- 17,33,65]

use std::time::Instant;

use teamrelax::gaussian::{build_instance, code_moments, gamma_star, linear_code_on_grid, GaussianSpec};
use teamrelax::info::FGenerator;
use teamrelax::model::det_code_cost;
use teamrelax::relax::solve_relaxation_separable;

fn main() -> teamrelax::Result<()> {
    let grids: Vec<usize> = std::env::args()
        .nth(1)
        .map(|a| a.split(',').map(|g| g.parse().expect("grid sizes")).collect())
        .unwrap_or_else(|| vec![17, 33]);
    let forms = gamma_star(&GaussianSpec::test_channel(1.0, 1.0, 0.25, 17))?;
    println!("closed form: gamma0 = {:.6}, gamma1 = {:.6}, OPT = {:.6}", forms.gamma0_star, forms.gamma1_star, forms.opt_b);
    println!("{:>5} {:>10} {:>10} {:>10} {:>10} {:>10} {:>8}", "grid", "relax", "rel.err", "linear", "E[X^2]", "E[err^2]", "secs");
    for n in grids {
        let t = Instant::now();
        let inst = build_instance(&GaussianSpec::test_channel(1.0, 1.0, 0.25, n))?;
        let sol = solve_relaxation_separable(&inst, &FGenerator::NegLog, 1e-8)?;
        let code = linear_code_on_grid(&inst, forms.gamma0_star, forms.gamma1_star);
        let (power, dist) = code_moments(&inst, &code);
        println!(
            "{n:>5} {:>10.6} {:>10.2e} {:>10.6} {:>10.6} {:>10.6} {:>8.2}",
            sol.value,
            (sol.value - forms.opt_b).abs() / forms.opt_b,
            det_code_cost(&inst, &code),
            power,
            dist,
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
