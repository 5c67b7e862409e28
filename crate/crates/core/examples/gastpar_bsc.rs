//! Uniform bit over a binary symmetric channel with Hamming distortion.
//!
//! Uncoded transmission is optimal here: R(D) of the source meets the
//! channel capacity at D = ε, so the relaxation is tight and the DPI holds
//! with equality at its solution.
//!
//! Run: cargo run --example gastpar_bsc

use teamrelax::exact::enumerate_optimal;
use teamrelax::info::FGenerator;
use teamrelax::model::{Cost, Instance, SeparableCost};
use teamrelax::relax::solve_relaxation_separable;

fn main() -> teamrelax::Result<()> {
    println!("{:>6} {:>12} {:>12} {:>10} {:>10}", "eps", "relaxation", "exact", "lambda", "slack");
    for eps in [0.01, 0.05, 0.1, 0.2, 0.3] {
        let hamming = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let cost = Cost::Separable(SeparableCost::new(hamming, vec![0.0, 0.0]));
        let inst = Instance::new(vec![0.5, 0.5], vec![vec![1.0 - eps, eps], vec![eps, 1.0 - eps]], 2, cost)?;
        let sol = solve_relaxation_separable(&inst, &FGenerator::NegLog, 1e-10)?;
        let ex = enumerate_optimal(&inst, false)?;
        println!(
            "{eps:>6} {:>12.9} {:>12.9} {:>10.5} {:>10.2e}",
            sol.value, ex.value, sol.mult.lambda, sol.dpi_slack
        );
    }
    Ok(())
}
