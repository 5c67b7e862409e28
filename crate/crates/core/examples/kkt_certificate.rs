//! KKT certificate of a relaxation solution, and what happens when the
//! pair is perturbed away from it.
//!
//! Run: cargo run --example kkt_certificate

use teamrelax::info::FGenerator;
use teamrelax::model::{Cost, Instance, SeparableCost};
use teamrelax::relax::{kkt_residual_separable, solve_relaxation_separable, LambdaSearch};

fn main() -> teamrelax::Result<()> {
    let delta = vec![vec![0.0, 1.0, 4.0], vec![1.0, 0.0, 1.0], vec![4.0, 1.0, 0.0]];
    let rho = vec![0.0, 0.3, 0.6];
    let channel = vec![vec![0.7, 0.2, 0.1], vec![0.15, 0.7, 0.15], vec![0.1, 0.2, 0.7]];
    let inst = Instance::new(vec![0.3, 0.4, 0.3], channel, 3, Cost::Separable(SeparableCost::new(delta, rho)))?;
    let f = FGenerator::NegLog;
    let sol = solve_relaxation_separable(&inst, &f, 1e-10)?;
    println!("value {:.9}, lambda {:.6}, status {}", sol.value, sol.mult.lambda, sol.status.as_str());
    println!("dual value {:.9}", sol.mult.dual_value(&inst.p_s));
    println!("solver residual {:.2e}", sol.kkt.max_residual);

    let (_, rep) = kkt_residual_separable(&inst, &sol.pair, &f, LambdaSearch::Fixed(sol.mult.lambda))?;
    println!("recomputed at the solution: {:.2e}", rep.max_residual);

    for eps in [1e-4, 1e-3, 1e-2] {
        let mut pair = sol.pair.clone();
        let b0 = pair.b[0];
        pair.b[0] = b0 - eps * b0;
        pair.b[2] += eps * b0;
        let (_, rep) = kkt_residual_separable(&inst, &pair, &f, LambdaSearch::Auto)?;
        println!("b moved by {eps:.0e}: residual {:.2e}", rep.max_residual);
    }
    Ok(())
}
