//! Exhaustive search over deterministic codes and its local-search surrogate.
//!
//! Run: cargo run --release --example exact_search

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use teamrelax::exact::{alternating_best_response, code_count, enumerate_optimal};
use teamrelax::info::{random_simplex, random_stochastic, FGenerator};
use teamrelax::model::{Cost, Instance, RandomCode};
use teamrelax::relax::solve_relaxation_general;

fn main() -> teamrelax::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    println!("{:>8} {:>8} {:>10} {:>10} {:>10}", "dims", "codes", "relax", "exact", "local");
    for (ns, nx, ny, nsh) in [(2, 2, 2, 2), (3, 2, 3, 3), (3, 3, 3, 3), (4, 3, 3, 4)] {
        let n = ns * nx * ny * nsh;
        let cost: Vec<f64> = random_simplex(&mut rng, n).iter().map(|v| v * n as f64).collect();
        let inst = Instance::new(random_simplex(&mut rng, ns), random_stochastic(&mut rng, nx, ny), nsh, Cost::Tensor(cost))?;
        let ex = enumerate_optimal(&inst, false)?;
        let init = RandomCode {
            q_x_given_s: random_stochastic(&mut rng, ns, nx),
            q_shat_given_y: random_stochastic(&mut rng, ny, nsh),
        };
        let local = alternating_best_response(&inst, &init, 8, 0)?;
        let relax = solve_relaxation_general(&inst, &FGenerator::NegLog, 1e-8)?;
        println!(
            "{:>8} {:>8} {:>10.6} {:>10.6} {:>10.6}",
            format!("{ns}{nx}{ny}{nsh}"),
            code_count(&inst),
            relax.value,
            ex.value,
            local.value
        );
    }
    Ok(())
}
