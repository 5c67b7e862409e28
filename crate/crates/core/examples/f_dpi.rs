//! Data processing for f-mutual informations.
//!
//! For random codes on random channels, I_f(S;Ŝ) ≤ I_f(X;Y) for each
//! shipped generator. The table reports the smallest slack seen.
//!
//! Run: cargo run --example f_dpi

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use teamrelax::info::{dpi_slack, random_simplex, random_stochastic, FGenerator};
use teamrelax::model::{build_joint_from_code, Cost, Instance, RandomCode};

fn main() -> teamrelax::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let gens = ["negLog", "totalVariation", "squaredHellinger", "chiSquareLike"];
    let mut worst = [f64::INFINITY; 4];
    let mut tight = [0usize; 4];
    let trials = 500;
    for _ in 0..trials {
        let [ns, nx, ny, nsh] = [0; 4].map(|_| rng.gen_range(2..=4));
        let inst = Instance::new(
            random_simplex(&mut rng, ns),
            random_stochastic(&mut rng, nx, ny),
            nsh,
            Cost::Tensor(vec![0.0; ns * nx * ny * nsh]),
        )?;
        let code = RandomCode {
            q_x_given_s: random_stochastic(&mut rng, ns, nx),
            q_shat_given_y: random_stochastic(&mut rng, ny, nsh),
        };
        let q = build_joint_from_code(&inst, &code)?;
        for (k, name) in gens.iter().enumerate() {
            let s = dpi_slack(&FGenerator::parse(name)?, &q).slack;
            worst[k] = worst[k].min(s);
            if s < 1e-3 {
                tight[k] += 1;
            }
        }
    }
    println!("{:>18} {:>14} {:>10}", "f", "min slack", "< 1e-3");
    for (k, name) in gens.iter().enumerate() {
        println!("{name:>18} {:>14.3e} {:>10}", worst[k], tight[k]);
    }
    Ok(())
}
