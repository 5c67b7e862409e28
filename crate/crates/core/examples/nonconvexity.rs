//! The set of joints achievable by codes is not convex.
//!
//! Mixing the joints of two deterministic codes gives a law whose channel
//! conditional is no longer P(y|x) once X and Ŝ become correlated through
//! the shared randomness, so the midpoint fails the membership test.
//!
//! Run: cargo run --example nonconvexity

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use teamrelax::info::{random_simplex, random_stochastic};
use teamrelax::model::{membership_check, nonconvexity_witness, Cost, Instance, WitnessOutcome};

fn main() -> teamrelax::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (ns, nx, ny, nsh) in [(2, 2, 2, 2), (3, 2, 3, 2), (2, 3, 2, 3), (3, 3, 3, 3)] {
        let p_s = random_simplex(&mut rng, ns);
        let channel = random_stochastic(&mut rng, nx, ny);
        let inst = Instance::new(p_s, channel, nsh, Cost::Tensor(vec![0.0; ns * nx * ny * nsh]))?;
        match nonconvexity_witness(&inst)? {
            WitnessOutcome::Found(w) => {
                let ends = membership_check(&inst, &w.q1, 1e-12).in_q && membership_check(&inst, &w.q2, 1e-12).in_q;
                println!("{ns}-{nx}-{ny}-{nsh}: endpoints in set {ends}, midpoint residual {:.4e}", w.residual);
            }
            WitnessOutcome::NotApplicable => println!("{ns}-{nx}-{ny}-{nsh}: not applicable"),
        }
    }
    Ok(())
}
