//! Lower bound for a coarse discretization of Witsenhausen's problem.
//!
//! The cost (x − ŝ)² + (x − s)² couples x and ŝ, so it has no δ + ρ split
//! and goes to the transport-dual solver. The bound report sandwiches the
//! team optimum between the relaxation and local search.
//!
//! Run: cargo run --release --example witsenhausen_bound

use teamrelax::gaussian::{build_instance, GaussianSpec};
use teamrelax::info::FGenerator;
use teamrelax::model::separability_projection;
use teamrelax::relax::bound_report;

fn main() -> teamrelax::Result<()> {
    let inst = build_instance(&GaussianSpec::witsenhausen(1.0, 1.0, 9))?;
    let sep = separability_projection(&inst);
    println!("dims {:?}, separability residual {:.3e} of {:.3e}", inst.dims(), sep.residual, sep.norm);
    let rep = bound_report(&inst, &FGenerator::NegLog)?;
    println!("lower bound       {:.6}", rep.lb);
    println!("best code found   {:.6} (heuristic: {})", rep.ub, rep.heuristic);
    println!("gap               {:.6}", rep.gap);
    println!("lambda            {:.6}", rep.lambda);
    println!("identity residual {:.2e}", rep.multiplier_identity_residual);
    Ok(())
}
