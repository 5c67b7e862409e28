//! Costs that make a chosen code optimal.
//!
//! A bijective code on a 2×2 channel meets the f-DPI with equality, so
//! gradients of the two f-informations at its end-to-end pair define a
//! cost for which the code is globally optimal. Total-variation costs are
//! then checked against the classical log-likelihood form: no choice of
//! constants reproduces them.
//!
//! Run: cargo run --example inverse_costs

use teamrelax::info::FGenerator;
use teamrelax::inverse::{
    bijective_code, gastpar_costs, gastpar_fit, synthesize_costs, synthesized_instance, verify_inverse_optimality,
    Candidate, SynthesisSpec,
};
use teamrelax::json::to_canonical_string;
use teamrelax::model::{code_pair, det_code_to_random, Cost, Instance, SeparableCost};

fn main() -> teamrelax::Result<()> {
    let zero = Cost::Separable(SeparableCost::new(vec![vec![0.0; 2]; 2], vec![0.0; 2]));
    let inst = Instance::new(vec![0.35, 0.65], vec![vec![0.9, 0.1], vec![0.3, 0.7]], 2, zero)?;
    let code = bijective_code(&inst, 3)?;
    let pair = code_pair(&inst, &det_code_to_random(&code, &inst)?);
    println!("code f = {:?}, g = {:?}", code.f, code.g);

    for f in [FGenerator::NegLog, FGenerator::TotalVariation] {
        let spec = SynthesisSpec::new(f.clone(), 1.5, vec![0.2, -0.1], 0.3, 2, 2);
        let (delta, rho) = synthesize_costs(&inst, &pair, &spec)?;
        let syn = synthesized_instance(&inst, delta.clone(), rho.clone())?;
        let rep = verify_inverse_optimality(&syn, &Candidate::Det(code.clone()))?;
        let fit = gastpar_fit(&inst, &pair, &delta, &rho)?;
        println!("\n{}", f.name());
        println!("  delta = {delta:.4?}");
        println!("  rho   = {rho:.4?}");
        println!("  candidate {:.6}, global min {:.6}, optimal {}", rep.candidate_value, rep.global_min, rep.optimal);
        println!("  classical-form fit: c2 = {:.4}, residual {:.2e}", fit.c2, fit.relative_residual);
    }

    let g = gastpar_costs(&inst, &pair, 1.0, 1.0, 0.0, &[0.0, 0.0], &[0.0, 0.0])?;
    println!("\nclassical costs (c1 = c2 = 1): delta = {:.4?}, rho = {:.4?}", g.delta, g.rho);

    let spec = SynthesisSpec::new(FGenerator::NegLog, 1.0, vec![0.0; 2], 0.0, 2, 2);
    let (delta, rho) = synthesize_costs(&inst, &pair, &spec)?;
    println!("\nsynthesized instance:\n{}", to_canonical_string(&synthesized_instance(&inst, delta, rho)?.to_json_value())?);
    Ok(())
}
