//! Rate-distortion and capacity-cost curves by Blahut–Arimoto.
//!
//! For a uniform bit with Hamming distortion R(D) = ln 2 − H_b(D); for
//! BSC(ε) the capacity is ln 2 − H_b(ε). The capacity-cost sweep uses the
//! cost ρ(x) = x on a ternary-input channel.
//!
//! Run: cargo run --example blahut_arimoto

use teamrelax::info::{binary_entropy, blahut_arimoto_cc, blahut_arimoto_rd, CcMode, RdMode};

fn main() -> teamrelax::Result<()> {
    let hamming = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
    println!("rate-distortion, uniform bit");
    println!("{:>6} {:>12} {:>12} {:>6}", "D", "R(D)", "closed form", "iters");
    for d in [0.02, 0.05, 0.1, 0.2, 0.3, 0.4] {
        let r = blahut_arimoto_rd(&[0.5, 0.5], &hamming, RdMode::TargetDistortion(d))?;
        let exact = 2f64.ln() - binary_entropy(d);
        println!("{d:>6} {:>12.9} {:>12.9} {:>6}", r.value, exact, r.iterations);
    }

    let eps = 0.1;
    let bsc = vec![vec![1.0 - eps, eps], vec![eps, 1.0 - eps]];
    let c = blahut_arimoto_cc(&bsc, &[0.0, 0.0], CcMode::Unconstrained)?;
    println!("\nBSC({eps}) capacity {:.9} nats, closed form {:.9}", c.value, 2f64.ln() - binary_entropy(eps));

    let channel = vec![vec![0.8, 0.15, 0.05], vec![0.1, 0.8, 0.1], vec![0.05, 0.15, 0.8]];
    let rho = [0.0, 1.0, 2.0];
    println!("\ncapacity-cost, rho(x) = x");
    println!("{:>6} {:>12} {:>26}", "P", "C(P)", "b");
    for p in [0.1, 0.3, 0.6, 1.0] {
        let r = blahut_arimoto_cc(&channel, &rho, CcMode::TargetCost(p))?;
        let b: Vec<String> = r.optimizer.iter().map(|v| format!("{v:.4}")).collect();
        println!("{p:>6} {:>12.9} {:>26}", r.value, b.join(" "));
    }
    Ok(())
}
