//! Gaussian problem with the cross term 2s₀₁·x·s in the cost.
//!
//! The encoder gain solves a quintic-like equation and its sign is the
//! opposite of s₀₁. The relaxation handles the cross term through a
//! Cauchy–Schwarz minorant; local search seeded with the rounded linear
//! code supplies the upper side.
//!
//! Run: cargo run --release --example bansal_basar [-- 17,33]

use teamrelax::exact::alternating_best_response;
use teamrelax::gaussian::{build_instance, gamma_star, linear_code_on_grid, GaussianSpec};
use teamrelax::model::det_code_to_random;
use teamrelax::relax::solve_relaxation_bansal;

fn main() -> teamrelax::Result<()> {
    let grids: Vec<usize> = std::env::args()
        .nth(1)
        .map(|a| a.split(',').map(|g| g.parse().expect("grid sizes")).collect())
        .unwrap_or_else(|| vec![17]);
    for s01 in [2.0, -2.0] {
        let forms = gamma_star(&GaussianSpec::bansal_basar(1.0, 1.0, 1.0, s01, 17))?;
        println!(
            "s01 = {s01:+}: gamma0** = {:+.10}, residual {:.1e}, optB = {:.6}",
            forms.gamma0_star_star, forms.gain_residual, forms.opt_b
        );
    }
    let forms = gamma_star(&GaussianSpec::bansal_basar(1.0, 1.0, 1.0, 2.0, 17))?;
    println!("\n{:>5} {:>10} {:>10} {:>10} {:>8} {:>10}", "grid", "relax", "rel.err", "search", "lambda", "slope");
    for n in grids {
        let inst = build_instance(&GaussianSpec::bansal_basar(1.0, 1.0, 1.0, 2.0, n))?;
        let sol = solve_relaxation_bansal(&inst, 1e-8)?;
        let init = linear_code_on_grid(&inst, forms.gamma0_star_star, forms.gamma1_star);
        let ex = alternating_best_response(&inst, &det_code_to_random(&init, &inst)?, 4, 0)?;
        // least-squares encoder slope of the best code found
        let (mut sx, mut ss) = (0.0, 0.0);
        for s in 0..inst.n_s {
            sx += inst.p_s[s] * inst.s_values[s] * inst.x_values[ex.best_code.f[s]];
            ss += inst.p_s[s] * inst.s_values[s].powi(2);
        }
        println!(
            "{n:>5} {:>10.6} {:>10.2e} {:>10.6} {:>8.4} {:>+10.4}",
            sol.value,
            ((sol.value - forms.opt_b) / forms.opt_b).abs(),
            ex.value,
            sol.mult.lambda,
            sx / ss
        );
    }
    Ok(())
}
