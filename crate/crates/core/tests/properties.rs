use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use teamrelax::exact::{alternating_best_response, enumerate_optimal};
use teamrelax::gaussian::cell_masses;
use teamrelax::info::{
    blahut_arimoto_rd, dpi_slack, f_divergence, random_simplex, random_stochastic, FGenerator, RdMode,
};
use teamrelax::inverse::{
    bijective_code, gastpar_costs, synthesize_costs, synthesized_instance, verify_inverse_optimality, Candidate,
    SynthesisSpec,
};
use teamrelax::json::to_canonical_string;
use teamrelax::model::{
    build_joint_from_code, code_pair, det_code_cost, expected_cost, induced_endtoend, membership_check,
    random_code_cost, separability_projection, Cost, Instance, RandomCode, SeparableCost,
};
use teamrelax::relax::{kkt_residual_separable, solve_relaxation_separable, LambdaSearch};

const KINDS: [&str; 4] = ["negLog", "totalVariation", "squaredHellinger", "chiSquareLike"];

fn instance(seed: u64, max: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [ns, nx, ny, nsh] = [0; 4].map(|_| rng.gen_range(1..=max));
    let delta = (0..ns).map(|_| (0..nsh).map(|_| rng.gen_range(0.0..3.0)).collect()).collect();
    let rho = (0..nx).map(|_| rng.gen_range(0.0..1.0)).collect();
    Instance::new(
        random_simplex(&mut rng, ns),
        random_stochastic(&mut rng, nx, ny),
        nsh,
        Cost::Separable(SeparableCost::new(delta, rho)),
    )
    .unwrap()
}

/// Channels with distinct rows; identical rows leave no finite multiplier.
fn informative(inst: &Instance) -> bool {
    inst.channel.iter().any(|row| row.iter().zip(&inst.channel[0]).any(|(u, v)| (u - v).abs() > 1e-15))
}

fn random_code(inst: &Instance, seed: u64) -> RandomCode {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    RandomCode {
        q_x_given_s: random_stochastic(&mut rng, inst.n_s, inst.n_x),
        q_shat_given_y: random_stochastic(&mut rng, inst.n_y, inst.n_shat),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn code_joints_obey_every_f_dpi(seed in any::<u64>()) {
        let inst = instance(seed, 4);
        let q = build_joint_from_code(&inst, &random_code(&inst, seed)).unwrap();
        for k in KINDS {
            let s = dpi_slack(&FGenerator::parse(k).unwrap(), &q);
            prop_assert!(s.slack >= -1e-10, "{k}: {:?}", s);
        }
    }

    #[test]
    fn code_joints_are_members_with_matching_pair(seed in any::<u64>()) {
        let inst = instance(seed, 4);
        let code = random_code(&inst, seed);
        let q = build_joint_from_code(&inst, &code).unwrap();
        prop_assert!(membership_check(&inst, &q, 1e-12).in_q);
        let from_joint = induced_endtoend(&q, &inst.p_s).unwrap();
        let direct = code_pair(&inst, &code);
        for (r1, r2) in from_joint.a.iter().zip(&direct.a) {
            for (u, v) in r1.iter().zip(r2) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }
        for (u, v) in from_joint.b.iter().zip(&direct.b) {
            prop_assert!((u - v).abs() < 1e-12);
        }
        prop_assert!((expected_cost(&inst, &q).unwrap() - random_code_cost(&inst, &code)).abs() < 1e-10);
    }

    #[test]
    fn relaxation_is_below_every_code(seed in any::<u64>()) {
        let inst = instance(seed, 3);
        let r = solve_relaxation_separable(&inst, &FGenerator::NegLog, 1e-8).unwrap();
        let ex = enumerate_optimal(&inst, false).unwrap();
        prop_assert!(r.value <= ex.value + 1e-8, "{} > {}", r.value, ex.value);
        prop_assert!(r.lower_bound <= r.value + 1e-9);
        prop_assert!(r.value <= random_code_cost(&inst, &random_code(&inst, seed)) + 1e-8);
    }

    #[test]
    fn multipliers_reproduce_the_value(seed in any::<u64>()) {
        let inst = instance(seed, 3);
        prop_assume!(informative(&inst));
        let r = solve_relaxation_separable(&inst, &FGenerator::NegLog, 1e-10).unwrap();
        let dual = r.mult.dual_value(&inst.p_s);
        prop_assert!((r.value - dual).abs() <= 1e-6 * r.value.abs().max(1.0), "{} vs {}", r.value, dual);
        prop_assert!(r.mult.lambda >= 0.0);
        prop_assert!(r.mult.nu_a.iter().flatten().chain(&r.mult.nu_b).all(|v| *v >= -1e-9));
    }

    #[test]
    fn kkt_residual_is_small_at_the_solution(seed in any::<u64>()) {
        let inst = instance(seed, 3);
        prop_assume!(informative(&inst));
        let r = solve_relaxation_separable(&inst, &FGenerator::NegLog, 1e-10).unwrap();
        let (_, rep) = kkt_residual_separable(&inst, &r.pair, &FGenerator::NegLog, LambdaSearch::Fixed(r.mult.lambda)).unwrap();
        prop_assert!(rep.max_residual <= 1e-6, "{:?}", rep);
    }

    #[test]
    fn local_search_never_beats_enumeration(seed in any::<u64>()) {
        let inst = instance(seed, 3);
        let ex = enumerate_optimal(&inst, false).unwrap();
        let local = alternating_best_response(&inst, &random_code(&inst, seed), 2, seed).unwrap();
        prop_assert!(local.value >= ex.value - 1e-12);
        prop_assert!((det_code_cost(&inst, &local.best_code) - local.value).abs() < 1e-12);
        prop_assert!(local.history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn instance_json_round_trips(seed in any::<u64>()) {
        let inst = instance(seed, 4);
        let text = to_canonical_string(&inst.to_json_value()).unwrap();
        let back = Instance::from_json(&text).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(to_canonical_string(&back.to_json_value()).unwrap(), text);
    }

    #[test]
    fn additive_tensors_pass_the_separability_test(seed in any::<u64>()) {
        let inst = instance(seed, 4);
        let t = inst.with_cost(Cost::Tensor(inst.cost_tensor().unwrap())).unwrap();
        let rep = separability_projection(&t);
        prop_assert!(rep.residual <= 1e-10 * rep.norm.max(1.0));
    }

    #[test]
    fn f_sum_inequality(p in prop::collection::vec(1e-4f64..5.0, 1..8), q in prop::collection::vec(1e-4f64..5.0, 1..8)) {
        let n = p.len().min(q.len());
        let (p, q) = (&p[..n], &q[..n]);
        let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
        for k in KINDS {
            let f = FGenerator::parse(k).unwrap();
            let lhs = f_divergence(&f, p, q);
            prop_assert!(lhs - sq * f.eval(sp / sq) >= -1e-10 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn rate_distortion_is_nonincreasing_and_convex(d1 in 0.01f64..0.45, gap in 0.005f64..0.04) {
        let hamming = vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
        let p = [0.5, 0.3, 0.2];
        let r = |d: f64| blahut_arimoto_rd(&p, &hamming, RdMode::TargetDistortion(d)).unwrap().value;
        let (a, b, c) = (r(d1), r(d1 + gap), r(d1 + 2.0 * gap));
        prop_assert!(b <= a + 1e-9 && c <= b + 1e-9);
        prop_assert!(b <= 0.5 * (a + c) + 1e-7);
    }

    #[test]
    fn cell_masses_are_a_symmetric_distribution(n in 2usize..40, width in 2.0f64..6.0, sigma in 0.2f64..3.0) {
        let centers: Vec<f64> = (0..n).map(|i| sigma * width * (2.0 * i as f64 / (n - 1) as f64 - 1.0)).collect();
        let m = cell_masses(&centers, 0.0, sigma);
        prop_assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(m.iter().all(|v| *v > 0.0));
        for i in 0..n {
            prop_assert!((m[i] - m[n - 1 - i]).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn synthesized_costs_make_bijective_codes_optimal(seed in any::<u64>(), lambda in 0.05f64..4.0, tv in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=3);
        let inst = Instance::new(
            random_simplex(&mut rng, n),
            random_stochastic(&mut rng, n, n),
            n,
            Cost::Tensor(vec![0.0; n.pow(4)]),
        ).unwrap();
        let f = if tv && n == 2 { FGenerator::TotalVariation } else { FGenerator::NegLog };
        let code = bijective_code(&inst, seed).unwrap();
        let pair = code_pair(&inst, &teamrelax::model::det_code_to_random(&code, &inst).unwrap());
        let mu_a = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let spec = SynthesisSpec::new(f, lambda, mu_a, rng.gen_range(-2.0..2.0), n, n);
        let (delta, rho) = synthesize_costs(&inst, &pair, &spec).unwrap();
        let r = verify_inverse_optimality(&synthesized_instance(&inst, delta, rho).unwrap(), &Candidate::Det(code)).unwrap();
        prop_assert!(r.optimal && !r.heuristic, "{:?}", r);
    }

    #[test]
    fn classical_costs_agree_with_neglog_synthesis(seed in any::<u64>(), lambda in 0.1f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = Instance::new(
            random_simplex(&mut rng, 3),
            random_stochastic(&mut rng, 3, 3),
            3,
            Cost::Tensor(vec![0.0; 81]),
        ).unwrap();
        let code = bijective_code(&inst, seed).unwrap();
        let pair = code_pair(&inst, &teamrelax::model::det_code_to_random(&code, &inst).unwrap());
        let spec = SynthesisSpec::new(FGenerator::NegLog, lambda, vec![0.0; 3], 0.0, 3, 3);
        let (delta, rho) = synthesize_costs(&inst, &pair, &spec).unwrap();
        let g = gastpar_costs(&inst, &pair, lambda, lambda, 0.0, &[0.0; 3], &[0.0; 3]).unwrap();
        for s in 0..3 {
            let shift = g.delta[s][0] - delta[s][0];
            for sh in 0..3 {
                prop_assert!((g.delta[s][sh] - delta[s][sh] - shift).abs() < 1e-9);
            }
        }
        let shift = g.rho[0] - rho[0];
        for x in 0..3 {
            prop_assert!((g.rho[x] - rho[x] - shift).abs() < 1e-9);
        }
    }
}
