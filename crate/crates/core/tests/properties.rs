use lyapcert::gozlan::{cutoff_phi, d_omega, lambda_constants, GozlanParameters, A_DEFAULT};
use lyapcert::jump::{delta_search, BirthDeathChain};
use lyapcert::moments::recursion_bounds;
use lyapcert::oracle::{finite_diff_audit, random_smooth_expression};
use lyapcert::{parse, DiffusionProblem, LyapunovConstants};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symbolic_derivative_matches_differences(seed in any::<u64>(), x in prop::array::uniform2(-2.0f64..2.0)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_smooth_expression(&mut rng, 2, 4);
        let r = finite_diff_audit(&e, &x, 1e-3).unwrap();
        prop_assert!(r.passed, "{} at {:?}: {:?}", e, x, r);
    }

    #[test]
    fn display_round_trips(seed in any::<u64>(), x in prop::array::uniform2(-2.0f64..2.0)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_smooth_expression(&mut rng, 2, 4);
        let back = parse(&e.to_string(), 2).unwrap();
        let (a, b) = (e.eval(&x).unwrap(), back.eval(&x).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{} -> {}: {} vs {}", e, back, a, b);
    }

    #[test]
    fn moment_bounds_monotone(c in 0.05f64..2.0, b in 0.0f64..3.0, dc in 0.0f64..1.0, db in 0.0f64..1.0) {
        let base = recursion_bounds(c, b, 16).unwrap();
        let more_b = recursion_bounds(c, b + db, 16).unwrap();
        let more_c = recursion_bounds(c + dc, b, 16).unwrap();
        for n in 0..=16 {
            prop_assert!(base[n] <= more_b[n], "b at n = {}", n);
            prop_assert!(more_c[n] <= base[n], "c at n = {}", n);
        }
    }

    #[test]
    fn u_form_identity(alpha in 0.01f64..0.5, beta in -1.0f64..1.0, x in -3.0f64..3.0) {
        let p = DiffusionProblem::new(parse("x^2/2 + x^4/20", 1).unwrap(), vec![0.0]).unwrap();
        let u_text = format!("{alpha}*x^2 + {beta}*x");
        let u = p.prepare(&parse(&u_text, 1).unwrap()).unwrap();
        let w = p.prepare(&parse(&format!("exp({u_text})"), 1).unwrap()).unwrap();
        let k = LyapunovConstants::new(1.0, 1.0).unwrap();
        let u_form = p.check_u_form(&u, k, &[x]).unwrap() - x * x + 1.0;
        let direct = p.generator_apply(&w, &[x]).unwrap() / w.value.eval(&[x]).unwrap();
        prop_assert!((u_form - direct).abs() <= 1e-10 * direct.abs().max(1.0), "{} vs {}", u_form, direct);
    }

    #[test]
    fn rho_is_additive(a in 0.5f64..3.0, alpha in 0.0f64..2.0, i in 0usize..300, j in 0usize..300, k in 0usize..300) {
        let t = BirthDeathChain::log_family(a, alpha).tabulate(300).unwrap();
        let mut v = [i, j, k];
        v.sort_unstable();
        let [i, j, k] = v;
        prop_assert_eq!(t.rho_between(i, j) + t.rho_between(j, k), t.rho_between(i, k));
    }

    #[test]
    fn delta_star_monotone(c in 0.01f64..5.0, k in 0.0f64..50.0, dc in 0.0f64..1.0, dk in 0.0f64..10.0) {
        let base = delta_search(c, k).unwrap().delta_star;
        let more_k = delta_search(c, k + dk).unwrap().delta_star;
        let more_c = delta_search(c + dc, k).unwrap().delta_star;
        prop_assert!(more_k <= base * (1.0 + 1e-6), "K: {} > {}", more_k, base);
        prop_assert!(base <= more_c * (1.0 + 1e-6), "c: {} > {}", base, more_c);
    }

    #[test]
    fn cutoff_is_c1(r in 0.0f64..10.0, n in 0.5f64..10.0, s in -1.0f64..25.0) {
        let h = 1e-7;
        for edge in [r, r + n] {
            let (lo, dlo) = cutoff_phi(edge - h, r, n);
            let (hi, dhi) = cutoff_phi(edge + h, r, n);
            prop_assert!((lo - hi).abs() < 1e-6);
            prop_assert!((dlo - dhi).abs() < 1e-5);
        }
        let (v, d) = cutoff_phi(s, r, n);
        prop_assert!((0.0..=1.0).contains(&v));
        let fd = (cutoff_phi(s + h, r, n).0 - cutoff_phi(s - h, r, n).0) / (2.0 * h);
        prop_assert!((fd - d).abs() < 1e-5, "{} vs {}", fd, d);
    }

    #[test]
    fn d_omega_is_a_metric(x in prop::array::uniform3(-50.0f64..50.0), y in prop::array::uniform3(-50.0f64..50.0), z in prop::array::uniform3(-50.0f64..50.0)) {
        prop_assert_eq!(d_omega(&x, &y), d_omega(&y, &x));
        prop_assert_eq!(d_omega(&x, &x), 0.0);
        prop_assert!(d_omega(&x, &z) <= d_omega(&x, &y) + d_omega(&y, &z) + 1e-12);
    }

    #[test]
    fn lambda2_grows_with_eps1(m in 1usize..6, f in 0.05f64..0.95, g in 0.05f64..0.95) {
        let eps2 = 1e-3;
        let hi = (1.0 - A_DEFAULT - 3.0 * eps2) - (4.0 / 27.0) * (m as f64 - 1.0) / m as f64;
        let (e1, e2) = (hi * f.min(g), hi * f.max(g));
        let params = |eps1: f64| GozlanParameters {
            m,
            eps: 1e-3,
            eps1,
            eps2,
            eps3: 1.0 - A_DEFAULT - eps1 - 3.0 * eps2,
            r: 1.0,
            a: A_DEFAULT,
        };
        if let (Ok(a), Ok(b)) = (lambda_constants(&params(e1)), lambda_constants(&params(e2))) {
            prop_assert!(a.lambda2 <= b.lambda2 * (1.0 + 1e-12));
            if m == 1 {
                prop_assert!(b.lambda1 <= a.lambda1 * (1.0 + 1e-12));
            }
        }
    }
}
