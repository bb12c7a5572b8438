mod common;

use fluidmatch::lp::{optimality_residuals, solve_fluid_lp};
use fluidmatch::{cost, MatchingInstance};
use proptest::prelude::*;
use rand::Rng;

use common::{interior_point, random_instance, rng, seeds};

fn coefficient_scale(inst: &MatchingInstance, lambda: &[f64]) -> f64 {
    inst.max_cost()
        .max(lambda.iter().copied().fold(1.0, f64::max))
        .max(inst.theta.iter().copied().fold(1.0, f64::max))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn solutions_are_feasible_and_complementary(seed in seeds(), n in 1usize..=5) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, n, false, false);
        let lambda = interior_point(&mut r, &inst, 0.0);
        let sol = solve_fluid_lp(&inst, &lambda).unwrap();
        let res = optimality_residuals(&inst, &lambda, &sol);
        let scale = coefficient_scale(&inst, &lambda);
        prop_assert!(res.max() <= 1e-8 * scale * scale, "{res:?}");
    }

    #[test]
    fn repeated_solves_are_bitwise_identical(seed in seeds(), n in 1usize..=5) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, n, false, false);
        let lambda = interior_point(&mut r, &inst, 0.0);
        let a = solve_fluid_lp(&inst, &lambda).unwrap();
        let b = solve_fluid_lp(&inst, &lambda).unwrap();
        prop_assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        prop_assert_eq!(a.basis_tag, b.basis_tag);
    }

    #[test]
    fn infinite_patience_cost_is_linear(seed in seeds(), n in 1usize..=5) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, n, false, true);
        let lambda = interior_point(&mut r, &inst, 0.0);
        let half: f64 = inst.solo_cost.iter().zip(&lambda).map(|(c, l)| c * l / 2.0).sum();
        prop_assert!((cost(&inst, &lambda).unwrap() - half).abs() <= 1e-9);
    }

    #[test]
    fn cost_per_unit_rate_falls_with_scale(seed in seeds(), n in 1usize..=5, alpha in 1.0f64..=2.0) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, n, false, false);
        // Half the box, so the scaled point stays inside.
        let lambda: Vec<f64> = (0..n).map(|_| r.gen_range(0.01..10.0)).collect();
        let scaled: Vec<f64> = lambda.iter().map(|l| l * alpha).collect();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let a = cost(&inst, &lambda).unwrap() / norm(&lambda);
        let b = cost(&inst, &scaled).unwrap() / norm(&scaled);
        prop_assert!(b <= a + 1e-9, "{b} > {a}");
    }

    #[test]
    fn dual_slope_matches_finite_differences(seed in seeds(), n in 1usize..=4) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, n, false, false);
        let lambda = interior_point(&mut r, &inst, 0.5);
        let sol = solve_fluid_lp(&inst, &lambda).unwrap();
        let grad = sol.envelope_gradient();
        let h = 1e-6;
        for i in 0..n {
            let mut up = lambda.clone();
            up[i] += h;
            let mut down = lambda.clone();
            down[i] -= h;
            let (su, sd) = (solve_fluid_lp(&inst, &up).unwrap(), solve_fluid_lp(&inst, &down).unwrap());
            // Only inside a linearity region is the slope a plain derivative.
            if su.basis_tag != sol.basis_tag || sd.basis_tag != sol.basis_tag {
                continue;
            }
            let fd = (su.objective - sd.objective) / (2.0 * h);
            prop_assert!((fd - grad[i]).abs() <= 1e-5, "coord {i}: fd {fd} vs dual {}", grad[i]);
        }
    }

    #[test]
    fn relabeling_types_leaves_cost_unchanged(seed in seeds(), n in 2usize..=5) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, n, false, false);
        let lambda = interior_point(&mut r, &inst, 0.0);
        let perm: Vec<usize> = (0..n).rev().collect();
        let permuted_lambda: Vec<f64> = perm.iter().map(|&p| lambda[p]).collect();
        let a = cost(&inst, &lambda).unwrap();
        let b = cost(&inst.permuted(&perm), &permuted_lambda).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }
}
