mod common;

use bregman_qn::geometry::pythagorean_gap;
use bregman_qn::oracle::secant_projection;
use bregman_qn::updates::{v_bfgs_update_with, v_dfp_update_hessian, CoefficientPath};
use bregman_qn::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn potentials_for(n: usize) -> Vec<Potential> {
    let g = 0.9 / n as f64;
    vec![
        Potential::log(),
        Potential::power(g).unwrap(),
        Potential::power(-0.5).unwrap(),
        Potential::bounded(0.3).unwrap(),
        Potential::bounded(0.9).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn update_then_downdate_restores_factor(seed in any::<u64>(), n in 1usize..8) {
        let mut r = common::rng(seed);
        let a = common::random_pd(&mut r, n, 1e3);
        let v = common::gaussian_vector(&mut r, n);
        let up = a.factor().rank_one_update(&v, Sign::Plus).unwrap();
        let back = up.rank_one_update(&v, Sign::Minus).unwrap();
        let err = (back.reconstruct() - a.matrix()).norm() / a.matrix().norm();
        prop_assert!(err < 1e-10, "err = {err}");
    }

    #[test]
    fn log_det_matches_lu(seed in any::<u64>(), n in 1usize..9) {
        let mut r = common::rng(seed);
        let a = common::random_pd(&mut r, n, 1e4);
        let lu = a.matrix().clone().determinant();
        prop_assert!((a.log_det() - lu.ln()).abs() < 1e-10 * (1.0 + lu.ln().abs()));
    }

    #[test]
    fn builtin_potentials_are_admissible_below_threshold(n in 1usize..12, t in 0.01f64..0.99, c in 0.0f64..0.99) {
        let gamma = t / n as f64;
        prop_assert!(Potential::power(gamma).unwrap().validate(n).accepted());
        prop_assert!(Potential::bounded(c).unwrap().validate(n).accepted());
    }

    #[test]
    fn every_family_keeps_secant_and_pd(seed in any::<u64>(), n in 2usize..9) {
        let mut r = common::rng(seed);
        let b = common::random_pd(&mut r, n, 100.0);
        let pair = common::random_pair(&mut r, n);
        let mut families = vec![UpdateFamily::Bfgs, UpdateFamily::Dfp, UpdateFamily::SelfScaling];
        for p in potentials_for(n) {
            families.push(UpdateFamily::VBfgs(p.clone()));
            families.push(UpdateFamily::VDfp(p));
        }
        for fam in &families {
            let out = fam.apply(&b, &pair).unwrap();
            let defect = (out.matrix() * pair.s() - pair.y()).norm() / pair.y().norm();
            prop_assert!(defect <= 1e-10, "{fam}: defect {defect}");
            prop_assert!(nalgebra::Cholesky::new(out.matrix().clone()).is_some());
        }
    }

    #[test]
    fn vbfgs_determinant_solves_scalar_equation(seed in any::<u64>(), n in 2usize..8) {
        let mut r = common::rng(seed);
        let b = common::random_pd(&mut r, n, 100.0);
        let pair = common::random_pair(&mut r, n);
        let bar = bfgs_update(&b, &pair).unwrap();
        for pot in potentials_for(n) {
            let out = v_bfgs_update(&b, &pair, &pot).unwrap();
            // det B' = C·ν(det B')^{n-1} with C = det B_bfgs / ν(det B)^{n-1}
            let m = (n - 1) as f64;
            let lhs = out.log_det();
            let rhs = bar.log_det() - m * pot.log_nu_at_log(b.log_det()) + m * pot.log_nu_at_log(out.log_det());
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()), "{pot}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn power_closed_form_matches_scalar_solve(seed in any::<u64>(), n in 2usize..8, t in -2.0f64..0.95) {
        let mut r = common::rng(seed);
        let b = common::random_pd(&mut r, n, 100.0);
        let pair = common::random_pair(&mut r, n);
        let gamma = if t.abs() < 1e-3 { 0.5 / n as f64 } else { t / n as f64 };
        let pot = Potential::power(gamma).unwrap();
        let a = v_bfgs_update_with(&b, &pair, &pot, CoefficientPath::Auto).unwrap();
        let s = v_bfgs_update_with(&b, &pair, &pot, CoefficientPath::ScalarSolve).unwrap();
        let rel = (a.matrix() - s.matrix()).norm() / a.matrix().norm();
        prop_assert!(rel <= 1e-10, "rel {rel}");
    }

    #[test]
    fn pythagorean_identity_at_update(seed in any::<u64>(), n in 2usize..7) {
        let mut r = common::rng(seed);
        let b = common::random_pd(&mut r, n, 50.0);
        let pair = common::random_pair(&mut r, n);
        // A second point of M: the BFGS update of another PD matrix.
        let other = common::random_pd(&mut r, n, 50.0);
        let p = bfgs_update(&other, &pair).unwrap();
        for pot in potentials_for(n) {
            let bp = v_bfgs_update(&b, &pair, &pot).unwrap();
            let gap = pythagorean_gap(&p, &bp, &b, &pot).unwrap();
            prop_assert!(gap <= 1e-8, "{pot}: gap {gap}");
        }
    }

    #[test]
    fn divergence_is_nonnegative_and_vanishes_on_diagonal(seed in any::<u64>(), n in 1usize..7) {
        let mut r = common::rng(seed);
        let p = common::random_pd(&mut r, n, 100.0);
        let q = common::random_pd(&mut r, n, 100.0);
        for pot in potentials_for(n.max(2)) {
            if pot.ensure_admissible(n).is_err() {
                continue;
            }
            prop_assert!(v_bregman_divergence(&p, &q, &pot).unwrap() >= -1e-12);
            prop_assert!(v_bregman_divergence(&p, &p, &pot).unwrap().abs() <= 1e-10);
        }
    }

    #[test]
    fn theta_round_trip(seed in any::<u64>(), n in 1usize..7) {
        let mut r = common::rng(seed);
        let p = common::random_pd(&mut r, n, 100.0);
        for pot in potentials_for(n.max(2)) {
            if pot.ensure_admissible(n).is_err() {
                continue;
            }
            let back = invert_theta(&theta_coordinate(&p, &pot)).unwrap();
            prop_assert!((back.matrix() - p.matrix()).norm() <= 1e-9 * p.matrix().norm());
        }
    }

    #[test]
    fn chordal_generator_is_recognized(seed in any::<u64>(), n in 1usize..30) {
        let mut r = common::rng(seed);
        let pattern = common::random_chordal(&mut r, n);
        let tree = is_chordal(&pattern).unwrap();
        prop_assert!(tree.cliques().len() <= n);
        let mut seen: Vec<usize> = tree.residuals().iter().flatten().copied().collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        for (i, j) in pattern.edges() {
            prop_assert!(tree.cliques().iter().any(|c| c.contains(&i) && c.contains(&j)));
        }
    }

    #[test]
    fn completion_agrees_on_pattern_and_inverse_is_sparse(seed in any::<u64>(), n in 2usize..16) {
        let mut r = common::rng(seed);
        let pattern = common::random_chordal(&mut r, n);
        let tree = is_chordal(&pattern).unwrap();
        let full = common::random_pd(&mut r, n, 20.0);
        let f = clique_factorize(full.matrix(), &tree).unwrap();
        let x = f.completion();
        let scale = x.norm();
        for i in 0..n {
            for j in 0..n {
                if pattern.contains(i, j) {
                    prop_assert!((x[(i, j)] - full.matrix()[(i, j)]).abs() <= 1e-10 * scale);
                }
            }
        }
        let inv = f.inverse();
        prop_assert!(pattern.off_pattern_max(&inv) <= 1e-10 * inv.norm());
        // Independent formula for the inverse of the completion: clique
        // inverses minus separator inverses, each padded with zeros.
        let mut oracle = DMatrix::zeros(n, n);
        let mut pad = |idx: &[usize], sign: f64| {
            if idx.is_empty() {
                return;
            }
            let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| full.matrix()[(idx[a], idx[b])]);
            let si = sub.try_inverse().unwrap();
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    oracle[(i, j)] += sign * si[(a, b)];
                }
            }
        };
        for c in tree.cliques() {
            pad(c, 1.0);
        }
        for s in tree.separators() {
            pad(s, -1.0);
        }
        prop_assert!((&oracle - &inv).norm() <= 1e-9 * inv.norm());
        prop_assert!(((&x * &inv) - DMatrix::identity(n, n)).norm() <= 1e-9 * n as f64);
    }

    #[test]
    fn sparse_projection_matches_theta_on_pattern(seed in any::<u64>(), n in 2usize..12) {
        let mut r = common::rng(seed);
        let pattern = common::random_chordal(&mut r, n);
        let tree = is_chordal(&pattern).unwrap();
        let bbar = common::random_pd(&mut r, n, 50.0);
        for pot in potentials_for(n) {
            let bs = theta_v_project_sparse(&bbar, &pattern, &tree, &pot).unwrap();
            prop_assert!(pattern.off_pattern_max(bs.matrix()) <= 1e-10 * bs.matrix().norm());
            let ta = theta_coordinate(&bbar, &pot).matrix;
            let tb = theta_coordinate(&bs, &pot).matrix;
            let scale = ta.norm();
            for i in 0..n {
                for j in 0..n {
                    if pattern.contains(i, j) {
                        prop_assert!((ta[(i, j)] - tb[(i, j)]).abs() <= 1e-9 * scale);
                    }
                }
            }
            let p = common::random_sparse_pd(&mut r, &pattern);
            prop_assert!(pythagorean_gap(&p, &bs, &bbar, &pot).unwrap() <= 1e-8);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn vbfgs_matches_newton_oracle(seed in any::<u64>(), n in 2usize..5) {
        let mut r = common::rng(seed);
        let b = common::random_pd(&mut r, n, 20.0);
        let pair = common::random_pair(&mut r, n);
        for pot in potentials_for(n) {
            let fast = v_bfgs_update(&b, &pair, &pot).unwrap();
            let slow = secant_projection(&b, &pair, &pot).unwrap();
            let rel = (fast.matrix() - slow.matrix()).norm() / fast.matrix().norm();
            prop_assert!(rel <= 1e-6, "{pot}: rel {rel}");
        }
    }

    #[test]
    fn vdfp_matches_newton_oracle_on_inverse(seed in any::<u64>(), n in 2usize..5) {
        let mut r = common::rng(seed);
        let b = common::random_pd(&mut r, n, 20.0);
        let pair = common::random_pair(&mut r, n);
        let h = PDMatrix::new(b.inverse()).unwrap();
        for pot in potentials_for(n) {
            let fast = v_dfp_update_hessian(&b, &pair, &pot).unwrap();
            let slow = secant_projection(&h, &pair.swapped(), &pot).unwrap();
            let rel = (fast.inverse() - slow.matrix()).norm() / slow.matrix().norm();
            prop_assert!(rel <= 1e-6, "{pot}: rel {rel}");
        }
    }

    #[test]
    fn sparse_projection_matches_newton_oracle(seed in any::<u64>(), n in 2usize..6) {
        let mut r = common::rng(seed);
        let pattern = common::random_chordal(&mut r, n);
        let tree = is_chordal(&pattern).unwrap();
        let bbar = common::random_pd(&mut r, n, 20.0);
        for pot in potentials_for(n) {
            let fast = theta_v_project_sparse(&bbar, &pattern, &tree, &pot).unwrap();
            let slow = bregman_qn::oracle::sparse_projection(&bbar, &pattern, &pot).unwrap();
            let rel = (fast.matrix() - slow.matrix()).norm() / fast.matrix().norm();
            prop_assert!(rel <= 1e-6, "{pot}: rel {rel}");
        }
    }
}
