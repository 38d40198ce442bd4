use proptest::prelude::*;

use chemomorph::bifurcation::{
    classify_linear, classify_log, k3_general, linear_thresholds, log_intermediates, q_k, BranchStability, Direction,
    K3Sign,
};
use chemomorph::config::{parse_config, to_toml};
use chemomorph::linstab::{chi_k, mode_analysis};
use chemomorph::model::{nondimensionalize, ModelParams, RawParams, SensitivitySpec};
use chemomorph::pde::{dt_limit, step, Grid, SimulationState};
use chemomorph::steady::SteadyProblem;

fn spec(log: bool) -> SensitivitySpec {
    if log {
        SensitivitySpec::Logarithmic
    } else {
        SensitivitySpec::Linear
    }
}

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

fn params() -> impl Strategy<Value = ModelParams> {
    (
        log_uniform(1e-2, 1e1),
        log_uniform(1e-3, 1e1),
        log_uniform(1e-1, 1e2),
        log_uniform(1e-1, 1e1),
        log_uniform(0.5, 20.0),
        any::<bool>(),
    )
        .prop_map(|(d1, d2, chi, lambda, length, log)| {
            ModelParams::new(d1, d2, chi, lambda, length, spec(log)).unwrap()
        })
}

/// Smooth positive profile with a few random cosine modes.
fn profile(n: usize, base: f64, coeffs: &[f64]) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let x = (i as f64 + 0.5) / n as f64;
            let wave: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(m, c)| c * ((m + 1) as f64 * std::f64::consts::PI * x).cos())
                .sum();
            base * (1.0 + 0.2 * wave)
        })
        .collect()
}

fn mass(state: &SimulationState) -> f64 {
    state.u.iter().sum::<f64>() * state.grid.dx()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn nondimensionalize_is_scale_consistent(
        c in log_uniform(1e-2, 1e2),
        mu in log_uniform(1e-2, 1e2),
        lambda in log_uniform(1e-2, 1e2),
    ) {
        let raw = |mu, lambda| RawParams::new(1.0, 1.0, 1.0, lambda, mu, 1.0, 1.0, 1.0, SensitivitySpec::Linear).unwrap();
        let a = nondimensionalize(&raw(mu, lambda)).lambda;
        let b = nondimensionalize(&raw(c * mu, c * lambda)).lambda;
        prop_assert!((a - b).abs() <= 1e-14 * a);
    }

    #[test]
    fn sensitivity_derivatives_match_finite_differences(v in 0.1f64..10.0, log in any::<bool>()) {
        let s = spec(log);
        let h = 1e-5;
        let at = |v: f64| s.at(v).unwrap();
        let pairs = [
            ((at(v + h).phi - at(v - h).phi) / (2.0 * h), at(v).d1),
            ((at(v + h).d1 - at(v - h).d1) / (2.0 * h), at(v).d2),
            ((at(v + h).d2 - at(v - h).d2) / (2.0 * h), at(v).d3),
        ];
        for (numeric, analytic) in pairs {
            prop_assert!((numeric - analytic).abs() <= 1e-5 * analytic.abs().max(1.0), "{numeric} vs {analytic}");
        }
    }

    #[test]
    fn det_vanishes_at_threshold(p in params(), k in 1usize..12) {
        let chi = chi_k(&p, k).unwrap();
        let m = mode_analysis(&p.with_chi(chi), k).unwrap();
        prop_assert!(m.det.abs() <= 1e-12 * (m.j11 * m.j22).abs(), "det = {}", m.det);
    }

    #[test]
    fn det_is_affine_and_decreasing_in_chi(p in params(), k in 1usize..12, a in 0.0f64..50.0, b in 50.0f64..100.0) {
        let det = |chi| mode_analysis(&p.with_chi(chi), k).unwrap().det;
        let (da, db, dm) = (det(a), det(b), det(0.5 * (a + b)));
        prop_assert!(db < da);
        let scale = da.abs().max(db.abs());
        prop_assert!((dm - 0.5 * (da + db)).abs() <= 1e-12 * scale);
    }

    #[test]
    fn growth_iff_negative_det(p in params(), k in 1usize..12) {
        let m = mode_analysis(&p, k).unwrap();
        prop_assert!(m.trace < 0.0);
        let tol = 1e-12 * (m.j11 * m.j22).abs();
        prop_assume!(m.det.abs() > tol);
        prop_assert_eq!(m.is_growing(), m.det < 0.0);
    }

    #[test]
    fn repulsion_never_destabilizes(p in params(), k in 1usize..12) {
        let m = mode_analysis(&p.with_chi(-p.chi), k).unwrap();
        prop_assert!(m.det > 0.0 && m.trace < 0.0);
        prop_assert!(m.growth_rates.iter().all(|r| r.re < 0.0));
    }

    #[test]
    fn resonance_denominator_identity(p in params(), k in 1usize..8) {
        let mu = p.mu(k);
        let q = q_k(&p, k).unwrap();
        let ell = 1.0 + p.lambda;
        let lhs = 12.0 * p.d1 * mu * q - (12.0 * p.d1 * mu + 3.0) * ell;
        let rhs = 12.0 * p.d1 * p.d2 * mu * mu - 3.0 * ell;
        let scale = (12.0 * p.d1 * mu * q).abs() + (12.0 * p.d1 * mu + 3.0) * ell;
        prop_assert!((lhs - rhs).abs() <= 1e-14 * scale);
    }

    #[test]
    fn log_thresholds_are_consistent(p in params(), k in 1usize..8) {
        let lp = ModelParams { sensitivity: SensitivitySpec::Logarithmic, ..p };
        let li = log_intermediates(&lp, k);
        prop_assert!(li.delta > 0.0);
        prop_assert!(li.q_hat > 0.0);
        let mu = lp.mu(k);
        let den = 12.0 * lp.d1 * li.d2_double_star * mu * mu - 3.0 * (1.0 + lp.lambda);
        prop_assert!(den.abs() <= 1e-12 * 3.0 * (1.0 + lp.lambda));
        prop_assert!(li.d2_star_discrepancy() <= 1e-9, "discrepancy {}", li.d2_star_discrepancy());
    }

    #[test]
    fn linear_sign_rule(p in params(), k in 1usize..6) {
        let lp = ModelParams { sensitivity: SensitivitySpec::Linear, ..p };
        let (a, b) = linear_thresholds(&lp, k);
        let near = |t: f64| (lp.d2 - t).abs() <= 1e-6 * t;
        prop_assume!(!near(a) && !near(b));
        let c = classify_linear(&lp, k).unwrap();
        prop_assume!(c.k3_sign != K3Sign::Indeterminate);
        let expected = if (lp.d2 - a) * (lp.d2 - b) > 0.0 { K3Sign::Positive } else { K3Sign::Negative };
        prop_assert_eq!(c.k3_sign, expected);
        let general = k3_general(&lp, k).unwrap();
        prop_assert_eq!(general > 0.0, expected == K3Sign::Positive);
    }

    #[test]
    fn log_sign_matches_general(p in params(), k in 1usize..6) {
        let lp = ModelParams { sensitivity: SensitivitySpec::Logarithmic, ..p };
        let li = log_intermediates(&lp, k);
        let near = |t: f64| (lp.d2 - t).abs() <= 1e-6 * t.abs();
        prop_assume!(!near(li.d2_star) && !near(li.d2_double_star));
        let (c, _) = classify_log(&lp, k).unwrap();
        prop_assume!(c.k3_sign != K3Sign::Indeterminate);
        let general = k3_general(&lp, k).unwrap();
        prop_assert_eq!(general > 0.0, c.k3_sign == K3Sign::Positive);
    }

    #[test]
    fn sign_direction_stability_agree(p in params(), k in 1usize..6) {
        let lp = ModelParams { sensitivity: SensitivitySpec::Linear, ..p };
        let c = classify_linear(&lp, k).unwrap();
        let positive = c.k3_sign == K3Sign::Positive;
        prop_assert_eq!(positive, c.stability == BranchStability::Stable);
        prop_assert_eq!(positive, c.direction == Direction::Right);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn equilibrium_is_a_fixed_point(p in params(), n in 16usize..128, frac in 0.01f64..1.0) {
        let grid = Grid::new(n, p.length).unwrap();
        let eq = SimulationState::equilibrium(grid, &p);
        let dt = frac * dt_limit(&eq, &p).min(1.0);
        let next = step(&eq, &p, dt).unwrap();
        for (&u, &v) in next.u.iter().zip(&next.v) {
            prop_assert!((u - p.lambda).abs() <= 1e-14 * p.lambda);
            prop_assert!((v - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn mass_obeys_backward_euler_law(
        p in params(),
        n in 16usize..128,
        cu in prop::collection::vec(-1.0f64..1.0, 4),
        cv in prop::collection::vec(-1.0f64..1.0, 4),
        frac in 0.05f64..1.0,
    ) {
        let grid = Grid::new(n, p.length).unwrap();
        let mut u = profile(n, p.lambda, &cu);
        u[0] *= 1.5;
        let s = SimulationState::new(grid, u, profile(n, 1.0, &cv)).unwrap();
        let dt = frac * dt_limit(&s, &p).min(1e-2);
        let Ok(next) = step(&s, &p, dt) else { return Ok(()) };
        let target = p.lambda * p.length;
        let expected = target + (mass(&s) - target) / (1.0 + dt);
        prop_assert!((mass(&next) - expected).abs() <= 1e-12 * mass(&s).max(target));
    }

    #[test]
    fn admissible_steps_keep_u_nonnegative(
        p in params(),
        n in 16usize..128,
        cu in prop::collection::vec(-1.0f64..1.0, 4),
        cv in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let grid = Grid::new(n, p.length).unwrap();
        let s = SimulationState::new(grid, profile(n, p.lambda, &cu), profile(n, 1.0, &cv)).unwrap();
        let dt = dt_limit(&s, &p).min(1e-2);
        let next = step(&s, &p, dt).unwrap();
        prop_assert!(next.u.iter().all(|&u| u >= 0.0));
    }

    #[test]
    fn step_commutes_with_reflection(
        p in params(),
        n in 16usize..128,
        cu in prop::collection::vec(-1.0f64..1.0, 4),
        cv in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let grid = Grid::new(n, p.length).unwrap();
        let s = SimulationState::new(grid, profile(n, p.lambda, &cu), profile(n, 1.0, &cv)).unwrap();
        let dt = dt_limit(&s, &p).min(1e-2);
        let a = step(&s, &p, dt).unwrap().reflected();
        let b = step(&s.reflected(), &p, dt).unwrap();
        for (x, y) in a.u.iter().zip(&b.u).chain(a.v.iter().zip(&b.v)) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{x} vs {y}");
        }
    }

    #[test]
    fn jacobian_matches_finite_differences(
        p in params(),
        n in 8usize..64,
        cu in prop::collection::vec(-1.0f64..1.0, 4),
        cv in prop::collection::vec(-1.0f64..1.0, 4),
        dir in prop::collection::vec(-1.0f64..1.0, 128),
    ) {
        let grid = Grid::new(n, p.length).unwrap();
        let problem = SteadyProblem::new(grid, p.clone());
        let w = SteadyProblem::pack(&profile(n, p.lambda, &cu), &profile(n, 1.0, &cv));
        let d: Vec<f64> = dir[..2 * n].to_vec();
        let h = 1e-6;
        let shifted = |sign: f64| -> Vec<f64> {
            let x: Vec<f64> = w.iter().zip(&d).map(|(a, b)| a + sign * h * b).collect();
            problem.residual(&x).unwrap()
        };
        let (fp, fm) = (shifted(1.0), shifted(-1.0));
        let numeric: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let analytic = problem.jacobian(&w).unwrap().mul_vec(&d);
        let scale = analytic.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-8);
        for (a, b) in numeric.iter().zip(&analytic) {
            prop_assert!((a - b).abs() <= 1e-6 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn config_round_trips(
        d1 in log_uniform(1e-2, 1e1),
        d2 in log_uniform(1e-3, 1e1),
        chi in log_uniform(1e-1, 1e2),
        lambda in log_uniform(1e-1, 1e1),
        length in log_uniform(0.5, 20.0),
        log in any::<bool>(),
        k_max in 1usize..50,
    ) {
        let text = format!(
            "[model]\nd1 = {d1:?}\nd2 = {d2:?}\nchi = {chi:?}\nlambda = {lambda:?}\nlength = {length:?}\n\
             sensitivity = \"{}\"\n\n[analyze]\nk_max = {k_max}\n",
            if log { "log" } else { "linear" }
        );
        let first = parse_config(&text).unwrap();
        let second = parse_config(&to_toml(&first)).unwrap();
        prop_assert_eq!(first, second);
    }
}
