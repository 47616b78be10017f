use gtlab::free_compression::{build_flow_semicircle, DEFAULT_EPS0};
use gtlab::gt_engine::weyl_log_volume;
use gtlab::measure_core::{free_entropy_quantile, semicircle_quantile, QuantileCurve};
use gtlab::surface_tension::{sigma_gt, GradientPair};
use gtlab::variational::*;
use gtlab::GtError;
use proptest::prelude::*;

fn linear_rho(c: f64) -> QuantileCurve {
    QuantileCurve::from_fn(1.0, 2000, |r| c * r).unwrap()
}

fn semicircle_rho() -> QuantileCurve {
    QuantileCurve::from_fn(1.0, 4000, semicircle_quantile).unwrap()
}

#[test]
fn affine_energy_is_area_times_sigma() {
    for (a, b) in [(1.0, 1.0), (0.3, 2.2), (2.5, 0.4)] {
        let f = TriangleField::from_fn(12, linear_rho(a + b), |s, t| a * s + b * t).unwrap();
        let exact = 0.5 * sigma_gt(GradientPair::new(a, b)).to_f64();
        assert!((discrete_energy(&f).unwrap() - exact).abs() < 1e-12);
    }
}

#[test]
fn energy_refines_at_rate_one_over_m() {
    let rho = QuantileCurve::from_fn(1.0, 4000, |r| 2.0 * r + 0.2 * r * r).unwrap();
    let v = |s: f64, t: f64| s + t + 0.1 * s * s + 0.1 * t * t + 0.05 * (s - t) * s;
    let e: Vec<f64> = [8usize, 16, 32, 64]
        .iter()
        .map(|&m| discrete_energy(&TriangleField::from_fn(m, rho.clone(), v).unwrap()).unwrap())
        .collect();
    let d: Vec<f64> = e.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let c = d[0] * 8.0;
    for (k, dk) in d.iter().enumerate() {
        let m = 8.0 * 2f64.powi(k as i32);
        assert!(*dk <= 1.5 * c / m, "step {k}: {dk} vs C/m = {}", c / m);
    }
}

#[test]
fn infeasible_field_is_an_error() {
    let f = TriangleField::from_fn(4, linear_rho(1.0), |s, t| 1.5 * s - 0.5 * t).unwrap();
    assert!(matches!(discrete_energy(&f), Err(GtError::Infeasible { .. })));
}

#[test]
fn semicircle_minimizer_energy_is_minus_five_eighths() {
    let f = minimize_energy(&semicircle_rho(), 32, 1e-8, 200).unwrap();
    let e = discrete_energy(&f).unwrap();
    assert!((e + 0.625).abs() < 2e-2, "{e}");
    assert!(f.is_feasible());
}

#[test]
fn uniform_minimizer_energy_is_minus_half_log_c() {
    for c in [0.5, 2.0] {
        let f = minimize_energy(&linear_rho(c), 32, 1e-8, 200).unwrap();
        let e = discrete_energy(&f).unwrap();
        assert!((e + 0.5 * f64::ln(c)).abs() < 2e-2, "c = {c}: {e}");
    }
}

#[test]
fn minimization_descends_from_the_start() {
    let rho = QuantileCurve::from_fn(1.0, 2000, |r| r + r.powi(3)).unwrap();
    let (f, rep) = minimize_energy_report(&rho, 12, 1e-8, 200).unwrap();
    let start = discrete_energy(&TriangleField::max_extension(12, rho).unwrap()).unwrap();
    assert!(discrete_energy(&f).unwrap() <= start);
    assert!(rep.energies.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(rep.gradient_norm <= 1e-8);
}

#[test]
fn minimizer_rejects_bad_input() {
    assert!(minimize_energy(&linear_rho(1.0), 4, 1e-8, 10).is_err());
    let flat = QuantileCurve::from_fn(1.0, 100, |r| (r - 0.5).max(0.0)).unwrap();
    assert!(matches!(minimize_energy(&flat, 8, 1e-8, 10), Err(GtError::InvalidInput(_))));
}

#[test]
fn iteration_cap_reports_gradient_norm() {
    match minimize_energy(&semicircle_rho(), 16, 1e-14, 1) {
        Err(GtError::Convergence { residual, .. }) => assert!(residual > 0.0),
        other => panic!("expected non-convergence, got {other:?}"),
    }
}

#[test]
fn euler_lagrange_residual_halves_in_the_bulk() {
    let rho = QuantileCurve::from_fn(1.0, 4000, |r| 2.0 * r + 0.5 * r * r).unwrap();
    let bulk = |m: usize| -> f64 {
        let f = minimize_energy(&rho, m, 1e-10, 200).unwrap();
        [(0.5, 0.25), (0.75, 0.25), (0.75, 0.5), (0.625, 0.375)]
            .iter()
            .map(|&(s, t)| {
                let (i, j) = ((s * m as f64) as usize, (t * m as f64) as usize);
                fd_el_residual(&f, i, j).unwrap().abs()
            })
            .fold(0.0, f64::max)
    };
    let (r16, r32) = (bulk(16), bulk(32));
    assert!(r32 <= 0.6 * r16, "{r16} -> {r32}");
}

#[test]
fn rate_vanishes_at_the_minimizer() {
    for rho in [semicircle_rho(), linear_rho(2.0)] {
        let f = minimize_energy(&rho, 32, 1e-8, 200).unwrap();
        let chi = free_entropy_quantile(&rho).unwrap();
        assert!(rate_functional(&f).unwrap().abs() < 2e-2, "chi = {chi}");
    }
}

/// Shared-diagonal feasible fields for ρ(s) = 2s.
fn bent(a: f64, e1: f64, e2: f64) -> impl Fn(f64, f64) -> f64 {
    move |s, t| a * s + (2.0 - a) * t + e1 * (s - t) * s * (1.0 - s) + e2 * (s - t) * t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn discrete_energy_is_convex(a in 0.4f64..1.6, b in 0.4f64..1.6,
                                 e1 in -0.3f64..0.3, e2 in -0.3f64..0.3,
                                 g1 in -0.3f64..0.3, g2 in -0.3f64..0.3) {
        let g = TriangleField::from_fn(10, linear_rho(2.0), bent(a, e1, e2)).unwrap();
        let h = TriangleField::from_fn(10, linear_rho(2.0), bent(b, g1, g2)).unwrap();
        prop_assume!(g.is_feasible() && h.is_feasible());
        let mid = g.midpoint(&h).unwrap();
        let lhs = discrete_energy(&mid).unwrap();
        let rhs = 0.5 * discrete_energy(&g).unwrap() + 0.5 * discrete_energy(&h).unwrap();
        prop_assert!(lhs <= rhs + 1e-10);
    }

    #[test]
    fn rate_is_nonnegative(a in 0.3f64..1.7, e1 in -0.3f64..0.3, e2 in -0.3f64..0.3) {
        let f = TriangleField::from_fn(16, linear_rho(2.0), bent(a, e1, e2)).unwrap();
        prop_assume!(f.is_feasible());
        prop_assert!(rate_functional(&f).unwrap() >= 0.0);
    }
}

#[test]
fn compression_surface_diagonal_and_energy() {
    let flow = build_flow_semicircle(0.0, 1.0, 32, DEFAULT_EPS0, 4000).unwrap();
    let f = compression_surface(&flow, 32).unwrap();
    for i in 0..=32 {
        let s = i as f64 / 32.0;
        assert!((f.at(i, i) - semicircle_quantile(s)).abs() < 1e-3, "s = {s}");
    }
    assert!(f.is_feasible());
    let e = discrete_energy(&f).unwrap();
    assert!((e + 0.625).abs() < 2e-2, "{e}");
}

#[test]
fn compression_surface_matches_minimizer_in_the_bulk() {
    let flow = build_flow_semicircle(0.0, 1.0, 32, DEFAULT_EPS0, 4000).unwrap();
    let cs = compression_surface(&flow, 32).unwrap();
    let min = minimize_energy(&semicircle_rho(), 32, 1e-8, 200).unwrap();
    for i in 0..=32 {
        for j in 0..=i {
            let (s, t) = (i as f64 / 32.0, j as f64 / 32.0);
            if 1.0 - s + t > 0.25 && t > 0.1 && s < 0.9 {
                assert!((cs.at(i, j) - min.at(i, j)).abs() < 5e-3, "({s}, {t})");
            }
        }
    }
}

#[test]
fn compression_surface_needs_enough_slices() {
    let flow = build_flow_semicircle(0.0, 1.0, 8, DEFAULT_EPS0, 1000).unwrap();
    assert!(matches!(compression_surface(&flow, 32), Err(GtError::Resolution(_))));
    assert!(compression_surface(&flow, 16).is_ok());
}

#[test]
fn field_csv_has_header_and_all_nodes() {
    let f = TriangleField::from_fn(3, linear_rho(2.0), |s, t| s + t).unwrap();
    let csv = f.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("s,t,f"));
    assert_eq!(lines.count(), 10);
}

#[test]
fn unconstrained_band_recovers_weyl_volume() {
    let v = TriangleField::from_fn(8, linear_rho(2.0), |s, t| s + t).unwrap();
    for n in [4usize, 6] {
        let (est, se) = ldp_log_volume(&v, n, 1e3, 32_000, 3).unwrap();
        let bottom: Vec<f64> = (1..=n).map(|i| 2.0 * i as f64).collect();
        let exact = 2.0 / (n * n) as f64 * weyl_log_volume(&bottom).unwrap().to_f64();
        assert!((est - exact).abs() <= 3.0 * se + 1e-12, "N = {n}: {est} ± {se} vs {exact}");
    }
}

#[test]
fn two_level_band_is_an_interval() {
    let v = TriangleField::from_fn(4, linear_rho(2.0), |s, t| s + t).unwrap();
    // free value φ(2,1) ∈ (2, 4) ∩ [3 − 2δ, 3 + 2δ]
    for (delta, len) in [(0.3, 1.2), (0.8, 2.0), (0.05, 0.2)] {
        let (est, se) = ldp_log_volume(&v, 2, delta, 64, 1).unwrap();
        let exact = 0.5 * f64::ln(len);
        assert!((est - exact).abs() <= 3.0 * se + 1e-12, "δ = {delta}: {est} vs {exact}");
    }
}

#[test]
fn empty_band_gives_neg_infinity() {
    // a one-cell mesh interpolates ρ linearly, so Nρ(1/2) leaves a thin band
    let rho = QuantileCurve::from_fn(1.0, 1000, |r| r * r + r).unwrap();
    let v = TriangleField::from_fn(1, rho, |_, _| 1.0).unwrap();
    let (est, se) = ldp_log_volume(&v, 2, 0.01, 64, 1).unwrap();
    assert_eq!(est, f64::NEG_INFINITY);
    assert_eq!(se, 0.0);
}

#[test]
fn ldp_input_validation_and_determinism() {
    let v = TriangleField::from_fn(8, linear_rho(2.0), |s, t| s + t).unwrap();
    assert!(ldp_log_volume(&v, 15, 0.2, 1000, 1).is_err());
    assert!(ldp_log_volume(&v, 6, 0.0, 1000, 1).is_err());
    assert!(ldp_log_volume(&v, 6, 0.2, 4, 1).is_err());
    let bad = TriangleField::from_fn(8, linear_rho(2.0), |s, t| 2.5 * s - 0.5 * t).unwrap();
    assert!(ldp_log_volume(&bad, 6, 0.2, 1000, 1).is_err());
    assert_eq!(ldp_log_volume(&v, 6, 0.2, 3200, 9).unwrap(), ldp_log_volume(&v, 6, 0.2, 3200, 9).unwrap());
}

#[test]
fn ldp_rate_is_below_zero() {
    let v = TriangleField::from_fn(8, linear_rho(2.0), |s, t| s + t).unwrap();
    let (r, se) = ldp_rate(&v, 6, 0.2, 32_000, 4).unwrap();
    assert!(r < 0.0 && se < 1e-2, "{r} ± {se}");
}

#[test]
fn field_csv_round_trips() {
    let f = minimize_energy(&linear_rho(2.0), 8, 1e-8, 100).unwrap();
    let g = TriangleField::from_csv(&format!("# header\n{}", f.to_csv())).unwrap();
    assert_eq!(g.values(), f.values());
    assert!(TriangleField::from_csv("s,t,f\n0,0,1\n1,0,2\n").is_err());
}
