use gtlab::measure_core::*;
use gtlab::GtError;
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::{LN_2, PI};

/// Closed-form semicircle transform with the branch taking C+ to C−.
fn sc_cauchy(z: Complex64) -> Complex64 {
    let s = (z * z - 4.0).sqrt();
    let g1 = (z - s) / 2.0;
    let g2 = (z + s) / 2.0;
    if g1.im <= 0.0 { g1 } else { g2 }
}

/// Composite Gauss-Legendre (5-point) quadrature, used as an independent oracle.
fn gauss(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let x = [0.0, 0.538469310105683, -0.538469310105683, 0.906179845938664, -0.906179845938664];
    let w = [0.568888888888889, 0.478628670499366, 0.478628670499366, 0.236926885056189, 0.236926885056189];
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let c = a + (p as f64 + 0.5) * h;
        for i in 0..5 {
            acc += w[i] * f(c + 0.5 * h * x[i]) * 0.5 * h;
        }
    }
    acc
}

#[test]
fn uniform_quantile_is_identity() {
    let m = GridMeasure::uniform(0.0, 1.0, 200).unwrap();
    let q = quantile_of(&m, 100).unwrap();
    for (i, v) in q.values().iter().enumerate() {
        assert!((v - i as f64 / 100.0).abs() < 1e-12);
    }
    let m = GridMeasure::uniform(0.0, 3.0, 200).unwrap();
    let q = quantile_of(&m, 50).unwrap();
    for (i, v) in q.values().iter().enumerate() {
        assert!((v - 3.0 * i as f64 / 50.0).abs() < 1e-12);
    }
}

#[test]
fn semicircle_median_is_zero() {
    let m = GridMeasure::semicircle(DEFAULT_GRID).unwrap();
    let q = quantile_of(&m, 1000).unwrap();
    assert!(q.values()[500].abs() < 1e-9);
}

#[test]
fn zero_mass_quantile_is_invalid() {
    let m = GridMeasure::uniform(0.0, 1.0, 10).unwrap();
    let mut j = serde_json::to_value(&m).unwrap();
    j["density"] = serde_json::json!(vec![0.0; 11]);
    assert!(serde_json::from_value::<GridMeasure>(j).is_err());
}

#[test]
fn density_from_linear_quantiles() {
    let q = QuantileCurve::from_fn(1.0, 100, |r| r).unwrap();
    let m = density_from_quantile(&q).unwrap();
    assert!(m.density().iter().all(|f| (f - 1.0).abs() < 1e-12));
    let q = QuantileCurve::from_fn(1.0, 100, |r| 2.0 * r).unwrap();
    let m = density_from_quantile(&q).unwrap();
    assert_eq!((m.lo(), m.hi()), (0.0, 2.0));
    assert!(m.density().iter().all(|f| (f - 0.5).abs() < 1e-12));
}

#[test]
fn flat_quantile_is_singular() {
    let q = QuantileCurve::new(1.0, vec![0.0, 0.5, 0.5, 1.0]).unwrap();
    assert!(matches!(density_from_quantile(&q), Err(GtError::SingularDensity(_))));
}

#[test]
fn semicircle_density_from_quantile_samples() {
    let q = QuantileCurve::from_fn(1.0, DEFAULT_GRID, semicircle_quantile).unwrap();
    let m = density_from_quantile(&q).unwrap();
    let exact = GridMeasure::semicircle(8000).unwrap();
    let l1 = l1_distance(&m, &exact);
    assert!(l1 < 1e-2, "L1 = {l1}");
}

#[test]
fn quantile_round_trip_within_two_spacings() {
    let q = QuantileCurve::from_fn(1.0, 1000, |r| r + 0.3 * (PI * r).sin()).unwrap();
    let m = density_from_quantile(&q).unwrap();
    let back = quantile_of(&m, 1000).unwrap();
    let dx = m.step();
    for (a, b) in q.values().iter().zip(back.values()) {
        assert!((a - b).abs() <= 2.0 * dx, "{a} vs {b}");
    }
}

#[test]
fn semicircle_cauchy_at_2i() {
    let m = GridMeasure::semicircle(DEFAULT_GRID).unwrap();
    let z = Complex64::new(0.0, 2.0);
    let g = cauchy_transform(&m, z).unwrap();
    let expected = Complex64::new(0.0, 1.0 - 2f64.sqrt());
    assert!((g - expected).norm() < 1e-4, "{g}");
    assert!((g - sc_cauchy(z)).norm() < 1e-4);
}

#[test]
fn cauchy_far_field_leading_moment() {
    for m in [
        GridMeasure::semicircle(DEFAULT_GRID).unwrap(),
        GridMeasure::arcsine(DEFAULT_GRID).unwrap(),
        GridMeasure::uniform(-0.5, 3.0, 500).unwrap(),
    ] {
        for z in [Complex64::new(1e6, 0.0), Complex64::new(0.0, 1e6), Complex64::new(-7e5, 7e5)] {
            let g = cauchy_transform(&m, z).unwrap();
            assert!((z * g - 1.0).norm() < 1e-5, "{}", (z * g - 1.0).norm());
        }
    }
}

#[test]
fn uniform_cauchy_at_two() {
    let m = GridMeasure::uniform(0.0, 1.0, DEFAULT_GRID).unwrap();
    let g = cauchy_transform(&m, Complex64::new(2.0, 0.0)).unwrap();
    assert!((g.re - LN_2).abs() < 1e-6 && g.im.abs() < 1e-12);
}

#[test]
fn cauchy_is_in_lower_half_plane() {
    let m = GridMeasure::arcsine(500).unwrap();
    for k in 0..50 {
        let z = Complex64::new(-2.0 + 0.08 * k as f64, 1e-4 + 0.01 * k as f64);
        assert!(cauchy_transform(&m, z).unwrap().im < 0.0);
    }
}

#[test]
fn cauchy_on_support_is_pole_error() {
    let m = GridMeasure::semicircle(100).unwrap();
    assert!(matches!(
        cauchy_transform(&m, Complex64::new(0.3, 0.0)),
        Err(GtError::Pole(_))
    ));
    assert!(matches!(
        cauchy_transform(&m, Complex64::new(2.0, 0.0)),
        Err(GtError::Pole(_))
    ));
}

#[test]
fn cauchy_close_to_axis_matches_closed_form() {
    let m = GridMeasure::semicircle(DEFAULT_GRID).unwrap();
    for x in [-1.7, -0.4, 0.0, 0.9, 1.5] {
        let z = Complex64::new(x, 1e-3);
        let g = cauchy_transform(&m, z).unwrap();
        assert!((g - sc_cauchy(z)).norm() < 2e-4, "x = {x}: {g} vs {}", sc_cauchy(z));
    }
}

#[test]
fn potential_tails() {
    let m = GridMeasure::semicircle(400).unwrap();
    assert_eq!(log_potential_parts(&m, 5.0).1, 0.0);
    assert!((log_potential_parts(&m, -5.0).1 + 1.0).abs() < 1e-12);
}

#[test]
fn arcsine_equilibrium_potential() {
    let m = GridMeasure::arcsine(DEFAULT_GRID).unwrap();
    for x in [0.0, 0.35, -0.8] {
        let (u, _) = log_potential_parts(&m, x);
        assert!((u + LN_2 / PI).abs() < 1e-3, "U({x}) = {u}");
    }
}

#[test]
fn potential_matches_quadrature_oracle() {
    let m = GridMeasure::semicircle(DEFAULT_GRID).unwrap();
    for x in [-3.0, -1.0, 0.25, 1.9] {
        let (u, _) = log_potential_parts(&m, x);
        // split at x so the log singularity sits on a panel edge
        let f = |y: f64| (x - y).abs().ln() * semicircle_density(y) / PI;
        let oracle = if x.abs() < 2.0 {
            gauss(f, -2.0, x, 400) + gauss(f, x, 2.0, 400)
        } else {
            gauss(f, -2.0, 2.0, 400)
        };
        assert!((u - oracle).abs() < 1e-4, "x = {x}: {u} vs {oracle}");
    }
}

#[test]
fn potential_derivative_is_hilbert_part() {
    let m = GridMeasure::semicircle(DEFAULT_GRID).unwrap();
    let mut errs = Vec::new();
    for h in [0.04, 0.02] {
        let mut worst: f64 = 0.0;
        for x in [-1.2, -0.3, 0.5, 1.1] {
            let du = (log_potential_parts(&m, x + h).0 - log_potential_parts(&m, x - h).0) / (2.0 * h);
            let u = boundary_cauchy(&m, x).re / PI;
            // closed form Hilbert part of the semicircle: x/(2π)
            assert!((u - x / (2.0 * PI)).abs() < 1e-4);
            worst = worst.max((du - u).abs());
        }
        errs.push(worst);
    }
    assert!(errs[0] < 1e-3 && errs[1] < errs[0] / 3.0, "{errs:?}");
}

#[test]
fn free_entropy_reference_values() {
    let arc = GridMeasure::arcsine(DEFAULT_GRID).unwrap();
    let chi = free_entropy(&arc).unwrap();
    assert!((chi - (0.75 - LN_2 / 2.0)).abs() < 1e-3, "arcsine chi = {chi}");
    let sc = GridMeasure::semicircle(DEFAULT_GRID).unwrap();
    let chi = free_entropy(&sc).unwrap();
    assert!((chi - 0.625).abs() < 1e-3, "semicircle chi = {chi}");
    for c in [0.5, 2.0, 7.0] {
        let u = GridMeasure::uniform(0.0, c, DEFAULT_GRID).unwrap();
        let chi = free_entropy(&u).unwrap();
        assert!((chi - c.ln() / 2.0).abs() < 1e-6, "uniform c={c}: {chi}");
    }
}

#[test]
fn free_entropy_density_and_quantile_forms_agree() {
    for m in [
        GridMeasure::arcsine(DEFAULT_GRID).unwrap(),
        GridMeasure::semicircle(DEFAULT_GRID).unwrap(),
        GridMeasure::uniform(-1.0, 2.0, DEFAULT_GRID).unwrap(),
        GridMeasure::from_fn(0.0, 1.0, DEFAULT_GRID, |x| 1.0 + x * x).unwrap(),
    ] {
        let a = free_entropy(&m).unwrap();
        let b = free_entropy_quantile(&quantile_of(&m, DEFAULT_GRID).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-3, "{a} vs {b}");
    }
    let q = QuantileCurve::from_fn(1.0, DEFAULT_GRID, semicircle_quantile).unwrap();
    assert!((free_entropy_quantile(&q).unwrap() - 0.625).abs() < 1e-3);
}

#[test]
fn concentrated_measure_diverges() {
    let q = QuantileCurve::new(1.0, vec![0.0, 0.0, 0.0]).unwrap();
    assert!(matches!(free_entropy_quantile(&q), Err(GtError::Divergence(_))));
}

#[test]
fn json_round_trip_and_keywords() {
    let m = GridMeasure::semicircle(64).unwrap();
    let s = serde_json::to_string(&m).unwrap();
    assert!(s.contains("\"support\""));
    let back: GridMeasure = serde_json::from_str(&s).unwrap();
    assert_eq!(m, back);
    let bad = s.replacen("\"mass\"", "\"extra\":1,\"mass\"", 1);
    assert!(serde_json::from_str::<GridMeasure>(&bad).is_err());
    for k in ["semicircle", "arcsine", "uniform"] {
        let b = Builtin::from_keyword(k).unwrap().build(100).unwrap();
        assert!((b.trapezoid_mass() - 1.0).abs() < 1e-12);
    }
    assert!(Builtin::from_keyword("cauchy").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn stieltjes_inversion(seed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = rng.random_range(0.2..1.0);
        let b = rng.random_range(-0.5..0.5);
        let m = GridMeasure::from_fn(-1.0, 2.0, DEFAULT_GRID, |x| {
            1.0 + a * (x * 2.0).sin() + b * x * x + 0.5
        }).unwrap();
        for _ in 0..20 {
            let x = rng.random_range(-0.8..1.8);
            let g = cauchy_transform(&m, Complex64::new(x, 1e-3)).unwrap();
            let est = -g.im / PI;
            prop_assert!((est - m.density_at(x)).abs() < 1e-2);
        }
    }

    #[test]
    fn quantile_density_inverse(c1 in 0.1f64..2.0, c2 in 0.0f64..1.0) {
        let m = GridMeasure::from_fn(0.0, 1.0, 800, |x| c1 + c2 * x).unwrap();
        let q = quantile_of(&m, 800).unwrap();
        let back = density_from_quantile(&q).unwrap();
        prop_assert!(l1_distance(&m, &back) < 1e-2);
        let q2 = quantile_of(&back, 800).unwrap();
        for (a, b) in q.values().iter().zip(q2.values()) {
            prop_assert!((a - b).abs() <= 2.0 * back.step());
        }
    }
}
