use gtlab::measure_core::QuantileCurve;
use gtlab::surface_tension::{energy_integral, sigma, sigma_grad, sigma_gt, sigma_hessian, GradientPair};
use gtlab::variational::TriangleField;
use gtlab::{ExtReal, GtError};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn gp(a: f64, b: f64) -> GradientPair {
    GradientPair::new(a, b)
}

#[test]
fn symmetric_point_value() {
    let s = sigma(gp(0.5, 0.5)).unwrap();
    assert!((s - (1.0 - PI.ln())).abs() < 1e-15);
    assert!((s + 0.144730).abs() < 1e-6);
}

#[test]
fn homogeneity_with_factor_three() {
    let (a, b) = (0.37, 1.21);
    let d = sigma(gp(3.0 * a, 3.0 * b)).unwrap() - sigma(gp(a, b)).unwrap();
    assert!((d - 3f64.ln()).abs() < 1e-14);
}

#[test]
fn swap_symmetry() {
    assert!((sigma(gp(1.0, 2.0)).unwrap() - sigma(gp(2.0, 1.0)).unwrap()).abs() < 1e-15);
}

#[test]
fn off_quadrant_is_domain_error() {
    assert!(matches!(sigma(gp(0.0, 1.0)), Err(GtError::Domain(_))));
    assert!(matches!(sigma(gp(1.0, -2.0)), Err(GtError::Domain(_))));
    assert!(matches!(sigma_grad(gp(-1.0, 1.0)), Err(GtError::Domain(_))));
}

#[test]
fn sigma_gt_sentinel_and_negation() {
    assert_eq!(sigma_gt(gp(1.0, 0.0)), ExtReal::PosInf);
    assert_eq!(sigma_gt(gp(0.5, 0.5)), ExtReal::Finite(PI.ln() - 1.0));
    let u = gp(0.8, 2.3);
    assert_eq!(sigma_gt(u).value().unwrap() + sigma(u).unwrap(), 0.0);
}

#[test]
fn gradient_at_symmetric_point() {
    let g = sigma_grad(gp(0.5, 0.5)).unwrap();
    assert!((g.u1 - 1.0).abs() < 1e-15 && (g.u2 - 1.0).abs() < 1e-15);
}

#[test]
fn gradient_matches_central_differences() {
    let u = gp(1.0, 2.0);
    let g = sigma_grad(u).unwrap();
    let h = 1e-5;
    let d1 = (sigma(gp(1.0 + h, 2.0)).unwrap() - sigma(gp(1.0 - h, 2.0)).unwrap()) / (2.0 * h);
    let d2 = (sigma(gp(1.0, 2.0 + h)).unwrap() - sigma(gp(1.0, 2.0 - h)).unwrap()) / (2.0 * h);
    assert!((d1 - g.u1).abs() <= 1e-6 * g.u1.abs());
    assert!((d2 - g.u2).abs() <= 1e-6 * g.u2.abs().max(1e-3));
}

#[test]
fn euler_relation_at_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let u = gp(rng.random_range(0.05..5.0), rng.random_range(0.05..5.0));
        let g = sigma_grad(u).unwrap();
        assert!((u.u1 * g.u1 + u.u2 * g.u2 - 1.0).abs() < 1e-12);
    }
}

#[test]
fn hessian_is_negative_semidefinite_and_kills_radial_direction() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let u = gp(rng.random_range(0.05..5.0), rng.random_range(0.05..5.0));
        let h = sigma_hessian(u).unwrap();
        assert!(h[0][0] <= 0.0 && h[1][1] <= 0.0);
        let det = h[0][0] * h[1][1] - h[0][1] * h[0][1];
        assert!(det >= -1e-9 * (h[0][0] * h[1][1]).abs());
        // σ(λu) − σ(u) = log λ gives H·u = −∇σ
        let g = sigma_grad(u).unwrap();
        let hu = [h[0][0] * u.u1 + h[0][1] * u.u2, h[0][1] * u.u1 + h[1][1] * u.u2];
        assert!((hu[0] + g.u1).abs() < 1e-9 * (1.0 + g.u1.abs()));
        assert!((hu[1] + g.u2).abs() < 1e-9 * (1.0 + g.u2.abs()));
    }
}

#[test]
fn convexity_of_sigma_gt_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..10_000 {
        let u = gp(rng.random_range(1e-3..10.0), rng.random_range(1e-3..10.0));
        let v = gp(rng.random_range(1e-3..10.0), rng.random_range(1e-3..10.0));
        let l: f64 = rng.random_range(0.0..1.0);
        let w = gp(l * u.u1 + (1.0 - l) * v.u1, l * u.u2 + (1.0 - l) * v.u2);
        let lhs = sigma_gt(w).value().unwrap();
        let rhs = l * sigma_gt(u).value().unwrap() + (1.0 - l) * sigma_gt(v).value().unwrap();
        assert!(lhs <= rhs + 1e-12, "{lhs} > {rhs}");
    }
}

#[test]
fn lipschitz_bound_with_constant_ten() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..10_000 {
        let u = gp(rng.random_range(1e-3..10.0), rng.random_range(1e-3..10.0));
        let m = u.u1.min(u.u2);
        let h1 = rng.random_range(-0.5..0.5) * m;
        let h2 = rng.random_range(-0.5..0.5) * m;
        let d = (sigma(gp(u.u1 + h1, u.u2 + h2)).unwrap() - sigma(u).unwrap()).abs();
        assert!(d <= 10.0 * (h1.abs() + h2.abs()) / m + 1e-14);
    }
}

#[test]
fn sandwich_bound_pointwise() {
    let c1 = 1.0 + (1.0 - (PI / 2.0).powi(2) / 6.0).ln();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10_000 {
        let u = gp(rng.random_range(1e-4..10.0), rng.random_range(1e-4..10.0));
        let s = sigma(u).unwrap();
        let lm = u.u1.min(u.u2).ln();
        assert!(c1 + lm <= s + 1e-13 && s <= 1.0 + lm + 1e-13);
    }
}

fn identity_rho() -> QuantileCurve {
    QuantileCurve::from_fn(1.0, 64, |r| r).unwrap()
}

#[test]
fn energy_of_affine_fields() {
    for &(a, b) in &[(0.5, 0.5), (0.3, 0.7), (0.9, 0.1)] {
        let f = TriangleField::from_fn(12, identity_rho(), |s, t| a * s + b * t).unwrap();
        let e = energy_integral(&f).unwrap();
        let want = 0.5 * sigma_gt(gp(a, b)).value().unwrap();
        assert!((e - want).abs() < 1e-12, "{e} vs {want}");
    }
    let f = TriangleField::from_fn(9, identity_rho(), |s, t| 0.5 * (s + t)).unwrap();
    assert!((energy_integral(&f).unwrap() - 0.5 * (PI.ln() - 1.0)).abs() < 1e-13);
}

#[test]
fn infeasible_cell_is_named() {
    let mut f = TriangleField::from_fn(6, identity_rho(), |s, t| 0.5 * (s + t)).unwrap();
    let v = f.at(3, 1);
    f.set(3, 1, v + 1.0).unwrap();
    match energy_integral(&f) {
        Err(GtError::Infeasible { cell, .. }) => assert!(cell.starts_with('(')),
        other => panic!("expected infeasible error, got {other:?}"),
    }
}

proptest! {
    #[test]
    fn symmetry_and_homogeneity(a in 1e-3f64..50.0, b in 1e-3f64..50.0, l in 1e-2f64..100.0) {
        let s = sigma(gp(a, b)).unwrap();
        prop_assert!((s - sigma(gp(b, a)).unwrap()).abs() <= 1e-13 * (1.0 + s.abs()));
        let d = sigma(gp(l * a, l * b)).unwrap() - s;
        prop_assert!((d - l.ln()).abs() <= 1e-12 * (1.0 + s.abs() + l.ln().abs()));
    }

    #[test]
    fn gradient_matches_differences(a in 0.05f64..5.0, b in 0.05f64..5.0) {
        let g = sigma_grad(gp(a, b)).unwrap();
        let h = 1e-6 * a.min(b);
        let d1 = (sigma(gp(a + h, b)).unwrap() - sigma(gp(a - h, b)).unwrap()) / (2.0 * h);
        let d2 = (sigma(gp(a, b + h)).unwrap() - sigma(gp(a, b - h)).unwrap()) / (2.0 * h);
        let scale = g.u1.abs() + g.u2.abs();
        prop_assert!((d1 - g.u1).abs() <= 1e-6 * scale);
        prop_assert!((d2 - g.u2).abs() <= 1e-6 * scale);
    }
}
