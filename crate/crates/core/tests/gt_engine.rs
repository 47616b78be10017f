use gtlab::gt_engine::*;
use gtlab::stats::{energy_test, ks_statistic, ks_two_sample, mean_stderr};
use gtlab::ExtReal;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pattern(rows: Vec<Vec<f64>>) -> GTPattern {
    GTPattern::new(rows).unwrap()
}

#[test]
fn interlacing_examples() {
    assert!(check_interlacing(&pattern(vec![vec![0.5], vec![0.0, 1.0]])).valid);
    let r = check_interlacing(&pattern(vec![vec![1.5], vec![0.0, 1.0]]));
    assert!(!r.valid);
    assert_eq!(r.first_violation, Some((1, 1)));
}

#[test]
fn minor_process_always_interlaces() {
    for seed in 0..50 {
        let p = minor_eigen_process(&[-1.0, 0.2, 0.25, 3.0], seed).unwrap();
        assert!(check_interlacing(&p).valid);
        assert_eq!(p.bottom(), &[-1.0, 0.2, 0.25, 3.0]);
    }
}

#[test]
fn weyl_examples() {
    assert_eq!(weyl_log_volume(&[0.0, 1.0, 2.0]).unwrap(), ExtReal::Finite(0.0));
    assert_eq!(weyl_log_volume(&[0.0, 1.0]).unwrap(), ExtReal::Finite(0.0));
    assert_eq!(weyl_log_volume(&[0.0, 0.0, 1.0]).unwrap(), ExtReal::NegInf);
    assert!(weyl_log_volume(&[1.0, 0.0]).is_err());
}

#[test]
fn weyl_matches_rejection_volume() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [3usize, 4] {
        for trial in 0..3 {
            let mut s: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0).collect();
            s.sort_by(|a, b| a.total_cmp(b));
            let exact = weyl_log_volume(&s).unwrap().value().unwrap().exp();
            let (est, se) = rejection_gt_volume(&s, 400_000, 100 + trial).unwrap();
            assert!((est - exact).abs() <= 3.0 * se, "n = {n}: {est} ± {se} vs {exact}");
        }
    }
}

#[test]
fn one_dimensional_gibbs_is_uniform() {
    let draws = sample_uniform_batch(&[0.0, 1.0], 1, 5000, 3).unwrap();
    let x: Vec<f64> = draws.iter().map(|p| p.t(1, 1)).collect();
    assert!(ks_statistic(&x, |v| v.clamp(0.0, 1.0)) < 0.025);
}

#[test]
fn three_level_gibbs_mean_is_symmetric() {
    let draws = sample_uniform_batch(&[0.0, 1.0, 2.0], 200, 5000, 4).unwrap();
    let x: Vec<f64> = draws.iter().map(|p| p.t(1, 1)).collect();
    let (m, se) = mean_stderr(&x);
    assert!((m - 1.0).abs() < 3.0 * se, "{m} ± {se}");
}

#[test]
fn sampling_is_deterministic_given_seed() {
    let a = sample_uniform(&[0.0, 0.5, 2.0, 3.0], 20, 9).unwrap();
    let b = sample_uniform(&[0.0, 0.5, 2.0, 3.0], 20, 9).unwrap();
    assert_eq!(a, b);
    assert!(check_interlacing(&a).valid);
    assert!(sample_uniform(&[0.0, 0.0], 5, 1).is_err());
}

#[test]
fn haar_first_row_modulus_is_uniform() {
    let draws = minor_process_batch(&[0.0, 1.0], 5000, 8).unwrap();
    let x: Vec<f64> = draws.iter().map(|p| p.t(1, 1)).collect();
    assert!(ks_statistic(&x, |v| v.clamp(0.0, 1.0)) < 0.025);
}

/// Exact uniform sample on GT(0,1,2) by rejection from the bounding box.
fn rejection_sample(rng: &mut impl Rng) -> GTPattern {
    loop {
        let a: f64 = rng.random::<f64>();
        let b: f64 = 1.0 + rng.random::<f64>();
        let c: f64 = 2.0 * rng.random::<f64>();
        if a <= c && c <= b {
            return pattern(vec![vec![c], vec![a, b], vec![0.0, 1.0, 2.0]]);
        }
    }
}

#[test]
fn one_sweep_preserves_uniform_marginals() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let before: Vec<GTPattern> = (0..4000).map(|_| rejection_sample(&mut rng)).collect();
    let reference: Vec<GTPattern> = (0..4000).map(|_| rejection_sample(&mut rng)).collect();
    let after: Vec<GTPattern> = before
        .into_iter()
        .map(|mut p| {
            gibbs_sweep(&mut p, &mut rng);
            p
        })
        .collect();
    for (k, j) in [(1, 1), (2, 1), (2, 2)] {
        let x: Vec<f64> = after.iter().map(|p| p.t(k, j)).collect();
        let y: Vec<f64> = reference.iter().map(|p| p.t(k, j)).collect();
        let (_, pv) = ks_two_sample(&x, &y);
        assert!(pv > 0.01, "marginal ({k},{j}) p = {pv}");
    }
}

#[test]
fn gibbs_and_minor_process_agree_small() {
    let s = [-1.0, -0.2, 0.4, 1.3, 2.0];
    let g = sample_uniform_batch(&s, 250, 600, 31).unwrap();
    let m = minor_process_batch(&s, 600, 32).unwrap();
    let flat = |p: &GTPattern| p.rows[..4].concat();
    let x: Vec<Vec<f64>> = g.iter().map(flat).collect();
    let y: Vec<Vec<f64>> = m.iter().map(flat).collect();
    let t = energy_test(&x, &y, 199, 33);
    assert!(t.p_value > 0.01, "{t:?}");
}

#[test]
fn estimate_single_cell_is_exact() {
    let b = BoundaryField::linear(3, 0.5, 0.5).unwrap();
    let (est, se) = estimate_t(&b, 500, 1).unwrap();
    assert!((est - 1.0).abs() < 1e-12);
    assert!(se < 1e-12);
}

#[test]
fn estimate_rejects_tiny_sample_counts() {
    let b = BoundaryField::linear(4, 1.0, 1.0).unwrap();
    assert!(estimate_t(&b, 50, 1).is_err());
}

#[test]
fn estimate_is_zero_for_non_increasing_boundary() {
    let b = BoundaryField::linear(4, 1.0, -0.5).unwrap();
    assert_eq!(estimate_t(&b, 200, 1).unwrap(), (0.0, 0.0));
}

#[test]
fn estimate_homogeneity() {
    let b = BoundaryField::from_fn(4, |i, j| i as f64 * 0.9 + j as f64 * 0.7 + 0.1 * ((i * j) % 3) as f64).unwrap();
    let (e1, s1) = estimate_t(&b, 20_000, 2).unwrap();
    let (e2, s2) = estimate_t(&b.scaled(2.0), 20_000, 3).unwrap();
    let f = 2f64.powi(interior_count(4) as i32);
    let ratio = e2 / (f * e1);
    let se = ratio * ((s1 / e1).powi(2) + (s2 / e2).powi(2)).sqrt();
    assert!((ratio - 1.0).abs() < 3.0 * se, "ratio {ratio} ± {se}");
}

#[test]
fn estimate_respects_guaranteed_space() {
    let b = BoundaryField::from_fn(4, |i, j| 0.3 * (i + j) as f64 + 0.05 * (i * i) as f64)
        .unwrap()
        .with_spacing(0.3)
        .unwrap();
    let (est, se) = estimate_t(&b, 20_000, 4).unwrap();
    assert!(est >= 0.3f64.powi(interior_count(4) as i32) - 3.0 * se);
}

#[test]
fn estimate_symmetry_and_monotonicity() {
    let n = 5;
    let a = estimate_t(&BoundaryField::linear(n, 0.7, 1.6).unwrap(), 40_000, 10).unwrap();
    let b = estimate_t(&BoundaryField::linear(n, 1.6, 0.7).unwrap(), 40_000, 11).unwrap();
    assert!((a.0 - b.0).abs() < 3.0 * (a.1 * a.1 + b.1 * b.1).sqrt(), "{a:?} vs {b:?}");
    let c = estimate_t(&BoundaryField::linear(n, 1.7, 1.6).unwrap(), 40_000, 12).unwrap();
    assert!(c.0 >= a.0 - 3.0 * (a.1 * a.1 + c.1 * c.1).sqrt());
}

#[test]
fn estimate_is_translation_invariant() {
    let b = BoundaryField::linear(5, 0.8, 1.1).unwrap();
    let (e1, _) = estimate_t(&b, 5_000, 7).unwrap();
    let (e2, _) = estimate_t(&b.shifted(3.25), 5_000, 7).unwrap();
    assert!((e1 - e2).abs() < 1e-9 * e1);
}

#[test]
fn extension_of_linear_boundary() {
    let (u1, u2) = (0.8, 1.3);
    let b = BoundaryField::linear(5, u1, u2).unwrap();
    let c: f64 = u1.min(u2);
    let ext = spaced_extension(&b, c).unwrap();
    assert!(ext.is_c_spaced(c));
    for i in 0..=5 {
        for j in 0..=i {
            assert!(ext.at(i, j) <= u1 * i as f64 + u2 * j as f64 + 1e-12);
            if let Some(v) = b.get(i, j) {
                assert!((ext.at(i, j) - v).abs() < 1e-12);
            }
        }
    }
    let again = spaced_extension(&ext.boundary().unwrap(), c).unwrap();
    assert_eq!(again, ext);
}

#[test]
fn zero_spacing_gives_monotone_extension() {
    let b = BoundaryField::from_fn(5, |i, j| (i as f64).powf(1.3) + 0.5 * j as f64).unwrap();
    let ext = spaced_extension(&b, 0.0).unwrap();
    assert!(ext.is_c_spaced(0.0));
}

#[test]
fn extension_rejects_unspaced_boundary() {
    let b = BoundaryField::linear(4, 0.2, 1.0).unwrap();
    let e = spaced_extension(&b, 0.5).unwrap_err();
    assert!(matches!(e, gtlab::GtError::Precondition(ref m) if m.contains("pair")));
}

#[test]
fn pl_gap_equality_case() {
    let b = BoundaryField::linear(4, 1.0, 2.0).unwrap();
    let g = prekopa_leindler_gap(&b, &b, 0.5, 20_000, 5).unwrap();
    assert!(g.gap.abs() < 3.0 * g.stderr + 1e-12, "{g:?}");
}

#[test]
fn pl_gap_linear_pair() {
    let b1 = BoundaryField::linear(4, 1.0, 1.0).unwrap();
    let b2 = BoundaryField::linear(4, 1.0, 3.0).unwrap();
    let g = prekopa_leindler_gap(&b1, &b2, 0.5, 20_000, 6).unwrap();
    assert!(g.gap >= -3.0 * g.stderr, "{g:?}");
}

#[test]
fn keyword_boundary() {
    let b = BoundaryField::from_keyword(3, "linear:0.5,0.5").unwrap();
    assert_eq!(b.get(3, 1), Some(2.0));
    assert_eq!(b.get(2, 1), None);
    assert!(BoundaryField::from_keyword(3, "curved").is_err());
}

#[test]
fn pattern_serializes_as_n_and_rows() {
    let p = pattern(vec![vec![0.5], vec![0.0, 1.0]]);
    let s = serde_json::to_string(&p).unwrap();
    assert_eq!(s, r#"{"n":2,"rows":[[0.5],[0.0,1.0]]}"#);
}
