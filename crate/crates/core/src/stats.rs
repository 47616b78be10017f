//! Goodness-of-fit statistics used by the sampling checks.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Kolmogorov survival function P(K > x) for the limiting distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.27 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let t = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { t } else { -t };
        if t < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample KS statistic sup |F_n − F| against a continuous cdf.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut x = samples.to_vec();
    x.sort_by(|a, b| a.total_cmp(b));
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample KS statistic and its asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(|p, q| p.total_cmp(q));
    y.sort_by(|p, q| p.total_cmp(q));
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    (d, kolmogorov_sf((en + 0.12 + 0.11 / en) * d))
}

/// Energy-distance two-sample test with a permutation p-value.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyTest {
    pub statistic: f64,
    pub p_value: f64,
    pub permutations: usize,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Energy statistic from a packed distance matrix and group labels.
fn energy_from(d: &[f32], n: usize, labels: &[bool]) -> f64 {
    let (mut sxy, mut sxx, mut syy) = (0.0f64, 0.0f64, 0.0f64);
    let mut idx = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let v = d[idx] as f64;
            idx += 1;
            match (labels[i], labels[j]) {
                (true, true) => sxx += v,
                (false, false) => syy += v,
                _ => sxy += v,
            }
        }
    }
    let nx = labels.iter().filter(|&&l| l).count() as f64;
    let ny = n as f64 - nx;
    2.0 * sxy / (nx * ny) - 2.0 * sxx / (nx * nx) - 2.0 * syy / (ny * ny)
}

pub fn energy_test(x: &[Vec<f64>], y: &[Vec<f64>], permutations: usize, seed: u64) -> EnergyTest {
    let pts: Vec<&[f64]> = x.iter().chain(y.iter()).map(|v| v.as_slice()).collect();
    let n = pts.len();
    let mut d = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            d.push(dist(pts[i], pts[j]) as f32);
        }
    }
    let mut labels: Vec<bool> = (0..n).map(|i| i < x.len()).collect();
    let observed = energy_from(&d, n, &labels);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exceed = 0usize;
    for _ in 0..permutations {
        labels.shuffle(&mut rng);
        if energy_from(&d, n, &labels) >= observed {
            exceed += 1;
        }
    }
    EnergyTest {
        statistic: observed,
        p_value: (exceed + 1) as f64 / (permutations + 1) as f64,
        permutations,
    }
}

/// Mean and standard error of the mean.
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

/// L¹ distance between a Gaussian kernel density estimate of `points`
/// (Silverman bandwidth 1.06·sd·N^(−1/5)) and `density`, by the midpoint rule
/// on `cells` cells of [lo, hi].
pub fn kde_l1(points: &[f64], density: impl Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> f64 {
    let n = points.len() as f64;
    let mean = points.iter().sum::<f64>() / n;
    let sd = (points.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let h = 1.06 * sd * n.powf(-0.2);
    let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
    let dx = (hi - lo) / cells as f64;
    (0..cells)
        .map(|i| {
            let x = lo + (i as f64 + 0.5) * dx;
            let k: f64 = points.iter().map(|p| (-(x - p).powi(2) / (2.0 * h * h)).exp()).sum();
            (k * norm - density(x)).abs() * dx
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_tail_values() {
        assert!((kolmogorov_sf(1.36) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_sf(1.63) - 0.0098).abs() < 1e-3);
    }

    #[test]
    fn kde_of_normal_sample_is_close() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..4000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let phi = |t: f64| (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!(kde_l1(&x, phi, -6.0, 6.0, 600) < 0.05);
    }

    #[test]
    fn identical_samples_have_zero_ks() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let (d, p) = ks_two_sample(&a, &a);
        assert_eq!(d, 0.0);
        assert!(p > 0.99);
    }
}
