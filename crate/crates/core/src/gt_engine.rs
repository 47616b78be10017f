//! Gelfand–Tsetlin patterns and functions on the triangle Δₙ = {0 ≤ j ≤ i ≤ n}.

use crate::error::{GtError, Result};
use crate::ext::ExtReal;
use crate::stats::mean_stderr;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Triangular array with `rows[k-1]` holding the k entries t_{k,1..k}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GTPattern {
    pub n: usize,
    pub rows: Vec<Vec<f64>>,
}

impl GTPattern {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            if r.len() != i + 1 {
                return Err(GtError::InvalidInput(format!("row {} has {} entries", i + 1, r.len())));
            }
        }
        Ok(GTPattern { n: rows.len(), rows })
    }

    /// t_{k,j}, 1-based.
    pub fn t(&self, k: usize, j: usize) -> f64 {
        self.rows[k - 1][j - 1]
    }

    pub fn bottom(&self) -> &[f64] {
        &self.rows[self.n - 1]
    }

    /// Value of the associated function at (x₁, x₂), 1 ≤ x₂ ≤ x₁ ≤ n.
    pub fn function_value(&self, x1: usize, x2: usize) -> f64 {
        self.t(self.n + x2 - x1, x2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Interlacing {
    pub valid: bool,
    /// First violating (k, j), 1-based, in row-major order.
    pub first_violation: Option<(usize, usize)>,
}

pub fn check_interlacing(p: &GTPattern) -> Interlacing {
    for k in 1..p.n {
        for j in 1..=k {
            let (lo, v, hi) = (p.t(k + 1, j), p.t(k, j), p.t(k + 1, j + 1));
            if !(lo <= v && v <= hi) {
                return Interlacing {
                    valid: false,
                    first_violation: Some((k, j)),
                };
            }
        }
    }
    Interlacing {
        valid: true,
        first_violation: None,
    }
}

fn check_bottom(bottom: &[f64]) -> Result<()> {
    if bottom.is_empty() {
        return Err(GtError::Domain("empty bottom row".into()));
    }
    if bottom.iter().any(|x| !x.is_finite()) {
        return Err(GtError::Domain("bottom row has non-finite entries".into()));
    }
    if bottom.windows(2).any(|w| w[0] >= w[1]) {
        return Err(GtError::Domain("bottom row must be strictly increasing".into()));
    }
    Ok(())
}

fn ln_barnes_g(n: usize) -> f64 {
    // ln Π_{j=1}^{n-1} j!
    let mut acc = 0.0;
    let mut lf = 0.0;
    for j in 1..n {
        lf += (j as f64).ln();
        acc += lf;
    }
    acc
}

/// Log of the volume of GT(s): −log G(n) + Σ_{j<k} log(s_k − s_j).
pub fn weyl_log_volume(bottom: &[f64]) -> Result<ExtReal> {
    if bottom.is_empty() || bottom.iter().any(|x| !x.is_finite()) {
        return Err(GtError::Domain("bottom row must be non-empty and finite".into()));
    }
    if bottom.windows(2).any(|w| w[0] > w[1]) {
        return Err(GtError::Domain("bottom row must be sorted".into()));
    }
    if bottom.windows(2).any(|w| w[0] == w[1]) {
        return Ok(ExtReal::NegInf);
    }
    let n = bottom.len();
    let mut s = -ln_barnes_g(n);
    for k in 0..n {
        for j in 0..k {
            s += (bottom[k] - bottom[j]).ln();
        }
    }
    Ok(ExtReal::Finite(s))
}

/// Box-rejection estimate of the volume of GT(s), as (estimate, stderr).
pub fn rejection_gt_volume(bottom: &[f64], trials: usize, seed: u64) -> Result<(f64, f64)> {
    check_bottom(bottom)?;
    let n = bottom.len();
    let (lo, hi) = (bottom[0], bottom[n - 1]);
    let dim = n * (n - 1) / 2;
    let boxv = (hi - lo).powi(dim as i32);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<Vec<f64>> = (1..=n).map(|k| vec![0.0; k]).collect();
    rows[n - 1].copy_from_slice(bottom);
    let mut hits = 0usize;
    for _ in 0..trials {
        for r in rows.iter_mut().take(n - 1) {
            for v in r.iter_mut() {
                *v = lo + (hi - lo) * rng.random::<f64>();
            }
        }
        let ok = (1..n).all(|k| (0..k).all(|j| rows[k][j] <= rows[k - 1][j] && rows[k - 1][j] <= rows[k][j + 1]));
        if ok {
            hits += 1;
        }
    }
    let p = hits as f64 / trials as f64;
    Ok((p * boxv, (p * (1.0 - p) / trials as f64).sqrt() * boxv))
}

/// Pattern with each row at the midpoints of the row below.
fn initial_pattern(bottom: &[f64]) -> GTPattern {
    let n = bottom.len();
    let mut rows = vec![Vec::new(); n];
    rows[n - 1] = bottom.to_vec();
    for k in (1..n).rev() {
        rows[k - 1] = (0..k).map(|j| 0.5 * (rows[k][j] + rows[k][j + 1])).collect();
    }
    GTPattern { n, rows }
}

/// One raster-order Gibbs sweep over rows 1..n−1.
pub fn gibbs_sweep(p: &mut GTPattern, rng: &mut impl Rng) {
    let n = p.n;
    for k in 0..n - 1 {
        for j in 0..=k {
            let mut lo = p.rows[k + 1][j];
            let mut hi = p.rows[k + 1][j + 1];
            if k > 0 {
                if j < k {
                    hi = hi.min(p.rows[k - 1][j]);
                }
                if j > 0 {
                    lo = lo.max(p.rows[k - 1][j - 1]);
                }
            }
            p.rows[k][j] = lo + (hi - lo) * rng.random::<f64>();
        }
    }
}

/// Uniform pattern with the given bottom row after `sweeps` Gibbs sweeps.
pub fn sample_uniform(bottom: &[f64], sweeps: usize, rng_seed: u64) -> Result<GTPattern> {
    check_bottom(bottom)?;
    if sweeps == 0 {
        return Err(GtError::InvalidInput("sweeps must be ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok(run_chain(bottom, sweeps, &mut rng))
}

fn run_chain(bottom: &[f64], sweeps: usize, rng: &mut ChaCha8Rng) -> GTPattern {
    let mut p = initial_pattern(bottom);
    for _ in 0..sweeps {
        gibbs_sweep(&mut p, rng);
    }
    p
}

/// Default burn-in, 50·n sweeps.
pub fn default_sweeps(n: usize) -> usize {
    50 * n
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Independent chains, one ChaCha stream per draw.
pub fn sample_uniform_batch(bottom: &[f64], sweeps: usize, draws: usize, rng_seed: u64) -> Result<Vec<GTPattern>> {
    check_bottom(bottom)?;
    if sweeps == 0 {
        return Err(GtError::InvalidInput("sweeps must be ≥ 1".into()));
    }
    Ok((0..draws)
        .into_par_iter()
        .map(|d| run_chain(bottom, sweeps, &mut stream_rng(rng_seed, d as u64)))
        .collect())
}

/// Haar unitary from a complex Gaussian matrix, QR with the phase fix.
fn haar_unitary(n: usize, rng: &mut impl Rng) -> Result<DMatrix<Complex64>> {
    for _ in 0..5 {
        let g = DMatrix::<Complex64>::from_fn(n, n, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        });
        let qr = g.qr();
        let r = qr.r();
        if (0..n).any(|i| r[(i, i)].norm() < 1e-12) {
            continue;
        }
        let mut q = qr.q();
        for c in 0..n {
            let ph = r[(c, c)] / r[(c, c)].norm();
            for i in 0..n {
                q[(i, c)] *= ph;
            }
        }
        return Ok(q);
    }
    Err(GtError::Convergence {
        iterations: 5,
        residual: 0.0,
        context: "Gaussian orthonormalization degenerate".into(),
    })
}

/// Eigenvalues of the leading minors of U diag(s) U* for Haar U.
pub fn minor_eigen_process(spectrum: &[f64], rng_seed: u64) -> Result<GTPattern> {
    check_bottom(spectrum)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    minor_process_with(spectrum, &mut rng)
}

fn minor_process_with(spectrum: &[f64], rng: &mut ChaCha8Rng) -> Result<GTPattern> {
    let n = spectrum.len();
    let u = haar_unitary(n, rng)?;
    let d = DMatrix::<Complex64>::from_diagonal(&nalgebra::DVector::from_iterator(n, spectrum.iter().map(|&s| Complex64::new(s, 0.0))));
    let a = &u * d * u.adjoint();
    let mut rows = vec![Vec::new(); n];
    rows[n - 1] = spectrum.to_vec();
    for k in 1..n {
        let minor = a.view((0, 0), (k, k)).clone_owned();
        let mut ev: Vec<f64> = minor.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|x, y| x.total_cmp(y));
        rows[k - 1] = ev;
    }
    // rounding can break interlacing at the 1e-15 level; clamp from the bottom up
    for k in (1..n).rev() {
        for j in 0..k {
            let (lo, hi) = (rows[k][j], rows[k][j + 1]);
            rows[k - 1][j] = rows[k - 1][j].clamp(lo, hi);
        }
    }
    Ok(GTPattern { n, rows })
}

pub fn minor_process_batch(spectrum: &[f64], draws: usize, rng_seed: u64) -> Result<Vec<GTPattern>> {
    check_bottom(spectrum)?;
    (0..draws)
        .into_par_iter()
        .map(|d| minor_process_with(spectrum, &mut stream_rng(rng_seed, d as u64)))
        .collect()
}

/// Index of (i, j) in Δₙ.
fn tri(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

pub fn is_boundary(n: usize, i: usize, j: usize) -> bool {
    j == 0 || j == i || i == n
}

/// Lattice points of ∂Δₙ in row-major order.
pub fn boundary_points(n: usize) -> Vec<(usize, usize)> {
    (0..=n).flat_map(|i| (0..=i).map(move |j| (i, j))).filter(|&(i, j)| is_boundary(n, i, j)).collect()
}

/// Interior points, ordered by antidiagonal i + j.
pub fn interior_points(n: usize) -> Vec<(usize, usize)> {
    let mut v: Vec<(usize, usize)> = (0..=n)
        .flat_map(|i| (0..=i).map(move |j| (i, j)))
        .filter(|&(i, j)| !is_boundary(n, i, j))
        .collect();
    v.sort_by_key(|&(i, j)| (i + j, i));
    v
}

/// A function on ∂Δₙ, optionally certified c-spaced.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryField {
    n: usize,
    values: Vec<f64>,
    spacing: Option<f64>,
}

fn leq(x: (usize, usize), y: (usize, usize)) -> bool {
    x.0 <= y.0 && x.1 <= y.1
}

impl BoundaryField {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        if n == 0 {
            return Err(GtError::InvalidInput("n must be ≥ 1".into()));
        }
        let mut values = vec![f64::NAN; tri(n, n) + 1];
        for (i, j) in boundary_points(n) {
            let v = f(i, j);
            if !v.is_finite() {
                return Err(GtError::InvalidInput(format!("non-finite boundary value at ({i}, {j})")));
            }
            values[tri(i, j)] = v;
        }
        Ok(BoundaryField { n, values, spacing: None })
    }

    /// φ^{u}(x) = u₁x₁ + u₂x₂ restricted to ∂Δₙ.
    pub fn linear(n: usize, u1: f64, u2: f64) -> Result<Self> {
        Self::from_fn(n, |i, j| u1 * i as f64 + u2 * j as f64)
    }

    /// Builds a boundary field from a keyword "linear:u1,u2".
    pub fn from_keyword(n: usize, spec: &str) -> Result<Self> {
        let rest = spec
            .strip_prefix("linear:")
            .ok_or_else(|| GtError::InvalidInput(format!("unknown boundary keyword '{spec}'")))?;
        let parts: Vec<f64> = rest
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| GtError::InvalidInput(format!("bad number '{s}'"))))
            .collect::<Result<_>>()?;
        if parts.len() != 2 {
            return Err(GtError::InvalidInput("linear boundary needs two slopes".into()));
        }
        Self::linear(n, parts[0], parts[1])
    }

    /// Records the spacing c after verifying it on every comparable pair.
    pub fn with_spacing(mut self, c: f64) -> Result<Self> {
        self.check_spacing(c)?;
        self.spacing = Some(c);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn spacing(&self) -> Option<f64> {
        self.spacing
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        if j > i || i > self.n || !is_boundary(self.n, i, j) {
            return None;
        }
        Some(self.values[tri(i, j)])
    }

    /// Fails with the first pair x ≤ y with φ_y − φ_x < c((y₁+y₂) − (x₁+x₂)).
    pub fn check_spacing(&self, c: f64) -> Result<()> {
        let b = boundary_points(self.n);
        for &x in &b {
            for &y in &b {
                if x != y && leq(x, y) {
                    let need = c * ((y.0 + y.1) as f64 - (x.0 + x.1) as f64);
                    let d = self.values[tri(y.0, y.1)] - self.values[tri(x.0, x.1)];
                    if d < need - 1e-12 * (1.0 + need.abs()) {
                        return Err(GtError::Precondition(format!(
                            "boundary is not {c}-spaced: pair {x:?} ≤ {y:?} rises by {d}, needs {need}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        self.map(|v| lambda * v)
    }

    pub fn shifted(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        BoundaryField {
            n: self.n,
            values: self.values.iter().map(|&v| if v.is_nan() { v } else { f(v) }).collect(),
            spacing: None,
        }
    }

    /// λ·a + (1 − λ)·b.
    pub fn combine(lambda: f64, a: &BoundaryField, b: &BoundaryField) -> Result<Self> {
        if a.n != b.n {
            return Err(GtError::InvalidInput("boundary fields have different n".into()));
        }
        Ok(BoundaryField {
            n: a.n,
            values: a.values.iter().zip(&b.values).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect(),
            spacing: None,
        })
    }

    /// Strictly increasing on every comparable boundary pair.
    fn strictly_increasing(&self) -> bool {
        let b = boundary_points(self.n);
        b.iter().all(|&x| b.iter().all(|&y| x == y || !leq(x, y) || self.values[tri(y.0, y.1)] > self.values[tri(x.0, x.1)]))
    }
}

/// A function on all of Δₙ.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeField {
    pub n: usize,
    pub values: Vec<f64>,
}

impl LatticeField {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[tri(i, j)]
    }

    pub fn is_c_spaced(&self, c: f64) -> bool {
        let pts: Vec<(usize, usize)> = (0..=self.n).flat_map(|i| (0..=i).map(move |j| (i, j))).collect();
        pts.iter().all(|&x| {
            pts.iter().all(|&y| {
                x == y || !leq(x, y) || {
                    let need = c * ((y.0 + y.1) as f64 - (x.0 + x.1) as f64);
                    self.at(y.0, y.1) - self.at(x.0, x.1) >= need - 1e-12 * (1.0 + need.abs())
                }
            })
        })
    }

    pub fn boundary(&self) -> Result<BoundaryField> {
        BoundaryField::from_fn(self.n, |i, j| self.at(i, j))
    }
}

/// c-spaced extension φ̄ = φ^{c,c} + max_{y ≤ x, y ∈ ∂Δₙ} (φ − φ^{c,c})_y.
pub fn spaced_extension(boundary: &BoundaryField, c: f64) -> Result<LatticeField> {
    if !(c >= 0.0) {
        return Err(GtError::InvalidInput("spacing must be ≥ 0".into()));
    }
    boundary.check_spacing(c)?;
    let n = boundary.n;
    let b = boundary_points(n);
    let lin = |p: (usize, usize)| c * (p.0 + p.1) as f64;
    let mut values = vec![0.0; tri(n, n) + 1];
    for i in 0..=n {
        for j in 0..=i {
            let m = b
                .iter()
                .filter(|&&y| leq(y, (i, j)))
                .map(|&y| boundary.values[tri(y.0, y.1)] - lin(y))
                .fold(f64::NEG_INFINITY, f64::max);
            values[tri(i, j)] = m + lin((i, j));
        }
    }
    Ok(LatticeField { n, values })
}

/// Number of interior points of Δₙ, (n−1)(n−2)/2.
pub fn interior_count(n: usize) -> usize {
    if n < 2 {
        0
    } else {
        (n - 1) * (n - 2) / 2
    }
}

/// Sequential importance sampler for T_A(φ), A = interior of Δₙ.
struct TriangleSis {
    order: Vec<(usize, usize)>,
    upper: Vec<f64>,
    base: Vec<f64>,
}

impl TriangleSis {
    fn new(b: &BoundaryField) -> Self {
        let n = b.n;
        let order = interior_points(n);
        let bp = boundary_points(n);
        // min over boundary points y ≥ x: any completion keeps φ_x below them
        let upper = order
            .iter()
            .map(|&x| {
                bp.iter()
                    .filter(|&&y| leq(x, y))
                    .map(|&y| b.values[tri(y.0, y.1)])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        TriangleSis {
            order,
            upper,
            base: b.values.clone(),
        }
    }

    fn weight(&self, vals: &mut [f64], rng: &mut impl Rng) -> f64 {
        vals.copy_from_slice(&self.base);
        let mut w = 1.0;
        for (&(i, j), &hi) in self.order.iter().zip(&self.upper) {
            let lo = vals[tri(i - 1, j)].max(vals[tri(i, j - 1)]);
            let len = hi - lo;
            if !(len > 0.0) {
                return 0.0;
            }
            w *= len;
            vals[tri(i, j)] = lo + len * rng.random::<f64>();
        }
        w
    }
}

/// Unbiased estimate of T_A(φ) with its standard error.
pub fn estimate_t(boundary: &BoundaryField, samples: usize, rng_seed: u64) -> Result<(f64, f64)> {
    if samples < 100 {
        return Err(GtError::InvalidInput(format!("samples = {samples} < 100")));
    }
    if !boundary.strictly_increasing() {
        return Ok((0.0, 0.0));
    }
    let sis = TriangleSis::new(boundary);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut vals = sis.base.clone();
    let w: Vec<f64> = (0..samples).map(|_| sis.weight(&mut vals, &mut rng)).collect();
    Ok(mean_stderr(&w))
}

/// Prékopa–Leindler gap with its propagated standard error.
#[derive(Clone, Debug, PartialEq)]
pub struct PlGap {
    pub gap: f64,
    pub stderr: f64,
    /// Estimates at the mixture, b₁ and b₂.
    pub estimates: [(f64, f64); 3],
}

/// log T̂(λb₁ + (1−λ)b₂) − λ log T̂(b₁) − (1−λ) log T̂(b₂).
pub fn prekopa_leindler_gap(b1: &BoundaryField, b2: &BoundaryField, lambda: f64, samples: usize, rng_seed: u64) -> Result<PlGap> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(GtError::InvalidInput("lambda must lie in (0,1)".into()));
    }
    let mix = BoundaryField::combine(lambda, b1, b2)?;
    let em = estimate_t(&mix, samples, rng_seed)?;
    let e1 = estimate_t(b1, samples, rng_seed.wrapping_add(1))?;
    let e2 = estimate_t(b2, samples, rng_seed.wrapping_add(2))?;
    let estimates = [em, e1, e2];
    if estimates.iter().any(|e| e.0 <= 0.0 || e.1 >= e.0) {
        return Err(GtError::Inconclusive(format!(
            "estimates not resolved above zero: mixture {:e} ± {:e}, b1 {:e} ± {:e}, b2 {:e} ± {:e}",
            em.0, em.1, e1.0, e1.1, e2.0, e2.1
        )));
    }
    let gap = em.0.ln() - lambda * e1.0.ln() - (1.0 - lambda) * e2.0.ln();
    let stderr = ((em.1 / em.0).powi(2) + (lambda * e1.1 / e1.0).powi(2) + ((1.0 - lambda) * e2.1 / e2.0).powi(2)).sqrt();
    Ok(PlGap { gap, stderr, estimates })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_count_matches_enumeration() {
        for n in 1..8 {
            assert_eq!(interior_points(n).len(), interior_count(n));
        }
    }

    #[test]
    fn initial_pattern_interlaces() {
        let p = initial_pattern(&[0.0, 0.3, 1.0, 4.0]);
        assert!(check_interlacing(&p).valid);
    }
}
