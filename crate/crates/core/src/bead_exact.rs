//! Bead model on the semi-discrete torus: exact volumes, partition functions,
//! correlation kernels and tilt.

use crate::error::{GtError, Result};
use crate::fsutil::write_atomic;
use crate::hp::{self, Ball, CBall};
use crate::surface_tension::{sigma, GradientPair};
use nalgebra::DMatrix;
use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::path::Path;

pub const DEFAULT_PRECISION_BITS: u32 = 256;
const ENUMERATION_GUARD: f64 = 1e7;
const MAX_SERIES_K: usize = 200;
const MAX_POINTS: usize = 12;

/// A bead configuration: `positions[h]` holds the sorted bead positions on string h.
#[derive(Clone, Debug, PartialEq)]
pub struct BeadConfig {
    pub n: usize,
    pub k: usize,
    pub positions: Vec<Vec<f64>>,
}

/// A tilt ℓ/n, kept as a pair of integers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tilt {
    pub l: usize,
    pub n: usize,
}

impl Tilt {
    pub fn value(&self) -> f64 {
        self.l as f64 / self.n as f64
    }
}

impl BeadConfig {
    pub fn new(positions: Vec<Vec<f64>>) -> Result<Self> {
        let n = positions.len();
        let k = positions.first().map_or(0, |p| p.len());
        let c = BeadConfig { n, k, positions };
        c.validate()?;
        Ok(c)
    }

    /// Lattice configuration: bead j on string h sits at j/k + hℓ/(nk) (mod 1).
    pub fn lattice(n: usize, k: usize, l: usize) -> Result<Self> {
        if n < 2 || k == 0 || l == 0 || l >= n {
            return Err(GtError::InvalidInput(format!("lattice needs n ≥ 2, k ≥ 1, 1 ≤ l ≤ n−1 (got {n}, {k}, {l})")));
        }
        let positions = (0..n)
            .map(|h| {
                let mut v: Vec<f64> = (0..k)
                    .map(|j| {
                        let t = j as f64 / k as f64 + (h * l) as f64 / (n * k) as f64;
                        t - t.floor()
                    })
                    .collect();
                v.sort_by(|a, b| a.total_cmp(b));
                v
            })
            .collect();
        BeadConfig::new(positions)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(GtError::Invariant("a bead configuration needs at least two strings".into()));
        }
        if self.k == 0 {
            return Err(GtError::Invariant("a bead configuration needs k ≥ 1".into()));
        }
        for (h, p) in self.positions.iter().enumerate() {
            if p.len() != self.k {
                return Err(GtError::Invariant(format!("string {h} has {} beads, expected {}", p.len(), self.k)));
            }
            if p.iter().any(|t| !(0.0..1.0).contains(t)) {
                return Err(GtError::Invariant(format!("string {h} has a position outside [0,1)")));
            }
            if p.windows(2).any(|w| w[0] >= w[1]) {
                return Err(GtError::Invariant(format!("string {h} is not strictly increasing")));
            }
        }
        for h in 0..self.n {
            let a = &self.positions[h];
            let b = &self.positions[(h + 1) % self.n];
            if a.iter().any(|t| b.contains(t)) {
                return Err(GtError::Invariant(format!("strings {h} and {} share a position", (h + 1) % self.n)));
            }
            if !interlaced(a, b) {
                return Err(GtError::Invariant(format!("strings {h} and {} do not interlace", (h + 1) % self.n)));
            }
        }
        Ok(())
    }
}

/// Cyclic interlacing of two sorted strings with distinct positions.
fn interlaced(a: &[f64], b: &[f64]) -> bool {
    let k = a.len();
    let first = (0..k).all(|j| a[j] < b[j] && (j + 1 == k || b[j] < a[j + 1]));
    let second = (0..k).all(|j| b[j] < a[j] && (j + 1 == k || a[j] < b[j + 1]));
    first || second
}

/// Σ q_i for a configuration, q_i being the toric distance to the next bead on string h+1.
fn sum_q(n: usize, strings: &[&[f64]]) -> f64 {
    let mut total = 0.0;
    for h in 0..n {
        let b = strings[(h + 1) % n];
        let mut idx = 0;
        for &t in strings[h] {
            while idx < b.len() && b[idx] <= t {
                idx += 1;
            }
            total += if idx < b.len() { b[idx] - t } else { b[0] + 1.0 - t };
        }
    }
    total
}

/// Tilt τ = Σq / Σp of a valid configuration.
pub fn tilt_of(c: &BeadConfig) -> Result<Tilt> {
    c.validate()?;
    let strings: Vec<&[f64]> = c.positions.iter().map(|p| p.as_slice()).collect();
    let sq = sum_q(c.n, &strings);
    // toric gaps on each string sum to one
    let sp = c.n as f64;
    let ratio = sq / sp * c.n as f64; // τ·n
    let l = ratio.round();
    if (ratio - l).abs() > 1e-9 * (c.n * c.k) as f64 || l < 1.0 || l > (c.n - 1) as f64 {
        return Err(GtError::Invariant(format!("tilt numerator {ratio} is not an integer in [1, n−1]")));
    }
    Ok(Tilt { l: l as usize, n: c.n })
}

/// Value of (−1)^{k(l+1)}·S/(nk)! where S is a real ball; S is an integer.
#[derive(Clone, Debug, PartialEq)]
pub struct HpReal {
    numerator: Ball,
    denominator: BigUint,
    negative: bool,
}

impl HpReal {
    fn exact_int(v: u64) -> Self {
        HpReal {
            numerator: Ball::from_int(v as i64, 0),
            denominator: BigUint::one(),
            negative: false,
        }
    }

    /// Midpoint value in double precision (0 if below the f64 range).
    pub fn to_f64(&self) -> f64 {
        let mid = self.numerator.mid();
        if mid.is_zero() {
            return 0.0;
        }
        let s = if mid.is_negative() != self.negative { -1.0 } else { 1.0 };
        let den = &self.denominator << self.numerator.prec();
        s * hp::quotient_f64(mid.magnitude(), &den)
    }

    /// ln|value|, robust where f64 would underflow.
    pub fn ln_abs(&self) -> f64 {
        let mid = self.numerator.mid();
        if mid.is_zero() {
            return f64::NEG_INFINITY;
        }
        hp::ln_biguint(mid.magnitude()) - self.numerator.prec() as f64 * std::f64::consts::LN_2 - hp::ln_biguint(&self.denominator)
    }

    /// Certified absolute error bound.
    pub fn error_bound(&self) -> f64 {
        let r = self.numerator.rad();
        if r.is_zero() {
            return 0.0;
        }
        (hp::ln_biguint(r) - self.numerator.prec() as f64 * std::f64::consts::LN_2 - hp::ln_biguint(&self.denominator)).exp()
    }

    /// Relative error bound (∞ for a zero midpoint with non-zero radius).
    pub fn rel_error(&self) -> f64 {
        self.numerator.rel_rad()
    }

    /// The signed integer numerator when the ball pins it down uniquely.
    pub fn exact_numerator(&self) -> Option<BigInt> {
        let half = BigUint::one() << self.numerator.prec().saturating_sub(1);
        if self.numerator.prec() > 0 && self.numerator.rad() >= &half {
            return None;
        }
        let v = self.numerator.round_to_int();
        Some(if self.negative { -v } else { v })
    }

    /// The exact denominator (nk)!.
    pub fn denominator(&self) -> &BigUint {
        &self.denominator
    }

    pub fn certainly_nonneg(&self) -> bool {
        let b = if self.negative { self.numerator.neg() } else { self.numerator.clone() };
        b.certainly_nonneg()
    }
}

fn binomial_f64(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn binomial_u64(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    u64::try_from(acc).unwrap_or(u64::MAX)
}

fn factorial(m: usize) -> BigUint {
    (1..=m).fold(BigUint::one(), |acc, i| acc * i)
}

/// Exact volume of (n,k,l) bead configurations, with a certified error bound.
pub fn exact_volume(n: usize, k: usize, l: usize, precision_bits: u32) -> Result<HpReal> {
    if n == 0 || l > n {
        return Err(GtError::InvalidInput(format!("need n ≥ 1 and 0 ≤ l ≤ n (got n = {n}, l = {l})")));
    }
    if precision_bits < 32 {
        return Err(GtError::InvalidInput("precision_bits must be at least 32".into()));
    }
    let count = binomial_f64(n, l);
    if count > ENUMERATION_GUARD {
        return Err(GtError::Capacity(format!("binomial({n},{l}) = {count:e} subsets exceeds 1e7")));
    }
    if k == 0 {
        return Ok(HpReal::exact_int(binomial_u64(n, l)));
    }
    if l == 0 || l == n {
        return Ok(HpReal::exact_int(0));
    }
    let e = (n * k) as u64;
    // terms reach l^{nk}; enough headroom keeps the integer sum resolved
    let growth = (e as f64 * (l as f64).log2() + count.log2()).ceil() as u32;
    let prec = precision_bits + 64 + growth;
    let pi = hp::pi(prec);
    let roots: Vec<CBall> = (0..n as u64).map(|j| hp::root_of_unity(j, n as u64, &pi)).collect();

    let mut total = CBall::zero(prec);
    let mut stack: Vec<CBall> = Vec::with_capacity(l + 1);
    stack.push(CBall::zero(prec));
    subset_sum(&roots, l, 0, &mut stack, &mut |s| {
        total = total.add(&s.pow(e));
    });

    let re = &total.re;
    let im = &total.im;
    let residue = (im.mid().magnitude().clone() + im.rad()) >> prec;
    let scale = re.mid().magnitude() >> prec;
    // |Im| must vanish to 2^{-bits/2}, relative to max(1, |Re|)
    let tol_shift = precision_bits / 2;
    if (residue << tol_shift) > scale.max(BigUint::one()) {
        return Err(GtError::Precision(format!(
            "imaginary residue {:e} too large at {precision_bits} bits",
            im.to_f64().abs() + im.rad_f64()
        )));
    }
    let out = HpReal {
        numerator: re.clone(),
        denominator: factorial(n * k),
        negative: (k * (l + 1)) % 2 == 1,
    };
    if out.rel_error() > 2f64.powi(-(precision_bits as i32) / 2) {
        return Err(GtError::Precision(format!("relative radius {:e} too large", out.rel_error())));
    }
    Ok(out)
}

/// Depth-first walk over l-subsets of the roots with memoized prefix sums.
fn subset_sum(roots: &[CBall], l: usize, start: usize, stack: &mut Vec<CBall>, f: &mut impl FnMut(&CBall)) {
    let depth = stack.len() - 1;
    if depth == l {
        f(stack.last().unwrap());
        return;
    }
    let remaining = l - depth;
    for j in start..=roots.len() - remaining {
        let next = stack.last().unwrap().add(&roots[j]);
        stack.push(next);
        subset_sum(roots, l, j + 1, stack, f);
        stack.pop();
    }
}

/// Exact volumes for 0 ≤ k ≤ k_max, 0 ≤ ℓ ≤ n.
#[derive(Clone, Debug)]
pub struct BeadVolumeTable {
    n: usize,
    k_max: usize,
    entries: Vec<Vec<HpReal>>,
}

impl BeadVolumeTable {
    pub fn build(n: usize, k_max: usize, precision_bits: u32) -> Result<Self> {
        let cells: Vec<(usize, usize)> = (0..=k_max).flat_map(|k| (0..=n).map(move |l| (k, l))).collect();
        let vals: Vec<HpReal> = cells
            .par_iter()
            .map(|&(k, l)| exact_volume(n, k, l, precision_bits))
            .collect::<Result<_>>()?;
        let entries = vals.chunks(n + 1).map(|c| c.to_vec()).collect();
        Ok(BeadVolumeTable { n, k_max, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn k_max(&self) -> usize {
        self.k_max
    }
    pub fn get(&self, k: usize, l: usize) -> Option<&HpReal> {
        self.entries.get(k).and_then(|r| r.get(l))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,k,l,value,error_bound\n");
        for (k, row) in self.entries.iter().enumerate() {
            for (l, v) in row.iter().enumerate() {
                s.push_str(&format!("{},{},{},{:e},{:e}\n", self.n, k, l, v.to_f64(), v.error_bound()));
            }
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }
}

/// Truncated series for Z(λ, T).
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesResult {
    pub value: f64,
    /// Last k included in the sum.
    pub truncation: usize,
    pub tail_bound: f64,
    /// E[K] under the (K, L) mass function, over the included terms.
    pub mean_beads: f64,
}

fn ln_factorial(m: usize) -> f64 {
    (1..=m).map(|i| (i as f64).ln()).sum()
}

/// Σ_k Σ_ℓ T^{nk} e^{−λℓ} Vol_{k,ℓ}, stopped once the remaining tail is below tol.
pub fn partition_series(n: usize, lambda: f64, t: f64, tol: f64) -> Result<SeriesResult> {
    if !(t >= 0.0) || !t.is_finite() || !lambda.is_finite() {
        return Err(GtError::InvalidInput("need finite λ and T ≥ 0".into()));
    }
    if !(tol > 0.0) {
        return Err(GtError::InvalidInput("tol must be positive".into()));
    }
    if n == 0 {
        return Err(GtError::InvalidInput("n must be ≥ 1".into()));
    }
    // Vol_{k,ℓ} ≤ binom(n,ℓ) n^{nk}/(nk)!, so the k-term is at most (1+e^{−λ})^n (Tn)^{nk}/(nk)!
    let ln_w = n as f64 * (-lambda).exp().ln_1p();
    let ln_bound = |k: usize| -> f64 {
        if t == 0.0 {
            return f64::NEG_INFINITY;
        }
        ln_w + (n * k) as f64 * (t * n as f64).ln() - ln_factorial(n * k)
    };
    // tail Σ_{k>K} b_k, bounded geometrically once the term ratio drops below 1
    let tail = |kk: usize| -> f64 {
        let b1 = ln_bound(kk + 1);
        if b1 == f64::NEG_INFINITY {
            return 0.0;
        }
        let r = (ln_bound(kk + 2) - b1).exp();
        if r >= 1.0 {
            return f64::INFINITY;
        }
        b1.exp() / (1.0 - r)
    };
    let mut kk = 0;
    while tail(kk) >= tol {
        kk += 1;
        if kk > MAX_SERIES_K {
            return Err(GtError::Capacity(format!("series tail bound not below {tol:e} within k ≤ {MAX_SERIES_K}")));
        }
    }
    let mut value = 0.0;
    let mut first = 0.0;
    for k in 0..=kk {
        for l in 0..=n {
            let v = exact_volume(n, k, l, DEFAULT_PRECISION_BITS)?;
            if v.to_f64() == 0.0 {
                continue;
            }
            let ln_term = if k == 0 { 0.0 } else { (n * k) as f64 * t.ln() } - lambda * l as f64 + v.ln_abs();
            let term = ln_term.exp();
            value += term;
            first += k as f64 * term;
        }
    }
    Ok(SeriesResult {
        value,
        truncation: kk,
        tail_bound: tail(kk),
        mean_beads: first / value,
    })
}

/// Signed log-magnitude representation of a real number.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedLog {
    pub sign: f64,
    pub ln_abs: f64,
}

impl SignedLog {
    pub fn value(&self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.ln_abs.exp()
        }
    }
}

/// Z_θ for θ = (θ₁, θ₂) in log form; conjugate roots are paired so the product is real.
pub fn partition_part_log(n: usize, lambda: f64, t: f64, theta1: u8, theta2: u8) -> SignedLog {
    let s = if theta1 == 0 { 1.0 } else { -1.0 };
    let c = s * (-lambda).exp();
    let e = (theta1 as usize + 1) * (theta2 as usize + n + 1);
    let mut sign = if e % 2 == 0 { 1.0 } else { -1.0 };
    let mut ln_abs = -(2f64).ln();
    for j in 0..n {
        let a = 2 * j + theta2 as usize;
        if a > n {
            continue;
        }
        if a == 0 || a == n {
            // real root z = ±1
            let z = if a == 0 { 1.0 } else { -1.0 };
            let f = (t * z).exp() - c;
            if f == 0.0 {
                return SignedLog { sign: 0.0, ln_abs: f64::NEG_INFINITY };
            }
            sign *= f.signum();
            ln_abs += f.abs().ln();
        } else {
            let phi = PI * a as f64 / n as f64;
            let w = Complex64::from_polar((t * phi.cos()).exp(), t * phi.sin()) - c;
            let m = w.norm();
            if m == 0.0 {
                return SignedLog { sign: 0.0, ln_abs: f64::NEG_INFINITY };
            }
            ln_abs += 2.0 * m.ln();
        }
    }
    SignedLog { sign, ln_abs }
}

/// Z(λ,T) and its four parts [Z_00, Z_01, Z_10, Z_11] from the product formula.
pub fn partition_product(n: usize, lambda: f64, t: f64) -> (f64, [f64; 4]) {
    let mut parts = [0.0; 4];
    for (i, p) in parts.iter_mut().enumerate() {
        *p = partition_part_log(n, lambda, t, (i >> 1) as u8, (i & 1) as u8).value();
    }
    (parts.iter().sum(), parts)
}

/// Weights d_θ = Z_θ/Z, computed in log form so large T does not overflow.
pub fn theta_weights(n: usize, lambda: f64, t: f64) -> Result<[f64; 4]> {
    let logs: Vec<SignedLog> = (0..4).map(|i| partition_part_log(n, lambda, t, (i >> 1) as u8, (i & 1) as u8)).collect();
    let top = logs.iter().filter(|l| l.sign != 0.0).map(|l| l.ln_abs).fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(GtError::Domain("all partition-function parts vanish".into()));
    }
    let scaled: Vec<f64> = logs
        .iter()
        .map(|l| if l.sign == 0.0 { 0.0 } else { l.sign * (l.ln_abs - top).exp() })
        .collect();
    let z: f64 = scaled.iter().sum();
    if !(z > 0.0) {
        return Err(GtError::Domain(format!("partition function is not positive ({z:e})")));
    }
    Ok([scaled[0] / z, scaled[1] / z, scaled[2] / z, scaled[3] / z])
}

fn roots_of(n: usize, theta2: u8) -> Vec<Complex64> {
    (0..n)
        .map(|j| Complex64::from_polar(1.0, PI * (2 * j + theta2 as usize) as f64 / n as f64))
        .collect()
}

/// Kernel H^{β,θ₂,T}(t,h) with t ∈ (−1,1).
pub fn kernel_h(n: usize, beta: Complex64, theta2: u8, t_param: f64, t: f64, h: i64) -> Result<Complex64> {
    if n == 0 {
        return Err(GtError::InvalidInput("n must be ≥ 1".into()));
    }
    let roots = roots_of(n, theta2);
    kernel_with_roots(&roots, beta, t_param, t, h)
}

fn kernel_with_roots(roots: &[Complex64], beta: Complex64, t_param: f64, t: f64, h: i64) -> Result<Complex64> {
    if !(t > -1.0 && t < 1.0) {
        return Err(GtError::InvalidInput(format!("kernel argument t = {t} outside (−1,1)")));
    }
    let n = roots.len();
    let bt = if t < 0.0 { t + 1.0 } else { t };
    let mut acc = Complex64::new(0.0, 0.0);
    for &z in roots {
        let w = beta + t_param * z;
        if w.norm() < 1e-12 {
            return Err(GtError::SingularKernel(format!("|β + Tz| = {:e} at z = {z}", w.norm())));
        }
        let zp = z.powi((1 - h.rem_euclid(2 * n as i64) as i32) as i32);
        let frac = if w.re >= 0.0 {
            (-w * bt).exp() / (1.0 - (-w).exp())
        } else {
            -(w * (1.0 - bt)).exp() / (1.0 - w.exp())
        };
        acc += zp * frac;
    }
    Ok(acc * (t_param / n as f64))
}

/// m-point correlation ρ_m at points (t, h), t ∈ [0,1).
pub fn correlation_rho(n: usize, lambda: f64, t_param: f64, points: &[(f64, i64)]) -> Result<f64> {
    let m = points.len();
    if m == 0 || m > MAX_POINTS {
        return Err(GtError::InvalidInput(format!("need 1 ≤ m ≤ {MAX_POINTS} points (got {m})")));
    }
    for (i, a) in points.iter().enumerate() {
        if !(0.0..1.0).contains(&a.0) {
            return Err(GtError::InvalidInput(format!("point {i} has t = {} outside [0,1)", a.0)));
        }
        for b in &points[..i] {
            if a.0 == b.0 && (a.1 - b.1).rem_euclid(n as i64) == 0 {
                return Err(GtError::InvalidInput("points must be pairwise distinct".into()));
            }
        }
    }
    let d = theta_weights(n, lambda, t_param)?;
    let mut total = 0.0;
    for theta2 in 0..2u8 {
        let roots = roots_of(n, theta2);
        for theta1 in 0..2u8 {
            let w = d[(theta1 as usize) << 1 | theta2 as usize];
            if w == 0.0 {
                continue;
            }
            let beta = Complex64::new(lambda, theta1 as f64 * PI);
            let mut mat = DMatrix::<Complex64>::zeros(m, m);
            for i in 0..m {
                for j in 0..m {
                    let (dt, dh) = (points[j].0 - points[i].0, points[j].1 - points[i].1);
                    mat[(i, j)] = kernel_with_roots(&roots, beta, t_param, dt, dh)?;
                }
            }
            total += w * mat.determinant().re;
        }
    }
    Ok(total)
}

/// (1/n²) log(n^{n²} Vol_{n,ℓ}) − σ(ℓ/n, 1 − ℓ/n).
pub fn asymptotic_gap(n: usize, l: usize) -> Result<f64> {
    if n < 2 || l == 0 || l >= n {
        return Err(GtError::InvalidInput(format!("need 1 ≤ l ≤ n − 1 (got n = {n}, l = {l})")));
    }
    let v = exact_volume(n, n, l, DEFAULT_PRECISION_BITS)?;
    let n2 = (n * n) as f64;
    let lhs = (n2 * (n as f64).ln() + v.ln_abs()) / n2;
    let tau = l as f64 / n as f64;
    Ok(lhs - sigma(GradientPair::new(tau, 1.0 - tau))?)
}

/// Whether n^{−1/4} ≤ ℓ/n ≤ 1 − n^{−1/4}, the range where the asymptotics are asserted.
pub fn in_asymptotic_window(n: usize, l: usize) -> bool {
    let e = (n as f64).powf(-0.25);
    let tau = l as f64 / n as f64;
    tau >= e && tau <= 1.0 - e
}

/// Monte-Carlo volume estimate by rejection from [0,1)^{nk}, one (estimate, stderr) per ℓ ∈ 0..=n.
pub fn rejection_volumes(n: usize, k: usize, trials: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    if n < 2 || k == 0 || trials == 0 {
        return Err(GtError::InvalidInput("need n ≥ 2, k ≥ 1 and trials ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0usize; n + 1];
    let mut buf = vec![0.0; n * k];
    for _ in 0..trials {
        for x in buf.iter_mut() {
            *x = rng.random::<f64>();
        }
        let strings: Vec<&[f64]> = buf.chunks(k).collect();
        if strings.iter().any(|s| s.windows(2).any(|w| w[0] >= w[1])) {
            continue;
        }
        if !(0..n).all(|h| interlaced(strings[h], strings[(h + 1) % n])) {
            continue;
        }
        let l = (sum_q(n, &strings)).round() as usize;
        counts[l.min(n)] += 1;
    }
    Ok(counts
        .iter()
        .map(|&c| {
            let p = c as f64 / trials as f64;
            (p, (p * (1.0 - p) / trials as f64).sqrt())
        })
        .collect())
}
