//! Densities on a uniform grid and their integral transforms.
//!
//! A [`GridMeasure`] is the piecewise-linear interpolant of its node samples.
//! Cauchy transforms and log-potentials are integrated exactly for that
//! interpolant, so they stay accurate at any distance from the real axis.

use crate::error::{GtError, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Default number of grid cells.
pub const DEFAULT_GRID: usize = 2000;

/// Log-energy below this value is reported as divergent.
pub const DIVERGENCE_FLOOR: f64 = -1e6;

const MASS_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureJson", into = "MeasureJson")]
pub struct GridMeasure {
    lo: f64,
    hi: f64,
    density: Vec<f64>,
    mass: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureJson {
    support: [f64; 2],
    mass: f64,
    density: Vec<f64>,
}

impl TryFrom<MeasureJson> for GridMeasure {
    type Error = GtError;
    fn try_from(j: MeasureJson) -> Result<Self> {
        GridMeasure::new(j.support[0], j.support[1], j.density, j.mass)
    }
}

impl From<GridMeasure> for MeasureJson {
    fn from(m: GridMeasure) -> Self {
        MeasureJson {
            support: [m.lo, m.hi],
            mass: m.mass,
            density: m.density,
        }
    }
}

/// Named reference measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Builtin {
    Semicircle { mean: f64, variance: f64 },
    Arcsine { lo: f64, hi: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Builtin {
    /// Parses `semicircle`, `arcsine` or `uniform` with their default parameters.
    pub fn from_keyword(name: &str) -> Result<Self> {
        match name {
            "semicircle" => Ok(Builtin::Semicircle {
                mean: 0.0,
                variance: 1.0,
            }),
            "arcsine" => Ok(Builtin::Arcsine { lo: -1.0, hi: 1.0 }),
            "uniform" => Ok(Builtin::Uniform { lo: 0.0, hi: 1.0 }),
            other => Err(GtError::InvalidInput(format!("unknown measure keyword '{other}'"))),
        }
    }

    pub fn build(&self, cells: usize) -> Result<GridMeasure> {
        match *self {
            Builtin::Semicircle { mean, variance } => GridMeasure::semicircle_with(mean, variance, cells),
            Builtin::Arcsine { lo, hi } => GridMeasure::arcsine_on(lo, hi, cells),
            Builtin::Uniform { lo, hi } => GridMeasure::uniform(lo, hi, cells),
        }
    }
}

impl GridMeasure {
    /// Validating constructor. The trapezoid integral must match `mass`.
    pub fn new(lo: f64, hi: f64, density: Vec<f64>, mass: f64) -> Result<Self> {
        let m = Self::unchecked(lo, hi, density, mass)?;
        let t = m.trapezoid_mass();
        if (t - mass).abs() > MASS_RTOL * mass.abs().max(1e-300) {
            return Err(GtError::InvalidInput(format!(
                "trapezoid mass {t} differs from declared mass {mass}"
            )));
        }
        Ok(m)
    }

    /// Rescales `density` so that its trapezoid integral equals `mass`.
    pub fn normalized(lo: f64, hi: f64, density: Vec<f64>, mass: f64) -> Result<Self> {
        let mut m = Self::unchecked(lo, hi, density, mass)?;
        let t = m.trapezoid_mass();
        if !(t > 0.0) {
            return Err(GtError::InvalidInput("density has zero mass".into()));
        }
        let scale = mass / t;
        m.density.iter_mut().for_each(|f| *f *= scale);
        Ok(m)
    }

    fn unchecked(lo: f64, hi: f64, density: Vec<f64>, mass: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(GtError::InvalidInput(format!("bad support [{lo}, {hi}]")));
        }
        if density.len() < 2 {
            return Err(GtError::InvalidInput("need at least two density nodes".into()));
        }
        if let Some(bad) = density.iter().position(|f| !(f.is_finite() && *f >= 0.0)) {
            return Err(GtError::InvalidInput(format!(
                "density sample {bad} is {} (must be finite and non-negative)",
                density[bad]
            )));
        }
        if !(mass > 0.0 && mass <= 1.0 + 1e-12) {
            return Err(GtError::InvalidInput(format!("mass {mass} outside (0,1]")));
        }
        Ok(GridMeasure { lo, hi, density, mass })
    }

    /// Standard semicircle on [-2, 2].
    pub fn semicircle(cells: usize) -> Result<Self> {
        Self::semicircle_with(0.0, 1.0, cells)
    }

    pub fn semicircle_with(mean: f64, variance: f64, cells: usize) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(GtError::InvalidInput("variance must be positive".into()));
        }
        let r = 2.0 * variance.sqrt();
        Self::from_fn(mean - r, mean + r, cells, |x| {
            let y = (x - mean) / r * 2.0;
            semicircle_density(y) * 2.0 / r
        })
    }

    /// Arcsine law on [-1, 1].
    pub fn arcsine(cells: usize) -> Result<Self> {
        Self::arcsine_on(-1.0, 1.0, cells)
    }

    /// Arcsine law on [lo, hi]. The infinite endpoint values are replaced by
    /// the values that give the two end cells their exact mass.
    pub fn arcsine_on(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        check_cells(cells)?;
        let half = 0.5 * (hi - lo);
        let h_unit = 2.0 / cells as f64;
        let f = |y: f64| 1.0 / (PI * (1.0 - y * y).sqrt());
        let mut d: Vec<f64> = (0..=cells)
            .map(|k| {
                let y = -1.0 + k as f64 * h_unit;
                if k == 0 || k == cells {
                    0.0
                } else {
                    f(y)
                }
            })
            .collect();
        let edge_mass = ((-1.0 + h_unit).asin() + PI / 2.0) / PI;
        let end = (2.0 * edge_mass / h_unit - d[1]).max(0.0);
        d[0] = end;
        d[cells] = end;
        let d = d.into_iter().map(|v| v / half).collect();
        Self::normalized(lo, hi, d, 1.0)
    }

    pub fn uniform(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if !(lo < hi) {
            return Err(GtError::InvalidInput("uniform needs lo < hi".into()));
        }
        Self::from_fn(lo, hi, cells, |_| 1.0 / (hi - lo))
    }

    /// Samples `f` on the nodes and normalizes to a probability measure.
    pub fn from_fn(lo: f64, hi: f64, cells: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        check_cells(cells)?;
        let h = (hi - lo) / cells as f64;
        let d = (0..=cells).map(|k| f(lo + k as f64 * h).max(0.0)).collect();
        Self::normalized(lo, hi, d, 1.0)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }
    pub fn hi(&self) -> f64 {
        self.hi
    }
    pub fn mass(&self) -> f64 {
        self.mass
    }
    pub fn density(&self) -> &[f64] {
        &self.density
    }
    /// Number of grid cells (nodes minus one).
    pub fn cells(&self) -> usize {
        self.density.len() - 1
    }
    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.cells() as f64
    }
    pub fn node(&self, k: usize) -> f64 {
        if k == self.cells() {
            self.hi
        } else {
            self.lo + k as f64 * self.step()
        }
    }

    pub fn trapezoid_mass(&self) -> f64 {
        let h = self.step();
        self.density.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum()
    }

    /// Same measure with a different total mass.
    pub fn with_mass(&self, mass: f64) -> Result<Self> {
        Self::normalized(self.lo, self.hi, self.density.clone(), mass)
    }

    /// Piecewise-linear density, zero outside the support.
    pub fn density_at(&self, x: f64) -> f64 {
        if !(x >= self.lo && x <= self.hi) {
            return 0.0;
        }
        let u = (x - self.lo) / self.step();
        let k = (u.floor() as usize).min(self.cells() - 1);
        let w = u - k as f64;
        self.density[k] * (1.0 - w) + self.density[k + 1] * w
    }

    /// Mass of (-inf, x].
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return self.trapezoid_mass();
        }
        let h = self.step();
        let u = (x - self.lo) / h;
        let k = (u.floor() as usize).min(self.cells() - 1);
        let mut acc: f64 = self.density[..=k]
            .windows(2)
            .map(|w| 0.5 * h * (w[0] + w[1]))
            .sum();
        let y = x - self.node(k);
        let fa = self.density[k];
        let s = (self.density[k + 1] - fa) / h;
        acc += fa * y + 0.5 * s * y * y;
        acc
    }

    pub fn mean(&self) -> f64 {
        let h = self.step();
        let mut acc = 0.0;
        for k in 0..self.cells() {
            let (a, b) = (self.node(k), self.node(k + 1));
            acc += h / 6.0 * (self.density[k] * (2.0 * a + b) + self.density[k + 1] * (a + 2.0 * b));
        }
        acc / self.mass
    }

    /// Support of the region where the density exceeds `frac` times its maximum.
    pub fn effective_support(&self, frac: f64) -> (f64, f64) {
        let max = self.density.iter().cloned().fold(0.0, f64::max);
        let thr = frac * max;
        let first = self.density.iter().position(|&f| f > thr).unwrap_or(0);
        let last = self.density.iter().rposition(|&f| f > thr).unwrap_or(self.cells());
        (self.node(first.saturating_sub(1)), self.node((last + 1).min(self.cells())))
    }
}

fn check_cells(cells: usize) -> Result<()> {
    if cells < 2 {
        return Err(GtError::InvalidInput("grid needs at least 2 cells".into()));
    }
    Ok(())
}

/// L¹ distance between two grid densities, integrated on a common refined grid.
pub fn l1_distance(a: &GridMeasure, b: &GridMeasure) -> f64 {
    let lo = a.lo.min(b.lo);
    let hi = a.hi.max(b.hi);
    let n = 4 * a.cells().max(b.cells());
    let h = (hi - lo) / n as f64;
    let g = |k: usize| {
        let x = if k == n { hi } else { lo + k as f64 * h };
        (a.density_at(x) - b.density_at(x)).abs()
    };
    (0..n).map(|k| 0.5 * h * (g(k) + g(k + 1))).sum()
}

/// Closed-form standard semicircle density.
pub fn semicircle_density(x: f64) -> f64 {
    if x.abs() >= 2.0 {
        0.0
    } else {
        (4.0 - x * x).sqrt() / (2.0 * PI)
    }
}

pub fn semicircle_cdf(x: f64) -> f64 {
    if x <= -2.0 {
        return 0.0;
    }
    if x >= 2.0 {
        return 1.0;
    }
    0.5 + x * (4.0 - x * x).sqrt() / (4.0 * PI) + (x / 2.0).asin() / PI
}

/// Closed-form standard semicircle quantile, by bisection to machine precision.
pub fn semicircle_quantile(r: f64) -> f64 {
    if r <= 0.0 {
        return -2.0;
    }
    if r >= 1.0 {
        return 2.0;
    }
    let (mut a, mut b) = (-2.0f64, 2.0f64);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if semicircle_cdf(m) < r {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Quantile function sampled at r = i·mass/M, i = 0..M.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileCurve {
    mass: f64,
    values: Vec<f64>,
}

impl QuantileCurve {
    pub fn new(mass: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(GtError::InvalidInput("quantile curve needs two samples".into()));
        }
        if !(mass > 0.0) {
            return Err(GtError::InvalidInput("quantile curve mass must be positive".into()));
        }
        if let Some(i) = values.windows(2).position(|w| !(w[1] >= w[0])) {
            return Err(GtError::InvalidInput(format!("quantile values decrease at index {i}")));
        }
        Ok(QuantileCurve { mass, values })
    }

    /// Samples `q` on [0, mass].
    pub fn from_fn(mass: f64, cells: usize, q: impl Fn(f64) -> f64) -> Result<Self> {
        let v = (0..=cells).map(|i| q(i as f64 * mass / cells as f64)).collect();
        Self::new(mass, v)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn cells(&self) -> usize {
        self.values.len() - 1
    }
    pub fn step(&self) -> f64 {
        self.mass / self.cells() as f64
    }

    /// Linear interpolation, clamped to [0, mass].
    pub fn eval(&self, r: f64) -> f64 {
        let u = (r / self.step()).clamp(0.0, self.cells() as f64);
        let k = (u.floor() as usize).min(self.cells() - 1);
        let w = u - k as f64;
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    /// Four-point Lagrange interpolation; falls back to linear near the ends.
    pub fn eval_cubic(&self, r: f64) -> f64 {
        let n = self.cells();
        let u = (r / self.step()).clamp(0.0, n as f64);
        let k = (u.floor() as usize).min(n - 1);
        if k == 0 || k + 2 > n {
            return self.eval(r);
        }
        let w = u - k as f64;
        let p = [
            self.values[k - 1],
            self.values[k],
            self.values[k + 1],
            self.values[k + 2],
        ];
        let (a, b, c, d) = (w + 1.0, w, w - 1.0, w - 2.0);
        -p[0] * b * c * d / 6.0 + p[1] * a * c * d / 2.0 - p[2] * a * b * d / 2.0
            + p[3] * a * b * c / 6.0
    }
}

/// Right-continuous inverse of the distribution function on a grid of `grid_size` cells.
pub fn quantile_of(m: &GridMeasure, grid_size: usize) -> Result<QuantileCurve> {
    if grid_size < 1 {
        return Err(GtError::InvalidInput("grid_size must be positive".into()));
    }
    let h = m.step();
    let mut cum = Vec::with_capacity(m.cells() + 1);
    cum.push(0.0);
    for w in m.density.windows(2) {
        let last = *cum.last().unwrap();
        cum.push(last + 0.5 * h * (w[0] + w[1]));
    }
    let total = *cum.last().unwrap();
    if !(total > 0.0) {
        return Err(GtError::InvalidInput("zero-mass measure has no quantile".into()));
    }
    let first = (0..m.cells()).find(|&k| cum[k + 1] > cum[k]).unwrap();
    let last = (0..m.cells()).rev().find(|&k| cum[k + 1] > cum[k]).unwrap();
    let mut values = Vec::with_capacity(grid_size + 1);
    for i in 0..=grid_size {
        let target = i as f64 / grid_size as f64 * total;
        let x = if i == 0 {
            m.node(first)
        } else if i == grid_size {
            m.node(last + 1)
        } else {
            let k = cum.partition_point(|&c| c <= target).saturating_sub(1).min(m.cells() - 1);
            let delta = target - cum[k];
            let fa = m.density[k];
            let s = (m.density[k + 1] - fa) / h;
            let disc = (fa * fa + 2.0 * s * delta).max(0.0);
            let denom = fa + disc.sqrt();
            let y = if denom > 0.0 { 2.0 * delta / denom } else { 0.0 };
            m.node(k) + y.clamp(0.0, h)
        };
        values.push(x);
    }
    for i in 1..values.len() {
        if values[i] < values[i - 1] {
            values[i] = values[i - 1];
        }
    }
    QuantileCurve::new(m.mass, values)
}

/// Density as the reciprocal quantile slope, sampled on a uniform grid over
/// [Q(0), Q(mass)] with as many cells as the curve.
pub fn density_from_quantile(q: &QuantileCurve) -> Result<GridMeasure> {
    let v = &q.values;
    let dr = q.step();
    if let Some(i) = v.windows(2).position(|w| !(w[1] - w[0] > 0.0)) {
        return Err(GtError::SingularDensity(format!(
            "quantile curve is flat on cell {i} (slope zero)"
        )));
    }
    let (lo, hi) = (v[0], v[v.len() - 1]);
    let cells = q.cells();
    let hx = (hi - lo) / cells as f64;
    let mut d = Vec::with_capacity(cells + 1);
    let mut i = 0usize;
    for k in 0..=cells {
        let x = if k == cells { hi } else { lo + k as f64 * hx };
        while i + 1 < cells && v[i + 1] <= x {
            i += 1;
        }
        d.push(dr / (v[i + 1] - v[i]));
    }
    GridMeasure::normalized(lo, hi, d, q.mass)
}

fn pole_check(m: &GridMeasure, z: Complex64) -> Result<()> {
    let scale = (m.hi - m.lo).max(1.0);
    if z.im.abs() <= 1e-12 * scale && z.re >= m.lo - 1e-12 * scale && z.re <= m.hi + 1e-12 * scale {
        return Err(GtError::Pole(format!("z = {z} lies on the support [{}, {}]", m.lo, m.hi)));
    }
    Ok(())
}

/// G(z) = ∫ dm(x)/(z − x).
pub fn cauchy_transform(m: &GridMeasure, z: Complex64) -> Result<Complex64> {
    pole_check(m, z)?;
    Ok(cauchy_and_derivative(m, z).0)
}

/// G(z) and G'(z) for the piecewise-linear density; caller guarantees z is off the support.
pub(crate) fn cauchy_and_derivative(m: &GridMeasure, z: Complex64) -> (Complex64, Complex64) {
    cells_contribution(m, z, 0, m.cells())
}

fn cells_contribution(m: &GridMeasure, z: Complex64, k0: usize, k1: usize) -> (Complex64, Complex64) {
    let h = m.step();
    let mut g = Complex64::new(0.0, 0.0);
    let mut gp = Complex64::new(0.0, 0.0);
    let d = &m.density;
    for k in k0..k1 {
        let a = m.lo + k as f64 * h;
        let (fa, fb) = (d[k], d[k + 1]);
        if fa == 0.0 && fb == 0.0 {
            continue;
        }
        let za = z - a;
        let zb = za - h;
        let q = h / zb;
        let (ell, phi, gq) = if q.norm_sqr() < 0.01 {
            log1p_series(q)
        } else {
            let ell = (za / zb).ln();
            (ell, za * ell / h - 1.0, q - ell)
        };
        g += fa * ell + (fb - fa) * phi;
        gp -= fa * h / (za * zb) + (fb - fa) * gq / h;
    }
    (g, gp)
}

/// Cells per multipole block.
const BLOCK: usize = 32;
/// Laurent terms kept per block.
const TERMS: usize = 20;

/// Fast evaluation of G and G′ for repeated queries: blocks of cells far from
/// z are replaced by truncated Laurent expansions about the block centre.
#[derive(Debug, Clone)]
pub struct CauchyEvaluator {
    measure: GridMeasure,
    blocks: Vec<Block>,
}

#[derive(Debug, Clone)]
struct Block {
    k0: usize,
    k1: usize,
    centre: f64,
    half: f64,
    moments: [f64; TERMS],
}

impl CauchyEvaluator {
    pub fn new(m: &GridMeasure) -> Self {
        let h = m.step();
        let n = m.cells();
        let mut blocks = Vec::new();
        let mut k0 = 0;
        while k0 < n {
            let k1 = (k0 + BLOCK).min(n);
            let (a, b) = (m.node(k0), m.node(k1));
            let c = 0.5 * (a + b);
            let mut moments = [0.0; TERMS];
            for k in k0..k1 {
                let (fa, fb) = (m.density[k], m.density[k + 1]);
                let slope = (fb - fa) / h;
                let (ya, yb) = (m.node(k) - c, m.node(k + 1) - c);
                // f(x) = alpha + slope·(x − c) on the cell
                let alpha = fa - slope * ya;
                let (mut pa, mut pb) = (ya, yb);
                for (j, mom) in moments.iter_mut().enumerate() {
                    let (qa, qb) = (pa * ya, pb * yb);
                    *mom += alpha * (pb - pa) / (j + 1) as f64 + slope * (qb - qa) / (j + 2) as f64;
                    pa = qa;
                    pb = qb;
                }
            }
            blocks.push(Block {
                k0,
                k1,
                centre: c,
                half: 0.5 * (b - a),
                moments,
            });
            k0 = k1;
        }
        CauchyEvaluator {
            measure: m.clone(),
            blocks,
        }
    }

    pub fn measure(&self) -> &GridMeasure {
        &self.measure
    }

    /// (G(z), G′(z)); z must be off the support.
    pub fn eval(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut g = Complex64::new(0.0, 0.0);
        let mut gp = Complex64::new(0.0, 0.0);
        for b in &self.blocks {
            let w = z - b.centre;
            if w.norm() > 6.0 * b.half {
                let inv = w.inv();
                let mut p = inv;
                for (j, &mk) in b.moments.iter().enumerate() {
                    g += mk * p;
                    p *= inv;
                    gp -= (j + 1) as f64 * mk * p;
                }
            } else {
                let (a, c) = cells_contribution(&self.measure, z, b.k0, b.k1);
                g += a;
                gp += c;
            }
        }
        (g, gp)
    }
}

/// Returns (log(1+q), (1+q)log(1+q)/q − 1, q − log(1+q)) by power series, |q| < 0.1.
#[inline]
fn log1p_series(q: Complex64) -> (Complex64, Complex64, Complex64) {
    let mut p = q;
    let mut ell = q;
    let mut phi = q * 0.5;
    let mut gq = Complex64::new(0.0, 0.0);
    let tiny = 1e-17 * q.norm();
    let mut k = 1.0f64;
    loop {
        p *= -q;
        k += 1.0;
        if p.norm() < tiny || k > 40.0 {
            break;
        }
        ell += p / k;
        gq -= p / k;
        phi += p / (k * (k + 1.0));
    }
    (ell, phi, gq)
}

/// Boundary value G(x + i0) = p.v.∫ dm(u)/(x − u) − iπ·density(x).
pub fn boundary_cauchy(m: &GridMeasure, x: f64) -> Complex64 {
    let h = m.step();
    let n = m.cells();
    let d = &m.density;
    let alpha = |c: usize| {
        let s = (d[c + 1] - d[c]) / h;
        d[c] + s * (x - m.node(c))
    };
    let mut pv = -(d[n] - d[0]);
    for k in 0..=n {
        let xk = m.node(k);
        let dist = (x - xk).abs();
        let right = if k < n { alpha(k) } else { 0.0 };
        let left = if k > 0 { alpha(k - 1) } else { 0.0 };
        let coef = right - left;
        if dist < 1e-13 * h {
            continue;
        }
        pv += coef * dist.ln();
    }
    Complex64::new(pv, -PI * m.density_at(x))
}

/// (U, V) with U = (1/π)∫log|x−u| dm(u) and V = −m((x, ∞)).
pub fn log_potential_parts(m: &GridMeasure, x: f64) -> (f64, f64) {
    let h = m.step();
    let d = &m.density;
    let prim_a = |w: f64| if w == 0.0 { 0.0 } else { w * w.abs().ln() - w };
    let prim_b = |w: f64| {
        if w == 0.0 {
            0.0
        } else {
            0.5 * w * w * w.abs().ln() - 0.25 * w * w
        }
    };
    let mut acc = 0.0;
    for k in 0..m.cells() {
        let (fa, fb) = (d[k], d[k + 1]);
        if fa == 0.0 && fb == 0.0 {
            continue;
        }
        let a = m.node(k);
        let s = (fb - fa) / h;
        let alpha = fa + s * (x - a);
        let (wa, wb) = (a - x, a + h - x);
        acc += alpha * (prim_a(wb) - prim_a(wa)) + s * (prim_b(wb) - prim_b(wa));
    }
    let v = -(m.trapezoid_mass() - m.cdf(x)).max(0.0);
    (acc / PI, v)
}

/// F with F'' = log|u| and F(0) = 0.
#[inline]
fn f2(u: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        0.5 * u * u * u.abs().ln() - 0.75 * u * u
    }
}

/// Mean of log|y − x| for x ~ U[a,b], y ~ U[c,d].
fn pair_log_mean(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let (wi, wj) = (b - a, d - c);
    let dist = (0.5 * (c + d) - 0.5 * (a + b)).abs();
    if dist > 20.0 * wi.max(wj) {
        let (a2, b2) = (wi * wi, wj * wj);
        let d2 = dist * dist;
        let m4 = (a2 * a2 + b2 * b2) / 80.0 + a2 * b2 / 24.0;
        return dist.ln() - (a2 + b2) / (24.0 * d2) - m4 / (4.0 * d2 * d2);
    }
    (f2(d - a) - f2(c - a) - f2(d - b) + f2(c - b)) / (wi * wj)
}

/// Mean of log|y − x| for two unit cells whose left ends differ by k.
fn unit_offset_log_mean(k: usize) -> f64 {
    if k == 0 {
        return -1.5;
    }
    let kf = k as f64;
    if k > 30 {
        let k2 = kf * kf;
        return kf.ln() - 1.0 / (12.0 * k2) - 1.0 / (60.0 * k2 * k2);
    }
    f2(kf + 1.0) - 2.0 * f2(kf) + f2(kf - 1.0)
}

/// ∬ log|y − x| dm dm, each cell carrying its trapezoid mass uniformly.
pub fn log_energy(m: &GridMeasure) -> Result<f64> {
    let h = m.step();
    let masses: Vec<f64> = m.density.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).collect();
    let n = masses.len();
    let lh = h.ln();
    let table: Vec<f64> = (0..n).map(|k| unit_offset_log_mean(k) + lh).collect();
    let mut acc = 0.0;
    for i in 0..n {
        if masses[i] == 0.0 {
            continue;
        }
        let mut row = masses[i] * table[0];
        for j in i + 1..n {
            row += 2.0 * masses[j] * table[j - i];
        }
        acc += masses[i] * row;
    }
    let total: f64 = masses.iter().sum();
    let e = acc / (total * total);
    check_energy(e)
}

fn check_energy(e: f64) -> Result<f64> {
    if !e.is_finite() || e < DIVERGENCE_FLOOR {
        return Err(GtError::Divergence(format!("log-energy {e} below floor {DIVERGENCE_FLOOR}")));
    }
    Ok(e)
}

/// χ = ½∬log|y − x| dm dm + 3/4 for a probability measure.
pub fn free_entropy(m: &GridMeasure) -> Result<f64> {
    if (m.mass - 1.0).abs() > 1e-9 {
        return Err(GtError::InvalidInput(format!(
            "free entropy needs a probability measure, mass is {}",
            m.mass
        )));
    }
    Ok(0.5 * log_energy(m)? + 0.75)
}

/// χ from a quantile curve: ∫∫_{t<s} log|ρ(s) − ρ(t)| + 3/4, ρ piecewise linear.
pub fn free_entropy_quantile(q: &QuantileCurve) -> Result<f64> {
    let v = &q.values;
    let n = q.cells();
    let w = 1.0 / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let (a, b) = (v[i], v[i + 1]);
        if !(b > a) {
            return Err(GtError::Divergence(format!("quantile curve has an atom at {a}")));
        }
        acc += 0.5 * ((b - a).ln() - 1.5);
        for j in i + 1..n {
            acc += pair_log_mean(a, b, v[j], v[j + 1]);
        }
    }
    let e = 2.0 * acc * w * w;
    Ok(0.5 * check_energy(e)? + 0.75)
}
