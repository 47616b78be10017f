//! Free compression flows μ_τ = τ[μ]_τ, their Cauchy-transform field and
//! quantile surface.
//!
//! For z above the real axis, G(τ, z) solves τ/G + R_μ(G) = z. With the
//! numeric handle this is solved in the variable ζ = G_μ⁻¹(G), where the
//! equation reads ζ − (1 − τ)/G_μ(ζ) = z and G(τ, z) = G_μ(ζ); ζ then stays
//! at least as far from the real axis as z, where G_μ is cheap and exact.

use crate::error::{GtError, Result};
use crate::fsutil::write_atomic;
use crate::measure_core::{cauchy_transform, log_energy, quantile_of, CauchyEvaluator, GridMeasure, QuantileCurve};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

pub const DEFAULT_EPS0: f64 = 1e-3;

const NEWTON_ITERS: usize = 100;
const MAX_HALVINGS: usize = 24;

/// R-transform of a probability measure.
#[derive(Debug, Clone)]
pub enum RTransformHandle {
    ClosedFormSemicircle { mean: f64, variance: f64 },
    Numeric(NumericR),
}

#[derive(Debug, Clone)]
pub struct NumericR {
    measure: GridMeasure,
    evaluator: CauchyEvaluator,
    mean: f64,
    radius: f64,
    samples: Vec<(Complex64, Complex64)>,
}

impl NumericR {
    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn mean(&self) -> f64 {
        self.mean
    }
    /// Pairs (s, R(s)) on a polar grid inside the validity disk.
    pub fn samples(&self) -> &[(Complex64, Complex64)] {
        &self.samples
    }
}

impl RTransformHandle {
    pub fn semicircle(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !mean.is_finite() {
            return Err(GtError::InvalidInput("semicircle needs finite mean and positive variance".into()));
        }
        Ok(RTransformHandle::ClosedFormSemicircle { mean, variance })
    }

    /// Numeric handle valid on |s| ≤ 0.8·max_x |G(x + iε₀)|.
    pub fn numeric(m: &GridMeasure, eps0: f64) -> Result<Self> {
        check_probability(m)?;
        let n = m.cells();
        let evaluator = CauchyEvaluator::new(m);
        let gmax = (0..=n)
            .map(|k| evaluator.eval(Complex64::new(m.node(k), eps0)).0.norm())
            .fold(0.0, f64::max);
        let radius = 0.8 * gmax;
        let mut h = NumericR {
            measure: m.clone(),
            evaluator,
            mean: m.mean(),
            radius,
            samples: Vec::new(),
        };
        let mut samples = Vec::new();
        for ring in 1..=4 {
            let rho = radius * ring as f64 / 5.0;
            for k in 0..8 {
                let s = Complex64::from_polar(rho, PI * (k as f64 + 0.5) / 8.0 - PI);
                if let Ok(r) = numeric_r(&h, s) {
                    samples.push((s, r));
                }
            }
        }
        h.samples = samples;
        Ok(RTransformHandle::Numeric(h))
    }

    pub fn mean(&self) -> f64 {
        match self {
            RTransformHandle::ClosedFormSemicircle { mean, .. } => *mean,
            RTransformHandle::Numeric(h) => h.mean,
        }
    }

    pub fn radius(&self) -> f64 {
        match self {
            RTransformHandle::ClosedFormSemicircle { .. } => f64::INFINITY,
            RTransformHandle::Numeric(h) => h.radius,
        }
    }
}

/// R(s) with 1/G(z) + R(G(z)) = z.
pub fn r_transform_eval(h: &RTransformHandle, s: Complex64) -> Result<Complex64> {
    match h {
        RTransformHandle::ClosedFormSemicircle { mean, variance } => Ok(*mean + *variance * s),
        RTransformHandle::Numeric(n) => {
            if !(s.norm() <= n.radius) {
                return Err(GtError::Domain(format!("|s| = {} exceeds the validity radius {}", s.norm(), n.radius)));
            }
            numeric_r(n, s)
        }
    }
}

fn numeric_r(h: &NumericR, s: Complex64) -> Result<Complex64> {
    if s.norm() == 0.0 {
        return Ok(Complex64::new(h.mean, 0.0));
    }
    let m = &h.measure;
    let scale = (m.hi() - m.lo()).max(1.0);
    let mut z = s.inv() + h.mean;
    let mut res = f64::INFINITY;
    for _ in 0..NEWTON_ITERS {
        if on_support(m, z, scale) {
            // step off the cut on the side G(z) = s requires
            z.im = if s.im > 0.0 { -1e-3 * scale } else { 1e-3 * scale };
        }
        let (g, gp) = h.evaluator.eval(z);
        let f = g - s;
        res = f.norm() / s.norm();
        if res < 1e-13 {
            let r = z - s.inv();
            let check = (g.inv() + r - z).norm();
            if check < 1e-8 * (1.0 + z.norm()) {
                return Ok(r);
            }
        }
        z -= f / gp;
    }
    Err(GtError::Convergence {
        iterations: NEWTON_ITERS,
        residual: res,
        context: format!("inverting the Cauchy transform at s = {s}"),
    })
}

fn on_support(m: &GridMeasure, z: Complex64, scale: f64) -> bool {
    z.im.abs() < 1e-12 * scale && z.re >= m.lo() && z.re <= m.hi()
}

fn check_probability(m: &GridMeasure) -> Result<()> {
    if (m.mass() - 1.0).abs() > 1e-9 {
        return Err(GtError::InvalidInput(format!("expected a probability measure, mass is {}", m.mass())));
    }
    Ok(())
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(GtError::InvalidInput(format!("tau = {tau} outside (0, 1]")));
    }
    Ok(())
}

/// Equation solver along the flow at a fixed contour point.
#[derive(Clone, Copy)]
enum Kernel<'a> {
    /// τ/G + a + s²G = z, unknown G.
    Semicircle { mean: f64, variance: f64 },
    /// ζ − (1−τ)/G_μ(ζ) = z, unknown ζ.
    Grid(&'a CauchyEvaluator),
}

impl Kernel<'_> {
    /// Initial unknown at τ = 1 and its G.
    fn start(&self, z: Complex64) -> (Complex64, Complex64) {
        match *self {
            Kernel::Semicircle { mean, variance } => {
                let g = semicircle_root(z, 1.0, mean, variance);
                (g, g)
            }
            Kernel::Grid(e) => (z, e.eval(z).0),
        }
    }

    /// Newton solve at τ from `w0`; returns (unknown, G) or None.
    fn solve(&self, z: Complex64, tau: f64, w0: Complex64, eps0: f64) -> Option<(Complex64, Complex64)> {
        let tol = 1e-13 * (1.0 + z.norm());
        let mut w = w0;
        for _ in 0..40 {
            let (f, fp, g) = self.eval(z, tau, w)?;
            if f.norm() <= tol {
                return Some((w, g));
            }
            let dw = -f / fp;
            let mut t = 1.0;
            let mut next = w + dw;
            for _ in 0..30 {
                if self.admissible(next, eps0) {
                    break;
                }
                t *= 0.5;
                next = w + dw * t;
            }
            if !self.admissible(next, eps0) {
                return None;
            }
            w = next;
        }
        let (f, _, g) = self.eval(z, tau, w)?;
        (f.norm() <= 1e3 * tol).then_some((w, g))
    }

    fn admissible(&self, w: Complex64, eps0: f64) -> bool {
        match self {
            Kernel::Semicircle { .. } => w.im < 0.0 && w.norm() > 0.0,
            Kernel::Grid(_) => w.im >= 0.5 * eps0,
        }
    }

    /// (F, F′, G) at unknown `w`.
    fn eval(&self, z: Complex64, tau: f64, w: Complex64) -> Option<(Complex64, Complex64, Complex64)> {
        match *self {
            Kernel::Semicircle { mean, variance } => {
                let f = tau / w + mean + variance * w - z;
                let fp = -tau / (w * w) + variance;
                Some((f, fp, w))
            }
            Kernel::Grid(e) => {
                let (g, gp) = e.eval(w);
                if g.norm() == 0.0 || !g.is_finite() {
                    return None;
                }
                let f = w - (1.0 - tau) / g - z;
                let fp = 1.0 + (1.0 - tau) * gp / (g * g);
                Some((f, fp, g))
            }
        }
    }

    /// Tangent dw/dτ at a solution.
    fn tangent(&self, z: Complex64, tau: f64, w: Complex64) -> Complex64 {
        match self.eval(z, tau, w) {
            Some((_, fp, g)) => -(g.inv()) / fp,
            None => Complex64::new(0.0, 0.0),
        }
    }
}

/// Root of τ/G + a + s²G = z with Im G < 0.
fn semicircle_root(z: Complex64, tau: f64, mean: f64, variance: f64) -> Complex64 {
    let w = z - mean;
    let disc = (w * w - 4.0 * variance * tau).sqrt();
    let r1 = (w - disc) / (2.0 * variance);
    let r2 = (w + disc) / (2.0 * variance);
    if r1.im < 0.0 {
        r1
    } else {
        r2
    }
}

/// Tracks one contour point from τ = 1 through the descending `targets`.
fn track(kernel: Kernel<'_>, z: Complex64, targets: &[f64], eps0: f64) -> Vec<Option<Complex64>> {
    let mut out = Vec::with_capacity(targets.len());
    let (mut w, _) = kernel.start(z);
    let mut tau = 1.0;
    let mut alive = true;
    for &target in targets {
        if !alive {
            out.push(None);
            continue;
        }
        let mut g_at = None;
        let mut dt = target - tau;
        let mut halvings = 0;
        while tau != target {
            let step_to = if (tau + dt - target) * dt.signum() >= 0.0 { target } else { tau + dt };
            let guess = w + kernel.tangent(z, tau, w) * (step_to - tau);
            let guess = if kernel.admissible(guess, eps0) { guess } else { w };
            match kernel.solve(z, step_to, guess, eps0) {
                Some((nw, g)) => {
                    w = nw;
                    tau = step_to;
                    g_at = Some(g);
                }
                None => {
                    halvings += 1;
                    if halvings > MAX_HALVINGS {
                        alive = false;
                        break;
                    }
                    dt *= 0.5;
                }
            }
        }
        if tau == target && g_at.is_none() {
            g_at = kernel.eval(z, tau, w).map(|e| e.2);
        }
        out.push(if alive { g_at } else { None });
    }
    out
}

/// G(τ, x_k + iε₀) on the nodes of `grid`, or a flow error when more than 1%
/// of nodes fail at some τ. Failed nodes are filled from their neighbours.
fn solve_field(kernel: Kernel<'_>, grid: &GridMeasure, targets: &[f64], eps0: f64) -> Result<Vec<Vec<Complex64>>> {
    let n = grid.cells();
    let per_node: Vec<Vec<Option<Complex64>>> = (0..=n)
        .into_par_iter()
        .map(|k| track(kernel, Complex64::new(grid.node(k), eps0), targets, eps0))
        .collect();
    let mut field = Vec::with_capacity(targets.len());
    for (j, &tau) in targets.iter().enumerate() {
        let col: Vec<Option<Complex64>> = per_node.iter().map(|v| v[j]).collect();
        let failed = col.iter().filter(|g| g.is_none()).count();
        if failed as f64 > 0.01 * (n + 1) as f64 {
            return Err(GtError::Flow {
                tau,
                reason: format!("Newton failed on {failed} of {} contour nodes", n + 1),
            });
        }
        field.push(fill_gaps(&col));
    }
    Ok(field)
}

fn fill_gaps(col: &[Option<Complex64>]) -> Vec<Complex64> {
    let n = col.len();
    (0..n)
        .map(|k| {
            if let Some(g) = col[k] {
                return g;
            }
            let left = (0..k).rev().find_map(|i| col[i].map(|g| (i, g)));
            let right = (k + 1..n).find_map(|i| col[i].map(|g| (i, g)));
            match (left, right) {
                (Some((i, a)), Some((l, b))) => {
                    let w = (k - i) as f64 / (l - i) as f64;
                    a * (1.0 - w) + b * w
                }
                (Some((_, a)), None) => a,
                (None, Some((_, b))) => b,
                (None, None) => Complex64::new(0.0, 0.0),
            }
        })
        .collect()
}

fn density_from_field(grid: &GridMeasure, g: &[Complex64], mass: f64, tau: f64, eps0: f64) -> Result<GridMeasure> {
    let d: Vec<f64> = g.iter().map(|g| (-g.im / PI).max(0.0)).collect();
    // the contour smoothing leaves Poisson tails; they sit below √ε₀ of the peak
    let thr = eps0.sqrt() * d.iter().cloned().fold(0.0, f64::max);
    let d: Vec<f64> = d.into_iter().map(|v| if v < thr { 0.0 } else { v }).collect();
    GridMeasure::normalized(grid.lo(), grid.hi(), d, mass).map_err(|e| GtError::Flow {
        tau,
        reason: format!("recovered density is unusable: {e}"),
    })
}

/// The probability measure [μ]_τ at the default contour height.
pub fn compress_measure(m: &GridMeasure, tau: f64) -> Result<GridMeasure> {
    compress_measure_with(m, tau, DEFAULT_EPS0)
}

pub fn compress_measure_with(m: &GridMeasure, tau: f64, eps0: f64) -> Result<GridMeasure> {
    check_tau(tau)?;
    check_probability(m)?;
    if tau == 1.0 {
        return Ok(m.clone());
    }
    let ev = CauchyEvaluator::new(m);
    let field = solve_field(Kernel::Grid(&ev), m, &[tau], eps0)?;
    density_from_field(m, &field[0], 1.0, tau, eps0)
}

/// Discretized flow τ ↦ μ_τ on τ_j = j/steps.
#[derive(Debug, Clone)]
pub struct CompressionFlow {
    base: GridMeasure,
    eps0: f64,
    tau_grid: Vec<f64>,
    slices: Vec<GridMeasure>,
    g_field: Vec<Vec<Complex64>>,
    lambda_surface: Vec<QuantileCurve>,
    burgers_residual: f64,
    burgers_bound: f64,
}

/// Burgers residual bound is this constant times (Δτ + Δx).
const BURGERS_CONSTANT: f64 = 5.0;

impl CompressionFlow {
    pub fn base(&self) -> &GridMeasure {
        &self.base
    }
    pub fn eps0(&self) -> f64 {
        self.eps0
    }
    pub fn tau_grid(&self) -> &[f64] {
        &self.tau_grid
    }
    pub fn tau_steps(&self) -> usize {
        self.tau_grid.len()
    }
    /// μ_τ with mass τ, one per entry of the τ grid.
    pub fn slices(&self) -> &[GridMeasure] {
        &self.slices
    }
    /// G(τ, x + iε₀) on the base grid nodes.
    pub fn g_field(&self) -> &[Vec<Complex64>] {
        &self.g_field
    }
    pub fn lambda_surface(&self) -> &[QuantileCurve] {
        &self.lambda_surface
    }
    /// Sup of |G_τ + G_z/G| over bulk nodes.
    pub fn burgers_residual(&self) -> f64 {
        self.burgers_residual
    }
    pub fn burgers_bound(&self) -> f64 {
        self.burgers_bound
    }

    pub fn mean(&self) -> f64 {
        self.base.mean()
    }

    /// Index of τ in the grid, if it is a node.
    pub fn tau_index(&self, tau: f64) -> Option<usize> {
        let s = tau * self.tau_steps() as f64;
        let j = s.round();
        ((s - j).abs() < 1e-9 && j >= 1.0 && j <= self.tau_steps() as f64).then(|| j as usize - 1)
    }

    /// λ(r, τ_j) by cubic interpolation in r.
    pub fn lambda_on_slice(&self, j: usize, r: f64) -> f64 {
        self.lambda_surface[j].eval_cubic(r)
    }

    /// λ(r, τ) for any 0 ≤ r ≤ τ ≤ 1. Between slices the centred, √τ-scaled
    /// quantile at p = r/τ is interpolated linearly in τ.
    pub fn lambda_at(&self, r: f64, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        if !(r >= -1e-12 && r <= tau + 1e-12) {
            return Err(GtError::Domain(format!("r = {r} outside [0, {tau}]")));
        }
        if let Some(j) = self.tau_index(tau) {
            return Ok(self.lambda_on_slice(j, r.clamp(0.0, tau)));
        }
        let p = (r / tau).clamp(0.0, 1.0);
        let mean = self.mean();
        let shape = |j: usize| {
            let t = self.tau_grid[j];
            (self.lambda_on_slice(j, p * t) - mean) / t.sqrt()
        };
        let pos = tau * self.tau_steps() as f64;
        let v = if pos < 1.0 {
            shape(0)
        } else {
            let k = (pos.floor() as usize).min(self.tau_steps() - 1);
            let w = pos - k as f64;
            shape(k - 1) * (1.0 - w) + shape(k.min(self.tau_steps() - 1)) * w
        };
        Ok(mean + tau.sqrt() * v)
    }

    /// Writes per-τ measure JSON files, a manifest and `lambda.csv`.
    pub fn export(&self, dir: &Path, header: Option<&str>) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        for (j, s) in self.slices.iter().enumerate() {
            let name = format!("slice_{:04}.json", j + 1);
            write_atomic(&dir.join(&name), serde_json::to_string(s)?.as_bytes())?;
            files.push(name);
        }
        let manifest = Manifest {
            tau_grid: &self.tau_grid,
            eps0: self.eps0,
            x_cells: self.base.cells(),
            r_cells: self.lambda_surface[0].cells(),
            slices: files,
            burgers_residual: self.burgers_residual,
        };
        write_atomic(&dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
        let mut csv = String::new();
        if let Some(h) = header {
            for line in h.lines() {
                let _ = writeln!(csv, "# {line}");
            }
        }
        csv.push_str("r,tau,lambda\n");
        for (j, q) in self.lambda_surface.iter().enumerate() {
            let t = self.tau_grid[j];
            for (i, v) in q.values().iter().enumerate() {
                let _ = writeln!(csv, "{},{},{}", i as f64 * q.step(), t, v);
            }
        }
        write_atomic(&dir.join("lambda.csv"), csv.as_bytes())
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tau_grid: &'a [f64],
    eps0: f64,
    x_cells: usize,
    r_cells: usize,
    slices: Vec<String>,
    burgers_residual: f64,
}

fn check_flow_args(tau_steps: usize, eps0: f64) -> Result<()> {
    if tau_steps < 4 {
        return Err(GtError::InvalidInput("tau_steps must be at least 4".into()));
    }
    if !(eps0 > 1e-6 && eps0 < 1e-2) {
        return Err(GtError::InvalidInput(format!("eps0 = {eps0} outside (1e-6, 1e-2)")));
    }
    Ok(())
}

/// Flow of a grid measure, using the exact piecewise-linear Cauchy transform.
pub fn build_flow(m: &GridMeasure, tau_steps: usize, eps0: f64) -> Result<CompressionFlow> {
    check_flow_args(tau_steps, eps0)?;
    check_probability(m)?;
    let ev = CauchyEvaluator::new(m);
    assemble_flow(Kernel::Grid(&ev), m.clone(), tau_steps, eps0)
}

/// Flow of the semicircle law through its closed-form R-transform, sampled
/// on `cells` grid cells over its support.
pub fn build_flow_semicircle(mean: f64, variance: f64, tau_steps: usize, eps0: f64, cells: usize) -> Result<CompressionFlow> {
    check_flow_args(tau_steps, eps0)?;
    let base = GridMeasure::semicircle_with(mean, variance, cells)?;
    assemble_flow(Kernel::Semicircle { mean, variance }, base, tau_steps, eps0)
}

/// Dispatches on the handle kind.
pub fn build_flow_with(h: &RTransformHandle, base: &GridMeasure, tau_steps: usize, eps0: f64) -> Result<CompressionFlow> {
    check_flow_args(tau_steps, eps0)?;
    match h {
        RTransformHandle::ClosedFormSemicircle { mean, variance } => assemble_flow(
            Kernel::Semicircle {
                mean: *mean,
                variance: *variance,
            },
            base.clone(),
            tau_steps,
            eps0,
        ),
        RTransformHandle::Numeric(n) => build_flow(&n.measure, tau_steps, eps0),
    }
}

fn assemble_flow(kernel: Kernel<'_>, base: GridMeasure, tau_steps: usize, eps0: f64) -> Result<CompressionFlow> {
    let tau_grid: Vec<f64> = (1..=tau_steps).map(|j| j as f64 / tau_steps as f64).collect();
    let descending: Vec<f64> = tau_grid.iter().rev().cloned().collect();
    let mut field = solve_field(kernel, &base, &descending, eps0)?;
    field.reverse();
    let r_cells = base.cells();
    let mut slices = Vec::with_capacity(tau_steps);
    let mut lambda = Vec::with_capacity(tau_steps);
    for (j, &tau) in tau_grid.iter().enumerate() {
        let s = if j + 1 == tau_steps {
            base.clone()
        } else {
            density_from_field(&base, &field[j], tau, tau, eps0)?
        };
        lambda.push(quantile_of(&s, r_cells)?);
        slices.push(s);
    }
    let mut flow = CompressionFlow {
        base,
        eps0,
        tau_grid,
        slices,
        g_field: field,
        lambda_surface: lambda,
        burgers_residual: 0.0,
        burgers_bound: 0.0,
    };
    let dt = 1.0 / tau_steps as f64;
    flow.burgers_bound = BURGERS_CONSTANT * (dt + flow.base.step());
    let (res, worst) = burgers_residual(&flow);
    flow.burgers_residual = res;
    if res > 10.0 * flow.burgers_bound {
        return Err(GtError::Flow {
            tau: worst,
            reason: format!("Burgers residual {res:e} exceeds 10x the bound {:e}", flow.burgers_bound),
        });
    }
    Ok(flow)
}

/// Nodes whose density is at least this fraction of the slice maximum count as bulk.
const BULK_FRACTION: f64 = 0.1;

fn bulk_mask(s: &GridMeasure) -> Vec<bool> {
    let frac = BULK_FRACTION;
    let d = s.density();
    let max = d.iter().cloned().fold(0.0, f64::max);
    let n = d.len();
    (0..n)
        .map(|k| k >= 2 && k + 2 < n && d[k - 2..=k + 2].iter().all(|&v| v >= frac * max))
        .collect()
}

/// Sup of |G_τ + G_z/G| at bulk nodes of slices with τ ≥ 1/4, with the τ where
/// it occurs. Bulk nodes lie between the 5% and 95% quantiles of all three
/// slices of the τ stencil.
fn burgers_residual(flow: &CompressionFlow) -> (f64, f64) {
    let steps = flow.tau_steps();
    let dt = 1.0 / steps as f64;
    let h = flow.base.step();
    let mut worst = (0.0, flow.tau_grid[0]);
    // slices shrink like √τ, so the diagnostic stays away from τ = 0
    let first = (steps / 4).max(1);
    let g = &flow.g_field;
    for j in first..steps.saturating_sub(1) {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for jj in j - 1..=j + 1 {
            let q = &flow.lambda_surface[jj];
            let t = flow.tau_grid[jj];
            lo = lo.max(q.eval(0.05 * t));
            hi = hi.min(q.eval(0.95 * t));
        }
        for k in 1..g[j].len() - 1 {
            let x = flow.base.node(k);
            if x < lo || x > hi {
                continue;
            }
            let gt = (g[j + 1][k] - g[j - 1][k]) / (2.0 * dt);
            let gz = (g[j][k + 1] - g[j][k - 1]) / (2.0 * h);
            let r = (gt + gz / g[j][k]).norm();
            if r > worst.0 {
                worst = (r, flow.tau_grid[j]);
            }
        }
    }
    worst
}

/// Hessian of σ₀(p, q) = log p + log|sin(πq/p)| as (σ_pp, σ_pq, σ_qq).
pub fn sigma0_hessian(p: f64, q: f64) -> (f64, f64, f64) {
    let th = PI * q / p;
    let cot = th.cos() / th.sin();
    let csc2 = 1.0 / (th.sin() * th.sin());
    let pi2 = PI * PI;
    let spp = -1.0 / (p * p) + 2.0 * PI * q / (p * p * p) * cot - pi2 * q * q / (p * p * p * p) * csc2;
    let spq = -PI / (p * p) * cot + pi2 * q / (p * p * p) * csc2;
    let sqq = -pi2 / (p * p) * csc2;
    (spp, spq, sqq)
}

/// Gradient of σ₀ as (∂σ₀/∂p, ∂σ₀/∂q).
pub fn sigma0_grad(p: f64, q: f64) -> (f64, f64) {
    let th = PI * q / p;
    let cot = th.cos() / th.sin();
    (1.0 / p - PI * q / (p * p) * cot, PI / p * cot)
}

/// ∂_r σ₀,p + ∂_τ σ₀,q of a surface by central differences with step `delta`,
/// expanded as σ_pp λ_rr + 2σ_pq λ_rτ + σ_qq λ_ττ.
pub fn el_residual_surface(lambda: impl Fn(f64, f64) -> f64, r: f64, tau: f64, delta: f64) -> f64 {
    let d = delta;
    let l = |a: f64, b: f64| lambda(r + a * d, tau + b * d);
    let c = l(0.0, 0.0);
    let lr = (l(1.0, 0.0) - l(-1.0, 0.0)) / (2.0 * d);
    let lt = (l(0.0, 1.0) - l(0.0, -1.0)) / (2.0 * d);
    let lrr = (l(1.0, 0.0) - 2.0 * c + l(-1.0, 0.0)) / (d * d);
    let ltt = (l(0.0, 1.0) - 2.0 * c + l(0.0, -1.0)) / (d * d);
    let lrt = (l(1.0, 1.0) - l(1.0, -1.0) - l(-1.0, 1.0) + l(-1.0, -1.0)) / (4.0 * d * d);
    let (spp, spq, sqq) = sigma0_hessian(lr, lt);
    spp * lrr + 2.0 * spq * lrt + sqq * ltt
}

/// Euler–Lagrange residual of the flow's quantile surface at a τ-grid node.
pub fn el_residual(flow: &CompressionFlow, r: f64, tau: f64) -> Result<f64> {
    let d = 1.0 / flow.tau_steps() as f64;
    let j = flow
        .tau_index(tau)
        .ok_or_else(|| GtError::Domain(format!("tau = {tau} is not a node of the tau grid")))?;
    if j == 0 || j + 1 >= flow.tau_steps() || r - d < 0.0 || r + d > tau - d {
        return Err(GtError::Domain(format!("stencil around (r, tau) = ({r}, {tau}) leaves the triangle")));
    }
    Ok(el_residual_surface(
        |a, b| {
            let jj = flow.tau_index(b).expect("stencil stays on the tau grid");
            flow.lambda_on_slice(jj, a)
        },
        r,
        tau,
        d,
    ))
}

/// Returns (cot(πλ_τ/λ_r), u/v) at (r, τ_j), with u, v from the contour field.
pub fn cot_identity(flow: &CompressionFlow, r: f64, tau: f64) -> Result<(f64, f64)> {
    let d = 1.0 / flow.tau_steps() as f64;
    let j = flow
        .tau_index(tau)
        .ok_or_else(|| GtError::Domain(format!("tau = {tau} is not a node of the tau grid")))?;
    if j == 0 || j + 1 >= flow.tau_steps() || r - d < 0.0 || r + d > tau - d {
        return Err(GtError::Domain(format!("stencil around (r, tau) = ({r}, {tau}) leaves the triangle")));
    }
    let lam = |jj: usize, rr: f64| flow.lambda_on_slice(jj, rr);
    let lr = (lam(j, r + d) - lam(j, r - d)) / (2.0 * d);
    let lt = (lam(j + 1, r) - lam(j - 1, r)) / (2.0 * d);
    let x = lam(j, r);
    let g = field_at(flow, j, x);
    let (u, v) = (g.re / PI, -g.im / PI);
    Ok((1.0 / (PI * lt / lr).tan(), u / v))
}

/// Linear interpolation of G(τ_j, · + iε₀) in x.
fn field_at(flow: &CompressionFlow, j: usize, x: f64) -> Complex64 {
    let b = &flow.base;
    let u = ((x - b.lo()) / b.step()).clamp(0.0, b.cells() as f64);
    let k = (u.floor() as usize).min(b.cells() - 1);
    let w = u - k as f64;
    flow.g_field[j][k] * (1.0 - w) + flow.g_field[j][k + 1] * w
}

/// Report of the log-potential evolution identities.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PotentialCheck {
    pub err_u: f64,
    pub err_v: f64,
    /// Grid-dependent tolerance the two errors are expected to stay below.
    pub tolerance: f64,
}

/// (U, V) of every slice on the base grid nodes.
fn potentials(flow: &CompressionFlow) -> Vec<Vec<(f64, f64)>> {
    flow.slices
        .par_iter()
        .map(|s| {
            (0..=flow.base.cells())
                .map(|k| log_potential_parts_on(s, flow.base.node(k)))
                .collect()
        })
        .collect()
}

fn log_potential_parts_on(s: &GridMeasure, x: f64) -> (f64, f64) {
    crate::measure_core::log_potential_parts(s, x)
}

/// Sup discrepancies of U_τ + (1/2π)log(u²+v²) − (1/π)(log τ − log π) and
/// V_τ − (1/π)arctan(u/v) + 1/2 over bulk nodes of interior slices.
pub fn potential_evolution_check(flow: &CompressionFlow) -> PotentialCheck {
    let steps = flow.tau_steps();
    let dt = 1.0 / steps as f64;
    let pot = potentials(flow);
    let (mut eu, mut ev) = (0.0f64, 0.0f64);
    for j in 1..steps - 1 {
        let tau = flow.tau_grid[j];
        let mask = bulk_mask(&flow.slices[j - 1]);
        for k in 0..=flow.base.cells() {
            if !mask[k] {
                continue;
            }
            let g = flow.g_field[j][k];
            let (u, v) = (g.re / PI, -g.im / PI);
            let ut = (pot[j + 1][k].0 - pot[j - 1][k].0) / (2.0 * dt);
            let vt = (pot[j + 1][k].1 - pot[j - 1][k].1) / (2.0 * dt);
            let ru = ut + (u * u + v * v).ln() / (2.0 * PI) - (tau.ln() - PI.ln()) / PI;
            let rv = vt - u.atan2(v) / PI + 0.5;
            eu = eu.max(ru.abs());
            ev = ev.max(rv.abs());
        }
    }
    PotentialCheck {
        err_u: eu,
        err_v: ev,
        tolerance: 5.0 * dt + 10.0 * flow.eps0.sqrt(),
    }
}

/// (U_τ at x_far, (1/π)log|x_far − mean|) for each interior slice, where
/// x_far sits at 100 support radii from the mean.
pub fn far_field_check(flow: &CompressionFlow) -> Vec<(f64, f64, f64)> {
    let mean = flow.mean();
    let radius = (flow.base.hi() - mean).max(mean - flow.base.lo());
    let x = mean + 100.0 * radius;
    let steps = flow.tau_steps();
    let dt = 1.0 / steps as f64;
    let u: Vec<f64> = flow.slices.iter().map(|s| log_potential_parts_on(s, x).0).collect();
    (1..steps - 1)
        .map(|j| {
            let ut = (u[j + 1] - u[j - 1]) / (2.0 * dt);
            (flow.tau_grid[j], ut, (x - mean).ln() / PI)
        })
        .collect()
}

/// For each interior slice, (τ, ∫πU_τ v dx, ½∫π ∂_τ(Uv) dx) by trapezoid sums.
pub fn partseq_check(flow: &CompressionFlow) -> Vec<(f64, f64, f64)> {
    let steps = flow.tau_steps();
    let dt = 1.0 / steps as f64;
    let pot = potentials(flow);
    let h = flow.base.step();
    let n = flow.base.cells();
    let tw = |k: usize| if k == 0 || k == n { 0.5 * h } else { h };
    (1..steps - 1)
        .map(|j| {
            let (mut lhs, mut rhs) = (0.0, 0.0);
            for k in 0..=n {
                let v = |jj: usize| flow.slices[jj].density()[k];
                let ut = (pot[j + 1][k].0 - pot[j - 1][k].0) / (2.0 * dt);
                let uv_t = (pot[j + 1][k].0 * v(j + 1) - pot[j - 1][k].0 * v(j - 1)) / (2.0 * dt);
                lhs += tw(k) * PI * ut * v(j);
                rhs += tw(k) * 0.5 * PI * uv_t;
            }
            (flow.tau_grid[j], lhs, rhs)
        })
        .collect()
}

/// (−3/4 − ∫₀¹∫πU_τ v dx dτ, −χ[base]); the two agree for an exact flow.
pub fn free_energy_check(flow: &CompressionFlow) -> Result<(f64, f64)> {
    let steps = flow.tau_steps();
    let dt = 1.0 / steps as f64;
    let pot = potentials(flow);
    let h = flow.base.step();
    let n = flow.base.cells();
    let tw = |k: usize| if k == 0 || k == n { 0.5 * h } else { h };
    // U at τ = 0 vanishes identically
    let u_at = |j: isize, k: usize| if j < 0 { 0.0 } else { pot[j as usize][k].0 };
    let inner = |j: usize| -> f64 {
        let ji = j as isize;
        (0..=n)
            .map(|k| {
                let ut = if j + 1 < steps {
                    (u_at(ji + 1, k) - u_at(ji - 1, k)) / (2.0 * dt)
                } else {
                    (3.0 * u_at(ji, k) - 4.0 * u_at(ji - 1, k) + u_at(ji - 2, k)) / (2.0 * dt)
                };
                tw(k) * PI * ut * flow.slices[j].density()[k]
            })
            .sum()
    };
    // trapezoid in τ with a vanishing integrand at τ = 0
    let mut total = 0.0;
    for j in 0..steps {
        let w = if j + 1 == steps { 0.5 * dt } else { dt };
        total += w * inner(j);
    }
    let chi = 0.5 * log_energy(&flow.base)? + 0.75;
    Ok((-0.75 - total, -chi))
}

/// Cauchy transform of a slice at a point above the axis.
pub fn slice_cauchy(flow: &CompressionFlow, j: usize, z: Complex64) -> Result<Complex64> {
    cauchy_transform(&flow.slices[j], z)
}
