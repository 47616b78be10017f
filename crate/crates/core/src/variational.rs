//! Triangle fields, the discrete surface-tension energy and its minimization.
//!
//! The triangle {0 ≤ t ≤ s ≤ 1} is meshed with nodes (i/m, j/m), 0 ≤ j ≤ i ≤ m.
//! Every lattice square below the diagonal is split into a lower and an upper
//! triangle, and the squares along the diagonal contribute their lower half.
//! The field is the piecewise-linear interpolant, so its gradient is constant
//! on each triangle and uses exactly one horizontal and one vertical edge.

use crate::error::{GtError, Result};
use crate::free_compression::CompressionFlow;
use crate::gt_engine::weyl_log_volume;
use crate::measure_core::QuantileCurve;
use crate::surface_tension::{self, GradientPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Half {
    /// Nodes (i,j), (i+1,j), (i+1,j+1).
    Lower,
    /// Nodes (i,j), (i,j+1), (i+1,j+1).
    Upper,
}

/// A mesh triangle attached to the lattice square with lower-left corner (i, j).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub i: usize,
    pub j: usize,
    pub half: Half,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = match self.half {
            Half::Lower => "lower",
            Half::Upper => "upper",
        };
        write!(f, "({}, {}, {h})", self.i, self.j)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleField {
    m: usize,
    values: Vec<f64>,
    boundary: QuantileCurve,
}

#[inline]
fn node_index(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

impl TriangleField {
    /// Builds a field from off-diagonal values given by `f(s, t)`; the diagonal
    /// is taken from `boundary`.
    pub fn from_fn(m: usize, boundary: QuantileCurve, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if m < 1 {
            return Err(GtError::InvalidInput("mesh order must be at least 1".into()));
        }
        check_probability_curve(&boundary)?;
        let mut values = vec![0.0; node_index(m, m) + 1];
        for i in 0..=m {
            for j in 0..=i {
                values[node_index(i, j)] = if i == j {
                    boundary.eval(i as f64 / m as f64)
                } else {
                    f(i as f64 / m as f64, j as f64 / m as f64)
                };
            }
        }
        Ok(TriangleField { m, values, boundary })
    }

    /// Feasible starting field: the c-spaced max-extension of the diagonal data,
    /// f(i,j) = max_{k ≤ j}(ρ_k − 2ck) + c(i+j) in lattice units, with c half the
    /// smallest diagonal increment.
    pub fn max_extension(m: usize, boundary: QuantileCurve) -> Result<Self> {
        check_probability_curve(&boundary)?;
        let rho: Vec<f64> = (0..=m).map(|k| boundary.eval(k as f64 / m as f64)).collect();
        let c = rho.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min) / 2.0;
        if !(c > 0.0) {
            return Err(GtError::Precondition("diagonal data must be strictly increasing".into()));
        }
        let mut values = vec![0.0; node_index(m, m) + 1];
        for i in 0..=m {
            let mut best = f64::NEG_INFINITY;
            for j in 0..=i {
                best = best.max(rho[j] - 2.0 * c * j as f64);
                values[node_index(i, j)] = if i == j { rho[i] } else { best + c * (i + j) as f64 };
            }
        }
        Ok(TriangleField { m, values, boundary })
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn boundary(&self) -> &QuantileCurve {
        &self.boundary
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[node_index(i, j)]
    }

    /// Overwrites an off-diagonal node.
    pub fn set(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        if j >= i || i > self.m {
            return Err(GtError::InvalidInput(format!("({i}, {j}) is not an off-diagonal node")));
        }
        self.values[node_index(i, j)] = v;
        Ok(())
    }

    pub fn cell_area(&self) -> f64 {
        0.5 / (self.m * self.m) as f64
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.m).flat_map(|i| {
            (0..=i)
                .map(move |j| Cell { i, j, half: Half::Lower })
                .chain((0..i).map(move |j| Cell { i, j, half: Half::Upper }))
        })
    }

    /// Node indices (a, b, c) with ∇f = m·(f_b − f_a, f_c − f_b) for lower cells
    /// and m·(f_c − f_b, f_b − f_a) for upper cells.
    fn cell_nodes(cell: &Cell) -> [usize; 3] {
        let (i, j) = (cell.i, cell.j);
        match cell.half {
            Half::Lower => [node_index(i, j), node_index(i + 1, j), node_index(i + 1, j + 1)],
            Half::Upper => [node_index(i, j), node_index(i, j + 1), node_index(i + 1, j + 1)],
        }
    }

    pub fn cell_gradient(&self, cell: &Cell) -> GradientPair {
        gradient_of(&self.values, self.m, cell)
    }

    pub fn is_feasible(&self) -> bool {
        self.cells().all(|c| {
            let g = self.cell_gradient(&c);
            g.u1 > 0.0 && g.u2 > 0.0
        })
    }

    /// Piecewise-linear interpolation at (s, t) with 0 ≤ t ≤ s ≤ 1.
    pub fn eval(&self, s: f64, t: f64) -> f64 {
        let m = self.m as f64;
        let x = (s * m).clamp(0.0, m);
        let y = (t * m).clamp(0.0, x);
        let i = (x.floor() as usize).min(self.m - 1);
        let j = (y.floor() as usize).min(i);
        let (dx, dy) = (x - i as f64, y - j as f64);
        let f = |a: usize, b: usize| self.values[node_index(a, b)];
        if dy <= dx || j == i {
            // lower triangle: (i,j) -> (i+1,j) -> (i+1,j+1)
            f(i, j) + dx * (f(i + 1, j) - f(i, j)) + dy * (f(i + 1, j + 1) - f(i + 1, j))
        } else {
            f(i, j) + dy * (f(i, j + 1) - f(i, j)) + dx * (f(i + 1, j + 1) - f(i, j + 1))
        }
    }

    /// Rows (s, t, f) for every node.
    pub fn rows(&self) -> Vec<(f64, f64, f64)> {
        let m = self.m as f64;
        let mut out = Vec::with_capacity(self.values.len());
        for i in 0..=self.m {
            for j in 0..=i {
                out.push((i as f64 / m, j as f64 / m, self.at(i, j)));
            }
        }
        out
    }

    /// CSV with header `s,t,f`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,t,f\n");
        for (s, t, f) in self.rows() {
            let _ = writeln!(out, "{s},{t},{f}");
        }
        out
    }

    /// Parses the `s,t,f` CSV written by [`TriangleField::to_csv`]; lines
    /// starting with `#` are skipped. The diagonal becomes the boundary curve.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') || line == "s,t,f" {
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| GtError::InvalidInput(format!("bad field row {line:?}: {e}")))?;
            if v.len() != 3 {
                return Err(GtError::InvalidInput(format!("field row {line:?} needs three columns")));
            }
            rows.push((v[0], v[1], v[2]));
        }
        let m = ((((8 * rows.len() + 1) as f64).sqrt() - 3.0) / 2.0).round() as usize;
        if m < 1 || (m + 1) * (m + 2) / 2 != rows.len() {
            return Err(GtError::InvalidInput(format!("{} rows do not form a triangular mesh", rows.len())));
        }
        let mut values = vec![f64::NAN; rows.len()];
        for (s, t, f) in rows {
            let (i, j) = ((s * m as f64).round(), (t * m as f64).round());
            if !(0.0..=m as f64).contains(&i) || !(0.0..=i).contains(&j) {
                return Err(GtError::InvalidInput(format!("node ({s}, {t}) is off the mesh")));
            }
            values[node_index(i as usize, j as usize)] = f;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(GtError::InvalidInput("field CSV repeats a node".into()));
        }
        let boundary = QuantileCurve::new(1.0, (0..=m).map(|i| values[node_index(i, i)]).collect())?;
        Ok(TriangleField { m, values, boundary })
    }

    /// Pointwise average of two fields sharing mesh and diagonal.
    pub fn midpoint(&self, other: &TriangleField) -> Result<TriangleField> {
        if self.m != other.m || self.boundary != other.boundary {
            return Err(GtError::InvalidInput("fields must share mesh and diagonal".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| 0.5 * (a + b)).collect();
        Ok(TriangleField {
            m: self.m,
            values,
            boundary: self.boundary.clone(),
        })
    }
}

fn gradient_of(values: &[f64], m: usize, cell: &Cell) -> GradientPair {
    let [a, b, c] = TriangleField::cell_nodes(cell);
    let mf = m as f64;
    match cell.half {
        Half::Lower => GradientPair::new(mf * (values[b] - values[a]), mf * (values[c] - values[b])),
        Half::Upper => GradientPair::new(mf * (values[c] - values[b]), mf * (values[b] - values[a])),
    }
}

fn check_probability_curve(q: &QuantileCurve) -> Result<()> {
    if (q.mass() - 1.0).abs() > 1e-9 {
        return Err(GtError::InvalidInput("diagonal data must be a probability quantile curve".into()));
    }
    Ok(())
}

/// Discrete ∫▲ σ_GT(∇f); an infeasible cell is an error.
pub fn discrete_energy(field: &TriangleField) -> Result<f64> {
    surface_tension::energy_integral(field)
}

/// Summary of a minimization run.
#[derive(Debug, Clone)]
pub struct MinimizeReport {
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Energy after each accepted step, starting with the initial field.
    pub energies: Vec<f64>,
}

/// Energy, gradient and banded Hessian restricted to off-diagonal nodes.
struct Assembly {
    energy: f64,
    grad: Vec<f64>,
    band: Banded,
}

/// Maps node indices to unknown indices; diagonal nodes map to `None`.
fn unknown_map(m: usize) -> Vec<Option<usize>> {
    let mut map = vec![None; node_index(m, m) + 1];
    let mut next = 0;
    for i in 0..=m {
        for j in 0..i {
            map[node_index(i, j)] = Some(next);
            next += 1;
        }
    }
    map
}

fn assemble(field: &TriangleField, map: &[Option<usize>], n: usize, with_hessian: bool) -> Option<Assembly> {
    let m = field.m;
    let area = field.cell_area();
    let mf = m as f64;
    let mut energy = 0.0;
    let mut grad = vec![0.0; n];
    let mut band = Banded::zeros(n, m.max(1));
    for cell in field.cells() {
        let g = field.cell_gradient(&cell);
        if !(g.u1 > 0.0 && g.u2 > 0.0) {
            return None;
        }
        let s = surface_tension::sigma(g).ok()?;
        energy -= area * s;
        let dg = surface_tension::sigma_grad(g).ok()?;
        let nodes = TriangleField::cell_nodes(&cell);
        // rows of dg/df for (s, t) components over the three nodes
        let b: [[f64; 3]; 2] = match cell.half {
            Half::Lower => [[-mf, mf, 0.0], [0.0, -mf, mf]],
            Half::Upper => [[0.0, -mf, mf], [-mf, mf, 0.0]],
        };
        for a in 0..3 {
            if let Some(ia) = map[nodes[a]] {
                grad[ia] -= area * (dg.u1 * b[0][a] + dg.u2 * b[1][a]);
            }
        }
        if with_hessian {
            let h = surface_tension::sigma_hessian(g).ok()?;
            for a in 0..3 {
                let Some(ia) = map[nodes[a]] else { continue };
                for c in 0..3 {
                    let Some(ic) = map[nodes[c]] else { continue };
                    if ic > ia {
                        continue;
                    }
                    let mut v = 0.0;
                    for p in 0..2 {
                        for q in 0..2 {
                            v += b[p][a] * h[p][q] * b[q][c];
                        }
                    }
                    band.add(ia, ic, -area * v);
                }
            }
        }
    }
    Some(Assembly { energy, grad, band })
}

/// Lumped nodal areas (a third of each adjacent triangle) for off-diagonal nodes.
fn lumped_areas(field: &TriangleField, map: &[Option<usize>], n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n];
    let a = field.cell_area() / 3.0;
    for cell in field.cells() {
        for node in TriangleField::cell_nodes(&cell) {
            if let Some(k) = map[node] {
                w[k] += a;
            }
        }
    }
    w
}

/// Newton's method with backtracking and a feasibility guard. Only the diagonal
/// is pinned; the legs carry natural boundary conditions.
pub fn minimize_energy(rho: &QuantileCurve, m: usize, tol: f64, max_iters: usize) -> Result<TriangleField> {
    minimize_energy_report(rho, m, tol, max_iters).map(|(f, _)| f)
}

pub fn minimize_energy_report(
    rho: &QuantileCurve,
    m: usize,
    tol: f64,
    max_iters: usize,
) -> Result<(TriangleField, MinimizeReport)> {
    if m < 8 {
        return Err(GtError::InvalidInput("mesh order must be at least 8".into()));
    }
    if let Some(i) = rho.values().windows(2).position(|w| !(w[1] > w[0])) {
        return Err(GtError::InvalidInput(format!("rho is not strictly increasing at index {i}")));
    }
    let start = TriangleField::max_extension(m, rho.clone())?;
    minimize_from(start, tol, max_iters)
}

/// Runs the minimizer from a given feasible field.
pub fn minimize_from(
    mut field: TriangleField,
    tol: f64,
    max_iters: usize,
) -> Result<(TriangleField, MinimizeReport)> {
    if !field.is_feasible() {
        return Err(GtError::Infeasible {
            cell: "start".into(),
            reason: "initial field has a non-positive cell gradient".into(),
        });
    }
    let m = field.m;
    let map = unknown_map(m);
    let n = map.iter().flatten().count();
    let weights = lumped_areas(&field, &map, n);
    let mut energies = Vec::new();
    let mut gnorm = f64::INFINITY;
    for it in 0..=max_iters {
        let asm = assemble(&field, &map, n, true).expect("iterate stays feasible");
        energies.push(asm.energy);
        gnorm = weighted_norm(&asm.grad, &weights);
        if gnorm <= tol {
            let report = MinimizeReport {
                iterations: it,
                gradient_norm: gnorm,
                energies,
            };
            return Ok((field, report));
        }
        if it == max_iters {
            break;
        }
        let rhs: Vec<f64> = asm.grad.iter().map(|g| -g).collect();
        let dir = asm.band.solve_regularized(&rhs);
        let slope: f64 = dir.iter().zip(&asm.grad).map(|(d, g)| d * g).sum();
        let dir = if slope < 0.0 { dir } else { rhs };
        let slope: f64 = dir.iter().zip(&asm.grad).map(|(d, g)| d * g).sum();
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..80 {
            let mut trial = field.clone();
            for (node, k) in map.iter().enumerate() {
                if let Some(k) = k {
                    trial.values[node] += alpha * dir[*k];
                }
            }
            if let Some(a) = assemble(&trial, &map, n, false) {
                let armijo = a.energy <= asm.energy + 1e-4 * alpha * slope;
                // once energy differences drop below rounding, fall back to residual decrease
                let flat = (a.energy - asm.energy).abs() <= 1e-12 * (1.0 + asm.energy.abs())
                    && weighted_norm(&a.grad, &weights) < gnorm;
                if armijo || flat {
                    field = trial;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            // no representable descent left: the iterate is as converged as rounding allows
            break;
        }
    }
    Err(GtError::Convergence {
        iterations: energies.len().saturating_sub(1),
        residual: gnorm,
        context: format!("energy minimization at mesh order {m}"),
    })
}

/// Sup norm of the discrete Euler–Lagrange residual (gradient divided by lumped area).
pub fn discrete_el_residual(field: &TriangleField) -> Result<f64> {
    let map = unknown_map(field.m);
    let n = map.iter().flatten().count();
    let weights = lumped_areas(field, &map, n);
    let asm = assemble(field, &map, n, false).ok_or_else(|| GtError::Infeasible {
        cell: "unknown".into(),
        reason: "field is not feasible".into(),
    })?;
    Ok(weighted_norm(&asm.grad, &weights))
}

fn weighted_norm(grad: &[f64], weights: &[f64]) -> f64 {
    grad.iter().zip(weights).map(|(g, w)| (g / w).abs()).fold(0.0, f64::max)
}

/// Finite-difference divergence of ∇σ_GT(∇f) at interior node (i, j) using
/// half-step fluxes. Independent of the triangulation used by the minimizer.
pub fn fd_el_residual(field: &TriangleField, i: usize, j: usize) -> Result<f64> {
    let m = field.m;
    if !(j >= 1 && j + 2 <= i && i + 1 <= m) {
        return Err(GtError::Domain(format!("({i}, {j}) is not an interior stencil node")));
    }
    let f = |a: usize, b: usize| field.at(a, b);
    let mf = m as f64;
    let flux = |u1: f64, u2: f64| -> Result<GradientPair> {
        let g = surface_tension::sigma_grad(GradientPair::new(u1, u2))?;
        Ok(GradientPair::new(-g.u1, -g.u2))
    };
    // s-flux at (i ± 1/2, j)
    let fs = |a: usize| -> Result<f64> {
        let us = mf * (f(a + 1, j) - f(a, j));
        let ut = mf * 0.25 * (f(a + 1, j + 1) - f(a + 1, j - 1) + f(a, j + 1) - f(a, j - 1));
        Ok(flux(us, ut)?.u1)
    };
    // t-flux at (i, j ± 1/2)
    let ft = |b: usize| -> Result<f64> {
        let ut = mf * (f(i, b + 1) - f(i, b));
        let us = mf * 0.25 * (f(i + 1, b + 1) - f(i - 1, b + 1) + f(i + 1, b) - f(i - 1, b));
        Ok(flux(us, ut)?.u2)
    };
    Ok(mf * (fs(i)? - fs(i - 1)?) + mf * (ft(j)? - ft(j - 1)?))
}

/// Resamples the compression surface onto the mesh: f(s, t) = λ(t, 1 − s + t).
pub fn compression_surface(flow: &CompressionFlow, m: usize) -> Result<TriangleField> {
    if m < 1 {
        return Err(GtError::InvalidInput("mesh order must be at least 1".into()));
    }
    if 2 * flow.tau_steps() < m {
        return Err(GtError::Resolution(format!(
            "{} τ slices cannot resolve mesh order {m}; need at least {}",
            flow.tau_steps(),
            m.div_ceil(2)
        )));
    }
    let rho = flow
        .lambda_surface()
        .last()
        .cloned()
        .ok_or_else(|| GtError::InvalidInput("flow has no slices".into()))?;
    let mean = flow.mean();
    let field = TriangleField::from_fn(m, rho, |s, t| {
        let tau = (1.0 - s + t).min(1.0);
        if tau <= 0.0 {
            return mean;
        }
        flow.lambda_at(t.min(tau), tau).unwrap_or(f64::NAN)
    })?;
    if field.values.iter().any(|v| !v.is_finite()) {
        return Err(GtError::Domain("flow could not be evaluated on the mesh".into()));
    }
    Ok(field)
}

/// How the diagonal row of G_N enters the LDP volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagonalMode {
    /// φ(i,i) = N ρ(i/N); the band holds there with zero slack.
    Pinned,
    /// φ(i,i) integrated over its band like every other point.
    Banded,
}

/// Largest N accepted by the LDP estimators.
pub const MAX_LDP_N: usize = 14;

/// Result of an LDP volume run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdpEstimate {
    /// (2/N²)·log I_N(v, δ).
    pub estimate: f64,
    pub stderr: f64,
    /// log I_N itself.
    pub log_volume: f64,
    pub log_stderr: f64,
    /// Independent filters run, and how many kept positive mass.
    pub replicates: usize,
    pub alive: usize,
}

/// Sequential importance sampler over G_N = {1 ≤ j ≤ i ≤ N}, filled one
/// antidiagonal i + j = d at a time.
struct BandSis {
    size: usize,
    groups: Vec<Vec<(usize, usize)>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Tightest upper bound implied by the bands of points above.
    cap: Vec<f64>,
    pinned: Vec<Option<f64>>,
}

impl BandSis {
    fn idx(i: usize, j: usize) -> usize {
        (i - 1) * i / 2 + (j - 1)
    }

    fn new(v: &TriangleField, n: usize, delta: f64, mode: DiagonalMode) -> Self {
        let nf = n as f64;
        let size = n * (n + 1) / 2;
        let (mut lo, mut hi, mut pinned) = (vec![0.0; size], vec![0.0; size], vec![None; size]);
        let mut groups = vec![Vec::new(); 2 * n - 1];
        for i in 1..=n {
            for j in 1..=i {
                let k = Self::idx(i, j);
                let c = nf * v.eval(i as f64 / nf, j as f64 / nf);
                lo[k] = c - delta * nf;
                hi[k] = c + delta * nf;
                if i == j && mode == DiagonalMode::Pinned {
                    pinned[k] = Some(nf * v.boundary().eval(i as f64 / nf));
                }
                groups[i + j - 2].push((i, j));
            }
        }
        let mut cap = vec![f64::INFINITY; size];
        for &(i, j) in groups.iter().rev().flatten() {
            let k = Self::idx(i, j);
            let mut c = pinned[k].unwrap_or(hi[k]);
            if i < n {
                c = c.min(cap[Self::idx(i + 1, j)]);
            }
            if j < i {
                c = c.min(cap[Self::idx(i, j + 1)]);
            }
            cap[k] = c;
        }
        BandSis { size, groups, lo, hi, cap, pinned }
    }

    /// Places one antidiagonal; returns the log incremental weight.
    fn extend(&self, group: &[(usize, usize)], phi: &mut [f64], rng: &mut impl Rng) -> f64 {
        let mut lw = 0.0;
        for &(i, j) in group {
            let k = Self::idx(i, j);
            let mut l = self.lo[k];
            if i > j {
                l = l.max(phi[Self::idx(i - 1, j)]);
            }
            if j > 1 {
                l = l.max(phi[Self::idx(i, j - 1)]);
            }
            if let Some(p) = self.pinned[k] {
                if !(p > l && p <= self.hi[k].min(self.cap[k])) {
                    return f64::NEG_INFINITY;
                }
                phi[k] = p;
                continue;
            }
            let u = self.cap[k];
            if !(u > l) {
                return f64::NEG_INFINITY;
            }
            phi[k] = l + (u - l) * rng.random::<f64>();
            lw += (u - l).ln();
        }
        lw
    }

    /// One particle filter with systematic resampling after every
    /// antidiagonal; returns the log of its unbiased estimate of I_N.
    fn filter(&self, particles: usize, rng: &mut impl Rng) -> f64 {
        let mut pop = vec![vec![0.0; self.size]; particles];
        let mut next = pop.clone();
        let mut lw = vec![0.0; particles];
        let mut log_z = 0.0;
        for (g, group) in self.groups.iter().enumerate() {
            for (p, phi) in pop.iter_mut().enumerate() {
                lw[p] = self.extend(group, phi, rng);
            }
            let top = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if top == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            let w: Vec<f64> = lw.iter().map(|l| (l - top).exp()).collect();
            let total: f64 = w.iter().sum();
            log_z += top + (total / particles as f64).ln();
            if g + 1 == self.groups.len() {
                break;
            }
            let step = total / particles as f64;
            let mut u = step * rng.random::<f64>();
            let mut acc = 0.0;
            let mut src = 0;
            for dst in next.iter_mut() {
                while acc + w[src] <= u && src + 1 < particles {
                    acc += w[src];
                    src += 1;
                }
                dst.copy_from_slice(&pop[src]);
                u += step;
            }
            std::mem::swap(&mut pop, &mut next);
        }
        log_z
    }
}

/// Independent filters per run; the spread of their estimates gives the stderr.
pub const LDP_REPLICATES: usize = 16;

/// Estimates (2/N²)·log I_N(v, δ) with the diagonal pinned to N ρ(i/N).
/// `samples` particles are split evenly over the replicate filters.
pub fn ldp_log_volume(v: &TriangleField, n: usize, delta: f64, samples: usize, rng_seed: u64) -> Result<(f64, f64)> {
    let e = ldp_log_volume_with(v, n, delta, samples, rng_seed, DiagonalMode::Pinned)?;
    Ok((e.estimate, e.stderr))
}

pub fn ldp_log_volume_with(
    v: &TriangleField,
    n: usize,
    delta: f64,
    samples: usize,
    rng_seed: u64,
    mode: DiagonalMode,
) -> Result<LdpEstimate> {
    if !(2..=MAX_LDP_N).contains(&n) {
        return Err(GtError::InvalidInput(format!("N = {n} outside 2..={MAX_LDP_N}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(GtError::InvalidInput("delta must be positive".into()));
    }
    if samples < 2 * LDP_REPLICATES {
        return Err(GtError::InvalidInput(format!("need at least {} samples", 2 * LDP_REPLICATES)));
    }
    if !v.is_feasible() {
        return Err(GtError::Infeasible {
            cell: "v".into(),
            reason: "target field has a non-positive cell gradient".into(),
        });
    }
    let sis = BandSis::new(v, n, delta, mode);
    let per = samples / LDP_REPLICATES;
    let logs: Vec<f64> = (0..LDP_REPLICATES)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(r as u64);
            sis.filter(per, &mut rng)
        })
        .collect();
    let alive = logs.iter().filter(|w| w.is_finite()).count();
    let scale = 2.0 / (n * n) as f64;
    if alive == 0 {
        return Ok(LdpEstimate {
            estimate: f64::NEG_INFINITY,
            stderr: 0.0,
            log_volume: f64::NEG_INFINITY,
            log_stderr: 0.0,
            replicates: LDP_REPLICATES,
            alive,
        });
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let (mean, se) = crate::stats::mean_stderr(&w);
    let log_volume = top + mean.ln();
    let log_stderr = se / mean;
    Ok(LdpEstimate {
        estimate: scale * log_volume,
        stderr: scale * log_stderr,
        log_volume,
        log_stderr,
        replicates: LDP_REPLICATES,
        alive,
    })
}

/// Per-N² log-probability that a pinned uniform pattern stays in the band,
/// (log I_N − log Vol GT(Nρ))/N². This is the quantity that tends to −𝒠_ρ[v].
pub fn ldp_rate(v: &TriangleField, n: usize, delta: f64, samples: usize, rng_seed: u64) -> Result<(f64, f64)> {
    let e = ldp_log_volume_with(v, n, delta, samples, rng_seed, DiagonalMode::Pinned)?;
    let nf = n as f64;
    let bottom: Vec<f64> = (1..=n).map(|i| nf * v.boundary().eval(i as f64 / nf)).collect();
    let full = weyl_log_volume(&bottom)?
        .value()
        .ok_or_else(|| GtError::Domain("diagonal samples are not strictly increasing".into()))?;
    let n2 = nf * nf;
    Ok(((e.log_volume - full) / n2, e.log_stderr / n2))
}

/// The rate ∫▲ σ_GT(∇v) + χ[ρ].
pub fn rate_functional(v: &TriangleField) -> Result<f64> {
    let chi = crate::measure_core::free_entropy_quantile(v.boundary())?;
    Ok(discrete_energy(v)? + chi)
}

/// Symmetric positive definite band matrix stored by lower diagonals.
struct Banded {
    n: usize,
    w: usize,
    data: Vec<f64>,
}

impl Banded {
    fn zeros(n: usize, w: usize) -> Self {
        Banded { n, w, data: vec![0.0; n * (w + 1)] }
    }

    /// Adds to entry (i, k), k ≤ i, i − k ≤ w.
    fn add(&mut self, i: usize, k: usize, v: f64) {
        debug_assert!(k <= i && i - k <= self.w);
        self.data[i * (self.w + 1) + (i - k)] += v;
    }

    fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * (self.w + 1) + (i - k)]
    }

    fn cholesky(&self, shift: f64) -> Option<Vec<f64>> {
        let (n, w) = (self.n, self.w);
        let mut l = self.data.clone();
        let at = |i: usize, k: usize| i * (w + 1) + (i - k);
        for i in 0..n {
            l[at(i, i)] += shift;
            let k0 = i.saturating_sub(w);
            for k in k0..=i {
                let mut s = l[at(i, k)];
                let p0 = k0.max(k.saturating_sub(w));
                for p in p0..k {
                    s -= l[at(i, p)] * l[at(k, p)];
                }
                if k == i {
                    if !(s > 0.0) {
                        return None;
                    }
                    l[at(i, i)] = s.sqrt();
                } else {
                    l[at(i, k)] = s / l[at(k, k)];
                }
            }
        }
        Some(l)
    }

    fn solve_regularized(&self, rhs: &[f64]) -> Vec<f64> {
        let scale = (0..self.n).map(|i| self.get(i, i).abs()).fold(0.0, f64::max).max(1e-300);
        let mut shift = 0.0;
        let l = loop {
            if let Some(l) = self.cholesky(shift) {
                break l;
            }
            shift = if shift == 0.0 { 1e-12 * scale } else { shift * 10.0 };
        };
        let (n, w) = (self.n, self.w);
        let at = |i: usize, k: usize| i * (w + 1) + (i - k);
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for p in i.saturating_sub(w)..i {
                s -= l[at(i, p)] * y[p];
            }
            y[i] = s / l[at(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + w + 1).min(n) {
                s -= l[at(k, i)] * y[k];
            }
            y[i] = s / l[at(i, i)];
        }
        y
    }
}
