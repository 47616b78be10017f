//! Acceptance suite A1–A12 at two effort levels.
//!
//! `Full` runs every criterion at its stated sample sizes; `Fast` shrinks the
//! Monte Carlo budgets but keeps every tolerance.

use crate::bead_exact::{asymptotic_gap, correlation_rho, exact_volume, partition_product, partition_series, rejection_volumes};
use crate::error::{GtError, Result};
use crate::free_compression::{build_flow_semicircle, compress_measure, el_residual, DEFAULT_EPS0};
use crate::gt_engine::{
    default_sweeps, minor_process_batch, prekopa_leindler_gap, rejection_gt_volume, sample_uniform_batch, weyl_log_volume,
    BoundaryField, GTPattern,
};
use crate::measure_core::{l1_distance, semicircle_quantile, GridMeasure, QuantileCurve};
use crate::stats::{energy_test, kde_l1};
use crate::variational::{compression_surface, discrete_energy, ldp_rate, minimize_energy, rate_functional, TriangleField};
use crate::ExtReal;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use std::f64::consts::PI;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Fast,
    Full,
}

impl std::str::FromStr for Level {
    type Err = GtError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Level::Fast),
            "full" => Ok(Level::Full),
            _ => Err(GtError::InvalidInput(format!("unknown level {s:?}; use fast or full"))),
        }
    }
}

pub const CRITERIA: [&str; 12] = ["A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9", "A10", "A11", "A12"];

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: String,
    pub title: String,
    pub passed: bool,
    pub measured: Value,
    pub tolerance: String,
    pub summary: String,
    pub seconds: f64,
}

impl CriterionReport {
    /// One table line, e.g. `A1   PASS  worst relative gap 2.6e-15 (tol 1e-8)  0.02 s`.
    pub fn line(&self) -> String {
        format!(
            "{:<4} {}  {}  [tol: {}]  {:.2} s",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.summary,
            self.tolerance,
            self.seconds
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub level: Level,
    pub passed: bool,
    pub seconds: f64,
    pub criteria: Vec<CriterionReport>,
}

impl VerifyReport {
    pub fn table(&self) -> String {
        let mut s: String = self.criteria.iter().map(|c| c.line() + "\n").collect();
        let ok = self.criteria.iter().filter(|c| c.passed).count();
        s += &format!("{ok}/{} criteria passed in {:.1} s\n", self.criteria.len(), self.seconds);
        s
    }
}

struct Outcome {
    passed: bool,
    measured: Value,
    tolerance: String,
    summary: String,
}

fn title(id: &str) -> &'static str {
    match id {
        "A1" => "partition series equals product",
        "A2" => "exact bead volumes vs rejection",
        "A3" => "surface-tension gap shrinks",
        "A4" => "Weyl volume formula",
        "A5" => "Gibbs sampler vs minor process",
        "A6" => "Gibbs rows vs free compression",
        "A7" => "compression algebra",
        "A8" => "Euler-Lagrange residual order",
        "A9" => "minimal surface and free entropy",
        "A10" => "Prekopa-Leindler gap",
        "A11" => "sine-kernel two-point function",
        "A12" => "LDP trend",
        _ => "unknown",
    }
}

/// Runs one criterion; any library error becomes a failed report.
pub fn run_criterion(id: &str, level: Level) -> Result<CriterionReport> {
    let f: fn(Level) -> Result<Outcome> = match id {
        "A1" => a1,
        "A2" => a2,
        "A3" => a3,
        "A4" => a4,
        "A5" => a5,
        "A6" => a6,
        "A7" => a7,
        "A8" => a8,
        "A9" => a9,
        "A10" => a10,
        "A11" => a11,
        "A12" => a12,
        _ => return Err(GtError::InvalidInput(format!("unknown criterion {id}"))),
    };
    let t = Instant::now();
    let out = f(level).unwrap_or_else(|e| Outcome {
        passed: false,
        measured: json!({ "error": e.to_string() }),
        tolerance: "-".into(),
        summary: format!("error: {e}"),
    });
    Ok(CriterionReport {
        id: id.into(),
        title: title(id).into(),
        passed: out.passed,
        measured: out.measured,
        tolerance: out.tolerance,
        summary: out.summary,
        seconds: t.elapsed().as_secs_f64(),
    })
}

pub fn verify_suite(level: Level) -> VerifyReport {
    let t = Instant::now();
    let criteria: Vec<CriterionReport> =
        CRITERIA.iter().map(|id| run_criterion(id, level).expect("known criterion")).collect();
    VerifyReport {
        level,
        passed: criteria.iter().all(|c| c.passed),
        seconds: t.elapsed().as_secs_f64(),
        criteria,
    }
}

fn pick<T>(level: Level, fast: T, full: T) -> T {
    match level {
        Level::Fast => fast,
        Level::Full => full,
    }
}

fn semicircle_bottom(n: usize) -> Vec<f64> {
    (0..n).map(|j| semicircle_quantile((j as f64 + 0.5) / n as f64)).collect()
}

fn a1(_: Level) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for n in [2, 3, 4] {
        for lambda in [0.0, 0.7, 1.5] {
            for t in [0.1, 0.5, 1.0] {
                let s = partition_series(n, lambda, t, 1e-13)?;
                let (p, _) = partition_product(n, lambda, t);
                worst = worst.max(((s.value - p) / p).abs());
            }
        }
    }
    Ok(Outcome {
        passed: worst <= 1e-8,
        measured: json!({ "worst_relative_gap": worst }),
        tolerance: "relative 1e-8".into(),
        summary: format!("worst relative gap {worst:.2e} over 27 cases"),
    })
}

fn a2(level: Level) -> Result<Outcome> {
    let trials = pick(level, 100_000, 1_000_000);
    let unit = exact_volume(2, 1, 1, 256)?.to_f64();
    let mut rows = Vec::new();
    let mut worst_z = 0.0f64;
    for (i, (n, k)) in [(2, 1), (2, 2), (3, 1), (3, 2)].into_iter().enumerate() {
        let mc = rejection_volumes(n, k, trials, 7 + i as u64)?;
        for (l, &(est, se)) in mc.iter().enumerate().take(n).skip(1) {
            let v = exact_volume(n, k, l, 256)?.to_f64();
            let z = if se > 0.0 { (est - v).abs() / se } else if est == v { 0.0 } else { f64::INFINITY };
            worst_z = worst_z.max(z);
            rows.push(json!({ "n": n, "k": k, "l": l, "exact": v, "mc": est, "stderr": se }));
        }
    }
    Ok(Outcome {
        passed: unit == 1.0 && worst_z <= 3.0,
        measured: json!({ "vol_2_1_1": unit, "worst_z": worst_z, "trials": trials, "cases": rows }),
        tolerance: "Vol(2,1,1) = 1; |mc − exact| ≤ 3 stderr".into(),
        summary: format!("Vol(2,1,1) = {unit}, worst |z| {worst_z:.2} at {trials} trials"),
    })
}

fn a3(_: Level) -> Result<Outcome> {
    let ns = [6usize, 8, 10, 12];
    let gaps: Vec<f64> = ns.iter().map(|&n| asymptotic_gap(n, n / 2)).collect::<Result<_>>()?;
    let shrinking = gaps.windows(2).all(|w| w[1].abs() < w[0].abs());
    Ok(Outcome {
        passed: gaps[0].abs() < 0.1 && shrinking,
        measured: json!({ "n": ns, "gap": gaps }),
        tolerance: "|gap(6)| < 0.1, |gap| strictly decreasing".into(),
        summary: format!("gaps {:.4} {:.4} {:.4} {:.4}", gaps[0], gaps[1], gaps[2], gaps[3]),
    })
}

fn a4(level: Level) -> Result<Outcome> {
    let trials = pick(level, 100_000, 400_000);
    let zero = weyl_log_volume(&[0.0, 1.0, 2.0])?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_z = 0.0f64;
    let mut rows = Vec::new();
    for n in [3usize, 4] {
        for trial in 0..3u64 {
            let mut s: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0).collect();
            s.sort_by(|a, b| a.total_cmp(b));
            let exact = weyl_log_volume(&s)?.to_f64().exp();
            let (est, se) = rejection_gt_volume(&s, trials, 100 + trial)?;
            worst_z = worst_z.max((est - exact).abs() / se);
            rows.push(json!({ "bottom": s, "exact": exact, "mc": est, "stderr": se }));
        }
    }
    Ok(Outcome {
        passed: zero == ExtReal::Finite(0.0) && worst_z <= 3.0,
        measured: json!({ "log_vol_012": zero.to_f64(), "worst_z": worst_z, "cases": rows }),
        tolerance: "log Vol GT(0,1,2) = 0 exactly; ≤ 3 stderr".into(),
        summary: format!("log Vol(0,1,2) = {}, worst |z| {worst_z:.2}", zero.to_f64()),
    })
}

fn a5(level: Level) -> Result<Outcome> {
    let (draws, perms) = pick(level, (600, 199), (2000, 299));
    let n = 12;
    let s = semicircle_bottom(n);
    let g = sample_uniform_batch(&s, default_sweeps(n), draws, 1)?;
    let m = minor_process_batch(&s, draws, 2)?;
    // rows 3, 6, 9 counted from the top (lengths 3, 6, 9)
    let f = |p: &GTPattern| [p.rows[2].clone(), p.rows[5].clone(), p.rows[8].clone()].concat();
    let x: Vec<Vec<f64>> = g.iter().map(f).collect();
    let y: Vec<Vec<f64>> = m.iter().map(f).collect();
    let t = energy_test(&x, &y, perms, 3);
    Ok(Outcome {
        passed: t.p_value > 0.01,
        measured: json!({ "statistic": t.statistic, "p_value": t.p_value, "draws": draws, "permutations": perms }),
        tolerance: "p > 0.01".into(),
        summary: format!("energy test p = {:.3} ({draws} vs {draws})", t.p_value),
    })
}

fn a6(level: Level) -> Result<Outcome> {
    let draws = pick(level, 200, 500);
    let n = 24;
    let s = semicircle_bottom(n);
    let sample = sample_uniform_batch(&s, default_sweeps(n), draws, 4)?;
    let base = GridMeasure::semicircle(2000)?;
    let mut l1 = Vec::new();
    for tau in [1.0 / 3.0, 2.0 / 3.0] {
        let k = (tau * n as f64).floor() as usize;
        let target = compress_measure(&base, tau)?;
        let pts: Vec<f64> = sample.iter().flat_map(|p| p.rows[k - 1].iter().copied()).collect();
        l1.push(kde_l1(&pts, |x| target.density_at(x), -3.0, 3.0, 800));
    }
    let worst = l1.iter().cloned().fold(0.0, f64::max);
    Ok(Outcome {
        passed: worst <= 0.08,
        measured: json!({ "tau": [1.0 / 3.0, 2.0 / 3.0], "l1": l1, "draws": draws }),
        tolerance: "L¹ ≤ 0.08".into(),
        summary: format!("L¹ {:.4} (τ = 1/3), {:.4} (τ = 2/3)", l1[0], l1[1]),
    })
}

fn a7(_: Level) -> Result<Outcome> {
    let m = GridMeasure::semicircle(2000)?;
    let c = compress_measure(&m, 0.25)?;
    let w = GridMeasure::semicircle_with(0.0, 0.25, 2000)?;
    let d1 = l1_distance(&c, &w);
    let a = compress_measure(&compress_measure(&m, 0.8)?, 0.5)?;
    let b = compress_measure(&m, 0.4)?;
    let d2 = l1_distance(&a, &b);
    Ok(Outcome {
        passed: d1 <= 1e-2 && d2 <= 2e-2,
        measured: json!({ "quarter_vs_semicircle": d1, "semigroup": d2 }),
        tolerance: "L¹ 1e-2 and 2e-2".into(),
        summary: format!("compression L¹ {d1:.2e}, semigroup L¹ {d2:.2e}"),
    })
}

fn a8(_: Level) -> Result<Outcome> {
    let probes = [(0.25, 0.5), (0.2, 0.625), (0.35, 0.625), (0.3, 0.75), (0.45, 0.75)];
    let mut res = Vec::new();
    for steps in [8usize, 16, 32] {
        let f = build_flow_semicircle(0.0, 1.0, steps, 2e-6, 8000)?;
        let r: Vec<f64> = probes.iter().map(|&(r, t)| el_residual(&f, r, t).map(f64::abs)).collect::<Result<_>>()?;
        res.push(r);
    }
    let mut worst = f64::INFINITY;
    for p in 0..probes.len() {
        for h in 0..2 {
            worst = worst.min(res[h][p] / res[h + 1][p]);
        }
    }
    Ok(Outcome {
        passed: worst >= 2.0,
        measured: json!({ "probes": probes, "tau_steps": [8, 16, 32], "residuals": res }),
        tolerance: "factor ≥ 2 per halving".into(),
        summary: format!("smallest reduction factor {worst:.2}"),
    })
}

fn a9(_: Level) -> Result<Outcome> {
    let m = 32;
    let semi = QuantileCurve::from_fn(1.0, 4000, semicircle_quantile)?;
    let fmin = minimize_energy(&semi, m, 1e-8, 200)?;
    let e_semi = discrete_energy(&fmin)?;
    let mut e_unif = Vec::new();
    for c in [0.5f64, 2.0] {
        let rho = QuantileCurve::from_fn(1.0, 2000, |r| c * r)?;
        let f = minimize_energy(&rho, m, 1e-8, 200)?;
        e_unif.push((c, discrete_energy(&f)?, -0.5 * c.ln()));
    }
    let flow = build_flow_semicircle(0.0, 1.0, 32, DEFAULT_EPS0, 4000)?;
    let cs = compression_surface(&flow, m)?;
    let (mut sup, mut at) = (0.0f64, (0, 0));
    for i in 0..=m {
        for j in 0..=i {
            let d = (cs.at(i, j) - fmin.at(i, j)).abs();
            if d > sup {
                sup = d;
                at = (i, j);
            }
        }
    }
    let ok_semi = (e_semi + 0.625).abs() <= 2e-2;
    let ok_unif = e_unif.iter().all(|(_, e, x)| (e - x).abs() <= 2e-2);
    let ok_sup = sup <= 5e-2;
    Ok(Outcome {
        passed: ok_semi && ok_unif && ok_sup,
        measured: json!({
            "mesh": m,
            "semicircle_energy": e_semi,
            "uniform": e_unif.iter().map(|(c, e, x)| json!({ "c": c, "energy": e, "target": x })).collect::<Vec<_>>(),
            "sup_vs_compression_surface": sup,
            "sup_node": [at.0 as f64 / m as f64, at.1 as f64 / m as f64],
            "compression_surface_energy": discrete_energy(&cs)?,
        }),
        tolerance: "energies 2e-2; sup-norm 5e-2".into(),
        summary: format!(
            "E_semi {e_semi:.4}, E_unif {:.4}/{:.4}, sup vs surface {sup:.4} at (s,t) = ({:.3}, {:.3})",
            e_unif[0].1,
            e_unif[1].1,
            at.0 as f64 / m as f64,
            at.1 as f64 / m as f64
        ),
    })
}

fn a10(level: Level) -> Result<Outcome> {
    let samples = pick(level, 5_000, 20_000);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut ok = 0;
    let mut worst = f64::INFINITY;
    for trial in 0..100u64 {
        let mut make = || loop {
            let u1 = 0.5 + 1.5 * rng.random::<f64>();
            let u2 = 0.5 + 1.5 * rng.random::<f64>();
            let eps: Vec<f64> = (0..25).map(|_| 0.3 * (rng.random::<f64>() - 0.5)).collect();
            let b = BoundaryField::from_fn(4, |i, j| u1 * i as f64 + u2 * j as f64 + eps[i * 5 + j]);
            if let Ok(b) = b.and_then(|b| b.with_spacing(0.2)) {
                return b;
            }
        };
        let (b1, b2) = (make(), make());
        let lam = if trial % 2 == 0 { 0.25 } else { 0.75 };
        let g = prekopa_leindler_gap(&b1, &b2, lam, samples, 1000 + trial)?;
        if g.gap >= -3.0 * g.stderr {
            ok += 1;
        }
        worst = worst.min(g.gap / g.stderr);
    }
    Ok(Outcome {
        passed: ok >= 95,
        measured: json!({ "passed_trials": ok, "trials": 100, "worst_z": worst, "samples": samples }),
        tolerance: "≥ 95 of 100 with gap ≥ −3 stderr".into(),
        summary: format!("{ok}/100 trials, worst gap/stderr {worst:.2}"),
    })
}

fn a11(_: Level) -> Result<Outcome> {
    let (n, t) = (40, 30.0);
    let rho1 = correlation_rho(n, 0.0, t, &[(0.1, 0)])?;
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for i in 0..13 {
        let x = 0.3 + 0.1 * i as f64;
        let r2 = correlation_rho(n, 0.0, t, &[(0.1, 0), (0.1 + x / rho1, 0)])? / (rho1 * rho1);
        let s = (PI * x).sin() / (PI * x);
        let exact = 1.0 - s * s;
        worst = worst.max(((r2 - exact) / exact).abs());
        rows.push(json!({ "gap": x, "rho2": r2, "sine": exact }));
    }
    Ok(Outcome {
        passed: worst <= 0.05,
        measured: json!({ "n": n, "T": t, "lambda": 0.0, "rho1": rho1, "worst_relative": worst, "points": rows }),
        tolerance: "relative 5%".into(),
        summary: format!("worst relative error {:.2}% (ρ₁ = {rho1:.3})", 100.0 * worst),
    })
}

/// Near-minimal field for ρ(s) = 2s: ¾·(mesh-16 minimizer) + ¼·(s + t).
pub fn a12_field() -> Result<TriangleField> {
    let rho = QuantileCurve::from_fn(1.0, 2000, |r| 2.0 * r)?;
    let fstar = minimize_energy(&rho, 16, 1e-8, 200)?;
    TriangleField::from_fn(16, rho, |s, t| 0.75 * fstar.eval(s, t) + 0.25 * (s + t))
}

fn a12(level: Level) -> Result<Outcome> {
    let samples = pick(level, 200_000, 1_000_000);
    let v = a12_field()?;
    let rate = rate_functional(&v)?;
    let ns = [6usize, 10, 14];
    let mut est = Vec::new();
    let mut err = Vec::new();
    for &n in &ns {
        let (r, se) = ldp_rate(&v, n, 0.2, samples, 1)?;
        est.push((r, se));
        err.push((r + rate).abs());
    }
    let monotone = err.windows(2).all(|w| w[1] < w[0]);
    Ok(Outcome {
        passed: monotone && rate > 0.0,
        measured: json!({
            "rate_functional": rate,
            "delta": 0.2,
            "N": ns,
            "log_prob_per_n2": est.iter().map(|e| e.0).collect::<Vec<_>>(),
            "stderr": est.iter().map(|e| e.1).collect::<Vec<_>>(),
            "abs_error": err,
            "samples": samples,
        }),
        tolerance: "|error| strictly decreasing over N = 6, 10, 14".into(),
        summary: format!(
            "−𝒠 = {:.4}; estimates {:.4} {:.4} {:.4}; |error| {:.4} {:.4} {:.4}",
            -rate, est[0].0, est[1].0, est[2].0, err[0], err[1], err[2]
        ),
    })
}
