use crate::{Cli, Format, EXIT_VERIFY_FAILED, SCHEMA_VERSION};
use clap::{Args, Subcommand};
use gtlab::bead_exact::{correlation_rho, partition_product, partition_series, BeadVolumeTable};
use gtlab::error::Result;
use gtlab::free_compression::{build_flow, build_flow_semicircle, compress_measure_with, DEFAULT_EPS0};
use gtlab::fsutil::write_atomic;
use gtlab::gt_engine::{default_sweeps, estimate_t, minor_process_batch, sample_uniform_batch, BoundaryField, GTPattern};
use gtlab::measure_core::{free_entropy, log_energy, quantile_of, semicircle_quantile, Builtin, GridMeasure, QuantileCurve};
use gtlab::surface_tension::{sigma, sigma_grad, sigma_gt, GradientPair};
use gtlab::variational::{ldp_log_volume_with, ldp_rate, minimize_energy_report, rate_functional, DiagonalMode, TriangleField};
use gtlab::verify::{verify_suite, Level};
use gtlab::GtError;
use serde::Serialize;
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Subcommand)]
pub enum Command {
    /// σ, σ_GT and ∇σ at (u1, u2).
    Sigma(SigmaArgs),
    /// Exact bead volumes Vol(n, k, l) for k ≤ k-max.
    BeadVolume(BeadVolumeArgs),
    /// Partition function as a series and as a product.
    PartitionCheck(PartitionArgs),
    /// Bead correlation function at a list of points.
    BeadCorrelation(CorrelationArgs),
    /// Uniform GT patterns by Gibbs sampling.
    SampleGt(SampleArgs),
    /// GT patterns from eigenvalues of nested minors of U diag(s) U*.
    MinorProcess(MinorArgs),
    /// Boundary-pinned GT volume T(φ) by sequential importance sampling.
    #[command(name = "estimate-T")]
    EstimateT(EstimateArgs),
    /// Free compression [μ]_τ of a measure.
    Compress(CompressArgs),
    /// Compression flow τ ↦ μ_τ exported to a directory.
    BuildFlow(FlowArgs),
    /// Log-energy and free entropy of a measure.
    Entropy(EntropyArgs),
    /// Minimal surface-tension field with diagonal data ρ.
    Minimize(MinimizeArgs),
    /// LDP band volume I_N(v, δ) and the per-N² log-probability.
    LdpEstimate(LdpArgs),
    /// Acceptance suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SigmaArgs {
    #[arg(long, allow_hyphen_values = true)]
    u1: f64,
    #[arg(long, allow_hyphen_values = true)]
    u2: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct BeadVolumeArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    k_max: usize,
    #[arg(long, default_value_t = 256)]
    precision_bits: u32,
}

#[derive(Debug, Args, Serialize)]
pub struct PartitionArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, allow_hyphen_values = true)]
    lambda: f64,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    t: f64,
    #[arg(long, default_value_t = 1e-13)]
    tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct CorrelationArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    t: f64,
    /// Points as t:h pairs, e.g. `0.1:0,0.35:0`.
    #[arg(long)]
    points: String,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    /// `semicircle` (with --n) or a comma list of increasing reals.
    #[arg(long, default_value = "semicircle", allow_hyphen_values = true)]
    bottom: String,
    #[arg(long)]
    n: Option<usize>,
    /// Gibbs sweeps per draw; 50·n when absent.
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long, default_value_t = 1)]
    draws: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct MinorArgs {
    /// `semicircle` (with --n) or a comma list of increasing reals.
    #[arg(long, default_value = "semicircle", allow_hyphen_values = true)]
    spectrum: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1)]
    draws: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[arg(long)]
    n: usize,
    /// Boundary keyword, e.g. `linear:1,2`.
    #[arg(long)]
    boundary: String,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct CompressArgs {
    /// Built-in keyword (semicircle, arcsine, uniform) or a measure JSON file.
    #[arg(long, default_value = "semicircle")]
    measure: String,
    #[arg(long, default_value_t = 2000)]
    cells: usize,
    #[arg(long)]
    tau: f64,
    #[arg(long, default_value_t = DEFAULT_EPS0)]
    eps0: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct FlowArgs {
    #[arg(long, default_value = "semicircle")]
    measure: String,
    #[arg(long, default_value_t = 2000)]
    cells: usize,
    #[arg(long, default_value_t = 32)]
    tau_steps: usize,
    #[arg(long, default_value_t = DEFAULT_EPS0)]
    eps0: f64,
    /// Export directory.
    #[arg(long)]
    dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EntropyArgs {
    #[arg(long, default_value = "semicircle")]
    measure: String,
    #[arg(long, default_value_t = 2000)]
    cells: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct MinimizeArgs {
    /// `semicircle`, `uniform:c`, another built-in keyword or a measure JSON file.
    #[arg(long, default_value = "semicircle")]
    rho: String,
    #[arg(long, default_value_t = 32)]
    mesh: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct LdpArgs {
    /// Field CSV (s,t,f) as written by `minimize --format csv`; the
    /// minimizer for --rho at --mesh when absent.
    #[arg(long)]
    field: Option<PathBuf>,
    #[arg(long, default_value = "semicircle")]
    rho: String,
    #[arg(long, default_value_t = 16)]
    mesh: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    big_n: usize,
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Integrate the diagonal over its band instead of pinning it.
    #[arg(long)]
    banded_diagonal: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, default_value = "fast")]
    level: String,
}

struct Output {
    result: Value,
    csv: Option<String>,
}

fn json_only(result: Value) -> Output {
    Output { result, csv: None }
}

pub fn run(cli: &Cli) -> Result<u8> {
    let seed = cli.seed;
    let (name, args, out) = match &cli.command {
        Command::Sigma(a) => ("sigma", to_value(a), sigma_cmd(a)?),
        Command::BeadVolume(a) => ("bead-volume", to_value(a), bead_volume(a)?),
        Command::PartitionCheck(a) => ("partition-check", to_value(a), partition_check(a)?),
        Command::BeadCorrelation(a) => ("bead-correlation", to_value(a), bead_correlation(a)?),
        Command::SampleGt(a) => ("sample-gt", to_value(a), sample_gt(a, seed)?),
        Command::MinorProcess(a) => ("minor-process", to_value(a), minor_process(a, seed)?),
        Command::EstimateT(a) => ("estimate-T", to_value(a), estimate(a, seed)?),
        Command::Compress(a) => ("compress", to_value(a), compress(a)?),
        Command::BuildFlow(a) => {
            let config = config_json(cli, "build-flow", to_value(a));
            let out = flow(a, &config)?;
            ("build-flow", to_value(a), out)
        }
        Command::Entropy(a) => ("entropy", to_value(a), entropy(a)?),
        Command::Minimize(a) => ("minimize", to_value(a), minimize(a)?),
        Command::LdpEstimate(a) => ("ldp-estimate", to_value(a), ldp(a, seed)?),
        Command::Verify(a) => {
            let level: Level = a.level.parse()?;
            let report = verify_suite(level);
            eprint!("{}", report.table());
            let passed = report.passed;
            emit(cli, "verify", to_value(a), json_only(serde_json::to_value(&report)?))?;
            return Ok(if passed { 0 } else { EXIT_VERIFY_FAILED });
        }
    };
    emit(cli, name, args, out)?;
    Ok(0)
}

fn to_value<T: Serialize>(a: &T) -> Value {
    serde_json::to_value(a).unwrap_or(Value::Null)
}

fn config_json(cli: &Cli, name: &str, args: Value) -> Value {
    json!({
        "command": name,
        "params": args,
        "seed": cli.seed,
        "threads": cli.threads,
        "format": match cli.format { Format::Json => "json", Format::Csv => "csv" },
        "out": cli.out.as_ref().map(|p| p.display().to_string()),
    })
}

fn emit(cli: &Cli, name: &str, args: Value, out: Output) -> Result<()> {
    let config = config_json(cli, name, args);
    let text = match cli.format {
        Format::Json => {
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "command": name,
                "config": config,
                "result": out.result,
            });
            serde_json::to_string_pretty(&doc)? + "\n"
        }
        Format::Csv => {
            let mut s = format!("# schema_version: {SCHEMA_VERSION}\n# command: {name}\n# config: {config}\n");
            s += &out.csv.unwrap_or_else(|| scalar_csv(&out.result));
            s
        }
    };
    match &cli.out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// `key,value` rows for the scalar members of a JSON object.
fn scalar_csv(v: &Value) -> String {
    let mut s = String::from("key,value\n");
    if let Value::Object(map) = v {
        for (k, x) in map {
            match x {
                Value::Number(n) => {
                    let _ = writeln!(s, "{k},{n}");
                }
                Value::Bool(b) => {
                    let _ = writeln!(s, "{k},{b}");
                }
                Value::String(t) => {
                    let _ = writeln!(s, "{k},{t}");
                }
                _ => {}
            }
        }
    }
    s
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| GtError::InvalidInput(format!("bad number {x:?}: {e}"))))
        .collect()
}

fn levels(spec: &str, n: Option<usize>) -> Result<Vec<f64>> {
    if spec == "semicircle" {
        let n = n.ok_or_else(|| GtError::InvalidInput("`semicircle` needs --n".into()))?;
        return Ok((0..n).map(|j| semicircle_quantile((j as f64 + 0.5) / n as f64)).collect());
    }
    let v = parse_list(spec)?;
    if let Some(n) = n {
        if n != v.len() {
            return Err(GtError::InvalidInput(format!("--n {n} but {} values given", v.len())));
        }
    }
    Ok(v)
}

fn load_measure(spec: &str, cells: usize) -> Result<GridMeasure> {
    match Builtin::from_keyword(spec) {
        Ok(b) => b.build(cells),
        Err(_) if Path::new(spec).exists() => Ok(serde_json::from_str(&std::fs::read_to_string(spec)?)?),
        Err(e) => Err(e),
    }
}

fn load_rho(spec: &str) -> Result<QuantileCurve> {
    if spec == "semicircle" {
        return QuantileCurve::from_fn(1.0, 4000, semicircle_quantile);
    }
    if let Some(c) = spec.strip_prefix("uniform:") {
        let c: f64 = c.parse().map_err(|e| GtError::InvalidInput(format!("bad uniform width {c:?}: {e}")))?;
        return QuantileCurve::from_fn(1.0, 2000, |r| c * r);
    }
    quantile_of(&load_measure(spec, 4000)?, 2000)
}

fn sigma_cmd(a: &SigmaArgs) -> Result<Output> {
    let u = GradientPair::new(a.u1, a.u2);
    let s = sigma(u)?;
    let sg = sigma_gt(u).to_f64();
    let g = sigma_grad(u)?;
    let result = json!({
        "sigma": s,
        "sigma_gt": sg,
        "gradient": [g.u1, g.u2],
    });
    let csv = format!("u1,u2,sigma,sigma_gt,d_u1,d_u2\n{},{},{s},{sg},{},{}\n", a.u1, a.u2, g.u1, g.u2);
    Ok(Output { result, csv: Some(csv) })
}

fn bead_volume(a: &BeadVolumeArgs) -> Result<Output> {
    let table = BeadVolumeTable::build(a.n, a.k_max, a.precision_bits)?;
    let mut rows = Vec::new();
    for k in 0..=a.k_max {
        for l in 0..=a.n {
            if let Some(v) = table.get(k, l) {
                rows.push(json!({ "k": k, "l": l, "value": v.to_f64(), "error_bound": v.error_bound() }));
            }
        }
    }
    Ok(Output {
        result: json!({ "n": a.n, "rows": rows }),
        csv: Some(table.to_csv()),
    })
}

fn partition_check(a: &PartitionArgs) -> Result<Output> {
    let s = partition_series(a.n, a.lambda, a.t, a.tol)?;
    let (p, parts) = partition_product(a.n, a.lambda, a.t);
    Ok(json_only(json!({
        "series": s.value,
        "product": p,
        "relative_gap": ((s.value - p) / p).abs(),
        "truncation": s.truncation,
        "tail_bound": s.tail_bound,
        "mean_beads": s.mean_beads,
        "parts": parts,
    })))
}

fn bead_correlation(a: &CorrelationArgs) -> Result<Output> {
    let points: Vec<(f64, i64)> = a
        .points
        .split(',')
        .map(|p| {
            let (t, h) = p
                .split_once(':')
                .ok_or_else(|| GtError::InvalidInput(format!("point {p:?} is not t:h")))?;
            let t = t.trim().parse::<f64>().map_err(|e| GtError::InvalidInput(format!("bad t in {p:?}: {e}")))?;
            let h = h.trim().parse::<i64>().map_err(|e| GtError::InvalidInput(format!("bad h in {p:?}: {e}")))?;
            Ok((t, h))
        })
        .collect::<Result<_>>()?;
    let rho = correlation_rho(a.n, a.lambda, a.t, &points)?;
    Ok(json_only(json!({ "rho": rho, "points": points })))
}

fn patterns_output(p: Vec<GTPattern>) -> Output {
    let mut csv = String::from("draw,level,index,value\n");
    for (d, pat) in p.iter().enumerate() {
        for (k, row) in pat.rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let _ = writeln!(csv, "{d},{},{},{v}", k + 1, j + 1);
            }
        }
    }
    Output {
        result: json!({ "patterns": p }),
        csv: Some(csv),
    }
}

fn sample_gt(a: &SampleArgs, seed: u64) -> Result<Output> {
    let bottom = levels(&a.bottom, a.n)?;
    let sweeps = a.sweeps.unwrap_or_else(|| default_sweeps(bottom.len()));
    Ok(patterns_output(sample_uniform_batch(&bottom, sweeps, a.draws, seed)?))
}

fn minor_process(a: &MinorArgs, seed: u64) -> Result<Output> {
    let s = levels(&a.spectrum, a.n)?;
    Ok(patterns_output(minor_process_batch(&s, a.draws, seed)?))
}

fn estimate(a: &EstimateArgs, seed: u64) -> Result<Output> {
    let b = BoundaryField::from_keyword(a.n, &a.boundary)?;
    let (est, se) = estimate_t(&b, a.samples, seed)?;
    Ok(json_only(json!({ "estimate": est, "stderr": se })))
}

fn compress(a: &CompressArgs) -> Result<Output> {
    let m = load_measure(&a.measure, a.cells)?;
    let c = compress_measure_with(&m, a.tau, a.eps0)?;
    let mut csv = String::from("x,density\n");
    for (k, d) in c.density().iter().enumerate() {
        let _ = writeln!(csv, "{},{d}", c.node(k));
    }
    Ok(Output {
        result: serde_json::to_value(&c)?,
        csv: Some(csv),
    })
}

fn flow(a: &FlowArgs, config: &Value) -> Result<Output> {
    let f = if a.measure == "semicircle" {
        build_flow_semicircle(0.0, 1.0, a.tau_steps, a.eps0, a.cells)?
    } else {
        build_flow(&load_measure(&a.measure, a.cells)?, a.tau_steps, a.eps0)?
    };
    let header = json!({ "schema_version": SCHEMA_VERSION, "config": config }).to_string();
    f.export(&a.dir, Some(&header))?;
    Ok(json_only(json!({
        "dir": a.dir.display().to_string(),
        "tau_steps": f.tau_steps(),
        "burgers_residual": f.burgers_residual(),
        "burgers_bound": f.burgers_bound(),
    })))
}

fn entropy(a: &EntropyArgs) -> Result<Output> {
    let m = load_measure(&a.measure, a.cells)?;
    Ok(json_only(json!({
        "log_energy": log_energy(&m)?,
        "free_entropy": free_entropy(&m)?,
    })))
}

fn minimize(a: &MinimizeArgs) -> Result<Output> {
    let rho = load_rho(&a.rho)?;
    let (f, rep) = minimize_energy_report(&rho, a.mesh, a.tol, a.max_iters)?;
    let energy = rep.energies.last().copied().unwrap_or(f64::NAN);
    let rows: Vec<[f64; 3]> = f.rows().into_iter().map(|(s, t, v)| [s, t, v]).collect();
    Ok(Output {
        result: json!({
            "energy": energy,
            "rate": rate_functional(&f)?,
            "iterations": rep.iterations,
            "gradient_norm": rep.gradient_norm,
            "nodes": rows,
        }),
        csv: Some(f.to_csv()),
    })
}

fn ldp(a: &LdpArgs, seed: u64) -> Result<Output> {
    let v = match &a.field {
        Some(p) => TriangleField::from_csv(&std::fs::read_to_string(p)?)?,
        None => minimize_energy_report(&load_rho(&a.rho)?, a.mesh, a.tol, 500)?.0,
    };
    let mode = if a.banded_diagonal { DiagonalMode::Banded } else { DiagonalMode::Pinned };
    let e = ldp_log_volume_with(&v, a.big_n, a.delta, a.samples, seed, mode)?;
    let mut result = json!({
        "estimate": e.estimate,
        "stderr": e.stderr,
        "log_volume": e.log_volume,
        "log_stderr": e.log_stderr,
        "replicates": e.replicates,
        "alive": e.alive,
        "rate_functional": rate_functional(&v)?,
    });
    if mode == DiagonalMode::Pinned && e.alive > 0 {
        let (r, se) = ldp_rate(&v, a.big_n, a.delta, a.samples, seed)?;
        result["log_prob_per_n2"] = json!(r);
        result["log_prob_stderr"] = json!(se);
    }
    Ok(json_only(result))
}
