//! Command-line front end: experiments, CSV/JSON plot data, certificates.
//!
//! Exit codes: 0 success, 1 quantitative target missed, 2 invalid input.
//! CSV files carry a single `#`-prefixed header line; JSON summaries go to
//! stdout. Identical configuration and seed produce byte-identical outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::asymptotics::{
    extrapolate_constant, geometric_lambdas, lemma21_polynomial, limit_scan, weight, Direction,
    DistributionSource, LimitScan, MethodTag,
};
use crate::distribution::{
    bilinear_distribution_grid, distribution_grid, distribution_hybrid, distribution_separable,
    lower_bound_certificate, weak_phi_norm, AnalyticTailSource, BilinearGridSource, CurvePoint,
    DistributionCurve, GridSource, HybridSource, SeparableSource,
};
use crate::error::{Error, Result};
use crate::grid::{build_grid_function, for_each_index, FunctionDescriptor, GridFunction};
use crate::maximal::{
    bilinear_maximal_grid, bilinear_maximal_grid_with, strong_maximal_grid,
    strong_maximal_grid_with, EvalStrategy, FarFieldConfig, OperatorKind, Profile1D, Variant,
};
use crate::oracle::{brute_force_bilinear, brute_force_maximal, mc_volume};

/// Top-level run configuration, parsed from the command line.
#[derive(Debug, Parser)]
#[command(
    name = "strongmax",
    version,
    about = "Strong maximal operators: fields, level sets, limiting weak-type constants"
)]
pub struct RunConfig {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form corner volume V_n(c), optionally cross-checked by Monte Carlo.
    LemmaVolume(LemmaVolumeArgs),
    /// Scan weighted level-set measures and extrapolate the limiting constant.
    LimitScan(LimitScanArgs),
    /// Emit a lower-bound certificate for the weak-type operator norm.
    Certify(CertifyArgs),
    /// Evaluate a maximal-function field on a grid and write it as CSV.
    Maximal(MaximalArgs),
    /// Write a distribution curve λ ↦ |{M f > λ}| as CSV.
    Distribution(DistributionArgs),
    /// Compare fast evaluators against brute-force oracles on random grids.
    OracleCheck(OracleCheckArgs),
}

#[derive(Debug, Args)]
struct DescriptorArgs {
    /// Inline function-descriptor JSON, e.g. '{"shape":"cube","half_width":1,"height":1,"dim":2}'.
    #[arg(long, value_name = "JSON", conflicts_with = "descriptor_file")]
    descriptor: Option<String>,
    /// Path to a function-descriptor JSON file.
    #[arg(long, value_name = "PATH")]
    descriptor_file: Option<PathBuf>,
}

impl DescriptorArgs {
    fn load(&self) -> Result<FunctionDescriptor> {
        let text = match (&self.descriptor, &self.descriptor_file) {
            (Some(inline), None) => inline.clone(),
            (None, Some(path)) => std::fs::read_to_string(path)?,
            _ => {
                return Err(Error::InvalidDescriptor(
                    "pass exactly one of --descriptor or --descriptor-file".into(),
                ))
            }
        };
        FunctionDescriptor::from_json(&text)
    }
}

#[derive(Debug, Args)]
struct LambdaArgs {
    /// Smallest level in the λ grid.
    #[arg(long, default_value_t = 1e-6)]
    lambda_min: f64,
    /// Largest level in the λ grid.
    #[arg(long, default_value_t = 0.9)]
    lambda_max: f64,
    /// Density of the geometric λ grid.
    #[arg(long, default_value_t = 12)]
    points_per_decade: usize,
}

impl LambdaArgs {
    fn grid(&self) -> Result<Vec<f64>> {
        geometric_lambdas(self.lambda_min, self.lambda_max, self.points_per_decade)
    }
}

#[derive(Debug, Args)]
struct LemmaVolumeArgs {
    /// Dimension n.
    #[arg(long)]
    n: usize,
    /// Distance R of the far-field corner from the origin.
    #[arg(long = "R")]
    big_r: f64,
    /// Support half-width r.
    #[arg(long = "r")]
    r: f64,
    /// Level argument c; must exceed (R+r)^n.
    #[arg(long)]
    c: f64,
    /// Monte Carlo cross-check sample count.
    #[arg(long)]
    mc_samples: Option<u64>,
    /// RNG seed for the cross-check.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct LimitScanArgs {
    #[command(flatten)]
    descriptor: DescriptorArgs,
    /// Operator whose level sets are scanned.
    #[arg(long, value_enum, default_value_t = OperatorKind::Uncentered)]
    operator: OperatorKind,
    /// Measure evaluation route.
    #[arg(long, value_enum, default_value_t = MethodTag::Grid)]
    method: MethodTag,
    /// Grid resolution per axis (grid and hybrid methods).
    #[arg(long, default_value_t = 128)]
    resolution: usize,
    /// Override the sampling box to [-b, b]^n (grid method).
    #[arg(long, value_name = "B")]
    box_half: Option<f64>,
    /// Scan direction: λ→0 recovers the limiting constant, λ→∞ vanishes.
    #[arg(long, value_enum, default_value_t = Direction::ToZero)]
    direction: Direction,
    #[command(flatten)]
    lambdas: LambdaArgs,
    /// Output CSV path.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[command(flatten)]
    descriptor: DescriptorArgs,
    /// Rectangle family of the certified operator.
    #[arg(long, value_enum, default_value_t = Variant::Uncentered)]
    variant: Variant,
    /// Grid resolution per axis for non-product shapes.
    #[arg(long, default_value_t = 128)]
    resolution: usize,
    #[command(flatten)]
    lambdas: LambdaArgs,
}

#[derive(Debug, Args)]
struct MaximalArgs {
    #[command(flatten)]
    descriptor: DescriptorArgs,
    /// Operator to evaluate (bilinear pairs the function with itself).
    #[arg(long, value_enum, default_value_t = OperatorKind::Uncentered)]
    operator: OperatorKind,
    /// Rectangle enumeration strategy.
    #[arg(long, value_enum, default_value_t = EvalStrategy::Auto)]
    strategy: EvalStrategy,
    /// Grid resolution per axis.
    #[arg(long, default_value_t = 128)]
    resolution: usize,
    /// Override the sampling box to [-b, b]^n.
    #[arg(long, value_name = "B")]
    box_half: Option<f64>,
    /// Output CSV path.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DistributionArgs {
    #[command(flatten)]
    descriptor: DescriptorArgs,
    /// Operator whose level sets are measured.
    #[arg(long, value_enum, default_value_t = OperatorKind::Uncentered)]
    operator: OperatorKind,
    /// Measure evaluation route.
    #[arg(long, value_enum, default_value_t = MethodTag::Grid)]
    method: MethodTag,
    /// Grid resolution per axis (grid and hybrid methods).
    #[arg(long, default_value_t = 128)]
    resolution: usize,
    /// Override the sampling box to [-b, b]^n (grid method).
    #[arg(long, value_name = "B")]
    box_half: Option<f64>,
    #[command(flatten)]
    lambdas: LambdaArgs,
    /// Output CSV path.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct OracleCheckArgs {
    /// Number of random grids checked against the brute-force operator.
    #[arg(long, default_value_t = 100)]
    grids: usize,
    /// Number of random bilinear pairs checked.
    #[arg(long, default_value_t = 50)]
    pairs: usize,
    /// RNG seed for grid generation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Parses the process arguments, dispatches, and maps errors to exit code 2.
pub fn run() -> i32 {
    let cfg = RunConfig::parse();
    match dispatch(&cfg.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(command: &Command) -> Result<i32> {
    match command {
        Command::LemmaVolume(a) => cmd_lemma_volume(a),
        Command::LimitScan(a) => cmd_limit_scan(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Maximal(a) => cmd_maximal(a),
        Command::Distribution(a) => cmd_distribution(a),
        Command::OracleCheck(a) => cmd_oracle_check(a),
    }
}

fn cmd_lemma_volume(a: &LemmaVolumeArgs) -> Result<i32> {
    if !(a.big_r > 0.0) || !(a.r > 0.0) || !a.big_r.is_finite() || !a.r.is_finite() {
        return Err(Error::Domain("need finite R > 0 and r > 0".into()));
    }
    let poly = lemma21_polynomial(a.n, a.big_r + a.r)?;
    if !(a.c > poly.threshold()) {
        return Err(Error::Domain(format!(
            "need c > (R+r)^n = {}, got c = {}",
            poly.threshold(),
            a.c
        )));
    }
    let closed_form = poly.value(a.c);
    let coefficients: Vec<f64> = (0..a.n).map(|j| poly.beta(j)).collect();
    let mut summary = serde_json::json!({
        "closed_form": closed_form,
        "coefficients": coefficients,
    });
    let mut code = 0;
    if let Some(samples) = a.mc_samples {
        let mc = mc_volume(a.n, a.big_r, a.r, a.c, samples, a.seed)?;
        summary["mc_estimate"] = mc.estimate.into();
        summary["mc_stderr"] = mc.std_error.into();
        // tiny relative slack so σ = 0 cases tolerate association order
        let tol = 3.0 * mc.std_error + 1e-12 * closed_form.abs();
        if (mc.estimate - closed_form).abs() > tol {
            code = 1;
        }
    }
    println!("{}", serde_json::to_string(&summary)?);
    Ok(code)
}

fn cmd_limit_scan(a: &LimitScanArgs) -> Result<i32> {
    let descriptor = a.descriptor.load()?;
    let n = descriptor.dim();
    let lambdas = a.lambdas.grid()?;
    let (source, mass) = build_source(&descriptor, a.operator, a.method, a.resolution, a.box_half)?;
    let scan = limit_scan(source.as_ref(), n, &lambdas, a.direction)?;
    write_scan_csv(&a.out, &scan)?;
    let fit = extrapolate_constant(&scan)?;
    let target = scan_target(n, a.operator, mass, a.direction);
    let relative_gap = if target > 0.0 {
        (fit.constant - target).abs() / target
    } else {
        fit.constant.abs()
    };
    let summary = serde_json::json!({
        "extrapolated": fit.constant,
        "residual": fit.residual,
        "target": target,
        "relative_gap": relative_gap,
    });
    println!("{}", serde_json::to_string(&summary)?);
    Ok(0)
}

fn cmd_certify(a: &CertifyArgs) -> Result<i32> {
    let descriptor = a.descriptor.load()?;
    let lambdas = a.lambdas.grid()?;
    let certificate = lower_bound_certificate(
        &descriptor,
        descriptor.dim(),
        a.variant,
        &lambdas,
        a.resolution,
    )?;
    println!("{}", serde_json::to_string(&certificate)?);
    Ok(if certificate.passed { 0 } else { 1 })
}

fn cmd_maximal(a: &MaximalArgs) -> Result<i32> {
    let descriptor = a.descriptor.load()?;
    let f = build_descriptor_grid(&descriptor, a.resolution, a.box_half)?;
    let field = match a.operator {
        OperatorKind::Bilinear => bilinear_maximal_grid_with(&f, &f, a.strategy)?,
        kind => strong_maximal_grid_with(&f, variant_of(kind), a.strategy)?,
    };
    write_field_csv(&a.out, &field)?;
    let summary = serde_json::json!({
        "cells": field.len(),
        "max_value": field.max_value(),
        "mass": field.mass(),
    });
    println!("{}", serde_json::to_string(&summary)?);
    Ok(0)
}

fn cmd_distribution(a: &DistributionArgs) -> Result<i32> {
    let descriptor = a.descriptor.load()?;
    let lambdas = a.lambdas.grid()?;
    let curve = build_curve(
        &descriptor,
        a.operator,
        a.method,
        a.resolution,
        a.box_half,
        &lambdas,
    )?;
    write_curve_csv(&a.out, &curve)?;
    let weak = weak_phi_norm(&curve);
    let summary = serde_json::json!({
        "weak_norm": weak.value,
        "lambda": weak.lambda,
        "points": curve.points().len(),
    });
    println!("{}", serde_json::to_string(&summary)?);
    Ok(0)
}

fn cmd_oracle_check(a: &OracleCheckArgs) -> Result<i32> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut grid_failures = 0usize;
    let mut pair_failures = 0usize;
    let mut max_rel = 0.0f64;

    for i in 0..a.grids {
        let f = random_grid(&mut rng, i);
        for variant in [Variant::Uncentered, Variant::Centered] {
            let fast = strong_maximal_grid(&f, variant)?;
            let brute = brute_force_maximal(&f, variant)?;
            let rel = max_rel_discrepancy(fast.values(), brute.values());
            max_rel = max_rel.max(rel);
            if rel > 1e-12 {
                grid_failures += 1;
            }
        }
    }
    for i in 0..a.pairs {
        let f = random_grid(&mut rng, a.grids + i);
        let g = f.with_values(f.values().iter().map(|v| 2.5 - v).collect())?;
        let fast = bilinear_maximal_grid(&f, &g)?;
        let brute = brute_force_bilinear(&f, &g)?;
        let rel = max_rel_discrepancy(fast.values(), brute.values());
        max_rel = max_rel.max(rel);
        if rel > 1e-12 {
            pair_failures += 1;
        }
    }

    let summary = serde_json::json!({
        "grids": a.grids,
        "grid_failures": grid_failures,
        "pairs": a.pairs,
        "pair_failures": pair_failures,
        "max_relative_discrepancy": max_rel,
        "seed": a.seed,
    });
    println!("{}", serde_json::to_string(&summary)?);
    Ok(if grid_failures + pair_failures == 0 {
        0
    } else {
        1
    })
}

/// Per-element relative discrepancy, maximized over the grid.
fn max_rel_discrepancy(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Random test grid with values in [0.5, 1.5); dimensions cycle 1, 2, 3.
fn random_grid(rng: &mut ChaCha8Rng, index: usize) -> GridFunction {
    let cells: Vec<usize> = match index % 3 {
        0 => vec![rng.gen_range(8..=64)],
        1 => (0..2).map(|_| rng.gen_range(2..=12)).collect(),
        _ => (0..3).map(|_| rng.gen_range(2..=6)).collect(),
    };
    let total: usize = cells.iter().product();
    let values: Vec<f64> = (0..total).map(|_| 0.5 + rng.gen::<f64>()).collect();
    let dim = cells.len();
    GridFunction::new(vec![0.0; dim], vec![1.0; dim], cells, values)
        .expect("random grid dimensions are valid")
}

fn variant_of(kind: OperatorKind) -> Variant {
    match kind {
        OperatorKind::Centered => Variant::Centered,
        // bilinear averages range over the uncentered rectangle family
        _ => Variant::Uncentered,
    }
}

/// Applies a `--box-half` override to an analytic descriptor.
fn with_box(descriptor: &FunctionDescriptor, half: f64) -> Result<FunctionDescriptor> {
    if !(half > 0.0) || !half.is_finite() {
        return Err(Error::Domain(format!(
            "need box half-width > 0, got {half}"
        )));
    }
    let dim = descriptor.dim();
    let (lo, hi) = (Some(vec![-half; dim]), Some(vec![half; dim]));
    let mut d = descriptor.clone();
    match &mut d {
        FunctionDescriptor::Cube { box_lo, box_hi, .. }
        | FunctionDescriptor::Ball { box_lo, box_hi, .. }
        | FunctionDescriptor::Tent { box_lo, box_hi, .. } => {
            *box_lo = lo;
            *box_hi = hi;
        }
        FunctionDescriptor::Samples { .. } => {
            return Err(Error::InvalidDescriptor(
                "--box-half cannot override a samples grid".into(),
            ))
        }
    }
    Ok(d)
}

fn build_descriptor_grid(
    descriptor: &FunctionDescriptor,
    resolution: usize,
    box_half: Option<f64>,
) -> Result<GridFunction> {
    match box_half {
        Some(half) => build_grid_function(&with_box(descriptor, half)?, Some(resolution)),
        None => build_grid_function(descriptor, Some(resolution)),
    }
}

/// Far-field configuration for an indicator cube descriptor.
fn cube_config(descriptor: &FunctionDescriptor) -> Result<FarFieldConfig> {
    match *descriptor {
        FunctionDescriptor::Cube {
            half_width,
            height,
            dim,
            ..
        } => {
            let mass = descriptor.analytic_mass().expect("cube mass is analytic");
            FarFieldConfig::new(dim, half_width, height, height, mass)
        }
        _ => Err(Error::InvalidDescriptor(
            "this method requires a cube descriptor".into(),
        )),
    }
}

/// Per-axis 1D maximal profiles for a cube descriptor.
fn cube_profiles(descriptor: &FunctionDescriptor, variant: Variant) -> Result<Vec<Profile1D>> {
    match *descriptor {
        FunctionDescriptor::Cube {
            half_width,
            height,
            dim,
            ..
        } => {
            // per-axis heights multiply back to the cube height
            let axis_height = height.powf(1.0 / dim as f64);
            Ok(vec![Profile1D::new(half_width, axis_height, variant)?; dim])
        }
        _ => Err(Error::InvalidDescriptor(
            "separable method requires a cube descriptor".into(),
        )),
    }
}

/// Builds the measure source for a scan and returns it with `‖f‖₁`.
fn build_source(
    descriptor: &FunctionDescriptor,
    operator: OperatorKind,
    method: MethodTag,
    resolution: usize,
    box_half: Option<f64>,
) -> Result<(Box<dyn DistributionSource>, f64)> {
    match method {
        MethodTag::Grid => {
            let f = build_descriptor_grid(descriptor, resolution, box_half)?;
            let mass = descriptor.analytic_mass().unwrap_or_else(|| f.mass());
            let source: Box<dyn DistributionSource> = match operator {
                OperatorKind::Bilinear => {
                    Box::new(BilinearGridSource::new(&bilinear_maximal_grid(&f, &f)?))
                }
                kind => Box::new(GridSource::new(&strong_maximal_grid(&f, variant_of(kind))?)),
            };
            Ok((source, mass))
        }
        MethodTag::Separable => {
            let profiles = cube_profiles(descriptor, variant_of(operator))?;
            let mass = descriptor.analytic_mass().expect("cube mass is analytic");
            Ok((Box::new(SeparableSource::new(profiles)?), mass))
        }
        MethodTag::Hybrid => {
            require_uncentered(operator)?;
            let cfg = cube_config(descriptor)?;
            let f = build_descriptor_grid(descriptor, resolution, Some(cfg.radius()))?;
            let mass = cfg.mass();
            Ok((Box::new(HybridSource::new(&f, cfg)?), mass))
        }
        MethodTag::AnalyticTail => {
            require_uncentered(operator)?;
            let cfg = cube_config(descriptor)?;
            let mass = cfg.mass();
            Ok((Box::new(AnalyticTailSource::new(cfg)), mass))
        }
    }
}

fn require_uncentered(operator: OperatorKind) -> Result<()> {
    if operator != OperatorKind::Uncentered {
        return Err(Error::Domain(format!(
            "the far-field corner rule applies to the uncentered operator, got {operator}"
        )));
    }
    Ok(())
}

/// Limiting weak-type constant for the scan target; 0 in the λ→∞ direction.
fn scan_target(n: usize, operator: OperatorKind, mass: f64, direction: Direction) -> f64 {
    if direction == Direction::ToInfinity {
        return 0.0;
    }
    let fact: f64 = (1..n).map(|k| k as f64).product();
    match operator {
        OperatorKind::Uncentered => 2f64.powi(n as i32) / fact * mass,
        OperatorKind::Centered => mass / fact,
        // f paired with itself: √(‖f‖₁‖g‖₁) = ‖f‖₁
        OperatorKind::Bilinear => 2f64.powi(n as i32) / fact * mass,
    }
}

fn build_curve(
    descriptor: &FunctionDescriptor,
    operator: OperatorKind,
    method: MethodTag,
    resolution: usize,
    box_half: Option<f64>,
    lambdas: &[f64],
) -> Result<DistributionCurve> {
    match method {
        MethodTag::Grid => {
            let f = build_descriptor_grid(descriptor, resolution, box_half)?;
            match operator {
                OperatorKind::Bilinear => {
                    bilinear_distribution_grid(&bilinear_maximal_grid(&f, &f)?, lambdas)
                }
                kind => {
                    distribution_grid(&strong_maximal_grid(&f, variant_of(kind))?, kind, lambdas)
                }
            }
        }
        MethodTag::Separable => {
            let profiles = cube_profiles(descriptor, variant_of(operator))?;
            let points = lambdas
                .iter()
                .map(|&lambda| {
                    Ok(CurvePoint {
                        lambda,
                        measure: distribution_separable(&profiles, lambda)?,
                        method: MethodTag::Separable,
                        uncertainty: 0.0,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            DistributionCurve::new(descriptor.dim(), operator, points)
        }
        MethodTag::Hybrid => {
            require_uncentered(operator)?;
            let cfg = cube_config(descriptor)?;
            let f = build_descriptor_grid(descriptor, resolution, Some(cfg.radius()))?;
            distribution_hybrid(&f, &cfg, lambdas)
        }
        MethodTag::AnalyticTail => {
            require_uncentered(operator)?;
            let source = AnalyticTailSource::new(cube_config(descriptor)?);
            let points = lambdas
                .iter()
                .map(|&lambda| {
                    Ok(CurvePoint {
                        lambda,
                        measure: source.measure(lambda)?,
                        method: MethodTag::AnalyticTail,
                        uncertainty: 0.0,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            DistributionCurve::new(descriptor.dim(), operator, points)
        }
    }
}

fn write_scan_csv(path: &Path, scan: &LimitScan) -> Result<()> {
    let mut buf = String::from("# lambda,measure,weighted,u,method\n");
    for row in &scan.rows {
        writeln!(
            buf,
            "{:e},{:e},{:e},{:e},{}",
            row.lambda, row.measure, row.weighted, row.u, scan.method
        )
        .expect("string write");
    }
    std::fs::write(path, buf)?;
    Ok(())
}

fn write_curve_csv(path: &Path, curve: &DistributionCurve) -> Result<()> {
    let mut buf = String::from("# lambda,measure,weighted,uncertainty,method\n");
    for p in curve.points() {
        writeln!(
            buf,
            "{:e},{:e},{:e},{:e},{}",
            p.lambda,
            p.measure,
            weight(curve.n(), p.lambda) * p.measure,
            p.uncertainty,
            p.method
        )
        .expect("string write");
    }
    std::fs::write(path, buf)?;
    Ok(())
}

fn write_field_csv(path: &Path, field: &GridFunction) -> Result<()> {
    let mut buf = String::from("# ");
    for k in 0..field.dim() {
        write!(buf, "x{},", k + 1).expect("string write");
    }
    buf.push_str("value,method\n");
    let mut flat = 0usize;
    for_each_index(field.cells(), |idx| {
        for x in field.cell_center(idx) {
            write!(buf, "{x:e},").expect("string write");
        }
        writeln!(buf, "{:e},grid", field.values()[flat]).expect("string write");
        flat += 1;
    });
    std::fs::write(path, buf)?;
    Ok(())
}
