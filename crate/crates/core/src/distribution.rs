//! Distribution functions of maximal fields, Φ_n norms, the weak quasi-norm
//! `sup_λ weight(n,λ)·|{ > λ}|`, hybrid tail-stitched curves, and
//! lower-bound certificates for the operator norm.

use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    mixed_region_bound, phi, tail_level_measure, weight, DistributionSource, MethodTag,
};
use crate::error::{Error, Result};
use crate::grid::{build_grid_function, FunctionDescriptor, GridFunction};
use crate::maximal::{strong_maximal_grid, FarFieldConfig, OperatorKind, Profile1D, Variant};

/// One level of a distribution curve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CurvePoint {
    pub lambda: f64,
    /// `|{ > λ}|`.
    pub measure: f64,
    pub method: MethodTag,
    /// Width of the uncertainty interval on `measure` (0 when exact or
    /// grid-truncated; the mixed-region bound for hybrid points).
    pub uncertainty: f64,
}

/// Level-set measures of one operator output over an ascending λ grid.
#[derive(Debug, Clone, Serialize)]
pub struct DistributionCurve {
    n: usize,
    operator: OperatorKind,
    points: Vec<CurvePoint>,
}

impl DistributionCurve {
    /// Validates λ ordering, positivity and (slack 1e-9) monotonicity.
    pub fn new(n: usize, operator: OperatorKind, points: Vec<CurvePoint>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("curve needs n >= 1".into()));
        }
        if points.is_empty() {
            return Err(Error::Domain("curve needs at least one point".into()));
        }
        for p in &points {
            if !(p.lambda > 0.0) || !p.lambda.is_finite() {
                return Err(Error::Domain(format!("need λ > 0, got {}", p.lambda)));
            }
            if !p.measure.is_finite() || p.measure < 0.0 || !p.uncertainty.is_finite() {
                return Err(Error::Domain(format!(
                    "bad measure {} at λ = {}",
                    p.measure, p.lambda
                )));
            }
        }
        for w in points.windows(2) {
            if w[1].lambda <= w[0].lambda {
                return Err(Error::Domain("λ grid must be strictly ascending".into()));
            }
            if w[1].measure > w[0].measure + 1e-9 * (1.0 + w[0].measure) {
                return Err(Error::Domain(format!(
                    "measures must be nonincreasing: {} at λ = {} then {} at λ = {}",
                    w[0].measure, w[0].lambda, w[1].measure, w[1].lambda
                )));
            }
        }
        Ok(Self {
            n,
            operator,
            points,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn operator(&self) -> OperatorKind {
        self.operator
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }
}

/// `‖f‖_{Φ_n} = Σ_cells Φ_n(value) · cell volume`.
pub fn phi_norm(f: &GridFunction, n: usize) -> f64 {
    let vol = f.cell_volume();
    f.values().iter().map(|&v| phi(n, v)).sum::<f64>() * vol
}

fn count_above(sorted: &[f64], lambda: f64) -> usize {
    sorted.len() - sorted.partition_point(|&v| v <= lambda)
}

fn sorted_values(m: &GridFunction) -> Vec<f64> {
    let mut v = m.values().to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// Distribution curve of a maximal-function grid: per λ, the volume of cells
/// with value strictly above λ. Counts only the grid box, so it understates
/// the continuum measure (see [`distribution_hybrid`]).
pub fn distribution_grid(
    m: &GridFunction,
    operator: OperatorKind,
    lambdas: &[f64],
) -> Result<DistributionCurve> {
    let sorted = sorted_values(m);
    let vol = m.cell_volume();
    let points = lambdas
        .iter()
        .map(|&lambda| CurvePoint {
            lambda,
            measure: count_above(&sorted, lambda) as f64 * vol,
            method: MethodTag::Grid,
            uncertainty: 0.0,
        })
        .collect();
    DistributionCurve::new(m.dim(), operator, points)
}

/// Distribution curve of a bilinear maximal field at levels `λ²`: the set
/// `{M^(2) > λ²}` counted as `{√(M^(2)) > λ}`. On floats `√(x²) = x`, so for
/// `f = g` this curve is bitwise the linear curve of `{M > λ}`.
pub fn bilinear_distribution_grid(m2: &GridFunction, lambdas: &[f64]) -> Result<DistributionCurve> {
    let mut sorted: Vec<f64> = m2.values().iter().map(|&v| v.sqrt()).collect();
    sorted.sort_unstable_by(f64::total_cmp);
    let vol = m2.cell_volume();
    let points = lambdas
        .iter()
        .map(|&lambda| CurvePoint {
            lambda,
            measure: count_above(&sorted, lambda) as f64 * vol,
            method: MethodTag::Grid,
            uncertainty: 0.0,
        })
        .collect();
    DistributionCurve::new(m2.dim(), OperatorKind::Bilinear, points)
}

/// Exact measure of `{∏_k g_k(x_k) > λ}` for 1D maximal profiles `g_k`.
///
/// Reduces one axis at a time: the 1D case is the closed-form level width,
/// higher dimensions integrate the inner measure with adaptive Simpson
/// quadrature (relative tolerance 1e-8), splitting at the profile kink `±r`.
pub fn distribution_separable(profiles: &[Profile1D], lambda: f64) -> Result<f64> {
    if profiles.is_empty() {
        return Err(Error::DimensionMismatch("no profiles".into()));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("need λ > 0, got {lambda}")));
    }
    Ok(separable_measure(profiles, lambda))
}

fn separable_measure(profiles: &[Profile1D], lambda: f64) -> f64 {
    let total_height: f64 = profiles.iter().map(|p| p.height()).product();
    if lambda >= total_height {
        return 0.0;
    }
    let (head, rest) = profiles.split_first().expect("nonempty");
    if rest.is_empty() {
        return 2.0 * head.halfwidth_above(lambda);
    }
    let rest_height: f64 = rest.iter().map(|p| p.height()).product();
    // integrand is even in x; split [0, X] at the kink r
    let x_max = head.halfwidth_above(lambda / rest_height);
    let r = head.half_width();
    let core_end = r.min(x_max);
    let mut total = core_end * separable_measure(rest, lambda / head.height());
    if x_max > r {
        // On the tail the head profile is c/(x+r); substituting x+r = r e^u
        // flattens the multi-decade range so Simpson's error scale is sane.
        let u_end = ((x_max + r) / r).ln();
        let g = |u: f64| {
            let xr = r * u.exp();
            let x = (xr - r).max(r);
            separable_measure(rest, lambda / head.value(x)) * xr
        };
        total += adaptive_simpson(&g, std::f64::consts::LN_2, u_end, 1e-8, 40);
    }
    2.0 * total
}

/// Adaptive Simpson quadrature with relative tolerance and depth cap.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64, max_depth: u32) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let scale = whole.abs().max(1e-300);
    simpson_rec(f, a, b, fa, fm, fb, whole, rel_tol * scale, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
}

/// Tail-stitched distribution curve: exact analytic far-field measure plus
/// the grid count inside the box, with the mixed-region bound attached as an
/// uncertainty interval. Uncentered operator only (the corner rule is the
/// uncentered optimizer).
///
/// The grid box must be `[-R, R]^n` for the config's radius `R`.
pub fn distribution_hybrid(
    f: &GridFunction,
    cfg: &FarFieldConfig,
    lambdas: &[f64],
) -> Result<DistributionCurve> {
    check_hybrid_box(f, cfg)?;
    let m = strong_maximal_grid(f, Variant::Uncentered)?;
    let sorted = sorted_values(&m);
    let vol = m.cell_volume();
    hybrid_points(cfg, &sorted, vol, f.dim(), lambdas)
}

fn check_hybrid_box(f: &GridFunction, cfg: &FarFieldConfig) -> Result<()> {
    if f.dim() != cfg.dim() {
        return Err(Error::DimensionMismatch(format!(
            "grid dim {} vs config dim {}",
            f.dim(),
            cfg.dim()
        )));
    }
    let r = cfg.radius();
    let tol = 1e-6 * r;
    for k in 0..f.dim() {
        if (f.box_lo()[k] + r).abs() > tol || (f.box_hi()[k] - r).abs() > tol {
            return Err(Error::InvalidGrid(format!(
                "hybrid grid box must be [-R, R]^n with R = {r}, got [{}, {}] on axis {k}",
                f.box_lo()[k],
                f.box_hi()[k]
            )));
        }
    }
    Ok(())
}

fn hybrid_points(
    cfg: &FarFieldConfig,
    sorted: &[f64],
    vol: f64,
    n: usize,
    lambdas: &[f64],
) -> Result<DistributionCurve> {
    let sup = cfg.far_field_sup();
    let mut points = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let inner = count_above(sorted, lambda) as f64 * vol;
        // {M f > λ} has empty far field for λ at or above the far-field sup
        let tail = if lambda < sup {
            tail_level_measure(cfg, lambda)?
        } else {
            0.0
        };
        let mut uncertainty = 0.0;
        for i in 1..n {
            uncertainty += mixed_region_bound(cfg, lambda, i)?;
        }
        points.push(CurvePoint {
            lambda,
            measure: tail + inner,
            method: MethodTag::Hybrid,
            uncertainty,
        });
    }
    DistributionCurve::new(n, OperatorKind::Uncentered, points)
}

/// The weak quasi-norm over a finite λ grid: a certified lower bound on
/// `sup_λ weight(n,λ)·|{ > λ}|`, with the arg-max λ.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WeakNorm {
    pub value: f64,
    pub lambda: f64,
}

/// Maximum of `weight(n, λ)·measure` over the curve's points.
pub fn weak_phi_norm(curve: &DistributionCurve) -> WeakNorm {
    let mut best = WeakNorm {
        value: f64::NEG_INFINITY,
        lambda: 0.0,
    };
    for p in curve.points() {
        let w = weight(curve.n(), p.lambda) * p.measure;
        if w > best.value {
            best = WeakNorm {
                value: w,
                lambda: p.lambda,
            };
        }
    }
    best
}

/// Numerical lower-bound certificate for the operator norm on `L_{Φ_n}`.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub n: usize,
    pub variant: Variant,
    pub descriptor: FunctionDescriptor,
    /// Lower bound for the weak quasi-norm of the maximal function.
    pub weak_norm: f64,
    /// λ attaining the weak-norm lower bound.
    pub lambda: f64,
    /// `‖f‖_{Φ_n}` (analytic where available).
    pub phi_norm: f64,
    /// `weak_norm / phi_norm`.
    pub achieved: f64,
    /// `max(2^n/(n-1)!, 1)` uncentered, `1` centered.
    pub target: f64,
    /// Whether `achieved >= 0.95 · target`.
    pub passed: bool,
}

/// Norm lower-bound target for a variant.
pub fn norm_target(n: usize, variant: Variant) -> f64 {
    match variant {
        Variant::Uncentered => {
            (2f64.powi(n as i32) / crate::asymptotics::factorial(n - 1)).max(1.0)
        }
        Variant::Centered => 1.0,
    }
}

/// Builds a certificate: ratio of the weak quasi-norm of `M f` (best
/// available curve over the λ grid) to `‖f‖_{Φ_n}`.
///
/// Requires height ≤ 1 so that `‖f‖_{Φ_n} = ‖f‖_{L¹}` exactly. Cube
/// descriptors use the exact separable curve; other shapes evaluate the
/// operator on a grid at the given per-axis resolution.
pub fn lower_bound_certificate(
    descriptor: &FunctionDescriptor,
    n: usize,
    variant: Variant,
    lambdas: &[f64],
    resolution: usize,
) -> Result<Certificate> {
    descriptor.validate()?;
    if n != descriptor.dim() {
        return Err(Error::DimensionMismatch(format!(
            "n = {n} vs descriptor dimension {}",
            descriptor.dim()
        )));
    }
    if lambdas.is_empty() {
        return Err(Error::Domain("empty λ grid".into()));
    }
    if let Some(h) = descriptor.height() {
        if h > 1.0 {
            return Err(Error::Domain(format!(
                "certificate normalization needs height <= 1, got {h}"
            )));
        }
    }

    let operator: OperatorKind = variant.into();
    let (curve, denom) = match *descriptor {
        FunctionDescriptor::Cube {
            half_width, height, ..
        } => {
            // per-axis heights multiply back to the cube height
            let profile = Profile1D::new(half_width, height.powf(1.0 / n as f64), variant)?;
            let profiles = vec![profile; n];
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
            let curve = DistributionCurve::new(n, operator, points)?;
            let denom = descriptor.analytic_mass().expect("cube has analytic mass");
            (curve, denom)
        }
        _ => {
            let f = build_grid_function(descriptor, Some(resolution))?;
            if f.max_value() > 1.0 {
                return Err(Error::Domain(format!(
                    "certificate normalization needs height <= 1, got {}",
                    f.max_value()
                )));
            }
            let m = strong_maximal_grid(&f, variant)?;
            let curve = distribution_grid(&m, operator, lambdas)?;
            let denom = descriptor
                .analytic_mass()
                .unwrap_or_else(|| phi_norm(&f, n));
            (curve, denom)
        }
    };

    let weak = weak_phi_norm(&curve);
    let target = norm_target(n, variant);
    let achieved = weak.value / denom;
    Ok(Certificate {
        n,
        variant,
        descriptor: descriptor.clone(),
        weak_norm: weak.value,
        lambda: weak.lambda,
        phi_norm: denom,
        achieved,
        target,
        passed: achieved >= 0.95 * target,
    })
}

/// Scan source backed by a sorted maximal-function grid.
pub struct GridSource {
    sorted: Vec<f64>,
    cell_volume: f64,
}

impl GridSource {
    pub fn new(m: &GridFunction) -> Self {
        Self {
            sorted: sorted_values(m),
            cell_volume: m.cell_volume(),
        }
    }
}

impl DistributionSource for GridSource {
    fn measure(&self, lambda: f64) -> Result<f64> {
        Ok(count_above(&self.sorted, lambda) as f64 * self.cell_volume)
    }

    fn method(&self) -> MethodTag {
        MethodTag::Grid
    }
}

/// Scan source for a bilinear field: measures `{M^(2) > λ²}` via square
/// roots (bitwise the linear counts when the operands coincide).
pub struct BilinearGridSource {
    sorted_roots: Vec<f64>,
    cell_volume: f64,
}

impl BilinearGridSource {
    pub fn new(m2: &GridFunction) -> Self {
        let mut sorted_roots: Vec<f64> = m2.values().iter().map(|&v| v.sqrt()).collect();
        sorted_roots.sort_unstable_by(f64::total_cmp);
        Self {
            sorted_roots,
            cell_volume: m2.cell_volume(),
        }
    }
}

impl DistributionSource for BilinearGridSource {
    fn measure(&self, lambda: f64) -> Result<f64> {
        Ok(count_above(&self.sorted_roots, lambda) as f64 * self.cell_volume)
    }

    fn method(&self) -> MethodTag {
        MethodTag::Grid
    }
}

/// Scan source with exact separable level-set measures.
pub struct SeparableSource {
    profiles: Vec<Profile1D>,
}

impl SeparableSource {
    pub fn new(profiles: Vec<Profile1D>) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::DimensionMismatch("no profiles".into()));
        }
        Ok(Self { profiles })
    }
}

impl DistributionSource for SeparableSource {
    fn measure(&self, lambda: f64) -> Result<f64> {
        distribution_separable(&self.profiles, lambda)
    }

    fn method(&self) -> MethodTag {
        MethodTag::Separable
    }
}

/// Scan source stitching the analytic tail onto grid counts.
pub struct HybridSource {
    cfg: FarFieldConfig,
    sorted: Vec<f64>,
    cell_volume: f64,
    dim: usize,
}

impl HybridSource {
    /// Evaluates the maximal operator once; `f` must live on `[-R, R]^n`.
    pub fn new(f: &GridFunction, cfg: FarFieldConfig) -> Result<Self> {
        check_hybrid_box(f, &cfg)?;
        let m = strong_maximal_grid(f, Variant::Uncentered)?;
        Ok(Self {
            sorted: sorted_values(&m),
            cell_volume: m.cell_volume(),
            dim: f.dim(),
            cfg,
        })
    }
}

impl DistributionSource for HybridSource {
    fn measure(&self, lambda: f64) -> Result<f64> {
        let inner = count_above(&self.sorted, lambda) as f64 * self.cell_volume;
        let tail = if lambda < self.cfg.far_field_sup() {
            tail_level_measure(&self.cfg, lambda)?
        } else {
            0.0
        };
        let _ = self.dim;
        Ok(tail + inner)
    }

    fn method(&self) -> MethodTag {
        MethodTag::Hybrid
    }
}

/// Scan source for the far-field region alone (no grid term).
pub struct AnalyticTailSource {
    cfg: FarFieldConfig,
}

impl AnalyticTailSource {
    pub fn new(cfg: FarFieldConfig) -> Self {
        Self { cfg }
    }
}

impl DistributionSource for AnalyticTailSource {
    fn measure(&self, lambda: f64) -> Result<f64> {
        if lambda >= self.cfg.far_field_sup() {
            return Ok(0.0);
        }
        tail_level_measure(&self.cfg, lambda)
    }

    fn method(&self) -> MethodTag {
        MethodTag::AnalyticTail
    }
}
