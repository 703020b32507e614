//! The Φ_n scale, the weak weight λ/(1+(log⁺(1/λ))^{n-1}), exact
//! log-polynomial level-set volumes for corner regions, analytic far-field
//! level measures, and extrapolation of weighted measures to λ → 0.

use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maximal::FarFieldConfig;

/// Largest dimension for which the exact rational recursion is guaranteed
/// not to overflow `i128` coefficients.
pub const MAX_LEMMA_DIM: usize = 20;

/// How to read `Φ_1` and the `n = 1` weight.
///
/// With `0^0 = 1` the general formulas give `Φ_1(t) = 2t` and weight `λ/2`
/// (`Literal`); the classical objects are `Φ_1(t) = t` and weight `λ`
/// (`Classical`, the default). The two conventions agree for `n >= 2` and
/// differ by the harmless factor 2 for `n = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum N1Convention {
    #[default]
    Classical,
    Literal,
}

fn log_plus(x: f64) -> f64 {
    x.ln().max(0.0)
}

/// `Φ_n(t) = t(1 + (log⁺ t)^{n-1})`, natural logarithm, classical `n = 1`.
pub fn phi(n: usize, t: f64) -> f64 {
    phi_with(n, t, N1Convention::Classical)
}

/// [`phi`] under an explicit `n = 1` convention.
pub fn phi_with(n: usize, t: f64, convention: N1Convention) -> f64 {
    assert!(n >= 1, "phi needs n >= 1");
    if t <= 0.0 {
        return 0.0;
    }
    if n == 1 && convention == N1Convention::Classical {
        return t;
    }
    t * (1.0 + log_plus(t).powi(n as i32 - 1))
}

/// Weak weight `λ/(1 + (log⁺(1/λ))^{n-1})`, classical `n = 1`.
pub fn weight(n: usize, lambda: f64) -> f64 {
    weight_with(n, lambda, N1Convention::Classical)
}

/// [`weight`] under an explicit `n = 1` convention.
pub fn weight_with(n: usize, lambda: f64, convention: N1Convention) -> f64 {
    assert!(n >= 1, "weight needs n >= 1");
    if lambda <= 0.0 {
        return 0.0;
    }
    if n == 1 && convention == N1Convention::Classical {
        return lambda;
    }
    lambda / (1.0 + log_plus(1.0 / lambda).powi(n as i32 - 1))
}

type Rat = Ratio<i128>;
/// Polynomial in `L = ln s`, ascending powers.
type LPoly = Vec<Rat>;

fn rat(n: i128, d: i128) -> Rat {
    Ratio::new(n, d)
}

fn sign_rat(p: usize) -> Rat {
    if p.is_multiple_of(2) {
        Rat::one()
    } else {
        -Rat::one()
    }
}

fn binom(n: usize, k: usize) -> i128 {
    let mut v: i128 = 1;
    for i in 0..k {
        v = v * (n - i) as i128 / (i + 1) as i128;
    }
    v
}

/// `dst += coef * L^shift * src`.
fn add_shifted(dst: &mut LPoly, src: &LPoly, shift: usize, coef: Rat) {
    if coef.is_zero() {
        return;
    }
    if dst.len() < src.len() + shift {
        dst.resize(src.len() + shift, Rat::zero());
    }
    for (k, c) in src.iter().enumerate() {
        dst[k + shift] += coef * c;
    }
}

fn eval_lpoly(p: &[Rat], x: f64) -> f64 {
    let mut acc = 0.0;
    for c in p.iter().rev() {
        acc = acc * x + ratio_to_f64(c);
    }
    acc
}

fn ratio_to_f64(r: &Rat) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Exact closed form of the corner-region volume
///
/// `V_n(c) = |{y ∈ (s,∞)^n : y_1⋯y_n < c}|
///         = Σ_j β_j(L) · c (ln c)^j + (-1)^n s^n`  for `c > s^n`, else 0,
///
/// with `β_j` polynomials in `L = ln s` carried as exact rationals. The
/// leading coefficient is `β_{n-1} = 1/(n-1)!`.
#[derive(Debug, Clone)]
pub struct LogPolynomial {
    n: usize,
    s: f64,
    threshold: f64,
    log_s: f64,
    beta: Vec<LPoly>,
    /// Coefficients of the same polynomial recentered at `v = ln(c/s^n)`;
    /// `alpha[0] = (-1)^{n-1}` exactly, which makes evaluation near the
    /// threshold cancellation-free.
    alpha: Vec<LPoly>,
}

/// Builds the exact level-volume polynomial by the one-dimensional peeling
/// recursion `V_n(c) = ∫_s^{c/s^{n-1}} V_{n-1}(c/y) dy`, carried out on
/// rational coefficients.
pub fn lemma21_polynomial(n: usize, s: f64) -> Result<LogPolynomial> {
    if n == 0 || n > MAX_LEMMA_DIM {
        return Err(Error::Domain(format!(
            "dimension must be 1..={MAX_LEMMA_DIM}, got {n}"
        )));
    }
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("need finite s > 0, got {s}")));
    }

    let mut beta: Vec<LPoly> = vec![vec![Rat::one()]];
    for m in 2..=n {
        beta = recursion_step(&beta, m);
    }

    // Recenter: with w = ln c = nL + v, a_m = Σ_{j>=m} β_j C(j,m) (nL)^{j-m}.
    let mut alpha: Vec<LPoly> = vec![LPoly::new(); n];
    for (m, am) in alpha.iter_mut().enumerate() {
        for (j, bj) in beta.iter().enumerate().skip(m) {
            let coef =
                Rat::from_integer(binom(j, m)) * Rat::from_integer((n as i128).pow((j - m) as u32));
            add_shifted(am, bj, j - m, coef);
        }
    }
    // V_n(s^n) = 0 forces a_0 = (-1)^{n-1}.
    debug_assert!(
        alpha[0].iter().skip(1).all(|c| c.is_zero()) && alpha[0][0] == sign_rat(n - 1),
        "recentered constant term must be (-1)^(n-1)"
    );

    Ok(LogPolynomial {
        n,
        s,
        threshold: s.powi(n as i32),
        log_s: s.ln(),
        beta,
        alpha,
    })
}

/// One peeling step: maps the coefficient vector of `V_{m-1}` to `V_m`.
fn recursion_step(prev: &[LPoly], m: usize) -> Vec<LPoly> {
    let mut next: Vec<LPoly> = vec![LPoly::new(); m];
    for (j, bj) in prev.iter().enumerate() {
        let scale = rat(1, (j + 1) as i128);
        for (i, ni) in next.iter_mut().enumerate().take(j + 2).skip(1) {
            let p = j + 1 - i;
            let coef = scale * Rat::from_integer(binom(j + 1, i)) * sign_rat(p);
            add_shifted(ni, bj, p, coef);
        }
        let p = j + 1;
        let coef = scale * (sign_rat(p) - Rat::from_integer(((m - 1) as i128).pow(p as u32)));
        add_shifted(&mut next[0], bj, p, coef);
    }
    if next[0].is_empty() {
        next[0].push(Rat::zero());
    }
    next[0][0] += sign_rat(m - 1);
    next
}

impl LogPolynomial {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// `s^n`; the volume vanishes at and below this argument.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Exact rational coefficients (powers of `L = ln s`, ascending) of the
    /// `c (ln c)^j` term.
    pub fn beta_poly(&self, j: usize) -> &[Ratio<i128>] {
        &self.beta[j]
    }

    /// Numeric `β_j` at this `s`.
    pub fn beta(&self, j: usize) -> f64 {
        eval_lpoly(&self.beta[j], self.log_s)
    }

    /// `β_{n-1} = 1/(n-1)!`, evaluated numerically.
    pub fn leading_coefficient(&self) -> f64 {
        self.beta(self.n - 1)
    }

    /// Exact rational leading coefficient.
    pub fn leading_rational(&self) -> Ratio<i128> {
        debug_assert!(self.beta[self.n - 1].len() == 1);
        self.beta[self.n - 1][0]
    }

    /// Constant term `(-1)^n s^n`.
    pub fn gamma(&self) -> f64 {
        if self.n.is_multiple_of(2) {
            self.threshold
        } else {
            -self.threshold
        }
    }

    /// Volume at level argument `c`; exactly 0 for `c <= s^n`.
    ///
    /// Evaluated in the recentered variable `v = ln(c/s^n)`, so the value is
    /// exactly 0 at the threshold and fully accurate just above it.
    pub fn value(&self, c: f64) -> f64 {
        if !(c > self.threshold) {
            return 0.0;
        }
        // ln_1p on the exact difference keeps v relatively accurate near the
        // threshold, where ln(c/t) would carry the half-ulp error of c/t ~ 1.
        let v = ((c - self.threshold) / self.threshold).ln_1p();
        if v < 0.5 {
            // The recentered series telescopes to the exponential remainder
            // V_n = (-1)^n c (e^{-v} - Σ_{m<n} (-v)^m/m!); summing it from the
            // m = n term keeps the order-n zero at the threshold exact.
            let u = -v;
            let mut term = 1.0f64;
            for m in 1..=self.n {
                term *= u / m as f64;
            }
            let mut sum = term;
            let mut m = self.n;
            while term.abs() > 1e-18 * sum.abs() && m < self.n + 60 {
                m += 1;
                term *= u / m as f64;
                sum += term;
            }
            let sign = if self.n.is_multiple_of(2) { 1.0 } else { -1.0 };
            return c * sign * sum;
        }
        let mut tail = 0.0;
        for m in (1..self.n).rev() {
            tail = (tail + eval_lpoly(&self.alpha[m], self.log_s)) * v;
        }
        let lead = if (self.n - 1).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        lead * (c - self.threshold) + c * tail
    }
}

/// Convenience wrapper: volume of the corner region at distance `R` for a
/// function of half-width `r`, `s = R + r`, at level argument `c`.
///
/// Errors when `c` is not above the threshold `(R+r)^n` (the lemma's domain).
pub fn lemma21_volume(n: usize, big_r: f64, r: f64, c: f64) -> Result<f64> {
    if !(big_r > 0.0) || !(r > 0.0) || !big_r.is_finite() || !r.is_finite() {
        return Err(Error::Domain("need finite R > 0 and r > 0".into()));
    }
    let s = big_r + r;
    let poly = lemma21_polynomial(n, s)?;
    if !(c > poly.threshold()) {
        return Err(Error::Domain(format!(
            "need c > (R+r)^n = {}, got c = {c}",
            poly.threshold()
        )));
    }
    Ok(poly.value(c))
}

/// Exact measure of `{M_n f > λ}` restricted to the far field
/// `{|x_k| > R ∀k}`: all `2^n` corner regions carry `V_n(mass/λ; R+r)`.
///
/// Valid for `0 < λ < mass/(R+r)^n`; errors outside that range.
pub fn tail_level_measure(cfg: &FarFieldConfig, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("need λ > 0, got {lambda}")));
    }
    let sup = cfg.far_field_sup();
    if lambda >= sup {
        return Err(Error::Domain(format!(
            "λ = {lambda} is not below the far-field supremum {sup}"
        )));
    }
    let poly = lemma21_polynomial(cfg.dim(), cfg.radius() + cfg.half_width())?;
    Ok(2f64.powi(cfg.dim() as i32) * poly.value(cfg.mass() / lambda))
}

/// Upper bound for the level-set measure over the mixed region where exactly
/// `i` of the `n` coordinates stay within `[-R, R]`:
///
/// `n! (2R)^i 2^{n-i} V_{n-i}(A (2r)^{n-i} / λ; R+r)`,  `A` the ceiling.
///
/// Returns 0 when the corner volume vanishes.
pub fn mixed_region_bound(cfg: &FarFieldConfig, lambda: f64, i: usize) -> Result<f64> {
    let n = cfg.dim();
    if n < 2 || i == 0 || i >= n {
        return Err(Error::Domain(format!(
            "mixed index must satisfy 1 <= i <= n-1, got i = {i}, n = {n}"
        )));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("need λ > 0, got {lambda}")));
    }
    let k = n - i;
    let c = cfg.ceiling() * (2.0 * cfg.half_width()).powi(k as i32) / lambda;
    let poly = lemma21_polynomial(k, cfg.radius() + cfg.half_width())?;
    let vol = poly.value(c);
    Ok(factorial(n) * (2.0 * cfg.radius()).powi(i as i32) * 2f64.powi(k as i32) * vol)
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n as u128).product::<u128>() as f64
}

/// Which end of the λ axis a scan approaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
#[cfg_attr(feature = "cli", derive(clap::ValueEnum))]
pub enum Direction {
    #[default]
    ToZero,
    ToInfinity,
}

/// How a level-set measure was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
#[cfg_attr(feature = "cli", derive(clap::ValueEnum))]
pub enum MethodTag {
    Grid,
    Separable,
    Hybrid,
    AnalyticTail,
}

impl std::fmt::Display for MethodTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Grid => "grid",
            Self::Separable => "separable",
            Self::Hybrid => "hybrid",
            Self::AnalyticTail => "analytic-tail",
        })
    }
}

/// Supplies level-set measures `|{operator output > λ}|` for a fixed
/// function and operator.
pub trait DistributionSource {
    fn measure(&self, lambda: f64) -> Result<f64>;
    fn method(&self) -> MethodTag;
}

/// One row of a λ scan.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScanRow {
    pub lambda: f64,
    pub measure: f64,
    /// `weight(n, λ) · measure`.
    pub weighted: f64,
    /// Extrapolation abscissa `1/ln(1/λ)` (to zero) or `1/ln λ` (to ∞).
    pub u: f64,
}

/// Weighted level-set measures along a λ grid.
#[derive(Debug, Clone, Serialize)]
pub struct LimitScan {
    pub n: usize,
    pub direction: Direction,
    pub method: MethodTag,
    pub rows: Vec<ScanRow>,
}

/// Evaluates `weight(n, λ)·|{ > λ}|` on the given λ grid.
pub fn limit_scan(
    source: &dyn DistributionSource,
    n: usize,
    lambdas: &[f64],
    direction: Direction,
) -> Result<LimitScan> {
    if lambdas.is_empty() {
        return Err(Error::Domain("empty λ grid".into()));
    }
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!("need λ > 0, got {lambda}")));
        }
        let measure = source.measure(lambda)?;
        let u = match direction {
            Direction::ToZero => 1.0 / (1.0 / lambda).ln(),
            Direction::ToInfinity => 1.0 / lambda.ln(),
        };
        rows.push(ScanRow {
            lambda,
            measure,
            weighted: weight(n, lambda) * measure,
            u,
        });
    }
    Ok(LimitScan {
        n,
        direction,
        method: source.method(),
        rows,
    })
}

/// Result of fitting `weighted = C₀ + C₁u + C₂u²` over a scan.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Extrapolation {
    /// The λ-limit `C₀`.
    pub constant: f64,
    pub slope: f64,
    pub curvature: f64,
    /// Root-mean-square fit residual.
    pub residual: f64,
    pub points_used: usize,
}

/// Extrapolates the weighted measure to the scan's limit by a least-squares
/// quadratic in `u`; only rows on the approach side (`λ < 1` to zero,
/// `λ > 1` to infinity) enter the fit, and at least four are required.
pub fn extrapolate_constant(scan: &LimitScan) -> Result<Extrapolation> {
    let rows: Vec<&ScanRow> = scan
        .rows
        .iter()
        .filter(|r| {
            let side = match scan.direction {
                Direction::ToZero => r.lambda < 1.0,
                Direction::ToInfinity => r.lambda > 1.0,
            };
            side && r.u.is_finite() && r.weighted.is_finite()
        })
        .collect();
    if rows.len() < 4 {
        return Err(Error::Fit(format!(
            "need at least 4 usable points, got {}",
            rows.len()
        )));
    }

    let mut g = [[0.0f64; 3]; 3];
    let mut b = [0.0f64; 3];
    for r in &rows {
        let x = [1.0, r.u, r.u * r.u];
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] += x[i] * x[j];
            }
            b[i] += x[i] * r.weighted;
        }
    }
    let coef = solve3(g, b).ok_or_else(|| Error::Fit("singular normal equations".into()))?;

    let mut ss = 0.0;
    for r in &rows {
        let fit = coef[0] + coef[1] * r.u + coef[2] * r.u * r.u;
        ss += (fit - r.weighted).powi(2);
    }
    Ok(Extrapolation {
        constant: coef[0],
        slope: coef[1],
        curvature: coef[2],
        residual: (ss / rows.len() as f64).sqrt(),
        points_used: rows.len(),
    })
}

/// Dense 3×3 solve with partial pivoting.
// index loops: rows `row` and `col` of `a` are read and written together
#[allow(clippy::needless_range_loop)]
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[piv][col].abs() == 0.0 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for col in (0..3).rev() {
        let mut v = b[col];
        for k in col + 1..3 {
            v -= a[col][k] * x[k];
        }
        x[col] = v / a[col][col];
    }
    Some(x)
}

/// Geometric λ grid from `min` to `max` inclusive with about
/// `points_per_decade` points per decade.
pub fn geometric_lambdas(min: f64, max: f64, points_per_decade: usize) -> Result<Vec<f64>> {
    if !(min > 0.0) || !(max > min) || !max.is_finite() {
        return Err(Error::Domain(format!(
            "need 0 < min < max finite, got [{min}, {max}]"
        )));
    }
    if points_per_decade == 0 {
        return Err(Error::Domain("points_per_decade must be positive".into()));
    }
    let decades = (max / min).log10();
    let k = ((points_per_decade as f64 * decades).ceil() as usize).max(1);
    let ratio = max / min;
    let mut grid = Vec::with_capacity(k + 1);
    for i in 0..=k {
        grid.push(min * ratio.powf(i as f64 / k as f64));
    }
    *grid.last_mut().expect("nonempty") = max;
    Ok(grid)
}
