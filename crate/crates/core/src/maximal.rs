//! The uncentered strong maximal operator `M_n`, the centered `M_n^c`,
//! the bilinear `M_n^(2)`, and exact separable / far-field evaluators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{strides_for, summed_area, GridFunction, SummedArea};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Which rectangle family the supremum ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[cfg_attr(feature = "cli", derive(clap::ValueEnum))]
pub enum Variant {
    /// All axis-parallel rectangles containing the point.
    Uncentered,
    /// Rectangles centered at the point (index-symmetric on grids).
    Centered,
}

/// Operator selector used by curves, scans and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[cfg_attr(feature = "cli", derive(clap::ValueEnum))]
pub enum OperatorKind {
    Uncentered,
    Centered,
    Bilinear,
}

impl From<Variant> for OperatorKind {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Uncentered => Self::Uncentered,
            Variant::Centered => Self::Centered,
        }
    }
}

impl std::fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Uncentered => "uncentered",
            Self::Centered => "centered",
            Self::Bilinear => "bilinear",
        })
    }
}

/// Grid evaluation strategy for the uncentered and bilinear operators.
///
/// `RectSweep` enumerates every rectangle once and propagates averages to the
/// contained cells by per-axis chmax sweeps; `PerCell` enumerates rectangles
/// per cell through the summed-area table. `Auto` picks `PerCell` for small
/// grids and the sweep otherwise. The centered variant always evaluates per
/// cell (its rectangle family is indexed by the cell itself).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "cli", derive(clap::ValueEnum))]
pub enum EvalStrategy {
    #[default]
    Auto,
    RectSweep,
    PerCell,
}

// Per-cell enumeration costs ~prod((c_k/2)^2) rectangles per cell; past a few
// hundred cells the sweep is orders of magnitude faster.
const AUTO_PERCELL_MAX_CELLS: usize = 256;

/// Evaluates the strong maximal operator of a grid function.
///
/// Each output cell holds the maximum rectangle average over all grid-aligned
/// rectangles containing (uncentered) or centered at (centered) that cell.
pub fn strong_maximal_grid(f: &GridFunction, variant: Variant) -> Result<GridFunction> {
    strong_maximal_grid_with(f, variant, EvalStrategy::Auto)
}

/// As [`strong_maximal_grid`], with an explicit evaluation strategy.
pub fn strong_maximal_grid_with(
    f: &GridFunction,
    variant: Variant,
    strategy: EvalStrategy,
) -> Result<GridFunction> {
    let mut out = match variant {
        Variant::Centered => percell_stack(&[f], true),
        Variant::Uncentered => match resolve(strategy, f.len()) {
            EvalStrategy::PerCell => percell_stack(&[f], false),
            _ => sweep_stack(&[f.values()], f.cells()),
        },
    };
    clamp_to_pointwise(&mut out, &[f.values()]);
    f.with_values(out)
}

/// Evaluates the bilinear strong maximal operator: per cell, the maximum over
/// rectangles containing it of the product of the two rectangle averages.
pub fn bilinear_maximal_grid(f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    bilinear_maximal_grid_with(f, g, EvalStrategy::Auto)
}

/// As [`bilinear_maximal_grid`], with an explicit evaluation strategy.
pub fn bilinear_maximal_grid_with(
    f: &GridFunction,
    g: &GridFunction,
    strategy: EvalStrategy,
) -> Result<GridFunction> {
    if f.cells() != g.cells() || f.box_lo() != g.box_lo() || f.box_hi() != g.box_hi() {
        return Err(Error::DimensionMismatch(
            "bilinear operands must share box and resolution".into(),
        ));
    }
    let mut out = match resolve(strategy, f.len()) {
        EvalStrategy::PerCell => percell_stack(&[f, g], false),
        _ => sweep_stack(&[f.values(), g.values()], f.cells()),
    };
    clamp_to_pointwise(&mut out, &[f.values(), g.values()]);
    f.with_values(out)
}

fn resolve(strategy: EvalStrategy, cells: usize) -> EvalStrategy {
    match strategy {
        EvalStrategy::Auto => {
            if cells <= AUTO_PERCELL_MAX_CELLS {
                EvalStrategy::PerCell
            } else {
                EvalStrategy::RectSweep
            }
        }
        s => s,
    }
}

/// The one-cell rectangle realizes the pointwise value (product), and no
/// rectangle average (product) exceeds the grid maximum (product of maxima);
/// clamping to both bounds keeps `f <= M f <= max f` exact under roundoff.
/// The bilinear arm mirrors the same clamps so that squaring commutes with
/// them: `M^(2)(f, f)` stays the exact square of the linear output.
fn clamp_to_pointwise(out: &mut [f64], stack: &[&[f64]]) {
    let sup = |v: &[f64]| v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    match stack {
        [f] => {
            let cap = sup(f);
            for (o, &v) in out.iter_mut().zip(*f) {
                *o = o.max(v).min(cap);
            }
        }
        [f, g] => {
            let cap = sup(f) * sup(g);
            for ((o, &a), &b) in out.iter_mut().zip(*f).zip(*g) {
                *o = o.max(a * b).min(cap);
            }
        }
        _ => unreachable!("stack size is 1 or 2"),
    }
}

fn inv_table(c: usize) -> Vec<f64> {
    let mut inv = vec![0.0; c + 1];
    for (t, slot) in inv.iter_mut().enumerate().skip(1) {
        *slot = 1.0 / t as f64;
    }
    inv
}

/// Max of a slice with four independent accumulators (keeps the reduction
/// free of a single serial dependence chain).
fn max_slice(xs: &[f64]) -> f64 {
    let mut acc = [f64::NEG_INFINITY; 4];
    let mut it = xs.chunks_exact(4);
    for ch in &mut it {
        acc[0] = acc[0].max(ch[0]);
        acc[1] = acc[1].max(ch[1]);
        acc[2] = acc[2].max(ch[2]);
        acc[3] = acc[3].max(ch[3]);
    }
    let mut m = acc[0].max(acc[1]).max(acc[2].max(acc[3]));
    for &x in it.remainder() {
        m = m.max(x);
    }
    m
}

/// Rectangle-sweep evaluation of the (bi)linear maximal operator.
///
/// The last axis is peeled: for every index pair `l < r` the slab average
/// along that axis is formed from prefix sums, the inner-dimensional problem
/// is solved recursively, and containment over `[l, r)` is propagated with a
/// running prefix-max over `l` plus a suffix reduction per output column.
fn sweep_stack(stack: &[&[f64]], cells: &[usize]) -> Vec<f64> {
    let total: usize = cells.iter().product();
    let mut out = vec![0.0; total];
    sweep_rec(stack, cells, true, &mut out);
    out
}

fn sweep_rec(stack: &[&[f64]], cells: &[usize], parallel: bool, out: &mut [f64]) {
    let dim = cells.len();
    let c = cells[dim - 1];
    let inv = inv_table(c);
    if dim == 1 {
        sweep_base(stack, c, &inv, out);
        return;
    }
    let m: usize = cells[..dim - 1].iter().product();
    let inner_cells = &cells[..dim - 1];

    // Prefix sums along the last axis, stored transposed: p[j*m + i] is the
    // sum of cells 0..j of the column over inner index i.
    let prefixes: Vec<Vec<f64>> = stack
        .iter()
        .map(|v| {
            let mut p = vec![0.0; (c + 1) * m];
            for j in 0..c {
                let (head, tail) = p.split_at_mut((j + 1) * m);
                let prev = &head[j * m..];
                let next = &mut tail[..m];
                for i in 0..m {
                    next[i] = prev[i] + v[i * c + j];
                }
            }
            p
        })
        .collect();

    let mut d = vec![f64::NEG_INFINITY; (c + 1) * m];
    let mut col = vec![f64::NEG_INFINITY; m];

    for l in 0..c {
        let process = |k: usize, drow: &mut [f64]| {
            let r = l + 1 + k;
            let iv = inv[r - l];
            let slabs: Vec<Vec<f64>> = prefixes
                .iter()
                .map(|p| {
                    let lo = &p[l * m..(l + 1) * m];
                    let hi = &p[r * m..(r + 1) * m];
                    hi.iter().zip(lo).map(|(h, lo)| (h - lo) * iv).collect()
                })
                .collect();
            let slab_refs: Vec<&[f64]> = slabs.iter().map(|s| s.as_slice()).collect();
            let mut b = vec![0.0; m];
            sweep_rec(&slab_refs, inner_cells, false, &mut b);
            for (dv, bv) in drow.iter_mut().zip(&b) {
                *dv = dv.max(*bv);
            }
        };

        let dtail = &mut d[(l + 1) * m..];
        #[cfg(feature = "parallel")]
        {
            if parallel && m > 1 {
                dtail
                    .par_chunks_mut(m)
                    .enumerate()
                    .for_each(|(k, drow)| process(k, drow));
            } else {
                for (k, drow) in dtail.chunks_mut(m).enumerate() {
                    process(k, drow);
                }
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = parallel;
            for (k, drow) in dtail.chunks_mut(m).enumerate() {
                process(k, drow);
            }
        }

        col.fill(f64::NEG_INFINITY);
        for r in l + 1..=c {
            let row = &d[r * m..(r + 1) * m];
            for (t, &v) in col.iter_mut().zip(row) {
                *t = t.max(v);
            }
        }
        for (i, &v) in col.iter().enumerate() {
            out[i * c + l] = v;
        }
    }
}

fn sweep_base(stack: &[&[f64]], c: usize, inv: &[f64], out: &mut [f64]) {
    let prefixes: Vec<Vec<f64>> = stack
        .iter()
        .map(|v| {
            let mut p = vec![0.0; c + 1];
            for j in 0..c {
                p[j + 1] = p[j] + v[j];
            }
            p
        })
        .collect();
    let mut d = vec![f64::NEG_INFINITY; c + 1];

    match prefixes.as_slice() {
        [p] => {
            for l in 0..c {
                let pl = p[l];
                {
                    let dseg = &mut d[l + 1..=c];
                    let pseg = &p[l + 1..=c];
                    let iseg = &inv[1..=c - l];
                    for ((dv, &pv), &iv) in dseg.iter_mut().zip(pseg).zip(iseg) {
                        *dv = dv.max((pv - pl) * iv);
                    }
                }
                out[l] = max_slice(&d[l + 1..=c]);
            }
        }
        [p1, p2] => {
            for l in 0..c {
                let (a1, a2) = (p1[l], p2[l]);
                {
                    let dseg = &mut d[l + 1..=c];
                    let p1seg = &p1[l + 1..=c];
                    let p2seg = &p2[l + 1..=c];
                    let iseg = &inv[1..=c - l];
                    for (((dv, &q1), &q2), &iv) in dseg.iter_mut().zip(p1seg).zip(p2seg).zip(iseg) {
                        let s = ((q1 - a1) * iv) * ((q2 - a2) * iv);
                        *dv = dv.max(s);
                    }
                }
                out[l] = max_slice(&d[l + 1..=c]);
            }
        }
        _ => unreachable!("stack size is 1 or 2"),
    }
}

/// Per-cell enumeration through summed-area tables; `centered` restricts to
/// index-symmetric rectangles.
fn percell_stack(stack: &[&GridFunction], centered: bool) -> Vec<f64> {
    let cells = stack[0].cells().to_vec();
    let dim = cells.len();
    let sats: Vec<SummedArea> = stack.iter().map(|f| summed_area(f)).collect();
    let strides = strides_for(&cells);
    let total: usize = cells.iter().product();

    let eval = |flat: usize| -> f64 {
        let mut idx = [0usize; 3];
        for k in 0..dim {
            idx[k] = (flat / strides[k]) % cells[k];
        }
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut best = f64::NEG_INFINITY;
        rect_search(
            &sats,
            &cells,
            &idx[..dim],
            centered,
            0,
            &mut lo,
            &mut hi,
            &mut best,
        );
        best
    };

    let mut out = vec![0.0; total];
    #[cfg(feature = "parallel")]
    {
        out.par_iter_mut()
            .enumerate()
            .for_each(|(flat, slot)| *slot = eval(flat));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (flat, slot) in out.iter_mut().enumerate() {
            *slot = eval(flat);
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn rect_search(
    sats: &[SummedArea],
    cells: &[usize],
    idx: &[usize],
    centered: bool,
    axis: usize,
    lo: &mut [usize; 3],
    hi: &mut [usize; 3],
    best: &mut f64,
) {
    let dim = cells.len();
    if axis == dim {
        let count: usize = (0..dim).map(|k| hi[k] - lo[k]).product();
        let mut score = 1.0;
        for sat in sats {
            score *= sat.rect_sum_raw(&lo[..dim], &hi[..dim]) / count as f64;
        }
        if score > *best {
            *best = score;
        }
        return;
    }
    let i = idx[axis];
    if centered {
        let tmax = i.min(cells[axis] - 1 - i);
        for t in 0..=tmax {
            lo[axis] = i - t;
            hi[axis] = i + t + 1;
            rect_search(sats, cells, idx, centered, axis + 1, lo, hi, best);
        }
    } else {
        for a in 0..=i {
            for b in i + 1..=cells[axis] {
                lo[axis] = a;
                hi[axis] = b;
                rect_search(sats, cells, idx, centered, axis + 1, lo, hi, best);
            }
        }
    }
}

/// Closed-form 1D maximal function of an interval indicator `a·χ_[-r,r]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profile1D {
    half_width: f64,
    height: f64,
    variant: Variant,
}

impl Profile1D {
    pub fn new(half_width: f64, height: f64, variant: Variant) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) || !(height > 0.0 && height.is_finite()) {
            return Err(Error::InvalidDescriptor(
                "profile needs positive finite half-width and height".into(),
            ));
        }
        Ok(Self {
            half_width,
            height,
            variant,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// `M_1(a·χ_[-r,r])(x)` for the profile's variant.
    pub fn value(&self, x: f64) -> f64 {
        let (r, a) = (self.half_width, self.height);
        let t = x.abs();
        match self.variant {
            Variant::Uncentered => {
                if t <= r {
                    a
                } else {
                    a * 2.0 * r / (t + r)
                }
            }
            Variant::Centered => {
                if t < r {
                    a
                } else {
                    a * r / (t + r)
                }
            }
        }
    }

    /// Half-width of the level set `{x : value(x) > t}`; `0` for `t >= a`.
    pub fn halfwidth_above(&self, t: f64) -> f64 {
        let (r, a) = (self.half_width, self.height);
        if t >= a {
            return 0.0;
        }
        if t <= 0.0 {
            return f64::INFINITY;
        }
        match self.variant {
            Variant::Uncentered => 2.0 * a * r / t - r,
            Variant::Centered => (a * r / t - r).max(r),
        }
    }
}

/// Exact continuous maximal function of a product of interval indicators,
/// evaluated at a point: the per-axis suprema decouple, so the value is the
/// product of the 1D profiles.
pub fn separable_maximal(profiles: &[Profile1D], x: &[f64]) -> Result<f64> {
    if profiles.len() != x.len() || profiles.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} profiles vs point of dimension {}",
            profiles.len(),
            x.len()
        )));
    }
    Ok(profiles.iter().zip(x).map(|(p, &xi)| p.value(xi)).product())
}

/// Far-field data for the corner rule: support half-width `r`, floor and
/// ceiling of the function on its supporting cube, total mass, and the
/// radius `R` beyond which the rule is exact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FarFieldConfig {
    dim: usize,
    half_width: f64,
    floor: f64,
    ceiling: f64,
    mass: f64,
    radius: f64,
}

impl FarFieldConfig {
    /// Derives the radius as `R = (2r)^{n+1}·A/floor + r`.
    pub fn new(dim: usize, half_width: f64, floor: f64, ceiling: f64, mass: f64) -> Result<Self> {
        let radius = (2.0 * half_width).powi(dim as i32 + 1) * ceiling / floor + half_width;
        Self::with_radius(dim, half_width, floor, ceiling, mass, radius)
    }

    /// Explicit radius; must still exceed the support half-width.
    pub fn with_radius(
        dim: usize,
        half_width: f64,
        floor: f64,
        ceiling: f64,
        mass: f64,
        radius: f64,
    ) -> Result<Self> {
        if dim == 0 || dim > 16 {
            return Err(Error::Domain(format!(
                "dimension {dim} out of range 1..=16"
            )));
        }
        if !(half_width > 0.0) || !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::Domain(
                "half-width and mass must be positive and finite".into(),
            ));
        }
        if !(0.0 < floor && floor <= ceiling && ceiling.is_finite()) {
            return Err(Error::Domain(format!(
                "need 0 < floor <= ceiling, got floor {floor}, ceiling {ceiling}"
            )));
        }
        if !(radius > half_width) || !radius.is_finite() {
            return Err(Error::Domain(format!(
                "radius {radius} must exceed half-width {half_width}"
            )));
        }
        Ok(Self {
            dim,
            half_width,
            floor,
            ceiling,
            mass,
            radius,
        })
    }

    /// Reads floor, ceiling and mass off a grid function supported in
    /// `[-r, r]^n` (cells with centers outside the cube must vanish).
    pub fn from_grid(f: &GridFunction, half_width: f64) -> Result<Self> {
        let mut floor = f64::INFINITY;
        let mut ceiling = 0.0f64;
        let mut idx_buf = vec![0usize; f.dim()];
        let strides = f.strides();
        for (flat, &v) in f.values().iter().enumerate() {
            for k in 0..f.dim() {
                idx_buf[k] = (flat / strides[k]) % f.cells()[k];
            }
            let center = f.cell_center(&idx_buf);
            let inside = center.iter().all(|c| c.abs() <= half_width);
            if inside {
                floor = floor.min(v);
                ceiling = ceiling.max(v);
            } else if v != 0.0 {
                return Err(Error::Domain(format!(
                    "grid value {v} outside the support cube [-{half_width}, {half_width}]^n"
                )));
            }
        }
        if !(floor > 0.0) || floor > ceiling {
            return Err(Error::Domain(
                "function must have a positive floor on its support cube".into(),
            ));
        }
        Self::new(f.dim(), half_width, floor, ceiling, f.mass())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn ceiling(&self) -> f64 {
        self.ceiling
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Supremum of the far-field values, `mass/(R+r)^n`.
    pub fn far_field_sup(&self) -> f64 {
        self.mass / (self.radius + self.half_width).powi(self.dim as i32)
    }
}

/// Corner rule: for `|x_k| > R` on every axis, the optimal rectangle spans
/// from the opposite support corner to `x`, so `M_n f(x) = mass/∏(|x_k|+r)`.
pub fn far_field_value(cfg: &FarFieldConfig, x: &[f64]) -> Result<f64> {
    if x.len() != cfg.dim {
        return Err(Error::DimensionMismatch(format!(
            "point dimension {} vs config dimension {}",
            x.len(),
            cfg.dim
        )));
    }
    if let Some(bad) = x.iter().find(|v| v.abs() <= cfg.radius) {
        return Err(Error::Domain(format!(
            "coordinate {bad} is not beyond the far-field radius {}",
            cfg.radius
        )));
    }
    let denom: f64 = x.iter().map(|v| v.abs() + cfg.half_width).product();
    Ok(cfg.mass / denom)
}
