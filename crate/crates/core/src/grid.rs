//! Sampled nonnegative functions on boxes and O(1) rectangle averages
//! via summed-area tables.

use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest supported dimension.
pub const MAX_DIM: usize = 3;

/// A nonnegative function sampled at cell centers of an axis-aligned box.
///
/// Values are stored row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    dim: usize,
    box_lo: Vec<f64>,
    box_hi: Vec<f64>,
    cells: Vec<usize>,
    values: Vec<f64>,
}

impl GridFunction {
    /// Builds a grid function, validating geometry and values.
    pub fn new(
        box_lo: Vec<f64>,
        box_hi: Vec<f64>,
        cells: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let dim = cells.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1..={MAX_DIM}, got {dim}"
            )));
        }
        if box_lo.len() != dim || box_hi.len() != dim {
            return Err(Error::InvalidGrid(
                "box_lo/box_hi length must match cells length".into(),
            ));
        }
        for k in 0..dim {
            if !box_lo[k].is_finite() || !box_hi[k].is_finite() || box_hi[k] <= box_lo[k] {
                return Err(Error::InvalidGrid(format!(
                    "axis {k}: need finite box_hi > box_lo, got [{}, {}]",
                    box_lo[k], box_hi[k]
                )));
            }
            if cells[k] == 0 {
                return Err(Error::InvalidGrid(format!("axis {k}: zero cells")));
            }
        }
        let total: usize = cells.iter().product();
        if values.len() != total {
            return Err(Error::InvalidGrid(format!(
                "expected {total} values, got {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidGrid(format!(
                "value {v} is not finite and >= 0"
            )));
        }
        Ok(Self {
            dim,
            box_lo,
            box_hi,
            cells,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn box_lo(&self) -> &[f64] {
        &self.box_lo
    }

    pub fn box_hi(&self) -> &[f64] {
        &self.box_hi
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Cell width along each axis.
    pub fn cell_widths(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|k| (self.box_hi[k] - self.box_lo[k]) / self.cells[k] as f64)
            .collect()
    }

    /// Volume of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.cell_widths().iter().product()
    }

    /// Row-major strides (last axis has stride 1).
    pub fn strides(&self) -> Vec<usize> {
        strides_for(&self.cells)
    }

    /// Flat index of a multi-index.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dim);
        idx.iter().zip(self.strides()).map(|(i, s)| i * s).sum()
    }

    pub fn value(&self, idx: &[usize]) -> f64 {
        self.values[self.flat_index(idx)]
    }

    /// Coordinates of the center of a cell.
    pub fn cell_center(&self, idx: &[usize]) -> Vec<f64> {
        let widths = self.cell_widths();
        idx.iter()
            .enumerate()
            .map(|(k, &i)| self.box_lo[k] + (i as f64 + 0.5) * widths[k])
            .collect()
    }

    /// Integral of the function: sum of values times cell volume.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(0.0, |a: f64, &b| a.max(b))
    }

    /// Same geometry, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(
            self.box_lo.clone(),
            self.box_hi.clone(),
            self.cells.clone(),
            values,
        )
    }
}

pub(crate) fn strides_for(cells: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; cells.len()];
    for k in (0..cells.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * cells[k + 1];
    }
    s
}

/// Calls `f` with every multi-index of the given shape, row-major order.
pub(crate) fn for_each_index(cells: &[usize], mut f: impl FnMut(&[usize])) {
    let dim = cells.len();
    let mut idx = vec![0usize; dim];
    loop {
        f(&idx);
        let mut k = dim;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < cells[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Shape descriptor for test functions; deserialized from JSON.
///
/// Analytic shapes may carry an explicit box; otherwise the box defaults to
/// `[-8s, 8s]^dim` where `s` is the half-width (or radius).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum FunctionDescriptor {
    Cube {
        half_width: f64,
        height: f64,
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        box_lo: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        box_hi: Option<Vec<f64>>,
    },
    Ball {
        radius: f64,
        height: f64,
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        box_lo: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        box_hi: Option<Vec<f64>>,
    },
    Tent {
        half_width: f64,
        height: f64,
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        box_lo: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        box_hi: Option<Vec<f64>>,
    },
    Samples {
        file: PathBuf,
        box_lo: Vec<f64>,
        box_hi: Vec<f64>,
        cells: Vec<usize>,
    },
}

impl FunctionDescriptor {
    pub fn from_json(json: &str) -> Result<Self> {
        let d: Self = serde_json::from_str(json)?;
        d.validate()?;
        Ok(d)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Cube { dim, .. } | Self::Ball { dim, .. } | Self::Tent { dim, .. } => *dim,
            Self::Samples { cells, .. } => cells.len(),
        }
    }

    /// Maximum value of the shape; `None` for sample files (data-dependent).
    pub fn height(&self) -> Option<f64> {
        match self {
            Self::Cube { height, .. } | Self::Ball { height, .. } | Self::Tent { height, .. } => {
                Some(*height)
            }
            Self::Samples { .. } => None,
        }
    }

    /// Half-width of the supporting cube, when the support is a cube.
    pub fn support_half_width(&self) -> Option<f64> {
        match self {
            Self::Cube { half_width, .. } | Self::Tent { half_width, .. } => Some(*half_width),
            Self::Ball { radius, .. } => Some(*radius),
            Self::Samples { .. } => None,
        }
    }

    /// Exact L1 mass for analytic shapes.
    pub fn analytic_mass(&self) -> Option<f64> {
        match *self {
            Self::Cube {
                half_width,
                height,
                dim,
                ..
            } => Some(height * (2.0 * half_width).powi(dim as i32)),
            Self::Ball {
                radius,
                height,
                dim,
                ..
            } => {
                let unit = match dim {
                    1 => 2.0,
                    2 => std::f64::consts::PI,
                    3 => 4.0 * std::f64::consts::PI / 3.0,
                    _ => return None,
                };
                Some(height * unit * radius.powi(dim as i32))
            }
            Self::Tent {
                half_width,
                height,
                dim,
                ..
            } => Some(height * half_width.powi(dim as i32)),
            Self::Samples { .. } => None,
        }
    }

    /// Box for sampling: explicit if given, else `[-8s, 8s]^dim`.
    pub fn sampling_box(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let dim = self.dim();
        let (lo, hi) = match self {
            Self::Cube { box_lo, box_hi, .. }
            | Self::Ball { box_lo, box_hi, .. }
            | Self::Tent { box_lo, box_hi, .. } => (box_lo.clone(), box_hi.clone()),
            Self::Samples { box_lo, box_hi, .. } => (Some(box_lo.clone()), Some(box_hi.clone())),
        };
        match (lo, hi) {
            (Some(lo), Some(hi)) => Ok((lo, hi)),
            (None, None) => {
                let s = self.support_half_width().expect("analytic shape");
                Ok((vec![-8.0 * s; dim], vec![8.0 * s; dim]))
            }
            _ => Err(Error::InvalidDescriptor(
                "box_lo and box_hi must be given together".into(),
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidDescriptor(format!(
                "dimension must be 1..={MAX_DIM}, got {dim}"
            )));
        }
        match self {
            Self::Cube {
                half_width, height, ..
            }
            | Self::Tent {
                half_width, height, ..
            } => {
                if *half_width <= 0.0 || *height <= 0.0 {
                    return Err(Error::InvalidDescriptor(
                        "half_width and height must be positive".into(),
                    ));
                }
            }
            Self::Ball { radius, height, .. } => {
                if *radius <= 0.0 || *height <= 0.0 {
                    return Err(Error::InvalidDescriptor(
                        "radius and height must be positive".into(),
                    ));
                }
            }
            Self::Samples { cells, .. } => {
                if cells.contains(&0) {
                    return Err(Error::InvalidDescriptor("zero cells".into()));
                }
            }
        }
        Ok(())
    }

    fn value_at(&self, x: &[f64]) -> f64 {
        match *self {
            Self::Cube {
                half_width, height, ..
            } => {
                if x.iter().all(|v| v.abs() <= half_width) {
                    height
                } else {
                    0.0
                }
            }
            Self::Ball { radius, height, .. } => {
                if x.iter().map(|v| v * v).sum::<f64>() <= radius * radius {
                    height
                } else {
                    0.0
                }
            }
            Self::Tent {
                half_width, height, ..
            } => {
                height
                    * x.iter()
                        .map(|v| (1.0 - v.abs() / half_width).max(0.0))
                        .product::<f64>()
            }
            Self::Samples { .. } => unreachable!("samples are read from file"),
        }
    }
}

/// Samples a descriptor onto a grid.
///
/// `resolution` is the per-axis cell count for analytic shapes and is
/// ignored for sample files (which embed their own shape).
pub fn build_grid_function(
    descriptor: &FunctionDescriptor,
    resolution: Option<usize>,
) -> Result<GridFunction> {
    descriptor.validate()?;
    if let FunctionDescriptor::Samples {
        file,
        box_lo,
        box_hi,
        cells,
    } = descriptor
    {
        let text = fs::read_to_string(file)?;
        let mut values = Vec::new();
        for field in text.split(|c: char| c == ',' || c.is_whitespace()) {
            if field.is_empty() {
                continue;
            }
            let v: f64 = field.parse().map_err(|_| {
                Error::InvalidDescriptor(format!(
                    "bad sample value {field:?} in {}",
                    file.display()
                ))
            })?;
            values.push(v);
        }
        let total: usize = cells.iter().product();
        if values.len() != total {
            return Err(Error::InvalidDescriptor(format!(
                "sample file {} holds {} values, grid needs {total}",
                file.display(),
                values.len()
            )));
        }
        return GridFunction::new(box_lo.clone(), box_hi.clone(), cells.clone(), values);
    }

    let dim = descriptor.dim();
    let res = resolution.ok_or_else(|| {
        Error::InvalidDescriptor("resolution required for analytic shapes".into())
    })?;
    if res == 0 {
        return Err(Error::InvalidDescriptor("resolution of 0".into()));
    }
    let (box_lo, box_hi) = descriptor.sampling_box()?;
    let cells = vec![res; dim];
    let widths: Vec<f64> = (0..dim)
        .map(|k| (box_hi[k] - box_lo[k]) / res as f64)
        .collect();
    let total: usize = cells.iter().product();
    let mut values = Vec::with_capacity(total);
    let mut x = vec![0.0; dim];
    for_each_index(&cells, |idx| {
        for k in 0..dim {
            x[k] = box_lo[k] + (idx[k] as f64 + 0.5) * widths[k];
        }
        values.push(descriptor.value_at(&x));
    });
    GridFunction::new(box_lo, box_hi, cells, values)
}

/// Axis-parallel rectangle of whole cells: half-open index ranges per axis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxisRect {
    i0: Vec<usize>,
    i1: Vec<usize>,
}

impl AxisRect {
    pub fn new(i0: Vec<usize>, i1: Vec<usize>) -> Result<Self> {
        if i0.len() != i1.len() || i0.is_empty() {
            return Err(Error::InvalidRect(
                "index vectors must match and be nonempty".into(),
            ));
        }
        for k in 0..i0.len() {
            if i0[k] >= i1[k] {
                return Err(Error::InvalidRect(format!(
                    "axis {k}: need i0 < i1, got [{}, {})",
                    i0[k], i1[k]
                )));
            }
        }
        Ok(Self { i0, i1 })
    }

    pub fn dim(&self) -> usize {
        self.i0.len()
    }

    pub fn lo(&self) -> &[usize] {
        &self.i0
    }

    pub fn hi(&self) -> &[usize] {
        &self.i1
    }

    /// Number of cells covered.
    pub fn cell_count(&self) -> usize {
        self.i0.iter().zip(&self.i1).map(|(a, b)| b - a).product()
    }
}

/// Cumulative-sum table over a grid: entry at multi-index `i` is the sum of
/// all values with index componentwise below `i`.
#[derive(Debug, Clone)]
pub struct SummedArea {
    dim: usize,
    cells: Vec<usize>,
    cell_volume: f64,
    tstrides: Vec<usize>,
    table: Vec<f64>,
}

/// Builds the summed-area table of a grid function.
pub fn summed_area(f: &GridFunction) -> SummedArea {
    let dim = f.dim();
    let cells = f.cells().to_vec();
    let tdims: Vec<usize> = cells.iter().map(|c| c + 1).collect();
    let tstrides = strides_for(&tdims);
    let total: usize = tdims.iter().product();
    let mut table = vec![0.0f64; total];

    let gstrides = f.strides();
    for_each_index(&cells, |idx| {
        let src: usize = idx.iter().zip(&gstrides).map(|(i, s)| i * s).sum();
        let dst: usize = idx.iter().zip(&tstrides).map(|(i, s)| (i + 1) * s).sum();
        table[dst] = f.values()[src];
    });

    for k in 0..dim {
        let stride = tstrides[k];
        let extent = tdims[k];
        for flat in 0..total {
            if !(flat / stride).is_multiple_of(extent) {
                table[flat] += table[flat - stride];
            }
        }
    }

    SummedArea {
        dim,
        cells,
        cell_volume: f.cell_volume(),
        tstrides,
        table,
    }
}

impl SummedArea {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    fn check(&self, rect: &AxisRect) -> Result<()> {
        if rect.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "rect dim {} vs grid dim {}",
                rect.dim(),
                self.dim
            )));
        }
        for k in 0..self.dim {
            if rect.hi()[k] > self.cells[k] {
                return Err(Error::InvalidRect(format!(
                    "axis {k}: rect end {} exceeds {} cells",
                    rect.hi()[k],
                    self.cells[k]
                )));
            }
        }
        Ok(())
    }

    /// Sum of values over the rectangle, via the alternating corner formula.
    pub fn rect_sum(&self, rect: &AxisRect) -> Result<f64> {
        self.check(rect)?;
        Ok(self.rect_sum_raw(rect.lo(), rect.hi()))
    }

    /// Corner formula without bounds checks; callers guarantee
    /// `lo[k] < hi[k] <= cells[k]`.
    pub(crate) fn rect_sum_raw(&self, lo: &[usize], hi: &[usize]) -> f64 {
        let mut sum = 0.0;
        for mask in 0..(1usize << self.dim) {
            let mut flat = 0usize;
            let lows = mask.count_ones();
            for k in 0..self.dim {
                let i = if mask & (1 << k) != 0 { lo[k] } else { hi[k] };
                flat += i * self.tstrides[k];
            }
            let term = self.table[flat];
            if lows % 2 == 0 {
                sum += term;
            } else {
                sum -= term;
            }
        }
        sum
    }
}

/// Mean of the cell values covered by the rectangle.
pub fn rect_average(s: &SummedArea, rect: &AxisRect) -> Result<f64> {
    let sum = s.rect_sum(rect)?;
    Ok(sum / rect.cell_count() as f64)
}
