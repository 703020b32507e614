//! Numerical toolkit for the weak L log L theory of strong maximal operators.
//!
//! The crate evaluates the uncentered strong maximal operator `M_n`, its
//! centered variant `M_n^c`, and the bilinear `M_n^(2)` on sampled grids,
//! provides exact separable and far-field evaluators, computes Phi_n norms
//! and the weak L_{Phi_n} quasi-norm, carries the closed-form level-set
//! volume of the far-field region as an exact log-polynomial, and recovers
//! the limiting weak type constants 2^n/(n-1)! (uncentered), 1/(n-1)!
//! (centered) and the bilinear analogue by extrapolation of weighted
//! level-set measures, yielding lower-bound certificates on operator norms.

// `!(x > 0.0)` in validations must stay negated: it rejects NaN, which the
// suggested `x <= 0.0` lets through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
#[cfg(feature = "cli")]
pub mod cli;
pub mod distribution;
mod error;
pub mod grid;
pub mod maximal;
pub mod oracle;

pub use asymptotics::{
    extrapolate_constant, geometric_lambdas, lemma21_polynomial, lemma21_volume, limit_scan,
    mixed_region_bound, phi, phi_with, tail_level_measure, weight, weight_with, Direction,
    DistributionSource, Extrapolation, LimitScan, LogPolynomial, MethodTag, N1Convention, ScanRow,
};
pub use distribution::{
    bilinear_distribution_grid, distribution_grid, distribution_hybrid, distribution_separable,
    lower_bound_certificate, norm_target, phi_norm, weak_phi_norm, AnalyticTailSource, Certificate,
    CurvePoint, DistributionCurve, GridSource, HybridSource, SeparableSource, WeakNorm,
};
pub use error::{Error, Result};
pub use grid::{
    build_grid_function, rect_average, summed_area, AxisRect, FunctionDescriptor, GridFunction,
    SummedArea,
};
pub use maximal::{
    bilinear_maximal_grid, bilinear_maximal_grid_with, far_field_value, separable_maximal,
    strong_maximal_grid, strong_maximal_grid_with, EvalStrategy, FarFieldConfig, OperatorKind,
    Profile1D, Variant,
};
pub use oracle::{brute_force_bilinear, brute_force_maximal, mc_volume, McEstimate};
