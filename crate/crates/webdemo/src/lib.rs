//! Browser bindings for the strongmax toolkit.
//!
//! Three operations back the demo page: a maximal-function field for the
//! heatmap, a weighted level-set scan with its extrapolated constant, and
//! the closed-form far-field volume. Each returns a JSON string; the
//! wasm-bindgen wrappers stay thin so every code path is host-testable
//! through [`ops`].

use wasm_bindgen::prelude::wasm_bindgen;

pub mod ops {
    use serde::Serialize;
    use strongmax::{
        build_grid_function, extrapolate_constant, geometric_lambdas, lemma21_polynomial,
        limit_scan, strong_maximal_grid, Direction, FunctionDescriptor, Profile1D, SeparableSource,
        Variant,
    };

    #[derive(Serialize)]
    struct FieldSummary {
        cells: Vec<usize>,
        box_lo: Vec<f64>,
        box_hi: Vec<f64>,
        max_value: f64,
        mass: f64,
        values: Vec<f64>,
    }

    #[derive(Serialize)]
    struct ScanSummary {
        rows: Vec<ScanRowOut>,
        extrapolated: f64,
        target: f64,
        relative_gap: f64,
    }

    #[derive(Serialize)]
    struct ScanRowOut {
        lambda: f64,
        weighted: f64,
        u: f64,
    }

    #[derive(Serialize)]
    struct VolumeSummary {
        closed_form: f64,
        threshold: f64,
        coefficients: Vec<f64>,
    }

    fn variant(centered: bool) -> Variant {
        if centered {
            Variant::Centered
        } else {
            Variant::Uncentered
        }
    }

    /// Maximal-function field of a descriptor, row-major with its box.
    pub fn maximal_field(
        descriptor: &str,
        resolution: u32,
        centered: bool,
    ) -> Result<String, String> {
        let d = FunctionDescriptor::from_json(descriptor).map_err(|e| e.to_string())?;
        if !(4..=192).contains(&resolution) {
            return Err(format!("resolution {resolution} outside 4..=192"));
        }
        let f = build_grid_function(&d, Some(resolution as usize)).map_err(|e| e.to_string())?;
        let m = strong_maximal_grid(&f, variant(centered)).map_err(|e| e.to_string())?;
        let summary = FieldSummary {
            cells: m.cells().to_vec(),
            box_lo: m.box_lo().to_vec(),
            box_hi: m.box_hi().to_vec(),
            max_value: m.max_value(),
            mass: m.mass(),
            values: m.values().to_vec(),
        };
        serde_json::to_string(&summary).map_err(|e| e.to_string())
    }

    /// Weighted level-set scan for the unit cube indicator in `dim`
    /// dimensions, with the extrapolated limiting constant and its target.
    pub fn cube_limit_scan(
        dim: u32,
        centered: bool,
        lambda_min: f64,
        lambda_max: f64,
        points_per_decade: u32,
    ) -> Result<String, String> {
        let n = dim as usize;
        if !(1..=3).contains(&n) {
            return Err(format!("dimension {dim} outside 1..=3"));
        }
        let v = variant(centered);
        let profile = Profile1D::new(1.0, 1.0, v).map_err(|e| e.to_string())?;
        let source = SeparableSource::new(vec![profile; n]).map_err(|e| e.to_string())?;
        let lambdas = geometric_lambdas(lambda_min, lambda_max, points_per_decade as usize)
            .map_err(|e| e.to_string())?;
        let scan =
            limit_scan(&source, n, &lambdas, Direction::ToZero).map_err(|e| e.to_string())?;
        let ex = extrapolate_constant(&scan).map_err(|e| e.to_string())?;
        let factorial: f64 = (1..n).map(|k| k as f64).product();
        let mass = 2f64.powi(n as i32);
        let target = match v {
            Variant::Uncentered => 2f64.powi(n as i32) / factorial * mass,
            Variant::Centered => mass / factorial,
        };
        let summary = ScanSummary {
            rows: scan
                .rows
                .iter()
                .map(|r| ScanRowOut {
                    lambda: r.lambda,
                    weighted: r.weighted,
                    u: r.u,
                })
                .collect(),
            extrapolated: ex.constant,
            target,
            relative_gap: (ex.constant - target).abs() / target,
        };
        serde_json::to_string(&summary).map_err(|e| e.to_string())
    }

    /// Closed-form far-field volume with its log-polynomial coefficients.
    pub fn lemma_volume(n: u32, big_r: f64, r: f64, c: f64) -> Result<String, String> {
        let n = n as usize;
        let poly = lemma21_polynomial(n, big_r + r).map_err(|e| e.to_string())?;
        // negated so NaN c is rejected too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(c > poly.threshold()) {
            return Err(format!(
                "need c > (R+r)^n = {}, got c = {c}",
                poly.threshold()
            ));
        }
        let summary = VolumeSummary {
            closed_form: poly.value(c),
            threshold: poly.threshold(),
            coefficients: (0..n).map(|j| poly.beta(j)).collect(),
        };
        serde_json::to_string(&summary).map_err(|e| e.to_string())
    }
}

#[wasm_bindgen]
pub fn maximal_field(descriptor: &str, resolution: u32, centered: bool) -> Result<String, String> {
    ops::maximal_field(descriptor, resolution, centered)
}

#[wasm_bindgen]
pub fn cube_limit_scan(
    dim: u32,
    centered: bool,
    lambda_min: f64,
    lambda_max: f64,
    points_per_decade: u32,
) -> Result<String, String> {
    ops::cube_limit_scan(dim, centered, lambda_min, lambda_max, points_per_decade)
}

#[wasm_bindgen]
pub fn lemma_volume(n: u32, big_r: f64, r: f64, c: f64) -> Result<String, String> {
    ops::lemma_volume(n, big_r, r, c)
}

#[cfg(test)]
mod tests {
    use super::ops;

    #[test]
    fn field_summary_round_trips() {
        let json = ops::maximal_field(
            r#"{"shape":"cube","half_width":1,"height":1,"dim":2}"#,
            32,
            false,
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["cells"], serde_json::json!([32, 32]));
        assert_eq!(v["max_value"].as_f64(), Some(1.0));
        assert_eq!(v["values"].as_array().unwrap().len(), 1024);
    }

    #[test]
    fn scan_recovers_limiting_constant() {
        let json = ops::cube_limit_scan(2, false, 1e-10, 1e-4, 12).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["target"].as_f64(), Some(16.0));
        assert!(v["relative_gap"].as_f64().unwrap() < 0.02);
    }

    #[test]
    fn volume_matches_library_closed_form() {
        let json = ops::lemma_volume(2, 1.0, 1.0, 100.0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let direct = strongmax::lemma21_volume(2, 1.0, 1.0, 100.0).unwrap();
        assert_eq!(v["closed_form"].as_f64(), Some(direct));
        assert_eq!(v["coefficients"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn invalid_inputs_surface_as_errors() {
        assert!(ops::maximal_field("{bad", 32, false).is_err());
        assert!(ops::maximal_field(
            r#"{"shape":"cube","half_width":1,"height":1,"dim":2}"#,
            1000,
            false
        )
        .is_err());
        let err = ops::lemma_volume(2, 1.0, 1.0, 1.0).unwrap_err();
        assert!(err.contains("(R+r)^n"));
    }
}
