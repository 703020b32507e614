//! Independent slow oracles: Monte Carlo corner volumes and exhaustive
//! maximal-operator evaluation by direct summation (no summed-area tables).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{for_each_index, GridFunction};
use crate::maximal::Variant;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
}

const MC_MIN_SAMPLES: u64 = 10_000;
const MC_CHUNK: u64 = 65_536;

/// Rejection-sampling estimate of the corner volume
/// `|{x : x_k > R ∀k, ∏(x_k + r) < c}|` over the bounding box
/// `(R, c/(R+r)^{n-1} - r]^n`.
///
/// Sampling is chunked over fixed-size counter streams, so the result is
/// deterministic for a given seed regardless of thread scheduling.
pub fn mc_volume(
    n: usize,
    big_r: f64,
    r: f64,
    c: f64,
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    if n == 0 || n > 16 {
        return Err(Error::Domain(format!("dimension {n} out of range 1..=16")));
    }
    if !(big_r > 0.0) || !(r > 0.0) {
        return Err(Error::Domain("need R > 0 and r > 0".into()));
    }
    let s = big_r + r;
    let threshold = s.powi(n as i32);
    if !(c > threshold) {
        return Err(Error::Domain(format!(
            "need c > (R+r)^n = {threshold}, got c = {c}"
        )));
    }
    if samples < MC_MIN_SAMPLES {
        return Err(Error::Domain(format!(
            "need at least {MC_MIN_SAMPLES} samples, got {samples}"
        )));
    }

    let hi = c / s.powi(n as i32 - 1) - r;
    let width = hi - big_r;
    let box_volume = width.powi(n as i32);

    let chunks = samples.div_ceil(MC_CHUNK);
    let count_chunk = |chunk: u64| -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chunk);
        let quota = if chunk == chunks - 1 && !samples.is_multiple_of(MC_CHUNK) {
            samples % MC_CHUNK
        } else {
            MC_CHUNK
        };
        let mut hits = 0u64;
        for _ in 0..quota {
            let mut product = 1.0f64;
            for _ in 0..n {
                let x = big_r + rng.gen::<f64>() * width;
                product *= x + r;
            }
            if product < c {
                hits += 1;
            }
        }
        hits
    };

    #[cfg(feature = "parallel")]
    let hits: u64 = (0..chunks).into_par_iter().map(count_chunk).sum();
    #[cfg(not(feature = "parallel"))]
    let hits: u64 = (0..chunks).map(count_chunk).sum();

    let p = hits as f64 / samples as f64;
    let var = p * (1.0 - p) * samples as f64 / (samples as f64 - 1.0);
    Ok(McEstimate {
        estimate: p * box_volume,
        std_error: box_volume * (var / samples as f64).sqrt(),
        samples,
        seed,
    })
}

const BRUTE_MAX_CELLS: usize = 10_000;

/// Exhaustive per-cell maximal operator with direct summation.
///
/// Deliberately slow and structurally independent of the fast paths; used
/// as the equivalence oracle. Grids above 10⁴ cells are rejected.
pub fn brute_force_maximal(f: &GridFunction, variant: Variant) -> Result<GridFunction> {
    brute_force_stack(&[f], variant)
}

/// Exhaustive bilinear maximal operator with direct summation.
pub fn brute_force_bilinear(f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    if f.cells() != g.cells() || f.box_lo() != g.box_lo() || f.box_hi() != g.box_hi() {
        return Err(Error::DimensionMismatch(
            "bilinear operands must share box and resolution".into(),
        ));
    }
    brute_force_stack(&[f, g], Variant::Uncentered)
}

fn brute_force_stack(stack: &[&GridFunction], variant: Variant) -> Result<GridFunction> {
    let f = stack[0];
    if f.len() > BRUTE_MAX_CELLS {
        return Err(Error::InvalidGrid(format!(
            "brute force is capped at {BRUTE_MAX_CELLS} cells, got {}",
            f.len()
        )));
    }
    let cells = f.cells().to_vec();
    let strides = f.strides();
    let mut out = vec![0.0; f.len()];

    let mut flat = 0usize;
    for_each_index(&cells, |idx| {
        let mut best = f64::NEG_INFINITY;
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        brute_rects(
            stack, &cells, &strides, idx, variant, 0, &mut lo, &mut hi, &mut best,
        );
        out[flat] = best;
        flat += 1;
    });
    f.with_values(out)
}

#[allow(clippy::too_many_arguments)]
fn brute_rects(
    stack: &[&GridFunction],
    cells: &[usize],
    strides: &[usize],
    idx: &[usize],
    variant: Variant,
    axis: usize,
    lo: &mut [usize; 3],
    hi: &mut [usize; 3],
    best: &mut f64,
) {
    let dim = cells.len();
    if axis == dim {
        let count: usize = (0..dim).map(|k| hi[k] - lo[k]).product();
        let mut score = 1.0;
        for g in stack {
            score *= direct_rect_sum(g.values(), cells, strides, lo, hi) / count as f64;
        }
        if score > *best {
            *best = score;
        }
        return;
    }
    let i = idx[axis];
    match variant {
        Variant::Centered => {
            let tmax = i.min(cells[axis] - 1 - i);
            for t in 0..=tmax {
                lo[axis] = i - t;
                hi[axis] = i + t + 1;
                brute_rects(stack, cells, strides, idx, variant, axis + 1, lo, hi, best);
            }
        }
        Variant::Uncentered => {
            for a in 0..=i {
                for b in i + 1..=cells[axis] {
                    lo[axis] = a;
                    hi[axis] = b;
                    brute_rects(stack, cells, strides, idx, variant, axis + 1, lo, hi, best);
                }
            }
        }
    }
}

/// Plain nested summation over the rectangle.
fn direct_rect_sum(
    values: &[f64],
    cells: &[usize],
    strides: &[usize],
    lo: &[usize; 3],
    hi: &[usize; 3],
) -> f64 {
    let dim = cells.len();
    let mut sum = 0.0;
    let mut cursor = [0usize; 3];
    cursor[..dim].copy_from_slice(&lo[..dim]);
    'outer: loop {
        let flat: usize = (0..dim).map(|k| cursor[k] * strides[k]).sum();
        sum += values[flat];
        let mut k = dim;
        loop {
            if k == 0 {
                break 'outer;
            }
            k -= 1;
            cursor[k] += 1;
            if cursor[k] < hi[k] {
                break;
            }
            cursor[k] = lo[k];
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maximal::{bilinear_maximal_grid, strong_maximal_grid};

    #[test]
    fn mc_n1_is_exact() {
        let est = mc_volume(1, 2.0, 1.0, 10.0, 10_000, 0).unwrap();
        // box (2, 9]: every sample satisfies x + 1 < 10
        assert_eq!(est.estimate, 7.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn mc_is_deterministic() {
        let a = mc_volume(2, 1.5, 0.5, 100.0, 200_000, 42).unwrap();
        let b = mc_volume(2, 1.5, 0.5, 100.0, 200_000, 42).unwrap();
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.std_error, b.std_error);
        let c = mc_volume(2, 1.5, 0.5, 100.0, 200_000, 43).unwrap();
        assert_ne!(a.estimate, c.estimate);
    }

    #[test]
    fn mc_matches_closed_form_2d() {
        let exact = crate::asymptotics::lemma21_volume(2, 1.5, 0.5, 100.0).unwrap();
        let est = mc_volume(2, 1.5, 0.5, 100.0, 1_000_000, 7).unwrap();
        assert!(
            (est.estimate - exact).abs() < 3.0 * est.std_error,
            "{} vs {exact} (σ = {})",
            est.estimate,
            est.std_error
        );
    }

    #[test]
    fn mc_rejects_bad_domains() {
        assert!(mc_volume(2, 1.0, 1.0, 3.0, 10_000, 0).is_err());
        assert!(mc_volume(2, 1.0, 1.0, 100.0, 100, 0).is_err());
        assert!(mc_volume(0, 1.0, 1.0, 100.0, 10_000, 0).is_err());
    }

    fn random_grid(cells: Vec<usize>, seed: &mut u64) -> GridFunction {
        let total: usize = cells.iter().product();
        let next = |seed: &mut u64| {
            *seed ^= *seed << 13;
            *seed ^= *seed >> 7;
            *seed ^= *seed << 17;
            0.5 + (*seed >> 11) as f64 / (1u64 << 53) as f64
        };
        let values: Vec<f64> = (0..total).map(|_| next(seed)).collect();
        let dim = cells.len();
        GridFunction::new(vec![0.0; dim], vec![1.0; dim], cells, values).unwrap()
    }

    #[test]
    fn brute_matches_fast_small() {
        let mut seed = 0xc0ffee;
        for cells in [vec![17], vec![5, 7], vec![3, 4, 3]] {
            let f = random_grid(cells, &mut seed);
            for v in [Variant::Uncentered, Variant::Centered] {
                let slow = brute_force_maximal(&f, v).unwrap();
                let fast = strong_maximal_grid(&f, v).unwrap();
                for (a, b) in slow.values().iter().zip(fast.values()) {
                    assert!((a - b).abs() <= 1e-13 * a.abs().max(b.abs()));
                }
            }
        }
    }

    #[test]
    fn brute_bilinear_matches_fast() {
        let mut seed = 0xfeed;
        let f = random_grid(vec![6, 6], &mut seed);
        let g = random_grid(vec![6, 6], &mut seed);
        let slow = brute_force_bilinear(&f, &g).unwrap();
        let fast = bilinear_maximal_grid(&f, &g).unwrap();
        for (a, b) in slow.values().iter().zip(fast.values()) {
            assert!((a - b).abs() <= 1e-13 * a.abs().max(b.abs()));
        }
    }

    #[test]
    fn brute_bilinear_squares_and_constants() {
        let mut seed = 0xabcd;
        let f = random_grid(vec![8], &mut seed);
        let m = brute_force_maximal(&f, Variant::Uncentered).unwrap();
        let m2 = brute_force_bilinear(&f, &f).unwrap();
        for (a, b) in m.values().iter().zip(m2.values()) {
            assert_eq!(a * a, *b);
        }

        let ones = GridFunction::new(vec![0.0], vec![1.0], vec![8], vec![1.0; 8]).unwrap();
        let mg = brute_force_bilinear(&ones, &f).unwrap();
        for (a, b) in m.values().iter().zip(mg.values()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn brute_constant_grid() {
        let f =
            GridFunction::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![4, 4], vec![2.0; 16]).unwrap();
        for v in [Variant::Uncentered, Variant::Centered] {
            let m = brute_force_maximal(&f, v).unwrap();
            assert!(m.values().iter().all(|&x| x == 2.0));
        }
    }

    #[test]
    fn brute_guards_size() {
        let f = GridFunction::new(vec![0.0], vec![1.0], vec![10_001], vec![1.0; 10_001]).unwrap();
        assert!(brute_force_maximal(&f, Variant::Uncentered).is_err());
    }
}
