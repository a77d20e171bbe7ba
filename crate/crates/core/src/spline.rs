//! Clamped cubic B-spline bases with quantile-placed interior knots.

use crate::error::{Error, Result};
use crate::stats::quantile_select;

pub const DEGREE: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    interior: Vec<f64>,
    lo: f64,
    hi: f64,
    /// Full knot vector: `lo` and `hi` each repeated `DEGREE + 1` times.
    knots: Vec<f64>,
}

impl SplineBasis {
    pub fn new(interior: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::DegenerateRange("boundary"));
        }
        let ordered = interior.windows(2).all(|w| w[0] < w[1]);
        let inside = interior.iter().all(|&k| lo < k && k < hi);
        if !ordered || !inside {
            return Err(Error::InvalidData(format!(
                "interior knots {interior:?} must increase strictly inside ({lo}, {hi})"
            )));
        }
        let mut knots = Vec::with_capacity(interior.len() + 2 * (DEGREE + 1));
        knots.extend(std::iter::repeat_n(lo, DEGREE + 1));
        knots.extend_from_slice(&interior);
        knots.extend(std::iter::repeat_n(hi, DEGREE + 1));
        Ok(SplineBasis {
            interior,
            lo,
            hi,
            knots,
        })
    }

    pub fn interior_knots(&self) -> &[f64] {
        &self.interior
    }

    pub fn boundary(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn degree(&self) -> usize {
        DEGREE
    }

    pub fn basis_dim(&self) -> usize {
        self.interior.len() + DEGREE + 1
    }

    /// Columns contributed to a design matrix that already has an intercept:
    /// the first basis function is dropped because the full basis sums to one.
    pub fn design_dim(&self) -> usize {
        self.basis_dim() - 1
    }

    /// Writes the full basis at `x` (clamped to the boundary) into `out`.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.basis_dim());
        out.fill(0.0);
        let (span, n) = self.nonzero(x);
        out[span - DEGREE..=span].copy_from_slice(&n);
    }

    /// Writes basis functions `1..basis_dim` (see [`design_dim`](Self::design_dim)).
    pub fn eval_design_into(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.design_dim());
        out.fill(0.0);
        let (span, n) = self.nonzero(x);
        for (r, v) in n.iter().enumerate() {
            let j = span - DEGREE + r;
            if j > 0 {
                out[j - 1] = *v;
            }
        }
    }

    /// Knot span index and the `DEGREE + 1` nonzero basis values there.
    fn nonzero(&self, x: f64) -> (usize, [f64; DEGREE + 1]) {
        let x = if x.is_nan() { self.lo } else { x.clamp(self.lo, self.hi) };
        let last_span = self.knots.len() - DEGREE - 2;
        // first knot index > x among the active range, minus one
        let span = if x >= self.hi {
            last_span
        } else {
            let active = &self.knots[DEGREE..=last_span + 1];
            DEGREE + active.partition_point(|&k| k <= x) - 1
        };
        let t = &self.knots;
        let mut n = [0.0; DEGREE + 1];
        let mut left = [0.0; DEGREE + 1];
        let mut right = [0.0; DEGREE + 1];
        n[0] = 1.0;
        for j in 1..=DEGREE {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        (span, n)
    }
}

/// Boundary knots at the sample range, `n_interior` knots at equally spaced
/// empirical quantiles. Quantiles that coincide with each other or with a
/// boundary (heavily tied samples) are dropped, which lowers `basis_dim`.
pub fn build_basis(values: &[f64], n_interior: usize) -> Result<SplineBasis> {
    if values.is_empty() {
        return Err(Error::InvalidData("spline basis needs at least one value".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("spline input contains non-finite values".into()));
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(lo < hi) {
        return Err(Error::DegenerateRange("spline input"));
    }
    let mut scratch: Vec<f64> = values.to_vec();
    let mut interior: Vec<f64> = Vec::with_capacity(n_interior);
    for j in 1..=n_interior {
        let q = quantile_select(&mut scratch, j as f64 / (n_interior + 1) as f64);
        if q > lo && q < hi && interior.last().is_none_or(|&prev| q > prev) {
            interior.push(q);
        }
    }
    SplineBasis::new(interior, lo, hi)
}

pub fn eval_basis(b: &SplineBasis, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; b.basis_dim()];
    b.eval_into(x, &mut out);
    out
}
