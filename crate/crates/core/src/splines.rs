//! Normalized B-spline bases on `[0, 1]` for the nonlinear block.

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::ModelFrame;

/// Default spline degree (cubic).
pub const DEFAULT_DEGREE: usize = 3;

/// B-spline basis of a given degree on `[0, 1]` with clamped boundary knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineBasis {
    degree: usize,
    internal_knots: Vec<f64>,
    knots: Vec<f64>,
}

impl SplineBasis {
    /// Internal knots must lie strictly inside `(0, 1)`; they are sorted here.
    pub fn new(degree: usize, mut internal_knots: Vec<f64>) -> Result<Self> {
        if internal_knots.iter().any(|k| !(k.is_finite() && *k > 0.0 && *k < 1.0)) {
            return Err(Error::Config("internal knots must lie in (0, 1)".into()));
        }
        internal_knots.sort_by(f64::total_cmp);
        let mut knots = vec![0.0; degree + 1];
        knots.extend_from_slice(&internal_knots);
        knots.extend(std::iter::repeat(1.0).take(degree + 1));
        Ok(SplineBasis {
            degree,
            internal_knots,
            knots,
        })
    }

    /// Places `count` internal knots at sample quantiles of `values`
    /// (evenly spaced probabilities). Tied or boundary quantiles are dropped
    /// with a warning, so the result may carry fewer knots than requested.
    pub fn from_quantiles(degree: usize, count: usize, values: &[f64]) -> Result<Self> {
        let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        if sorted.is_empty() && count > 0 {
            return Err(Error::Config("no values to place knots".into()));
        }
        sorted.sort_by(f64::total_cmp);
        let mut knots: Vec<f64> = Vec::with_capacity(count);
        for j in 1..=count {
            let q = quantile_sorted(&sorted, j as f64 / (count + 1) as f64);
            if q <= 0.0 || q >= 1.0 || knots.last().is_some_and(|&last| q <= last) {
                continue;
            }
            knots.push(q);
        }
        if knots.len() < count {
            warn!(
                "requested {count} internal knots, kept {} after collapsing ties",
                knots.len()
            );
        }
        SplineBasis::new(degree, knots)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }
    pub fn internal_knots(&self) -> &[f64] {
        &self.internal_knots
    }
    /// Full knot vector including the repeated boundary knots.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }
    /// Basis width after dropping the first function: internal knots + degree.
    pub fn width(&self) -> usize {
        self.internal_knots.len() + self.degree
    }

    fn span(&self, z: f64) -> usize {
        let p = self.degree;
        let last = self.knots.len() - p - 2;
        if z >= 1.0 {
            return last;
        }
        // largest i in [p, last] with knots[i] <= z
        let mut i = p;
        while i < last && self.knots[i + 1] <= z {
            i += 1;
        }
        i
    }

    /// All `width() + 1` basis functions at `z`, including the first one.
    pub fn evaluate_full(&self, z: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::Domain {
                value: z,
                lo: 0.0,
                hi: 1.0,
            });
        }
        let mut out = vec![0.0; self.width() + 1];
        self.fill_full(z, &mut out);
        Ok(out)
    }

    // Cox-de Boor recursion restricted to the degree + 1 nonzero functions.
    fn fill_full(&self, z: f64, out: &mut [f64]) {
        let p = self.degree;
        let u = &self.knots;
        let i = self.span(z);
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = z - u[i + 1 - j];
            right[j] = u[i + j] - z;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { n[r] / denom };
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, v) in n.into_iter().enumerate() {
            out[i - p + k] = v;
        }
    }

    /// Basis functions `b_1..b_L` at `z`; the first function is dropped
    /// because the full set sums to one and would duplicate the intercept.
    pub fn evaluate(&self, z: f64) -> Result<Vec<f64>> {
        let mut full = self.evaluate_full(z)?;
        full.remove(0);
        Ok(full)
    }
}

/// Sample quantile of sorted data (linear interpolation between order
/// statistics, the common "type 7" definition).
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Evaluates the basis at `z`, returning the `L` retained functions.
pub fn evaluate_basis(basis: &SplineBasis, z: f64) -> Result<Vec<f64>> {
    basis.evaluate(z)
}

/// Intercept plus one spline block per nonlinear covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveBasis {
    bases: Vec<SplineBasis>,
}

impl AdditiveBasis {
    pub fn new(bases: Vec<SplineBasis>) -> Self {
        AdditiveBasis { bases }
    }

    /// One basis per nonlinear column with knots at complete-case quantiles.
    pub fn from_frame(frame: &ModelFrame, knot_counts: &[usize], degree: usize) -> Result<Self> {
        if degree < 1 {
            return Err(Error::Config("spline degree must be at least 1".into()));
        }
        if knot_counts.len() != frame.d() {
            return Err(Error::Dimension(format!(
                "{} knot counts for {} nonlinear columns",
                knot_counts.len(),
                frame.d()
            )));
        }
        let bases = knot_counts
            .iter()
            .enumerate()
            .map(|(j, &k)| {
                let observed: Vec<f64> = (0..frame.n())
                    .filter(|&i| frame.r()[i])
                    .map(|i| frame.z()[(i, j)])
                    .collect();
                SplineBasis::from_quantiles(degree, k, &observed)
            })
            .collect::<Result<_>>()?;
        Ok(AdditiveBasis { bases })
    }

    pub fn bases(&self) -> &[SplineBasis] {
        &self.bases
    }

    /// Total width: the constant column plus every block.
    pub fn width(&self) -> usize {
        1 + self.bases.iter().map(SplineBasis::width).sum::<usize>()
    }

    /// Column range of block `j` inside the design.
    pub fn block_range(&self, j: usize) -> std::ops::Range<usize> {
        let start = 1 + self.bases[..j].iter().map(SplineBasis::width).sum::<usize>();
        start..start + self.bases[j].width()
    }

    /// Evaluates one row. A `NaN` coordinate yields a `NaN` row so that a
    /// missing cell cannot be consumed silently.
    pub fn row(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        if z.len() != self.bases.len() || out.len() != self.width() {
            return Err(Error::Dimension("additive basis row".into()));
        }
        out[0] = 1.0;
        let mut offset = 1;
        for (basis, &v) in self.bases.iter().zip(z) {
            let w = basis.width();
            if v.is_nan() {
                out[offset..offset + w].iter_mut().for_each(|o| *o = f64::NAN);
            } else {
                let b = basis.evaluate(v)?;
                out[offset..offset + w].copy_from_slice(&b);
            }
            offset += w;
        }
        Ok(())
    }

    /// Design rows for every row of `z` (an `n × d` matrix on `[0, 1]`).
    pub fn design(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = z.nrows();
        let w = self.width();
        let mut out = DMatrix::zeros(n, w);
        let mut buf = vec![0.0; w];
        let mut zi = vec![0.0; z.ncols()];
        for i in 0..n {
            for (j, v) in zi.iter_mut().enumerate() {
                *v = z[(i, j)];
            }
            self.row(&zi, &mut buf)?;
            for (k, v) in buf.iter().enumerate() {
                out[(i, k)] = *v;
            }
        }
        Ok(out)
    }
}

/// Builds the `n × (1 + Σ_j L_j)` nonlinear design for a frame.
pub fn build_design(
    frame: &ModelFrame,
    per_variable_knots: &[usize],
    degree: usize,
) -> Result<(AdditiveBasis, DMatrix<f64>)> {
    if frame.d() == 0 {
        return Err(Error::Config("frame has no nonlinear columns".into()));
    }
    let basis = AdditiveBasis::from_frame(frame, per_variable_knots, degree)?;
    let design = basis.design(frame.z())?;
    Ok((basis, design))
}
