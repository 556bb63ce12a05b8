//! Observed-data representation and CSV ingestion.
//!
//! Covariates are addressed through one index space: linear columns come
//! first (`0..p`), nonlinear columns follow (`p..p + d`). Missing cells are
//! stored as `NaN` so that any estimator that reads one produces a loud
//! non-finite failure instead of a silently wrong number.

use std::collections::HashSet;
use std::fs::File;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tokens that mark a missing cell.
pub const MISSING_TOKENS: [&str; 2] = ["", "NA"];

/// Affine map from a raw nonlinear covariate onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZScale {
    pub min: f64,
    pub max: f64,
}

impl ZScale {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in values.into_iter().filter(|v| v.is_finite()) {
            min = min.min(v);
            max = max.max(v);
        }
        (min <= max).then_some(ZScale { min, max })
    }

    /// Maps a raw value to the unit interval. Values outside the fitted
    /// range are clamped; the flag reports whether clamping happened.
    pub fn apply(&self, v: f64) -> (f64, bool) {
        if v.is_nan() {
            return (f64::NAN, false);
        }
        let span = self.max - self.min;
        let u = if span > 0.0 { (v - self.min) / span } else { 0.5 };
        if u < 0.0 {
            (0.0, true)
        } else if u > 1.0 {
            (1.0, true)
        } else {
            (u, false)
        }
    }

    pub fn invert(&self, u: f64) -> f64 {
        self.min + u * (self.max - self.min)
    }
}

/// Which covariates may be missing (`m_i`) and which are always observed (`l_i`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingSpec {
    pub missing_capable: Vec<usize>,
    pub always_observed: Vec<usize>,
}

impl MissingSpec {
    pub fn new(missing_capable: Vec<usize>, n_covariates: usize) -> Result<Self> {
        let set: HashSet<usize> = missing_capable.iter().copied().collect();
        if set.len() != missing_capable.len() {
            return Err(Error::Config("duplicate missing-capable column".into()));
        }
        if let Some(&bad) = missing_capable.iter().find(|&&c| c >= n_covariates) {
            return Err(Error::Config(format!(
                "missing-capable column {bad} out of range"
            )));
        }
        let mut missing_capable = missing_capable;
        missing_capable.sort_unstable();
        let always_observed = (0..n_covariates).filter(|c| !set.contains(c)).collect();
        Ok(MissingSpec {
            missing_capable,
            always_observed,
        })
    }
}

/// Immutable observed data set.
#[derive(Debug, Clone)]
pub struct ModelFrame {
    y: DVector<f64>,
    x: DMatrix<f64>,
    z_raw: DMatrix<f64>,
    z: DMatrix<f64>,
    r: Vec<bool>,
    t: DMatrix<f64>,
    response_name: String,
    linear_names: Vec<String>,
    nonlinear_names: Vec<String>,
    missing: MissingSpec,
    z_scales: Vec<ZScale>,
    clamped_cells: usize,
}

impl ModelFrame {
    /// Builds a frame from raw columns. `NaN` marks a missing cell. The
    /// complete-case indicator is derived from the missing-capable columns;
    /// a `NaN` anywhere else is rejected. When `z_scales` is `None` the
    /// nonlinear columns are rescaled with the complete-case min/max,
    /// otherwise the given maps are reused and out-of-range values clamped.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        y: DVector<f64>,
        x: DMatrix<f64>,
        z_raw: DMatrix<f64>,
        response_name: impl Into<String>,
        linear_names: Vec<String>,
        nonlinear_names: Vec<String>,
        missing_capable: Vec<usize>,
        z_scales: Option<Vec<ZScale>>,
    ) -> Result<Self> {
        let n = y.len();
        let p = x.ncols();
        let d = z_raw.ncols();
        if x.nrows() != n || z_raw.nrows() != n {
            return Err(Error::Dimension(format!(
                "y has {n} rows, x has {}, z has {}",
                x.nrows(),
                z_raw.nrows()
            )));
        }
        if linear_names.len() != p || nonlinear_names.len() != d {
            return Err(Error::Dimension("column name count".into()));
        }
        if let Some(row) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::MissingResponse { row });
        }
        let missing = MissingSpec::new(missing_capable, p + d)?;
        let cell = |i: usize, c: usize| if c < p { x[(i, c)] } else { z_raw[(i, c - p)] };

        for &c in &missing.always_observed {
            if let Some(i) = (0..n).find(|&i| !cell(i, c).is_finite()) {
                let name = if c < p {
                    &linear_names[c]
                } else {
                    &nonlinear_names[c - p]
                };
                return Err(Error::Config(format!(
                    "row {i}: column `{name}` is missing but not declared missing-capable"
                )));
            }
        }
        let r: Vec<bool> = (0..n)
            .map(|i| {
                missing
                    .missing_capable
                    .iter()
                    .all(|&c| cell(i, c).is_finite())
            })
            .collect();

        let z_scales = match z_scales {
            Some(s) => {
                if s.len() != d {
                    return Err(Error::Dimension("z scaling count".into()));
                }
                s
            }
            None => (0..d)
                .map(|j| {
                    ZScale::from_values((0..n).filter(|&i| r[i]).map(|i| z_raw[(i, j)]))
                        .ok_or_else(|| {
                            Error::Config(format!(
                                "nonlinear column `{}` has no complete-case values",
                                nonlinear_names[j]
                            ))
                        })
                })
                .collect::<Result<_>>()?,
        };
        let mut clamped_cells = 0;
        let z = DMatrix::from_fn(n, d, |i, j| {
            let (u, clamped) = z_scales[j].apply(z_raw[(i, j)]);
            clamped_cells += usize::from(clamped);
            u
        });

        let s = 1 + missing.always_observed.len();
        let t = DMatrix::from_fn(n, s, |i, k| {
            if k == 0 {
                y[i]
            } else {
                let c = missing.always_observed[k - 1];
                if c < p {
                    x[(i, c)]
                } else {
                    z[(i, c - p)]
                }
            }
        });

        Ok(ModelFrame {
            y,
            x,
            z_raw,
            z,
            r,
            t,
            response_name: response_name.into(),
            linear_names,
            nonlinear_names,
            missing,
            z_scales,
            clamped_cells,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }
    pub fn p(&self) -> usize {
        self.x.ncols()
    }
    pub fn d(&self) -> usize {
        self.z.ncols()
    }
    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }
    /// Linear covariates; missing cells are `NaN`.
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }
    /// Nonlinear covariates rescaled to `[0, 1]`; missing cells are `NaN`.
    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }
    pub fn z_raw(&self) -> &DMatrix<f64> {
        &self.z_raw
    }
    pub fn r(&self) -> &[bool] {
        &self.r
    }
    /// Always-observed block `t_i = (y_i, l_i)`; the response is column 0.
    pub fn t(&self) -> &DMatrix<f64> {
        &self.t
    }
    pub fn missing(&self) -> &MissingSpec {
        &self.missing
    }
    pub fn z_scales(&self) -> &[ZScale] {
        &self.z_scales
    }
    /// Number of nonlinear cells that fell outside the reused scaling range.
    pub fn clamped_cells(&self) -> usize {
        self.clamped_cells
    }
    pub fn response_name(&self) -> &str {
        &self.response_name
    }
    pub fn linear_names(&self) -> &[String] {
        &self.linear_names
    }
    pub fn nonlinear_names(&self) -> &[String] {
        &self.nonlinear_names
    }

    /// Name of column `k` of the always-observed block.
    pub fn t_name(&self, k: usize) -> &str {
        if k == 0 {
            &self.response_name
        } else {
            self.covariate_name(self.missing.always_observed[k - 1])
        }
    }

    pub fn covariate_name(&self, c: usize) -> &str {
        if c < self.p() {
            &self.linear_names[c]
        } else {
            &self.nonlinear_names[c - self.p()]
        }
    }

    /// Raw (unscaled) value of covariate `c` in row `i`.
    pub fn covariate_raw(&self, i: usize, c: usize) -> f64 {
        if c < self.p() {
            self.x[(i, c)]
        } else {
            self.z_raw[(i, c - self.p())]
        }
    }

    /// The complete-case indicator as 0/1 weights.
    pub fn r_weights(&self) -> Vec<f64> {
        self.r.iter().map(|&r| if r { 1.0 } else { 0.0 }).collect()
    }

    /// Keeps the listed rows, reusing this frame's nonlinear scaling.
    pub fn select_rows(&self, rows: &[usize]) -> Result<ModelFrame> {
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i]));
        let x = self.x.select_rows(rows);
        let z_raw = self.z_raw.select_rows(rows);
        ModelFrame::new(
            y,
            x,
            z_raw,
            self.response_name.clone(),
            self.linear_names.clone(),
            self.nonlinear_names.clone(),
            self.missing.missing_capable.clone(),
            Some(self.z_scales.clone()),
        )
    }

    /// Rebuilds the frame with the covariates listed in `nonlinear` (indices
    /// into linear then nonlinear columns) as the nonlinear block and every
    /// other covariate linear, keeping column order and missingness roles.
    pub fn with_roles(&self, nonlinear: &[usize], z_scales: Option<Vec<ZScale>>) -> Result<ModelFrame> {
        let total = self.p() + self.d();
        if let Some(&bad) = nonlinear.iter().find(|&&c| c >= total) {
            return Err(Error::Dimension(format!("no covariate {bad}")));
        }
        let is_nonlinear = |c: usize| nonlinear.contains(&c);
        let lin: Vec<usize> = (0..total).filter(|&c| !is_nonlinear(c)).collect();
        let non: Vec<usize> = (0..total).filter(|&c| is_nonlinear(c)).collect();
        let n = self.n();
        let x = DMatrix::from_fn(n, lin.len(), |i, k| self.covariate_raw(i, lin[k]));
        let z_raw = DMatrix::from_fn(n, non.len(), |i, k| self.covariate_raw(i, non[k]));
        let position = |c: usize| match lin.iter().position(|&v| v == c) {
            Some(k) => k,
            None => lin.len() + non.iter().position(|&v| v == c).expect("partitioned"),
        };
        ModelFrame::new(
            self.y.clone(),
            x,
            z_raw,
            self.response_name.clone(),
            lin.iter().map(|&c| self.covariate_name(c).to_string()).collect(),
            non.iter().map(|&c| self.covariate_name(c).to_string()).collect(),
            self.missing.missing_capable.iter().map(|&c| position(c)).collect(),
            z_scales,
        )
    }

    /// Writes the raw observed data back out as CSV. Missing cells are
    /// written as `NA`; finite values use shortest round-trip formatting.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut w = csv::Writer::from_writer(file);
        let mut header = vec![self.response_name.clone()];
        header.extend(self.linear_names.iter().cloned());
        header.extend(self.nonlinear_names.iter().cloned());
        w.write_record(&header)?;
        let fmt = |v: f64| if v.is_nan() { "NA".to_string() } else { format!("{v}") };
        for i in 0..self.n() {
            let mut rec = vec![fmt(self.y[i])];
            rec.extend((0..self.p()).map(|j| fmt(self.x[(i, j)])));
            rec.extend((0..self.d()).map(|j| fmt(self.z_raw[(i, j)])));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(())
    }
}

/// Number of rows with fully observed covariates.
pub fn complete_case_count(frame: &ModelFrame) -> usize {
    frame.r().iter().filter(|&&r| r).count()
}

/// Assignment of CSV columns to model roles. Columns not named are ignored.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RoleMap {
    pub response: String,
    #[serde(default)]
    pub linear: Vec<String>,
    #[serde(default)]
    pub nonlinear: Vec<String>,
    /// Columns that may be missing. When absent, any covariate column that
    /// contains a missing cell is treated as missing-capable.
    #[serde(default)]
    pub missing_capable: Option<Vec<String>>,
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64> {
    let s = raw.trim();
    if MISSING_TOKENS.contains(&s) {
        return Ok(f64::NAN);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            row,
            column: column.to_string(),
            value: raw.to_string(),
        }),
    }
}

/// Reads a CSV with a header row into a [`ModelFrame`].
pub fn ingest_csv(path: &Path, roles: &RoleMap) -> Result<ModelFrame> {
    ingest_csv_scaled(path, roles, None)
}

/// Like [`ingest_csv`], but reuses nonlinear scaling from a training frame.
pub fn ingest_csv_scaled(
    path: &Path,
    roles: &RoleMap,
    z_scales: Option<Vec<ZScale>>,
) -> Result<ModelFrame> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();

    let mut seen = HashSet::new();
    for name in std::iter::once(&roles.response)
        .chain(&roles.linear)
        .chain(&roles.nonlinear)
    {
        if !seen.insert(name.as_str()) {
            return Err(Error::Config(format!("column `{name}` assigned two roles")));
        }
    }
    let locate = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    };
    let y_col = locate(&roles.response)?;
    let x_cols = roles.linear.iter().map(|n| locate(n)).collect::<Result<Vec<_>>>()?;
    let z_cols = roles
        .nonlinear
        .iter()
        .map(|n| locate(n))
        .collect::<Result<Vec<_>>>()?;

    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut z = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let get = |c: usize| parse_cell(rec.get(c).unwrap_or(""), row, &header[c]);
        let yv = get(y_col)?;
        if yv.is_nan() {
            return Err(Error::MissingResponse { row });
        }
        y.push(yv);
        for &c in &x_cols {
            x.push(get(c)?);
        }
        for &c in &z_cols {
            z.push(get(c)?);
        }
    }
    let n = y.len();
    let p = x_cols.len();
    let d = z_cols.len();
    let x = DMatrix::from_row_slice(n, p, &x);
    let z = DMatrix::from_row_slice(n, d, &z);

    let missing_capable = match &roles.missing_capable {
        Some(names) => names
            .iter()
            .map(|name| {
                roles
                    .linear
                    .iter()
                    .position(|l| l == name)
                    .or_else(|| roles.nonlinear.iter().position(|l| l == name).map(|k| p + k))
                    .ok_or_else(|| Error::UnknownColumn(name.clone()))
            })
            .collect::<Result<Vec<_>>>()?,
        None => (0..p + d)
            .filter(|&c| {
                (0..n).any(|i| {
                    let v = if c < p { x[(i, c)] } else { z[(i, c - p)] };
                    v.is_nan()
                })
            })
            .collect(),
    };

    ModelFrame::new(
        DVector::from_vec(y),
        x,
        z,
        roles.response.clone(),
        roles.linear.clone(),
        roles.nonlinear.clone(),
        missing_capable,
        z_scales,
    )
}
