//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solves `G v = rhs` for symmetric positive (semi)definite `G`, adding a
/// growing diagonal ridge when the plain Cholesky factorization fails.
pub fn spd_solve(g: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    spd_factor(g).map(|c| c.solve(rhs))
}

pub fn spd_factor(g: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = g.clone().cholesky() {
        return Ok(c);
    }
    let m = g.nrows();
    let scale = (0..m).map(|i| g[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut ridge = scale * 1e-12;
    for _ in 0..12 {
        let mut h = g.clone();
        for i in 0..m {
            h[(i, i)] += ridge;
        }
        if let Some(c) = h.cholesky() {
            return Ok(c);
        }
        ridge *= 100.0;
    }
    Err(Error::Singular("normal matrix is not positive definite".into()))
}

/// `Xᵀ diag(q) X` for an `n × m` matrix.
pub fn weighted_gram(x: &DMatrix<f64>, q: &[f64]) -> DMatrix<f64> {
    let (n, m) = x.shape();
    let data = x.as_slice();
    let mut qx = vec![0.0; n * m];
    for (dst, src) in qx.chunks_exact_mut(n).zip(data.chunks_exact(n)) {
        for ((d, s), w) in dst.iter_mut().zip(src).zip(q) {
            *d = s * w;
        }
    }
    let mut g = DMatrix::zeros(m, m);
    for j in 0..m {
        let qj = &qx[j * n..(j + 1) * n];
        for k in j..m {
            let xk = &data[k * n..(k + 1) * n];
            let v: f64 = qj.iter().zip(xk).map(|(a, b)| a * b).sum();
            g[(j, k)] = v;
            g[(k, j)] = v;
        }
    }
    g
}

/// Greedily picks rows of `a`, in the given order, that are linearly
/// independent of the rows already picked, until `a.ncols()` rows are found.
/// Returns `None` when the rows do not span the column space.
pub fn independent_rows(a: &DMatrix<f64>, order: &[usize]) -> Option<Vec<usize>> {
    let picked = independent_subset(a, order);
    (picked.len() == a.ncols()).then_some(picked)
}

/// Rows of `a`, taken in the given order, that are linearly independent of
/// those taken before them. Stops once `a.ncols()` rows are found.
pub fn independent_subset(a: &DMatrix<f64>, order: &[usize]) -> Vec<usize> {
    let m = a.ncols();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(m);
    let mut picked = Vec::with_capacity(m);
    for &i in order {
        if picked.len() == m {
            break;
        }
        let row = a.row(i).transpose();
        let norm = row.norm();
        if norm == 0.0 {
            continue;
        }
        let mut v = row / norm;
        // two passes of modified Gram-Schmidt for stability
        for _ in 0..2 {
            for q in &basis {
                let d = q.dot(&v);
                v.axpy(-d, q, 1.0);
            }
        }
        let rest = v.norm();
        if rest > 1e-9 {
            basis.push(v / rest);
            picked.push(i);
        }
    }
    picked
}

/// Bounded-variable least squares: minimizes `‖A v − b‖²` subject to
/// `lo ≤ v ≤ hi` with a simple active-set method. Intended for the small
/// systems that arise in optimality checks.
pub fn bounded_least_squares(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    lo: f64,
    hi: f64,
) -> DVector<f64> {
    let k = a.ncols();
    let mut v = DVector::from_element(k, 0.5 * (lo + hi));
    if k == 0 {
        return v;
    }
    // status: 0 free, -1 at lower, +1 at upper
    let mut status = vec![0i8; k];
    for _ in 0..(20 * k + 20) {
        // solve the unconstrained problem over the free set
        let free: Vec<usize> = (0..k).filter(|&j| status[j] == 0).collect();
        let mut target = b.clone();
        for j in 0..k {
            if status[j] != 0 {
                target.axpy(-v[j], &a.column(j), 1.0);
            }
        }
        if !free.is_empty() {
            let af = a.select_columns(&free);
            let sol = af
                .clone()
                .svd(true, true)
                .solve(&target, 1e-12)
                .unwrap_or_else(|_| DVector::zeros(free.len()));
            // move toward sol, stopping at the first bound hit
            let mut step = 1.0f64;
            let mut hit = None;
            for (idx, &j) in free.iter().enumerate() {
                let d = sol[idx] - v[j];
                if d > 0.0 && v[j] + d > hi {
                    let s = (hi - v[j]) / d;
                    if s < step {
                        step = s;
                        hit = Some((j, 1i8));
                    }
                } else if d < 0.0 && v[j] + d < lo {
                    let s = (lo - v[j]) / d;
                    if s < step {
                        step = s;
                        hit = Some((j, -1i8));
                    }
                }
            }
            for (idx, &j) in free.iter().enumerate() {
                v[j] += step * (sol[idx] - v[j]);
            }
            if let Some((j, side)) = hit {
                v[j] = if side > 0 { hi } else { lo };
                status[j] = side;
                continue;
            }
        }
        // optimality on the bound set: gradient must point outward
        let grad = a.tr_mul(&(a * &v - b));
        let mut worst = None;
        let mut worst_val = 1e-14 * (1.0 + b.norm());
        for j in 0..k {
            let g = grad[j];
            let improving = (status[j] == -1 && g < 0.0) || (status[j] == 1 && g > 0.0);
            if improving && g.abs() > worst_val {
                worst_val = g.abs();
                worst = Some(j);
            }
        }
        match worst {
            Some(j) => status[j] = 0,
            None => break,
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bvls_unconstrained_interior() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let b = DVector::from_vec(vec![0.25, 0.5]);
        let v = bounded_least_squares(&a, &b, -1.0, 1.0);
        assert!((v[0] - 0.25).abs() < 1e-12 && (v[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn bvls_clips_to_box() {
        let a = DMatrix::from_row_slice(1, 1, &[1.0]);
        let b = DVector::from_vec(vec![5.0]);
        let v = bounded_least_squares(&a, &b, -1.0, 1.0);
        assert_eq!(v[0], 1.0);
    }

    #[test]
    fn bvls_underdetermined_finds_feasible_point() {
        // v0 + v1 = 1.6 with both in [0, 1]: the min-norm point (0.8, 0.8) is feasible
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![1.6]);
        let v = bounded_least_squares(&a, &b, 0.0, 1.0);
        assert!((v[0] + v[1] - 1.6).abs() < 1e-12);
    }

    #[test]
    fn independent_rows_skips_collinear() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, -2.0, 0.0, 0.0, 1.0]);
        assert_eq!(independent_rows(&a, &[0, 1, 2]), Some(vec![0, 2]));
        assert_eq!(independent_rows(&a, &[0, 1]), None);
    }
}
