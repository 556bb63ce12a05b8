//! Frisch-Newton primal-dual interior-point method for unweighted quantile
//! regression, followed by a vertex polish.
//!
//! The dual of `min Σ ρτ(b_i − a_iᵀ c)` is solved as the bounded LP
//! `max bᵀ x  s.t.  Aᵀ x = (1 − τ) Aᵀ 1,  0 ≤ x ≤ 1`, using Mehrotra
//! predictor-corrector steps. Coefficients are recovered from the equality
//! multipliers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{bounded_least_squares, independent_rows, spd_factor, spd_solve, weighted_gram};

use super::check_loss;

const STEP_DAMPING: f64 = 0.9995;
pub(crate) const GAP_TOL: f64 = 1e-8;
const MAX_ITER: usize = 100;
/// Iterations without a smaller duality gap before giving up.
const STALL_WINDOW: usize = 10;
const DUAL_SLACK: f64 = 1e-9;

/// Result of a dense solve on an already weighted and augmented system.
#[derive(Debug, Clone)]
pub(crate) struct DenseSolution {
    pub coef: DVector<f64>,
    /// Per-row subgradient of the check loss, `ψ_i ∈ [τ − 1, τ]`.
    pub psi: DVector<f64>,
    pub iterations: usize,
    pub gap: f64,
    /// True when the coefficients are a vertex certified by an exact dual.
    pub certified: bool,
}

fn step_bound(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(f64::INFINITY, f64::min)
}

fn loss(a: &DMatrix<f64>, b: &DVector<f64>, coef: &DVector<f64>, tau: f64) -> f64 {
    let r = b - a * coef;
    r.iter().map(|&u| check_loss(u, tau)).sum()
}

struct IpmState {
    coef: DVector<f64>,
    dual: DVector<f64>,
    iterations: usize,
    gap: f64,
    converged: bool,
}

fn frisch_newton(a: &DMatrix<f64>, b: &DVector<f64>, tau: f64) -> Result<IpmState> {
    let n = a.nrows();
    let c = -b;
    let mut x = DVector::from_element(n, 1.0 - tau);
    let rhs_b = a.tr_mul(&x);
    let mut s = DVector::from_element(n, 1.0) - &x;

    let gram = a.tr_mul(a);
    let mut y = spd_solve(&gram, &a.tr_mul(&c))?;
    let mut r = &c - a * &y;
    r.iter_mut().filter(|v| **v == 0.0).for_each(|v| *v = 1e-3);
    let mut z = r.map(|v| v.max(0.0));
    let mut w = &z - &r;
    let gap_of = |x: &DVector<f64>, y: &DVector<f64>, w: &DVector<f64>| {
        c.dot(x) - y.dot(&rhs_b) + w.sum()
    };
    let mut gap = gap_of(&x, &y, &w);
    let mut iterations = 0;
    // rounding can make late iterates drift away from the optimum
    let mut best = (y.clone(), x.clone(), gap, 0);

    let tolerance = |x: &DVector<f64>| GAP_TOL * (1.0 + b.dot(x).abs());
    while gap > tolerance(&x) && iterations < MAX_ITER {
        iterations += 1;
        let q = DVector::from_fn(n, |i, _| 1.0 / (z[i] / x[i] + w[i] / s[i]));
        let r = &z - &w;
        let chol = spd_factor(&weighted_gram(a, q.as_slice()))?;
        let mut dy = chol.solve(&a.tr_mul(&q.component_mul(&r)));
        let mut dx = q.component_mul(&(a * &dy - &r));
        let mut ds = -&dx;
        let mut dz = DVector::from_fn(n, |i, _| -z[i] * (dx[i] / x[i] + 1.0));
        let mut dw = DVector::from_fn(n, |i, _| -w[i] * (ds[i] / s[i] + 1.0));

        let bounds = |dx: &DVector<f64>, ds: &DVector<f64>, dz: &DVector<f64>, dw: &DVector<f64>| {
            let fp = (STEP_DAMPING * step_bound(&x, dx).min(step_bound(&s, ds))).min(1.0);
            let fd = (STEP_DAMPING * step_bound(&w, dw).min(step_bound(&z, dz))).min(1.0);
            (fp, fd)
        };
        let (mut fp, mut fd) = bounds(&dx, &ds, &dz, &dw);

        if fp.min(fd) < 1.0 {
            let mu0 = z.dot(&x) + w.dot(&s);
            let g = (&z + fd * &dz).dot(&(&x + fp * &dx)) + (&w + fd * &dw).dot(&(&s + fp * &ds));
            let mu = mu0 * (g / mu0).powi(3) / (2.0 * n as f64);
            let dxdz = dx.component_mul(&dz);
            let dsdw = ds.component_mul(&dw);
            let xi = DVector::from_fn(n, |i, _| mu * (1.0 / x[i] - 1.0 / s[i]));
            let corrected = &r + &dxdz - &dsdw - &xi;
            dy = chol.solve(&a.tr_mul(&q.component_mul(&corrected)));
            dx = q.component_mul(&(a * &dy + &xi - &r - &dxdz + &dsdw));
            ds = -&dx;
            dz = DVector::from_fn(n, |i, _| {
                mu / x[i] - z[i] - z[i] / x[i] * dx[i] - dxdz[i]
            });
            dw = DVector::from_fn(n, |i, _| {
                mu / s[i] - w[i] - w[i] / s[i] * ds[i] - dsdw[i]
            });
            (fp, fd) = bounds(&dx, &ds, &dz, &dw);
        }

        x.axpy(fp, &dx, 1.0);
        s.axpy(fp, &ds, 1.0);
        y.axpy(fd, &dy, 1.0);
        w.axpy(fd, &dw, 1.0);
        z.axpy(fd, &dz, 1.0);
        gap = gap_of(&x, &y, &w);
        if !gap.is_finite() {
            return Err(Error::NonFinite("interior-point iterate"));
        }
        if gap < best.2 {
            best = (y.clone(), x.clone(), gap, iterations);
        } else if iterations - best.3 >= STALL_WINDOW {
            break;
        }
    }
    let (y, x, gap, _) = best;
    let converged = gap <= tolerance(&x);
    Ok(IpmState {
        coef: -y,
        dual: x,
        iterations,
        gap,
        converged,
    })
}

/// Moves an interior solution onto a vertex: the `m` rows with the smallest
/// residuals (and linearly independent) are fitted exactly, then an exact
/// dual is reconstructed. Returns `None` if no certified vertex is found.
fn polish(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    tau: f64,
    order: &[usize],
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = a.nrows();
    let m = a.ncols();
    let basis = independent_rows(a, order)?;

    let ah = a.select_rows(&basis);
    let bh = DVector::from_iterator(m, basis.iter().map(|&i| b[i]));
    let lu = ah.clone().lu();
    let mut vertex = lu.solve(&bh)?;
    // one step of iterative refinement
    let fix = lu.solve(&(&bh - &ah * &vertex))?;
    vertex += fix;
    snap_axis_rows(a, b, &basis, &mut vertex);

    let resid = b - a * &vertex;
    let mut in_basis = vec![false; n];
    for &i in &basis {
        in_basis[i] = true;
    }
    let scale = b.amax().max(1.0);
    let mut psi = DVector::zeros(n);
    let mut degenerate = Vec::new();
    for i in 0..n {
        if in_basis[i] {
            continue;
        }
        let r = resid[i];
        if r.abs() <= 1e-11 * scale {
            degenerate.push(i);
        } else {
            psi[i] = if r > 0.0 { tau } else { tau - 1.0 };
        }
    }
    // stationarity Σ a_i ψ_i = 0 determines the multipliers on zero residuals
    let rhs = -(a.tr_mul(&psi));
    if degenerate.is_empty() {
        let psi_basis = ah.transpose().lu().solve(&rhs)?;
        for (k, &i) in basis.iter().enumerate() {
            let v = psi_basis[k];
            if v < tau - 1.0 - DUAL_SLACK || v > tau + DUAL_SLACK {
                return None;
            }
            psi[i] = v.clamp(tau - 1.0, tau);
        }
    } else {
        let zero: Vec<usize> = basis.iter().copied().chain(degenerate).collect();
        let az = a.select_rows(&zero).transpose();
        let v = bounded_least_squares(&az, &rhs, tau - 1.0, tau);
        let miss = (&az * &v - &rhs).amax();
        if miss > DUAL_SLACK * (1.0 + rhs.amax()) {
            return None;
        }
        for (k, &i) in zero.iter().enumerate() {
            psi[i] = v[k];
        }
    }
    Some((vertex, psi))
}

/// Walks from `coef` to a vertex without increasing the loss: repeatedly
/// moves along the steepest descent direction within the null space of the
/// rows already fitted exactly, stopping at the first row whose residual
/// reaches zero. Needed when the optimum is a face and the interior point
/// sits in its middle, so the smallest residuals do not name a vertex.
fn purify(a: &DMatrix<f64>, b: &DVector<f64>, tau: f64, coef: &DVector<f64>) -> Option<Vec<usize>> {
    let (n, m) = a.shape();
    let mut c = coef.clone();
    let mut basis: Vec<usize> = Vec::with_capacity(m);
    let mut in_basis = vec![false; n];
    while basis.len() < m {
        let resid = b - a * &c;
        let ab = a.select_rows(&basis);
        let project = |v: &DVector<f64>| -> Option<DVector<f64>> {
            if basis.is_empty() {
                return Some(v.clone());
            }
            let coef = (&ab * ab.transpose()).lu().solve(&(&ab * v))?;
            Some(v - ab.tr_mul(&coef))
        };
        let mut grad = DVector::zeros(m);
        for i in (0..n).filter(|&i| !in_basis[i]) {
            let psi = if resid[i] > 0.0 { tau } else { tau - 1.0 };
            grad.axpy(-psi, &a.row(i).transpose(), 1.0);
        }
        let mut d = project(&(-&grad))?;
        if d.norm() <= 1e-12 * (1.0 + grad.norm()) {
            // flat within the face: any feasible direction keeps the loss
            d = (0..m)
                .filter_map(|j| project(&DVector::from_fn(m, |k, _| f64::from(u8::from(k == j)))))
                .max_by(|u, v| u.norm().total_cmp(&v.norm()))?;
        }
        let dn = d.norm();
        if dn <= 1e-12 {
            return None;
        }
        let mut hit: Option<(usize, f64)> = None;
        for i in (0..n).filter(|&i| !in_basis[i]) {
            let row = a.row(i);
            let slope = row.dot(&d.transpose());
            if slope.abs() <= 1e-10 * row.norm() * dn {
                continue;
            }
            let t = resid[i] / slope;
            if t < 0.0 && resid[i] != 0.0 {
                continue;
            }
            let t = t.max(0.0);
            if hit.map_or(true, |(_, best)| t < best) {
                hit = Some((i, t));
            }
        }
        let (i, t) = hit?;
        c.axpy(t, &d, 1.0);
        basis.push(i);
        in_basis[i] = true;
    }
    Some(basis)
}

/// Basis rows with a single nonzero entry (penalty pseudo-rows) pin their
/// coefficient exactly, which the LU solve only reproduces up to rounding.
fn snap_axis_rows(a: &DMatrix<f64>, b: &DVector<f64>, basis: &[usize], vertex: &mut DVector<f64>) {
    for &i in basis {
        let row = a.row(i);
        let mut nonzero = row.iter().enumerate().filter(|(_, v)| **v != 0.0);
        if let (Some((k, v)), None) = (nonzero.next(), nonzero.next()) {
            vertex[k] = b[i] / v;
        }
    }
}

/// Minimizes `Σ ρτ(b_i − a_iᵀ c)` exactly.
pub(crate) fn solve_dense(a: &DMatrix<f64>, b: &DVector<f64>, tau: f64) -> Result<DenseSolution> {
    let n = a.nrows();
    let m = a.ncols();
    if m == 0 {
        let psi = DVector::from_fn(n, |i, _| {
            if b[i] > 0.0 {
                tau
            } else if b[i] < 0.0 {
                tau - 1.0
            } else {
                0.0
            }
        });
        return Ok(DenseSolution {
            coef: DVector::zeros(0),
            psi,
            iterations: 0,
            gap: 0.0,
            certified: true,
        });
    }
    let state = frisch_newton(a, b, tau)?;
    let resid = b - a * &state.coef;
    let mut by_resid: Vec<usize> = (0..n).collect();
    by_resid.sort_by(|&i, &j| resid[i].abs().total_cmp(&resid[j].abs()));
    let polished = polish(a, b, tau, &by_resid)
        .or_else(|| purify(a, b, tau, &state.coef).and_then(|order| polish(a, b, tau, &order)));
    if let Some((coef, psi)) = polished {
        return Ok(DenseSolution {
            coef,
            psi,
            iterations: state.iterations,
            gap: state.gap,
            certified: true,
        });
    }
    if !state.converged {
        return Err(Error::SolverStalled {
            iterations: state.iterations,
            gap: state.gap,
        });
    }
    // Fall back to the interior solution; keep a vertex if it is no worse.
    let psi = state.dual.map(|v| (v - (1.0 - tau)).clamp(tau - 1.0, tau));
    let ipm_loss = loss(a, b, &state.coef, tau);
    let coef = match vertex_no_worse(a, b, tau, &state.coef, ipm_loss) {
        Some(v) => v,
        None => state.coef,
    };
    Ok(DenseSolution {
        coef,
        psi,
        iterations: state.iterations,
        gap: state.gap,
        certified: false,
    })
}

fn vertex_no_worse(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    tau: f64,
    coef: &DVector<f64>,
    reference: f64,
) -> Option<DVector<f64>> {
    let resid = b - a * coef;
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&i, &j| resid[i].abs().total_cmp(&resid[j].abs()));
    let basis = independent_rows(a, &order)?;
    let ah = a.select_rows(&basis);
    let bh = DVector::from_iterator(basis.len(), basis.iter().map(|&i| b[i]));
    let mut vertex = ah.lu().solve(&bh)?;
    snap_axis_rows(a, b, &basis, &mut vertex);
    (loss(a, b, &vertex, tau) <= reference * (1.0 + 1e-14) + 1e-300).then_some(vertex)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>, tau: f64) -> f64 {
        loss(a, b, c, tau)
    }

    #[test]
    fn purify_leaves_a_flat_face_at_a_vertex() {
        // any intercept in [1, 2] is a median of 0..=3
        let a = DMatrix::from_element(4, 1, 1.0);
        let b = DVector::from_vec(vec![0.0, 1.0, 2.0, 3.0]);
        let start = DVector::from_vec(vec![1.5]);
        let basis = purify(&a, &b, 0.5, &start).unwrap();
        assert!(basis == vec![1] || basis == vec![2]);
        let (vertex, _) = polish(&a, &b, 0.5, &basis).unwrap();
        assert_eq!(total(&a, &b, &vertex, 0.5), total(&a, &b, &start, 0.5));
    }

    #[test]
    fn purify_never_increases_the_loss() {
        let a = DMatrix::from_row_slice(6, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0, 1.0, 4.0, 1.0, 5.0]);
        let b = DVector::from_vec(vec![0.3, 1.1, 1.9, 3.4, 3.8, 5.2]);
        for tau in [0.2, 0.5, 0.8] {
            let start = DVector::from_vec(vec![0.4, 0.7]);
            let basis = purify(&a, &b, tau, &start).unwrap();
            assert_eq!(basis.len(), 2);
            let ab = a.select_rows(&basis);
            let bb = DVector::from_iterator(2, basis.iter().map(|&i| b[i]));
            let vertex = ab.lu().solve(&bb).unwrap();
            assert!(total(&a, &b, &vertex, tau) <= total(&a, &b, &start, tau) + 1e-12);
        }
    }
}
