//! Linear versus nonlinear designation of a single covariate.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::ModelFrame;
use crate::ipw::WeightEstimate;
use crate::qr::{self, QrProblem};
use crate::splines::SplineBasis;

use super::qbic_score;

/// Largest internal-knot count tried.
pub const MAX_DESIGNATION_KNOTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "class")]
pub enum DesignationClass {
    InterceptOnly,
    Linear,
    Nonlinear { knots: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct Designation {
    pub variable: usize,
    pub name: String,
    pub class: DesignationClass,
    /// `(model, coefficient count, criterion)` for each candidate model.
    pub scores: Vec<(String, usize, f64)>,
}

impl Designation {
    pub fn is_nonlinear(&self) -> bool {
        matches!(self.class, DesignationClass::Nonlinear { .. })
    }
    /// The covariate carries little marginal signal but stays in the model.
    pub fn weak_signal(&self) -> bool {
        self.class == DesignationClass::InterceptOnly
    }
}

/// Scores an intercept-only, a linear, and cubic spline models with 0 to 4
/// internal knots for covariate `variable` (index into linear then
/// nonlinear columns), each fitted alone by weighted quantile regression.
pub fn wqbic_designate(
    frame: &ModelFrame,
    variable: usize,
    tau: f64,
    weights: &WeightEstimate,
) -> Result<Designation> {
    let n = frame.n();
    if variable >= frame.p() + frame.d() {
        return Err(Error::Dimension(format!("no covariate {variable}")));
    }
    if weights.weights.len() != n {
        return Err(Error::Dimension("weights".into()));
    }
    let w = &weights.weights;
    let rows: Vec<usize> = (0..n).filter(|&i| w[i] > 0.0).collect();
    if rows.is_empty() {
        return Err(Error::NoData);
    }
    let raw: Vec<f64> = (0..n)
        .map(|i| if w[i] > 0.0 { frame.covariate_raw(i, variable) } else { 0.0 })
        .collect();
    let name = frame.covariate_name(variable).to_string();
    let mut distinct: Vec<f64> = rows.iter().map(|&i| raw[i]).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() <= 2 {
        return Err(Error::Config(format!(
            "`{name}` is binary and is always treated as linear"
        )));
    }
    let (lo, hi) = (distinct[0], distinct[distinct.len() - 1]);
    let u: Vec<f64> = raw.iter().map(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0)).collect();
    let observed: Vec<f64> = rows.iter().map(|&i| u[i]).collect();

    let y = frame.y();
    let score = |design: DMatrix<f64>| -> Result<(usize, f64)> {
        let l1 = vec![0.0; design.ncols()];
        let problem = QrProblem::new(&design, y, tau, w, &l1)?;
        let sol = qr::solve(&problem)?;
        let p = design.ncols();
        Ok((p, qbic_score(problem.loss(&sol.coef), n, p)?))
    };

    let mut scores = Vec::with_capacity(MAX_DESIGNATION_KNOTS + 3);
    let mut classes = Vec::with_capacity(MAX_DESIGNATION_KNOTS + 3);
    let (p, s) = score(DMatrix::from_element(n, 1, 1.0))?;
    scores.push(("intercept".to_string(), p, s));
    classes.push(DesignationClass::InterceptOnly);
    let (p, s) = score(DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { u[i] }))?;
    scores.push(("linear".to_string(), p, s));
    classes.push(DesignationClass::Linear);
    for k in 0..=MAX_DESIGNATION_KNOTS {
        let basis = SplineBasis::from_quantiles(3, k, &observed)?;
        let width = basis.width();
        let mut design = DMatrix::zeros(n, width + 1);
        for i in 0..n {
            design[(i, 0)] = 1.0;
            let b = DVector::from_vec(basis.evaluate(u[i])?);
            design.view_mut((i, 1), (1, width)).copy_from(&b.transpose());
        }
        let (p, s) = score(design)?;
        scores.push((format!("spline{k}"), p, s));
        classes.push(DesignationClass::Nonlinear { knots: basis.internal_knots().len() });
    }
    let best = (0..scores.len())
        .min_by(|&a, &b| scores[a].2.total_cmp(&scores[b].2).then(a.cmp(&b)))
        .expect("seven candidates");
    Ok(Designation { variable, name, class: classes[best], scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ipw::naive_weights;

    fn frame(v: Vec<f64>, y: Vec<f64>) -> ModelFrame {
        let n = v.len();
        ModelFrame::new(
            DVector::from_vec(y),
            DMatrix::from_vec(n, 1, v),
            DMatrix::zeros(n, 0),
            "y",
            vec!["v".into()],
            vec![],
            vec![],
            None,
        )
        .unwrap()
    }

    #[test]
    fn sine_is_nonlinear_line_is_linear() {
        let n = 400;
        let v: Vec<f64> = (0..n).map(|i| ((i * 7919) % n) as f64 / n as f64).collect();
        let noise: Vec<f64> = (0..n).map(|i| 0.2 * ((i * 37) as f64 * 1.7).sin()).collect();
        let y: Vec<f64> = (0..n).map(|i| (2.0 * std::f64::consts::PI * v[i]).sin() + noise[i]).collect();
        let f = frame(v.clone(), y);
        let d = wqbic_designate(&f, 0, 0.5, &naive_weights(&f)).unwrap();
        assert!(d.is_nonlinear(), "{d:?}");
        assert_eq!(d.scores.len(), 7);

        let y: Vec<f64> = (0..n).map(|i| 3.0 * v[i] + noise[i]).collect();
        let f = frame(v, y);
        let d = wqbic_designate(&f, 0, 0.5, &naive_weights(&f)).unwrap();
        assert_eq!(d.class, DesignationClass::Linear, "{d:?}");
    }

    #[test]
    fn binary_rejected() {
        let v: Vec<f64> = (0..20).map(|i| (i % 2) as f64).collect();
        let y: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let f = frame(v, y);
        assert!(wqbic_designate(&f, 0, 0.5, &naive_weights(&f)).is_err());
    }
}
