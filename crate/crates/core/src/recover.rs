//! Reconstructing a layer's input from its ReLU output.
//!
//! Back-projection uses `E[Mᵀρ(Mx)] = x/2` for `N(0, 1/m)` weights, so
//! `2Mᵀρ(Mx)` is an unbiased linear estimate of `x` that is then projected
//! onto the model. Projected-gradient refinement fits the full output.

use ndarray::{Array1, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::models::{project, sample_points, ModelSet};
use crate::netsim::{make_layer, ActivationKind, Layer};
use crate::rng::{self, derive_seed};
use crate::stats;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryMethod {
    BackProject,
    ProjGrad,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecoveryResult {
    pub estimate: Array1<f64>,
    /// `‖x̂ − x‖/‖x‖`, when the true input is known.
    pub relative_error: Option<f64>,
    pub iterations: usize,
    pub method: RecoveryMethod,
    /// `½‖ρ(Mx̂) − y‖²`
    pub objective: f64,
}

impl RecoveryResult {
    pub fn with_truth(mut self, truth: ArrayView1<f64>) -> Self {
        self.relative_error = Some(relative_error(self.estimate.view(), truth));
        self
    }
}

pub fn relative_error(estimate: ArrayView1<f64>, truth: ArrayView1<f64>) -> f64 {
    let d = linalg::distance(estimate, truth);
    let r = linalg::norm(truth);
    if r == 0.0 {
        d
    } else {
        d / r
    }
}

fn require_relu(layer: &Layer) -> Result<()> {
    if layer.activation != ActivationKind::Relu {
        return Err(Error::InvalidArgument(format!(
            "recovery expects a ReLU layer, got {:?}",
            layer.activation
        )));
    }
    Ok(())
}

fn check_dims(layer: &Layer, output: ArrayView1<f64>, model: &ModelSet) -> Result<()> {
    if output.len() != layer.output_dim() {
        return Err(Error::InvalidArgument(format!(
            "output length {} does not match layer width {}",
            output.len(),
            layer.output_dim()
        )));
    }
    if model.ambient_dim != layer.input_dim() {
        return Err(Error::InvalidArgument(format!(
            "model dimension {} does not match layer input {}",
            model.ambient_dim,
            layer.input_dim()
        )));
    }
    Ok(())
}

/// `½‖ρ(Mw) − y‖²`
pub fn residual_objective(layer: &Layer, w: ArrayView1<f64>, output: ArrayView1<f64>) -> Result<f64> {
    let out = layer.apply_one(w)?;
    Ok(0.5 * linalg::sq_distance(out.view(), output))
}

/// `x̂ = Proj_K(2Mᵀy)`.
pub fn back_project(layer: &Layer, output: ArrayView1<f64>, model: &ModelSet) -> Result<RecoveryResult> {
    require_relu(layer)?;
    check_dims(layer, output, model)?;
    let raw = layer.transpose_apply(output)? * 2.0;
    let estimate = project(model, raw.view());
    let objective = residual_objective(layer, estimate.view(), output)?;
    Ok(RecoveryResult {
        estimate,
        relative_error: None,
        iterations: 0,
        method: RecoveryMethod::BackProject,
        objective,
    })
}

/// Relative objective improvement below which refinement stops.
pub const REFINE_TOL: f64 = 1e-8;
/// Step halvings tried before giving up on an iteration.
pub const MAX_HALVINGS: u32 = 30;

/// Iterates `w ← Proj_K(w − s·Mᵀ(ρ(Mw) − y))` with backtracking: a step that
/// raises the objective is halved (up to 30 times) and rejected if it never
/// descends. Returns the best iterate; `iterations` counts accepted moves.
pub fn refine_projected_gradient(
    layer: &Layer,
    output: ArrayView1<f64>,
    init: ArrayView1<f64>,
    model: &ModelSet,
    iters: usize,
    step: f64,
) -> Result<RecoveryResult> {
    require_relu(layer)?;
    check_dims(layer, output, model)?;
    if iters == 0 || !(step > 0.0) {
        return Err(Error::InvalidArgument("need iters ≥ 1 and step > 0".into()));
    }
    let mut w = init.to_owned();
    let mut obj = residual_objective(layer, w.view(), output)?;
    if !obj.is_finite() {
        return Err(Error::NumericFailure(format!("initial objective is {obj}")));
    }
    let mut moves = 0;
    for _ in 0..iters {
        if obj == 0.0 {
            break;
        }
        let resid = layer.apply_one(w.view())? - output;
        let grad = layer.transpose_apply(resid.view())?;
        let mut s = step;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand = project(model, (&w - &(&grad * s)).view());
            let c_obj = residual_objective(layer, cand.view(), output)?;
            if !c_obj.is_finite() {
                return Err(Error::NumericFailure(format!("objective became {c_obj}")));
            }
            if c_obj <= obj {
                accepted = Some((cand, c_obj));
                break;
            }
            s *= 0.5;
        }
        let Some((cand, c_obj)) = accepted else { break };
        let improvement = (obj - c_obj) / obj;
        if c_obj < obj {
            w = cand;
            obj = c_obj;
            moves += 1;
        }
        if improvement < REFINE_TOL {
            break;
        }
    }
    Ok(RecoveryResult {
        estimate: w,
        relative_error: None,
        iterations: moves,
        method: RecoveryMethod::ProjGrad,
        objective: obj,
    })
}

/// Back-projection followed by refinement with the default step of 1.
pub fn recover(layer: &Layer, output: ArrayView1<f64>, model: &ModelSet, method: RecoveryMethod, iters: usize) -> Result<RecoveryResult> {
    let bp = back_project(layer, output, model)?;
    match method {
        RecoveryMethod::BackProject => Ok(bp),
        RecoveryMethod::ProjGrad => refine_projected_gradient(layer, output, bp.estimate.view(), model, iters, 1.0),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorCurveRow {
    pub m: usize,
    pub median_relative_error: f64,
    pub mean_relative_error: f64,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorCurve {
    pub method: RecoveryMethod,
    pub rows: Vec<ErrorCurveRow>,
    /// Least-squares slope of log median error against log m; `None` when
    /// some median is zero.
    pub slope: Option<f64>,
    /// Slope inside `[−0.65, −0.35]`.
    pub pass: bool,
    /// Refinement never ended above its starting objective (ProjGrad only).
    pub refinement_monotone: bool,
}

pub const SLOPE_RANGE: (f64, f64) = (-0.65, -0.35);

/// Median recovery error per width `m`, with one fresh input and layer per trial.
pub fn recovery_error_curve(
    model: &ModelSet,
    m_grid: &[usize],
    trials: usize,
    seed: u64,
    method: RecoveryMethod,
) -> Result<ErrorCurve> {
    if m_grid.len() < 3 || m_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("m grid must be increasing with ≥ 3 values".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("need ≥ 1 trial".into()));
    }
    let mut rows = Vec::with_capacity(m_grid.len());
    let mut monotone = true;
    for &m in m_grid {
        let runs: Vec<(f64, bool)> = (0..trials)
            .into_par_iter()
            .map(|t| -> Result<(f64, bool)> {
                let trial_seed = derive_seed(seed, &[rng::tag("recovery"), m as u64, t as u64]);
                let x = sample_points(model, 1, trial_seed)?.points.index_axis_move(Axis(0), 0);
                let layer = make_layer(model.ambient_dim, m, ActivationKind::Relu, derive_seed(trial_seed, &[1]))?;
                let y = layer.apply_one(x.view())?;
                let bp = back_project(&layer, y.view(), model)?;
                let (est, ok) = match method {
                    RecoveryMethod::BackProject => (bp.estimate, true),
                    RecoveryMethod::ProjGrad => {
                        let pg = refine_projected_gradient(&layer, y.view(), bp.estimate.view(), model, 100, 1.0)?;
                        let ok = pg.objective <= bp.objective;
                        (pg.estimate, ok)
                    }
                };
                Ok((relative_error(est.view(), x.view()), ok))
            })
            .collect::<Result<_>>()?;
        let errs: Vec<f64> = runs.iter().map(|r| r.0).collect();
        monotone &= runs.iter().all(|r| r.1);
        rows.push(ErrorCurveRow {
            m,
            median_relative_error: stats::median(&errs),
            mean_relative_error: stats::mean(&errs),
            trials,
        });
    }
    let ms: Vec<f64> = rows.iter().map(|r| r.m as f64).collect();
    let med: Vec<f64> = rows.iter().map(|r| r.median_relative_error).collect();
    let slope = stats::log_log_fit(&ms, &med).map(|(_, s)| s);
    let pass = slope.is_some_and(|s| (SLOPE_RANGE.0..=SLOPE_RANGE.1).contains(&s));
    Ok(ErrorCurve {
        method,
        rows,
        slope,
        pass,
        refinement_monotone: monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::LabeledCloud;
    use ndarray::{array, Array2};

    fn e1(n: usize) -> Array1<f64> {
        let mut x = Array1::zeros(n);
        x[0] = 1.0;
        x
    }

    #[test]
    fn zero_output_gives_zero_estimate() {
        let model = ModelSet::sparse_identity(10, 1, 0.5).unwrap();
        let layer = make_layer(10, 50, ActivationKind::Relu, 1).unwrap();
        let r = back_project(&layer, Array1::zeros(50).view(), &model).unwrap();
        assert!(r.estimate.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn one_sparse_back_projection() {
        let model = ModelSet::sparse_identity(100, 1, 0.5).unwrap();
        let x = e1(100);
        let errs: Vec<f64> = (0..50)
            .map(|s| {
                let layer = make_layer(100, 2000, ActivationKind::Relu, s).unwrap();
                let y = layer.apply_one(x.view()).unwrap();
                back_project(&layer, y.view(), &model).unwrap().with_truth(x.view()).relative_error.unwrap()
            })
            .collect();
        assert!(stats::median(&errs) <= 0.2, "{}", stats::median(&errs));
    }

    #[test]
    fn back_projection_is_positively_homogeneous() {
        // identity dictionary with k = n: projection is only the unit clip
        let model = ModelSet::sparse_identity(20, 20, 0.0).unwrap();
        let layer = make_layer(20, 400, ActivationKind::Relu, 3).unwrap();
        let mut s = crate::rng::Stream::new(2);
        let x = linalg::random_unit(&mut s, 20) * 0.3;
        let y = layer.apply_one(x.view()).unwrap();
        let c = 0.5;
        let yc = layer.apply_one((&x * c).view()).unwrap();
        let a = back_project(&layer, y.view(), &model).unwrap().estimate;
        let b = back_project(&layer, yc.view(), &model).unwrap().estimate;
        assert!(a.iter().zip(b.iter()).all(|(p, q)| (p * c - q).abs() < 1e-12));
    }

    #[test]
    fn refinement_from_truth_does_not_move() {
        let model = ModelSet::sparse_identity(30, 2, 0.5).unwrap();
        let layer = make_layer(30, 300, ActivationKind::Relu, 5).unwrap();
        let x = sample_points(&model, 1, 4).unwrap().points.row(0).to_owned();
        let y = layer.apply_one(x.view()).unwrap();
        let r = refine_projected_gradient(&layer, y.view(), x.view(), &model, 50, 1.0).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.estimate, x);
    }

    #[test]
    fn refinement_improves_one_sparse() {
        let model = ModelSet::sparse_identity(100, 1, 0.5).unwrap();
        let x = e1(100);
        let errs: Vec<f64> = (0..50)
            .map(|s| {
                let layer = make_layer(100, 2000, ActivationKind::Relu, 100 + s).unwrap();
                let y = layer.apply_one(x.view()).unwrap();
                let bp = back_project(&layer, y.view(), &model).unwrap();
                let pg = refine_projected_gradient(&layer, y.view(), bp.estimate.view(), &model, 100, 1.0).unwrap();
                assert!(pg.objective <= bp.objective);
                pg.with_truth(x.view()).relative_error.unwrap()
            })
            .collect();
        assert!(stats::median(&errs) <= 0.1, "{}", stats::median(&errs));
    }

    #[test]
    fn huge_step_backtracks() {
        let model = ModelSet::sparse_identity(40, 3, 0.5).unwrap();
        let layer = make_layer(40, 400, ActivationKind::Relu, 9).unwrap();
        let x = sample_points(&model, 1, 8).unwrap().points.row(0).to_owned();
        let y = layer.apply_one(x.view()).unwrap();
        let init = Array1::from_elem(40, 0.1);
        let start = residual_objective(&layer, init.view(), y.view()).unwrap();
        let r = refine_projected_gradient(&layer, y.view(), init.view(), &model, 20, 1e6).unwrap();
        assert!(r.objective <= start);
    }

    #[test]
    fn rejects_non_relu_and_bad_dims() {
        let model = ModelSet::sparse_identity(5, 1, 0.5).unwrap();
        let layer = make_layer(5, 20, ActivationKind::Identity, 1).unwrap();
        assert!(back_project(&layer, Array1::zeros(20).view(), &model).is_err());
        let relu = make_layer(5, 20, ActivationKind::Relu, 1).unwrap();
        assert!(back_project(&relu, Array1::zeros(19).view(), &model).is_err());
        assert!(refine_projected_gradient(&relu, Array1::zeros(20).view(), Array1::zeros(5).view(), &model, 0, 1.0).is_err());
    }

    #[test]
    fn permutation_equivariance() {
        let n = 12;
        let model = ModelSet::sparse_identity(n, 2, 0.0).unwrap();
        let layer = make_layer(n, 500, ActivationKind::Relu, 21).unwrap();
        let perm: Vec<usize> = (0..n).rev().collect();
        // permuting the columns of M and the coordinates of x leaves Mx unchanged
        let permuted = Layer {
            weights: layer.weights.select(Axis(1), &perm),
            ..layer.clone()
        };
        let x = sample_points(&model, 1, 3).unwrap().points.row(0).to_owned();
        let px = x.select(Axis(0), &perm);
        let y = layer.apply_one(x.view()).unwrap();
        let a = back_project(&layer, y.view(), &model).unwrap().estimate;
        let b = back_project(&permuted, permuted.apply_one(px.view()).unwrap().view(), &model).unwrap().estimate;
        assert!(a.select(Axis(0), &perm).iter().zip(b.iter()).all(|(p, q)| (p - q).abs() < 1e-12));
    }

    #[test]
    fn single_point_model_recovers_exactly() {
        let cloud = LabeledCloud::unlabeled(array![[0.6, 0.0, 0.0, 0.0]]);
        let model = ModelSet::cloud(cloud, 0.0).unwrap();
        let curve = recovery_error_curve(&model, &[50, 100, 200], 5, 0, RecoveryMethod::BackProject).unwrap();
        assert!(curve.rows.iter().all(|r| r.median_relative_error == 0.0));
        assert!(curve.slope.is_none());
    }

    #[test]
    fn gmm_errors_shrink_with_width() {
        let model = ModelSet::random_gmm(50, 2, 2, 0.5, 1).unwrap();
        let curve = recovery_error_curve(&model, &[200, 800, 3200], 30, 7, RecoveryMethod::BackProject).unwrap();
        let med: Vec<f64> = curve.rows.iter().map(|r| r.median_relative_error).collect();
        assert!(stats::nonincreasing_within(&med, 0.1), "{med:?}");
    }

    #[test]
    fn grid_validation() {
        let model = ModelSet::sparse_identity(5, 1, 0.5).unwrap();
        assert!(recovery_error_curve(&model, &[10, 20], 2, 0, RecoveryMethod::BackProject).is_err());
        assert!(recovery_error_curve(&model, &[10, 30, 20], 2, 0, RecoveryMethod::BackProject).is_err());
        let _ = Array2::<f64>::zeros((1, 1));
    }
}
