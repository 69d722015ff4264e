//! Central finite-difference checks of the hand-written gradients.

use super::forecaster::{ForecastWindow, ForecasterModel};
use super::predictor::SlicePredictor;
use super::{LabeledExample, ModelError};

pub const DEFAULT_EPSILON: f64 = 1e-5;
const DENOMINATOR_FLOOR: f64 = 1e-8;

/// `max_i |a_i - n_i| / max(|a_i|, |n_i|, 1e-8)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(DENOMINATOR_FLOOR))
        .fold(0.0, f64::max)
}

fn central_differences<M: Clone>(
    model: &M,
    params: fn(&mut M) -> &mut [f64],
    loss: impl Fn(&M) -> Result<f64, ModelError>,
    eps: f64,
) -> Result<Vec<f64>, ModelError> {
    let mut probe = model.clone();
    let n = params(&mut probe).len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let original = params(&mut probe)[i];
        params(&mut probe)[i] = original + eps;
        let up = loss(&probe)?;
        params(&mut probe)[i] = original - eps;
        let down = loss(&probe)?;
        params(&mut probe)[i] = original;
        out.push((up - down) / (2.0 * eps));
    }
    Ok(out)
}

/// Maximum relative error between back-propagated and finite-difference
/// gradients of the mean cross-entropy on `batch`.
pub fn grad_check_predictor(
    model: &SlicePredictor,
    batch: &[LabeledExample],
    eps: f64,
) -> Result<f64, ModelError> {
    if model.params().iter().any(|p| !p.is_finite()) {
        return Err(ModelError::NonFinite);
    }
    let mut analytic = vec![0.0; model.params().len()];
    model.loss_and_grad(batch, &mut analytic)?;
    let numeric = central_differences(model, SlicePredictor::params_mut, |m| m.loss(batch), eps)?;
    Ok(max_relative_error(&analytic, &numeric))
}

/// As [`grad_check_predictor`], for the forecaster's squared error unrolled
/// through each window.
pub fn grad_check_forecaster(
    model: &ForecasterModel,
    batch: &[ForecastWindow],
    eps: f64,
) -> Result<f64, ModelError> {
    if model.params().iter().any(|p| !p.is_finite()) {
        return Err(ModelError::NonFinite);
    }
    let mut analytic = vec![0.0; model.params().len()];
    model.loss_and_grad(batch, &mut analytic)?;
    let numeric = central_differences(model, ForecasterModel::params_mut, |m| m.loss(batch), eps)?;
    Ok(max_relative_error(&analytic, &numeric))
}
