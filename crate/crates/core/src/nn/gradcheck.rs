use super::matrix::Matrix;
use super::param::Param;
use crate::error::{FeaeError, Result};

/// Compares the analytic gradients written by `loss_fn` against central
/// finite differences and returns the largest relative error.
///
/// `loss_fn` must evaluate the loss at the current parameter values and add
/// its analytic gradient into each `Param::grad`. The relative error per entry
/// is `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn grad_check<F>(params: &mut [Param<f64>], h: f64, mut loss_fn: F) -> Result<f64>
where
    F: FnMut(&mut [Param<f64>]) -> Result<f64>,
{
    for p in params.iter_mut() {
        p.zero_grad();
    }
    let base = loss_fn(params)?;
    if !base.is_finite() {
        return Err(FeaeError::Numeric(format!("loss is {base}")));
    }
    let analytic: Vec<Matrix<f64>> = params.iter().map(|p| p.grad.clone()).collect();

    let mut worst = 0.0f64;
    for pi in 0..params.len() {
        for k in 0..params[pi].value.len() {
            let orig = params[pi].value.data()[k];
            params[pi].value.data_mut()[k] = orig + h;
            let plus = loss_fn(params)?;
            params[pi].value.data_mut()[k] = orig - h;
            let minus = loss_fn(params)?;
            params[pi].value.data_mut()[k] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(FeaeError::Numeric(format!(
                    "loss not finite while perturbing {}[{k}]",
                    params[pi].name
                )));
            }
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[pi].data()[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    for p in params.iter_mut() {
        p.zero_grad();
    }
    Ok(worst)
}
