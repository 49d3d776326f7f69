use super::tensor::{Scalar, Tensor4};
use super::NnError;

/// Probabilities below this are clamped inside the log so a confidently
/// wrong prediction produces a large finite loss instead of infinity.
pub const LOG_CLAMP: f64 = 1e-12;

/// Cross-entropy between predicted class probabilities and one-hot targets,
/// averaged over the batch. Returns the loss and its gradient with respect
/// to the probabilities (to be chained through the softmax backward).
pub fn softmax_cross_entropy<S: Scalar>(
    probs: &Tensor4<S>,
    targets: &Tensor4<S>,
) -> Result<(S, Tensor4<S>), NnError> {
    if probs.dims() != targets.dims() {
        return Err(NnError::Shape(format!(
            "probabilities {:?} vs targets {:?}",
            probs.dims(),
            targets.dims()
        )));
    }
    let m = probs.dims()[0];
    let clamp = S::from_f64(LOG_CLAMP);
    let inv_m = S::one() / S::from_f64(m as f64);
    let mut loss = S::zero();
    let mut grad = Tensor4::zeros(probs.dims());
    let pd = probs.data();
    let td = targets.data();
    let gd = grad.data_mut();
    for i in 0..pd.len() {
        if td[i] != S::zero() {
            let p = pd[i].max(clamp);
            loss -= td[i] * p.ln();
            gd[i] = -td[i] * inv_m / p;
        }
    }
    Ok((loss * inv_m, grad))
}

/// Mean squared error over every element of the tensor pair. Returns the
/// loss and its gradient with respect to the prediction.
pub fn mse_loss<S: Scalar>(
    pred: &Tensor4<S>,
    target: &Tensor4<S>,
) -> Result<(S, Tensor4<S>), NnError> {
    if pred.dims() != target.dims() {
        return Err(NnError::Shape(format!(
            "prediction {:?} vs target {:?}",
            pred.dims(),
            target.dims()
        )));
    }
    let n = S::from_f64(pred.len() as f64);
    let mut loss = S::zero();
    let mut grad = Tensor4::zeros(pred.dims());
    let pd = pred.data();
    let td = target.data();
    let gd = grad.data_mut();
    let two = S::from_f64(2.0);
    for i in 0..pd.len() {
        let d = pd[i] - td[i];
        loss += d * d;
        gd[i] = two * d / n;
    }
    Ok((loss / n, grad))
}
