use crate::error::{Error, Result};

/// `mse + λ1 rate + λ2 l1`. Any non-finite term aborts training.
pub fn total_loss(mse: f64, rate: f64, l1: f64, lambda_rate: f64, lambda_l1: f64) -> Result<f64> {
    let loss = mse + lambda_rate * rate + lambda_l1 * l1;
    if ![mse, rate, l1, loss].iter().all(|v| v.is_finite()) {
        return Err(Error::Diverged(format!(
            "non-finite loss (mse {mse}, rate {rate}, l1 {l1})"
        )));
    }
    Ok(loss)
}

/// Mean absolute value over all entries of `levels`; adds `weight` times
/// its subgradient (zero at zero) into `grads`.
pub fn l1_loss_grad(levels: &[&[f64]], weight: f64, grads: &mut [Vec<f64>]) -> f64 {
    let n: usize = levels.iter().map(|l| l.len()).sum();
    if n == 0 {
        return 0.0;
    }
    let step = weight / n as f64;
    let mut s = 0.0;
    for (level, grad) in levels.iter().zip(grads.iter_mut()) {
        for (v, g) in level.iter().zip(grad.iter_mut()) {
            s += v.abs();
            if *v != 0.0 && step != 0.0 {
                *g += step * v.signum();
            }
        }
    }
    s / n as f64
}
