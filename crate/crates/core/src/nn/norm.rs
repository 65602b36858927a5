//! Batch normalization over the (batch, row, col) axes per channel.

use crate::error::{Result, SmpError};
use crate::tensor::Tensor;
use num_traits::Float;

/// Per-channel batch-norm parameters and running statistics.
///
/// Train mode normalizes with the current tensor's statistics (biased
/// variance) and updates the running stats; eval mode uses the running
/// stats only.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm<T = f32> {
    pub channels: usize,
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub eps: T,
    pub momentum: T,
}

impl<T: Float> BatchNorm<T> {
    pub fn new(channels: usize) -> Self {
        BatchNorm {
            channels,
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            eps: T::from(1e-5).unwrap(),
            momentum: T::from(0.1).unwrap(),
        }
    }

    pub fn param_count(&self) -> usize {
        2 * self.channels
    }
}

/// Batch statistics saved by the train-mode forward for the backward pass.
#[derive(Clone, Debug)]
pub struct BnSaved<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

pub fn batchnorm_fwd<T: Float>(
    x: &Tensor<T>,
    bn: &mut BatchNorm<T>,
    train: bool,
) -> Result<(Tensor<T>, Option<BnSaved<T>>)> {
    let s = x.shape();
    if s.c != bn.channels {
        return Err(SmpError::Shape(format!(
            "batchnorm input has {} channels, expected {}",
            s.c, bn.channels
        )));
    }
    let m = T::from(s.n * s.h * s.w).unwrap();
    let mut out = Tensor::zeros(s);
    if train {
        let mut mean = vec![T::zero(); s.c];
        let mut var = vec![T::zero(); s.c];
        for c in 0..s.c {
            let mut sum = T::zero();
            for b in 0..s.n {
                for r in 0..s.h {
                    for col in 0..s.w {
                        sum = sum + x.get(b, c, r, col);
                    }
                }
            }
            mean[c] = sum / m;
            let mut sq = T::zero();
            for b in 0..s.n {
                for r in 0..s.h {
                    for col in 0..s.w {
                        let d = x.get(b, c, r, col) - mean[c];
                        sq = sq + d * d;
                    }
                }
            }
            var[c] = sq / m;
            let inv_std = (var[c] + bn.eps).sqrt().recip();
            for b in 0..s.n {
                for r in 0..s.h {
                    for col in 0..s.w {
                        let xh = (x.get(b, c, r, col) - mean[c]) * inv_std;
                        out.set(b, c, r, col, bn.gamma[c] * xh + bn.beta[c]);
                    }
                }
            }
            bn.running_mean[c] =
                (T::one() - bn.momentum) * bn.running_mean[c] + bn.momentum * mean[c];
            bn.running_var[c] = (T::one() - bn.momentum) * bn.running_var[c] + bn.momentum * var[c];
        }
        Ok((out, Some(BnSaved { mean, var })))
    } else {
        for c in 0..s.c {
            let inv_std = (bn.running_var[c] + bn.eps).sqrt().recip();
            for b in 0..s.n {
                for r in 0..s.h {
                    for col in 0..s.w {
                        let xh = (x.get(b, c, r, col) - bn.running_mean[c]) * inv_std;
                        out.set(b, c, r, col, bn.gamma[c] * xh + bn.beta[c]);
                    }
                }
            }
        }
        Ok((out, None))
    }
}

/// Train-mode backward: gradients for input, gamma and beta.
pub fn batchnorm_bwd<T: Float>(
    x: &Tensor<T>,
    bn: &BatchNorm<T>,
    saved: &BnSaved<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<T>, Vec<T>)> {
    let s = x.shape();
    if grad_out.shape() != s {
        return Err(SmpError::Shape(format!(
            "batchnorm grad_out {} vs input {}",
            grad_out.shape(),
            s
        )));
    }
    let m = T::from(s.n * s.h * s.w).unwrap();
    let mut grad_x = Tensor::zeros(s);
    let mut grad_gamma = vec![T::zero(); s.c];
    let mut grad_beta = vec![T::zero(); s.c];
    for c in 0..s.c {
        let inv_std = (saved.var[c] + bn.eps).sqrt().recip();
        let mut sum_g = T::zero();
        let mut sum_gx = T::zero();
        for b in 0..s.n {
            for r in 0..s.h {
                for col in 0..s.w {
                    let g = grad_out.get(b, c, r, col);
                    let xh = (x.get(b, c, r, col) - saved.mean[c]) * inv_std;
                    sum_g = sum_g + g;
                    sum_gx = sum_gx + g * xh;
                }
            }
        }
        grad_gamma[c] = sum_gx;
        grad_beta[c] = sum_g;
        let scale = bn.gamma[c] * inv_std;
        for b in 0..s.n {
            for r in 0..s.h {
                for col in 0..s.w {
                    let g = grad_out.get(b, c, r, col);
                    let xh = (x.get(b, c, r, col) - saved.mean[c]) * inv_std;
                    grad_x.set(b, c, r, col, scale * (g - sum_g / m - xh * sum_gx / m));
                }
            }
        }
    }
    Ok((grad_x, grad_gamma, grad_beta))
}
