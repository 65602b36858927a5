//! Per-pixel softmax cross-entropy with an ignore label.

use crate::error::{Result, SmpError};
use crate::tensor::Tensor;
use num_traits::Float;

/// Truth pixels with this value do not contribute to loss or gradient.
pub const IGNORE_LABEL: u8 = 255;

/// Mean over non-ignored pixels of -log softmax at the true class.
///
/// `labels` is (n, h, w) row-major with class indices; logits are
/// (n, classes, h, w). Returns the loss and the softmax probabilities
/// (saved for the backward pass).
pub fn softmax_xent_fwd<T: Float>(
    logits: &Tensor<T>,
    labels: &[u8],
) -> Result<(T, Tensor<T>)> {
    let s = logits.shape();
    if labels.len() != s.n * s.h * s.w {
        return Err(SmpError::Shape(format!(
            "labels length {} != {}x{}x{}",
            labels.len(),
            s.n,
            s.h,
            s.w
        )));
    }
    let classes = s.c;
    let mut probs = Tensor::zeros(s);
    let mut loss = T::zero();
    let mut count = 0usize;
    for b in 0..s.n {
        for r in 0..s.h {
            for col in 0..s.w {
                let label = labels[(b * s.h + r) * s.w + col];
                // stable softmax per pixel
                let mut max = logits.get(b, 0, r, col);
                for c in 1..classes {
                    max = max.max(logits.get(b, c, r, col));
                }
                let mut denom = T::zero();
                for c in 0..classes {
                    denom = denom + (logits.get(b, c, r, col) - max).exp();
                }
                for c in 0..classes {
                    probs.set(b, c, r, col, (logits.get(b, c, r, col) - max).exp() / denom);
                }
                if label == IGNORE_LABEL {
                    continue;
                }
                if label as usize >= classes {
                    return Err(SmpError::Label {
                        label: label as usize,
                        classes,
                    });
                }
                loss = loss - probs.get(b, label as usize, r, col).ln();
                count += 1;
            }
        }
    }
    if count > 0 {
        loss = loss / T::from(count).unwrap();
    }
    Ok((loss, probs))
}

/// Gradient of the mean loss w.r.t. the logits.
pub fn softmax_xent_bwd<T: Float>(probs: &Tensor<T>, labels: &[u8]) -> Result<Tensor<T>> {
    let s = probs.shape();
    if labels.len() != s.n * s.h * s.w {
        return Err(SmpError::Shape("labels length mismatch".into()));
    }
    let count = labels.iter().filter(|l| **l != IGNORE_LABEL).count();
    let mut grad = Tensor::zeros(s);
    if count == 0 {
        return Ok(grad);
    }
    let inv = T::from(count).unwrap().recip();
    for b in 0..s.n {
        for r in 0..s.h {
            for col in 0..s.w {
                let label = labels[(b * s.h + r) * s.w + col];
                if label == IGNORE_LABEL {
                    continue;
                }
                for c in 0..s.c {
                    let p = probs.get(b, c, r, col);
                    let target = if c == label as usize { T::one() } else { T::zero() };
                    grad.set(b, c, r, col, (p - target) * inv);
                }
            }
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape4;

    #[test]
    fn uniform_logits_ln_c() {
        let shape = Shape4::new(1, 4, 2, 2).unwrap();
        let logits = Tensor::<f64>::zeros(shape);
        let labels = vec![0u8, 1, 2, 3];
        let (loss, _) = softmax_xent_fwd(&logits, &labels).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn one_hot_loss_vanishes() {
        let shape = Shape4::new(1, 3, 1, 1).unwrap();
        let mut prev = f64::INFINITY;
        for mag in [1.0, 5.0, 20.0] {
            let logits = Tensor::new(shape, vec![mag, 0.0, 0.0]).unwrap();
            let (loss, _) = softmax_xent_fwd(&logits, &[0u8]).unwrap();
            assert!(loss < prev);
            prev = loss;
        }
        assert!(prev < 1e-8);
    }

    #[test]
    fn label_out_of_range() {
        let shape = Shape4::new(1, 2, 1, 1).unwrap();
        let logits = Tensor::<f32>::zeros(shape);
        assert!(matches!(
            softmax_xent_fwd(&logits, &[5u8]),
            Err(SmpError::Label { label: 5, classes: 2 })
        ));
    }

    #[test]
    fn ignored_pixels_get_zero_grad() {
        let shape = Shape4::new(1, 2, 1, 2).unwrap();
        let logits = Tensor::new(shape, vec![0.3, -0.1, 0.2, 0.9]).unwrap();
        let labels = vec![1u8, IGNORE_LABEL];
        let (_, probs) = softmax_xent_fwd(&logits, &labels).unwrap();
        let g = softmax_xent_bwd(&probs, &labels).unwrap();
        assert_eq!(g.get(0, 0, 0, 1), 0.0);
        assert_eq!(g.get(0, 1, 0, 1), 0.0);
        assert!(g.get(0, 0, 0, 0) != 0.0);
    }
}
