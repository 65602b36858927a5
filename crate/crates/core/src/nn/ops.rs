//! ReLU, 2x2 max pooling, bilinear upsampling and padding utilities.

use crate::error::{Result, SmpError};
use crate::smp::Window;
use crate::tensor::{Shape4, Tensor};
use num_traits::Float;

pub fn relu_fwd<T: Float>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Backward w.r.t. the saved forward input.
pub fn relu_bwd<T: Float>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if x.shape() != grad_out.shape() {
        return Err(SmpError::Shape(format!(
            "relu grad_out {} vs input {}",
            grad_out.shape(),
            x.shape()
        )));
    }
    let mut g = grad_out.clone();
    for (gv, xv) in g.data_mut().iter_mut().zip(x.data()) {
        if *xv <= T::zero() {
            *gv = T::zero();
        }
    }
    Ok(g)
}

/// 2x2/stride-2 max pooling. Ties go to the first (lowest row-major)
/// argmax. Returns the flat argmax indices for the backward pass.
pub fn maxpool2x2_fwd<T: Float>(x: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
    let s = x.shape();
    if s.h % 2 != 0 {
        return Err(SmpError::Divisibility { extent: s.h, window: 2 });
    }
    if s.w % 2 != 0 {
        return Err(SmpError::Divisibility { extent: s.w, window: 2 });
    }
    let out_shape = Shape4::new(s.n, s.c, s.h / 2, s.w / 2)?;
    let mut out = Tensor::zeros(out_shape);
    let mut argmax = vec![0usize; out_shape.len()];
    for b in 0..s.n {
        for c in 0..s.c {
            for orow in 0..out_shape.h {
                for ocol in 0..out_shape.w {
                    let mut best = x.get(b, c, orow * 2, ocol * 2);
                    let mut best_idx = s.idx(b, c, orow * 2, ocol * 2);
                    for dr in 0..2 {
                        for dc in 0..2 {
                            let v = x.get(b, c, orow * 2 + dr, ocol * 2 + dc);
                            if v > best {
                                best = v;
                                best_idx = s.idx(b, c, orow * 2 + dr, ocol * 2 + dc);
                            }
                        }
                    }
                    out.set(b, c, orow, ocol, best);
                    argmax[out_shape.idx(b, c, orow, ocol)] = best_idx;
                }
            }
        }
    }
    Ok((out, argmax))
}

pub fn maxpool2x2_bwd<T: Float>(
    in_shape: Shape4,
    argmax: &[usize],
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    if argmax.len() != grad_out.shape().len() {
        return Err(SmpError::Shape("maxpool argmax/grad_out length mismatch".into()));
    }
    let mut grad_x = Tensor::zeros(in_shape);
    let gd = grad_x.data_mut();
    for (i, g) in grad_out.data().iter().enumerate() {
        gd[argmax[i]] = gd[argmax[i]] + *g;
    }
    Ok(grad_x)
}

/// Bilinear interpolation weight for one output index under the
/// align-corners-false convention: source = (o + 0.5)/f - 0.5.
fn bilinear_taps<T: Float>(o: usize, factor: usize, extent: usize) -> (usize, usize, T) {
    let src = (o as f64 + 0.5) / factor as f64 - 0.5;
    let i0 = src.floor();
    let frac = src - i0;
    let lo = (i0.max(0.0) as usize).min(extent - 1);
    let hi = ((i0 + 1.0).max(0.0) as usize).min(extent - 1);
    (lo, hi, T::from(frac).unwrap())
}

pub fn bilinear_upsample_fwd<T: Float>(x: &Tensor<T>, factor: usize) -> Result<Tensor<T>> {
    if factor < 1 {
        return Err(SmpError::Arg("upsample factor must be >= 1".into()));
    }
    if factor == 1 {
        return Ok(x.clone());
    }
    let s = x.shape();
    let out_shape = Shape4::new(s.n, s.c, s.h * factor, s.w * factor)?;
    let mut out = Tensor::zeros(out_shape);
    for orow in 0..out_shape.h {
        let (r0, r1, fr) = bilinear_taps::<T>(orow, factor, s.h);
        for ocol in 0..out_shape.w {
            let (c0, c1, fc) = bilinear_taps::<T>(ocol, factor, s.w);
            for b in 0..s.n {
                for c in 0..s.c {
                    let one = T::one();
                    let v = x.get(b, c, r0, c0) * (one - fr) * (one - fc)
                        + x.get(b, c, r0, c1) * (one - fr) * fc
                        + x.get(b, c, r1, c0) * fr * (one - fc)
                        + x.get(b, c, r1, c1) * fr * fc;
                    out.set(b, c, orow, ocol, v);
                }
            }
        }
    }
    Ok(out)
}

/// Transpose of `bilinear_upsample_fwd` with the same tap weights.
pub fn bilinear_upsample_bwd<T: Float>(
    in_shape: Shape4,
    factor: usize,
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    if factor == 1 {
        return Ok(grad_out.clone());
    }
    let gs = grad_out.shape();
    if gs.h != in_shape.h * factor || gs.w != in_shape.w * factor {
        return Err(SmpError::Shape(format!(
            "upsample grad_out {} inconsistent with input {} factor {factor}",
            gs, in_shape
        )));
    }
    let mut grad_x = Tensor::zeros(in_shape);
    for orow in 0..gs.h {
        let (r0, r1, fr) = bilinear_taps::<T>(orow, factor, in_shape.h);
        for ocol in 0..gs.w {
            let (c0, c1, fc) = bilinear_taps::<T>(ocol, factor, in_shape.w);
            for b in 0..gs.n {
                for c in 0..gs.c {
                    let g = grad_out.get(b, c, orow, ocol);
                    let one = T::one();
                    let add = |t: &mut Tensor<T>, r: usize, cc: usize, w: T| {
                        let v = t.get(b, c, r, cc) + g * w;
                        t.set(b, c, r, cc, v);
                    };
                    add(&mut grad_x, r0, c0, (one - fr) * (one - fc));
                    add(&mut grad_x, r0, c1, (one - fr) * fc);
                    add(&mut grad_x, r1, c0, fr * (one - fc));
                    add(&mut grad_x, r1, c1, fr * fc);
                }
            }
        }
    }
    Ok(grad_x)
}

/// Pad bottom/right with zeros to the next multiple of the window.
/// Returns the padded tensor and the original (rows, cols) for cropping.
pub fn zero_pad_to_divisible<T: Float>(x: &Tensor<T>, win: Window) -> (Tensor<T>, (usize, usize)) {
    let s = x.shape();
    let new_h = s.h.div_ceil(win.h) * win.h;
    let new_w = s.w.div_ceil(win.w) * win.w;
    if new_h == s.h && new_w == s.w {
        return (x.clone(), (s.h, s.w));
    }
    let out_shape = Shape4::new(s.n, s.c, new_h, new_w).expect("padded shape valid");
    let mut out = Tensor::zeros(out_shape);
    for b in 0..s.n {
        for c in 0..s.c {
            for r in 0..s.h {
                for col in 0..s.w {
                    out.set(b, c, r, col, x.get(b, c, r, col));
                }
            }
        }
    }
    (out, (s.h, s.w))
}

/// Crop to the top-left (rows, cols) region.
pub fn crop_spatial<T: Float>(x: &Tensor<T>, rows: usize, cols: usize) -> Result<Tensor<T>> {
    let s = x.shape();
    if rows > s.h || cols > s.w {
        return Err(SmpError::Shape(format!(
            "crop {rows}x{cols} larger than tensor {}",
            s
        )));
    }
    let out_shape = Shape4::new(s.n, s.c, rows, cols)?;
    let mut out = Tensor::zeros(out_shape);
    for b in 0..s.n {
        for c in 0..s.c {
            for r in 0..rows {
                for col in 0..cols {
                    out.set(b, c, r, col, x.get(b, c, r, col));
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::random_uniform;

    fn s(n: usize, c: usize, h: usize, w: usize) -> Shape4 {
        Shape4::new(n, c, h, w).unwrap()
    }

    #[test]
    fn relu_basic() {
        let x = Tensor::new(s(1, 1, 1, 2), vec![-1.0, 2.0]).unwrap();
        assert_eq!(relu_fwd(&x).data(), &[0.0, 2.0]);
        let g = Tensor::<f32>::full(s(1, 1, 1, 2), 3.0);
        assert_eq!(relu_bwd(&x, &g).unwrap().data(), &[0.0, 3.0]);
    }

    #[test]
    fn maxpool_basic_and_routing() {
        let x = Tensor::new(s(1, 1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, argmax) = maxpool2x2_fwd(&x).unwrap();
        assert_eq!(y.data(), &[4.0]);
        let g = Tensor::new(s(1, 1, 1, 1), vec![5.0]).unwrap();
        let gx = maxpool2x2_bwd(x.shape(), &argmax, &g).unwrap();
        assert_eq!(gx.data(), &[0.0, 0.0, 0.0, 5.0]);
    }

    #[test]
    fn maxpool_on_0_to_15() {
        let x = Tensor::new(s(1, 1, 4, 4), (0..16).map(|i| i as f32).collect()).unwrap();
        let (y, _) = maxpool2x2_fwd(&x).unwrap();
        assert_eq!(y.data(), &[5.0, 7.0, 13.0, 15.0]);
    }

    #[test]
    fn maxpool_odd_extent_error() {
        let x = Tensor::<f32>::zeros(s(1, 1, 3, 4));
        assert!(matches!(maxpool2x2_fwd(&x), Err(SmpError::Divisibility { .. })));
    }

    #[test]
    fn upsample_identity_and_constant() {
        let x = random_uniform::<f32>(s(1, 2, 3, 3), 1, -1.0, 1.0).unwrap();
        assert_eq!(bilinear_upsample_fwd(&x, 1).unwrap(), x);
        let c = Tensor::<f32>::full(s(1, 1, 2, 2), 0.7);
        let up = bilinear_upsample_fwd(&c, 2).unwrap();
        assert!(up.data().iter().all(|v| (*v - 0.7).abs() < 1e-6));
    }

    #[test]
    fn upsample_closed_form_row() {
        let x = Tensor::new(s(1, 1, 2, 2), vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let up = bilinear_upsample_fwd(&x, 2).unwrap();
        for r in 0..4 {
            let row: Vec<f32> = (0..4).map(|c| up.get(0, 0, r, c)).collect();
            assert_eq!(row, vec![0.0, 0.25, 0.75, 1.0]);
        }
    }

    #[test]
    fn pad_and_crop_round_trip() {
        let win = Window::new(2, 2).unwrap();
        let x = random_uniform::<f32>(s(1, 2, 5, 4), 8, -1.0, 1.0).unwrap();
        let (padded, (h0, w0)) = zero_pad_to_divisible(&x, win);
        assert_eq!(padded.shape(), s(1, 2, 6, 4));
        assert_eq!((h0, w0), (5, 4));
        for col in 0..4 {
            assert_eq!(padded.get(0, 0, 5, col), 0.0);
        }
        assert_eq!(crop_spatial(&padded, h0, w0).unwrap(), x);

        let y = random_uniform::<f32>(s(1, 1, 4, 4), 9, -1.0, 1.0).unwrap();
        let (same, _) = zero_pad_to_divisible(&y, win);
        assert_eq!(same, y);
    }
}
