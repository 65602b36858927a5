//! 2-D convolution (cross-correlation) with stride, dilation and zero
//! padding, plus its exact backward pass.

use crate::error::{Result, SmpError};
use crate::tensor::{Shape4, Tensor};
use num_traits::Float;

/// Convolution parameters and weights.
///
/// Weight layout is (out_ch, in_ch, kh, kw). Bias is per output channel
/// and disabled by default inside Conv-BN blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d<T = f32> {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub dilation: (usize, usize),
    pub padding: (usize, usize),
    pub weight: Tensor<T>,
    pub bias: Option<Vec<T>>,
}

impl<T: Float> Conv2d<T> {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        dilation: (usize, usize),
        padding: (usize, usize),
        weight: Tensor<T>,
        bias: Option<Vec<T>>,
    ) -> Result<Self> {
        let ws = weight.shape();
        if (ws.n, ws.c, ws.h, ws.w) != (out_ch, in_ch, kernel.0, kernel.1) {
            return Err(SmpError::Shape(format!(
                "conv weight shape {} does not match ({out_ch},{in_ch},{},{})",
                ws, kernel.0, kernel.1
            )));
        }
        if let Some(b) = &bias {
            if b.len() != out_ch {
                return Err(SmpError::Shape(format!(
                    "conv bias length {} != out_ch {out_ch}",
                    b.len()
                )));
            }
        }
        Ok(Conv2d {
            in_ch,
            out_ch,
            kernel,
            stride,
            dilation,
            padding,
            weight,
            bias,
        })
    }

    pub fn param_count(&self) -> usize {
        self.weight.shape().len() + self.bias.as_ref().map_or(0, |b| b.len())
    }
}

/// Output extent along one axis: floor((in + 2p - d*(k-1) - 1)/s) + 1.
pub fn conv2d_out_extent(input: usize, k: usize, s: usize, d: usize, p: usize) -> Result<usize> {
    let span = d * (k - 1) + 1;
    let padded = input + 2 * p;
    if padded < span {
        return Err(SmpError::Shape(format!(
            "conv output extent < 1: input {input}, kernel {k}, dilation {d}, padding {p}"
        )));
    }
    Ok((padded - span) / s + 1)
}

pub fn conv2d_fwd<T: Float>(x: &Tensor<T>, p: &Conv2d<T>) -> Result<Tensor<T>> {
    let s = x.shape();
    if s.c != p.in_ch {
        return Err(SmpError::Shape(format!(
            "conv input has {} channels, expected {}",
            s.c, p.in_ch
        )));
    }
    let oh = conv2d_out_extent(s.h, p.kernel.0, p.stride.0, p.dilation.0, p.padding.0)?;
    let ow = conv2d_out_extent(s.w, p.kernel.1, p.stride.1, p.dilation.1, p.padding.1)?;
    let out_shape = Shape4::new(s.n, p.out_ch, oh, ow)?;
    let mut out = Tensor::zeros(out_shape);
    let xd = x.data();
    let wd = p.weight.data();
    let od = out.data_mut();
    for b in 0..s.n {
        for oc in 0..p.out_ch {
            let bias = p.bias.as_ref().map_or(T::zero(), |bv| bv[oc]);
            for orow in 0..oh {
                for ocol in 0..ow {
                    let mut acc = bias;
                    for ic in 0..p.in_ch {
                        let x_base = (b * s.c + ic) * s.h;
                        let w_base = (oc * p.in_ch + ic) * p.kernel.0;
                        for kr in 0..p.kernel.0 {
                            let ir = (orow * p.stride.0 + kr * p.dilation.0) as isize
                                - p.padding.0 as isize;
                            if ir < 0 || ir as usize >= s.h {
                                continue;
                            }
                            let x_row = (x_base + ir as usize) * s.w;
                            let w_row = (w_base + kr) * p.kernel.1;
                            for kc in 0..p.kernel.1 {
                                let icol = (ocol * p.stride.1 + kc * p.dilation.1) as isize
                                    - p.padding.1 as isize;
                                if icol < 0 || icol as usize >= s.w {
                                    continue;
                                }
                                acc = acc + xd[x_row + icol as usize] * wd[w_row + kc];
                            }
                        }
                    }
                    od[out_shape.idx(b, oc, orow, ocol)] = acc;
                }
            }
        }
    }
    Ok(out)
}

/// Exact gradients of `conv2d_fwd` with respect to input, weight and bias.
pub fn conv2d_bwd<T: Float>(
    x: &Tensor<T>,
    p: &Conv2d<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Option<Vec<T>>)> {
    let s = x.shape();
    let gs = grad_out.shape();
    let oh = conv2d_out_extent(s.h, p.kernel.0, p.stride.0, p.dilation.0, p.padding.0)?;
    let ow = conv2d_out_extent(s.w, p.kernel.1, p.stride.1, p.dilation.1, p.padding.1)?;
    if (gs.n, gs.c, gs.h, gs.w) != (s.n, p.out_ch, oh, ow) {
        return Err(SmpError::Shape(format!(
            "conv grad_out shape {} inconsistent with forward output ({},{},{oh},{ow})",
            gs, s.n, p.out_ch
        )));
    }
    let mut grad_x = Tensor::zeros(s);
    let mut grad_w = Tensor::zeros(p.weight.shape());
    let mut grad_b = p.bias.as_ref().map(|b| vec![T::zero(); b.len()]);
    let xd = x.data();
    let wd = p.weight.data();
    let gd = grad_out.data();
    let gxd = grad_x.data_mut();
    let gwd = grad_w.data_mut();
    for b in 0..s.n {
        for oc in 0..p.out_ch {
            for orow in 0..oh {
                for ocol in 0..ow {
                    let g = gd[gs.idx(b, oc, orow, ocol)];
                    if let Some(gb) = grad_b.as_mut() {
                        gb[oc] = gb[oc] + g;
                    }
                    for ic in 0..p.in_ch {
                        let x_base = (b * s.c + ic) * s.h;
                        let w_base = (oc * p.in_ch + ic) * p.kernel.0;
                        for kr in 0..p.kernel.0 {
                            let ir = (orow * p.stride.0 + kr * p.dilation.0) as isize
                                - p.padding.0 as isize;
                            if ir < 0 || ir as usize >= s.h {
                                continue;
                            }
                            let x_row = (x_base + ir as usize) * s.w;
                            let w_row = (w_base + kr) * p.kernel.1;
                            for kc in 0..p.kernel.1 {
                                let icol = (ocol * p.stride.1 + kc * p.dilation.1) as isize
                                    - p.padding.1 as isize;
                                if icol < 0 || icol as usize >= s.w {
                                    continue;
                                }
                                let xi = x_row + icol as usize;
                                gxd[xi] = gxd[xi] + g * wd[w_row + kc];
                                gwd[w_row + kc] = gwd[w_row + kc] + g * xd[xi];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((grad_x, grad_w, grad_b))
}
