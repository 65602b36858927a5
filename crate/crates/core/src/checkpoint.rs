//! Flat binary checkpoint container for network parameters.
//!
//! Byte layout (all integers little-endian):
//!   magic   8 bytes  "SMPNET1\0"
//!   version u32      currently 1
//!   classes u32
//!   training u8
//!   n_layers u32
//!   layer table, one entry per layer:
//!     tag u8, then tag-specific fields (u32 unless noted):
//!       0 conv:     in_ch out_ch kh kw sh sw dh dw ph pw has_bias(u8)
//!       1 bn:       channels eps(f32) momentum(f32)
//!       2 relu | 3 maxpool | 5 merge | 7 expand: no fields
//!       4 split | 6 shrink | 9 pad: win_w win_h
//!       8 upsample: factor
//!       10 add_from: layer index
//!   data section: for each layer in order, raw f32 little-endian values:
//!     conv weight then bias (if present); bn gamma, beta, running mean,
//!     running variance.
//!
//! Save -> load -> save is byte-identical.

use crate::error::{Result, SmpError};
use crate::net::{LayerKind, Network};
use crate::nn::{BatchNorm, Conv2d};
use crate::smp::Window;
use crate::tensor::{Shape4, Tensor};
use std::path::Path;

const MAGIC: &[u8; 8] = b"SMPNET1\0";
const VERSION: u32 = 1;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f32s(&mut self, vs: &[f32]) {
        for v in vs {
            self.f32(*v);
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(SmpError::Format {
                offset: self.pos,
                msg: format!("unexpected end of checkpoint, needed {n} bytes"),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        (0..n).map(|_| self.f32()).collect()
    }
}

pub fn to_bytes(net: &Network<f32>) -> Vec<u8> {
    let mut w = Writer { buf: Vec::new() };
    w.buf.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.u32(net.classes as u32);
    w.u8(net.training as u8);
    w.u32(net.layers.len() as u32);
    for layer in &net.layers {
        match layer {
            LayerKind::Conv(c) => {
                w.u8(0);
                for v in [
                    c.in_ch, c.out_ch, c.kernel.0, c.kernel.1, c.stride.0, c.stride.1,
                    c.dilation.0, c.dilation.1, c.padding.0, c.padding.1,
                ] {
                    w.u32(v as u32);
                }
                w.u8(c.bias.is_some() as u8);
            }
            LayerKind::BatchNorm(b) => {
                w.u8(1);
                w.u32(b.channels as u32);
                w.f32(b.eps);
                w.f32(b.momentum);
            }
            LayerKind::Relu => w.u8(2),
            LayerKind::MaxPool => w.u8(3),
            LayerKind::Split(win) => {
                w.u8(4);
                w.u32(win.w as u32);
                w.u32(win.h as u32);
            }
            LayerKind::Merge => w.u8(5),
            LayerKind::Shrink(win) => {
                w.u8(6);
                w.u32(win.w as u32);
                w.u32(win.h as u32);
            }
            LayerKind::Expand => w.u8(7),
            LayerKind::Upsample(f) => {
                w.u8(8);
                w.u32(*f as u32);
            }
            LayerKind::Pad(win) => {
                w.u8(9);
                w.u32(win.w as u32);
                w.u32(win.h as u32);
            }
            LayerKind::AddFrom(i) => {
                w.u8(10);
                w.u32(*i as u32);
            }
        }
    }
    for layer in &net.layers {
        match layer {
            LayerKind::Conv(c) => {
                w.f32s(c.weight.data());
                if let Some(b) = &c.bias {
                    w.f32s(b);
                }
            }
            LayerKind::BatchNorm(b) => {
                w.f32s(&b.gamma);
                w.f32s(&b.beta);
                w.f32s(&b.running_mean);
                w.f32s(&b.running_var);
            }
            _ => {}
        }
    }
    w.buf
}

enum LayerHeader {
    Conv {
        in_ch: usize,
        out_ch: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        dilation: (usize, usize),
        padding: (usize, usize),
        has_bias: bool,
    },
    Bn {
        channels: usize,
        eps: f32,
        momentum: f32,
    },
    Simple(LayerKind<f32>),
}

pub fn from_bytes(bytes: &[u8]) -> Result<Network<f32>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(SmpError::Format {
            offset: 0,
            msg: "bad checkpoint magic".into(),
        });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(SmpError::Format {
            offset: 8,
            msg: format!("unsupported checkpoint version {version}"),
        });
    }
    let classes = r.u32()? as usize;
    let training = r.u8()? != 0;
    let n_layers = r.u32()? as usize;

    let mut headers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let at = r.pos;
        let tag = r.u8()?;
        let header = match tag {
            0 => {
                let f: Vec<usize> = (0..10).map(|_| r.u32().map(|v| v as usize)).collect::<Result<_>>()?;
                LayerHeader::Conv {
                    in_ch: f[0],
                    out_ch: f[1],
                    kernel: (f[2], f[3]),
                    stride: (f[4], f[5]),
                    dilation: (f[6], f[7]),
                    padding: (f[8], f[9]),
                    has_bias: r.u8()? != 0,
                }
            }
            1 => LayerHeader::Bn {
                channels: r.u32()? as usize,
                eps: r.f32()?,
                momentum: r.f32()?,
            },
            2 => LayerHeader::Simple(LayerKind::Relu),
            3 => LayerHeader::Simple(LayerKind::MaxPool),
            4 => LayerHeader::Simple(LayerKind::Split(Window::new(
                r.u32()? as usize,
                r.u32()? as usize,
            )?)),
            5 => LayerHeader::Simple(LayerKind::Merge),
            6 => LayerHeader::Simple(LayerKind::Shrink(Window::new(
                r.u32()? as usize,
                r.u32()? as usize,
            )?)),
            7 => LayerHeader::Simple(LayerKind::Expand),
            8 => LayerHeader::Simple(LayerKind::Upsample(r.u32()? as usize)),
            9 => LayerHeader::Simple(LayerKind::Pad(Window::new(
                r.u32()? as usize,
                r.u32()? as usize,
            )?)),
            10 => LayerHeader::Simple(LayerKind::AddFrom(r.u32()? as usize)),
            t => {
                return Err(SmpError::Format {
                    offset: at,
                    msg: format!("unknown layer tag {t}"),
                })
            }
        };
        headers.push(header);
    }

    let mut layers = Vec::with_capacity(n_layers);
    for header in headers {
        let layer = match header {
            LayerHeader::Conv {
                in_ch,
                out_ch,
                kernel,
                stride,
                dilation,
                padding,
                has_bias,
            } => {
                let weight = Tensor::new(
                    Shape4::new(out_ch, in_ch, kernel.0, kernel.1)?,
                    r.f32s(out_ch * in_ch * kernel.0 * kernel.1)?,
                )?;
                let bias = if has_bias { Some(r.f32s(out_ch)?) } else { None };
                LayerKind::Conv(Conv2d::new(
                    in_ch, out_ch, kernel, stride, dilation, padding, weight, bias,
                )?)
            }
            LayerHeader::Bn { channels, eps, momentum } => {
                let mut bn = BatchNorm::new(channels);
                bn.eps = eps;
                bn.momentum = momentum;
                bn.gamma = r.f32s(channels)?;
                bn.beta = r.f32s(channels)?;
                bn.running_mean = r.f32s(channels)?;
                bn.running_var = r.f32s(channels)?;
                LayerKind::BatchNorm(bn)
            }
            LayerHeader::Simple(k) => k,
        };
        layers.push(layer);
    }
    if r.pos != bytes.len() {
        return Err(SmpError::Format {
            offset: r.pos,
            msg: format!("{} trailing bytes", bytes.len() - r.pos),
        });
    }
    Ok(Network {
        layers,
        classes,
        training,
    })
}

pub fn save(net: &Network<f32>, path: impl AsRef<Path>) -> Result<()> {
    Ok(std::fs::write(path, to_bytes(net))?)
}

pub fn load(path: impl AsRef<Path>) -> Result<Network<f32>> {
    from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{build_toy_smp, ArchConfig};

    #[test]
    fn save_load_save_is_byte_identical() {
        let cfg = ArchConfig {
            widths: [4, 6, 8],
            ..ArchConfig::default()
        };
        let net = build_toy_smp(&cfg).unwrap();
        let bytes1 = to_bytes(&net);
        let net2 = from_bytes(&bytes1).unwrap();
        let bytes2 = to_bytes(&net2);
        assert_eq!(bytes1, bytes2);
        assert_eq!(net2.param_count(), net.param_count());
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(from_bytes(b"nope"), Err(SmpError::Format { .. })));
        let net = build_toy_smp(&ArchConfig::default()).unwrap();
        let mut bytes = to_bytes(&net);
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(from_bytes(&bytes), Err(SmpError::Format { .. })));
    }
}
