//! Binary PPM (P6) and PGM (P5) reading and writing, plus conversions
//! between image bytes and tensors / label maps.

use crate::data::LabelMap;
use crate::error::{Result, SmpError};
use crate::tensor::{Shape4, Tensor};
use std::path::Path;

fn format_err(offset: usize, msg: impl Into<String>) -> SmpError {
    SmpError::Format {
        offset,
        msg: msg.into(),
    }
}

struct HeaderParser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderParser<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(format_err(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_err(start, format!("invalid {what}")))
    }
}

fn decode_netpbm(bytes: &[u8], magic: &[u8; 2], channels: usize) -> Result<(usize, usize, Vec<u8>)> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(format_err(
            0,
            format!("expected magic {}", String::from_utf8_lossy(magic)),
        ));
    }
    let mut p = HeaderParser { bytes, pos: 2 };
    let width = p.number("width")?;
    let height = p.number("height")?;
    let maxval = p.number("maxval")?;
    if maxval != 255 {
        return Err(format_err(p.pos, format!("unsupported maxval {maxval}")));
    }
    if p.pos >= bytes.len() || !bytes[p.pos].is_ascii_whitespace() {
        return Err(format_err(p.pos, "expected single whitespace after maxval"));
    }
    p.pos += 1;
    let expected = width * height * channels;
    let payload = &bytes[p.pos..];
    if payload.len() < expected {
        return Err(format_err(
            bytes.len(),
            format!("truncated payload: {} of {expected} bytes", payload.len()),
        ));
    }
    Ok((width, height, payload[..expected].to_vec()))
}

pub fn decode_ppm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    decode_netpbm(bytes, b"P6", 3)
}

pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    decode_netpbm(bytes, b"P5", 1)
}

pub fn encode_ppm(width: usize, height: usize, rgb: &[u8]) -> Result<Vec<u8>> {
    if rgb.len() != width * height * 3 {
        return Err(SmpError::Size {
            expected: width * height * 3,
            got: rgb.len(),
        });
    }
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    Ok(out)
}

pub fn encode_pgm(width: usize, height: usize, gray: &[u8]) -> Result<Vec<u8>> {
    if gray.len() != width * height {
        return Err(SmpError::Size {
            expected: width * height,
            got: gray.len(),
        });
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(gray);
    Ok(out)
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u8>)> {
    decode_ppm(&std::fs::read(path)?)
}

pub fn write_ppm(path: impl AsRef<Path>, width: usize, height: usize, rgb: &[u8]) -> Result<()> {
    Ok(std::fs::write(path, encode_ppm(width, height, rgb)?)?)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u8>)> {
    decode_pgm(&std::fs::read(path)?)
}

pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, gray: &[u8]) -> Result<()> {
    Ok(std::fs::write(path, encode_pgm(width, height, gray)?)?)
}

/// (1,3,h,w) tensor in [0,1] to interleaved RGB bytes.
pub fn tensor_to_rgb(image: &Tensor<f32>) -> Result<Vec<u8>> {
    let s = image.shape();
    if s.n != 1 || s.c != 3 {
        return Err(SmpError::Shape(format!("expected 1x3xHxW image, got {s}")));
    }
    let mut out = Vec::with_capacity(s.h * s.w * 3);
    for r in 0..s.h {
        for c in 0..s.w {
            for ch in 0..3 {
                out.push((image.get(0, ch, r, c).clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
    }
    Ok(out)
}

/// Interleaved RGB bytes to a (1,3,h,w) tensor scaled to [0,1].
pub fn rgb_to_tensor(width: usize, height: usize, rgb: &[u8]) -> Result<Tensor<f32>> {
    if rgb.len() != width * height * 3 {
        return Err(SmpError::Size {
            expected: width * height * 3,
            got: rgb.len(),
        });
    }
    let shape = Shape4::new(1, 3, height, width)?;
    let mut t = Tensor::zeros(shape);
    for r in 0..height {
        for c in 0..width {
            for ch in 0..3 {
                t.set(0, ch, r, c, rgb[(r * width + c) * 3 + ch] as f32 / 255.0);
            }
        }
    }
    Ok(t)
}

pub fn label_to_bytes(label: &LabelMap) -> Vec<u8> {
    label.data.clone()
}

pub fn bytes_to_label(width: usize, height: usize, bytes: &[u8]) -> Result<LabelMap> {
    if bytes.len() != width * height {
        return Err(SmpError::Size {
            expected: width * height,
            got: bytes.len(),
        });
    }
    Ok(LabelMap {
        h: height,
        w: width,
        data: bytes.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, SynthConfig};

    #[test]
    fn ppm_round_trip_is_byte_exact() {
        let (image, _) = gen_synthetic(&SynthConfig::default(), 0).unwrap();
        let s = image.shape();
        let rgb = tensor_to_rgb(&image).unwrap();
        let file = encode_ppm(s.w, s.h, &rgb).unwrap();
        let (w, h, back) = decode_ppm(&file).unwrap();
        assert_eq!((w, h), (s.w, s.h));
        assert_eq!(back, rgb);
        assert_eq!(encode_ppm(w, h, &back).unwrap(), file);
    }

    #[test]
    fn tiny_ppm_header() {
        let mut file = b"P6 2 2 255\n".to_vec();
        file.extend_from_slice(&[0u8; 12]);
        let (w, h, data) = decode_ppm(&file).unwrap();
        assert_eq!((w, h), (2, 2));
        assert_eq!(data.len(), 12);
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let mut file = b"P6\n4 4\n255\n".to_vec();
        file.extend_from_slice(&[0u8; 10]); // needs 48
        match decode_ppm(&file) {
            Err(SmpError::Format { offset, msg }) => {
                assert_eq!(offset, file.len());
                assert!(msg.contains("truncated"));
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_and_maxval() {
        assert!(matches!(decode_ppm(b"P5\n1 1\n255\n\x00"), Err(SmpError::Format { offset: 0, .. })));
        assert!(decode_pgm(b"P5\n1 1\n65535\n\x00\x00").is_err());
    }

    #[test]
    fn pgm_round_trip() {
        let label = LabelMap {
            h: 3,
            w: 2,
            data: vec![0, 1, 2, 3, 255, 0],
        };
        let file = encode_pgm(label.w, label.h, &label_to_bytes(&label)).unwrap();
        let (w, h, data) = decode_pgm(&file).unwrap();
        assert_eq!(bytes_to_label(w, h, &data).unwrap(), label);
        assert_eq!(encode_pgm(w, h, &data).unwrap(), file);
    }
}
