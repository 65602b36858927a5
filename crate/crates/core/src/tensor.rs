//! Dense 4-D tensor in batch-channel-row-column layout.
//!
//! Data is row-major with the column index fastest, then row, channel,
//! batch. This layout is fixed for the whole crate.

use crate::error::{Result, SmpError};
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Shape of a 4-D tensor: batches, channels, rows, columns.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Shape4 {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape4 {
    pub fn new(n: usize, c: usize, h: usize, w: usize) -> Result<Self> {
        if n == 0 || c == 0 || h == 0 || w == 0 {
            return Err(SmpError::Shape(format!(
                "all extents must be positive, got ({n},{c},{h},{w})"
            )));
        }
        n.checked_mul(c)
            .and_then(|x| x.checked_mul(h))
            .and_then(|x| x.checked_mul(w))
            .ok_or_else(|| SmpError::Shape(format!("element count overflows: ({n},{c},{h},{w})")))?;
        Ok(Shape4 { n, c, h, w })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false // extents are strictly positive by construction
    }

    /// Flat offset of element (batch, channel, row, col).
    #[inline]
    pub fn idx(&self, n: usize, c: usize, r: usize, col: usize) -> usize {
        ((n * self.c + c) * self.h + r) * self.w + col
    }
}

impl std::fmt::Display for Shape4 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}x{}", self.n, self.c, self.h, self.w)
    }
}

/// Dense 4-D tensor. `f32` is the engine element type; `f64` is used by
/// the finite-difference gradient checks.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Shape4,
    data: Vec<T>,
}

impl<T: Float> Tensor<T> {
    pub fn new(shape: Shape4, values: Vec<T>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(SmpError::Size {
                expected: shape.len(),
                got: values.len(),
            });
        }
        Ok(Tensor { shape, data: values })
    }

    pub fn zeros(shape: Shape4) -> Self {
        Tensor {
            shape,
            data: vec![T::zero(); shape.len()],
        }
    }

    pub fn full(shape: Shape4, value: T) -> Self {
        Tensor {
            shape,
            data: vec![value; shape.len()],
        }
    }

    #[inline]
    pub fn shape(&self) -> Shape4 {
        self.shape
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, n: usize, c: usize, r: usize, col: usize) -> T {
        self.data[self.shape.idx(n, c, r, col)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, c: usize, r: usize, col: usize, v: T) {
        let i = self.shape.idx(n, c, r, col);
        self.data[i] = v;
    }

    /// Copy of batch `b` as a (1,c,h,w) tensor.
    pub fn batch_select(&self, b: usize) -> Result<Self> {
        if b >= self.shape.n {
            return Err(SmpError::Index(format!(
                "batch {b} out of range for {} batches",
                self.shape.n
            )));
        }
        let per = self.shape.c * self.shape.h * self.shape.w;
        let shape = Shape4::new(1, self.shape.c, self.shape.h, self.shape.w)?;
        Ok(Tensor {
            shape,
            data: self.data[b * per..(b + 1) * per].to_vec(),
        })
    }

    /// Concatenate single-or-multi-batch tensors along the batch axis.
    pub fn stack_batches(parts: &[Tensor<T>]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| SmpError::Arg("stack_batches of empty list".into()))?;
        let (c, h, w) = (first.shape.c, first.shape.h, first.shape.w);
        let mut data = Vec::new();
        let mut n = 0;
        for p in parts {
            if p.shape.c != c || p.shape.h != h || p.shape.w != w {
                return Err(SmpError::Shape(format!(
                    "stack_batches: {} vs {}",
                    p.shape, first.shape
                )));
            }
            n += p.shape.n;
            data.extend_from_slice(&p.data);
        }
        Ok(Tensor {
            shape: Shape4::new(n, c, h, w)?,
            data,
        })
    }

    /// True iff shapes match and max |a-b| <= tol.
    pub fn all_close(&self, other: &Tensor<T>, tol: T) -> Result<bool> {
        if self.shape != other.shape {
            return Err(SmpError::Shape(format!("{} vs {}", self.shape, other.shape)));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .all(|(a, b)| (*a - *b).abs() <= tol))
    }

    pub fn max_abs_diff(&self, other: &Tensor<T>) -> Result<T> {
        if self.shape != other.shape {
            return Err(SmpError::Shape(format!("{} vs {}", self.shape, other.shape)));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs())))
    }

    fn zip_with(&self, other: &Tensor<T>, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape != other.shape {
            return Err(SmpError::Shape(format!("{} vs {}", self.shape, other.shape)));
        }
        Ok(Tensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Tensor<T>) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor<T>) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor<T>) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, s: T) -> Self {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|a| *a * s).collect(),
        }
    }

    /// Inner product over all elements.
    pub fn dot(&self, other: &Tensor<T>) -> Result<T> {
        if self.shape != other.shape {
            return Err(SmpError::Shape(format!("{} vs {}", self.shape, other.shape)));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (a, b)| acc + *a * *b))
    }

    pub fn map<U: Float>(&self, f: impl Fn(T) -> U) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|a| f(*a)).collect(),
        }
    }
}

/// Deterministic uniform fill on [lo, hi). Same (shape, seed, lo, hi)
/// produces a bit-identical tensor on every platform.
pub fn random_uniform<T: Float>(shape: Shape4, seed: u64, lo: f64, hi: f64) -> Result<Tensor<T>> {
    if lo >= hi {
        return Err(SmpError::Arg(format!("lo {lo} must be < hi {hi}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = hi - lo;
    let data = (0..shape.len())
        .map(|_| {
            let u = rng.gen::<u32>() as f64 / (u32::MAX as f64 + 1.0);
            T::from(lo + span * u).unwrap()
        })
        .collect();
    Ok(Tensor { shape, data })
}

/// Uniform fill drawing from a caller-owned stream.
pub fn fill_uniform<T: Float>(shape: Shape4, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Result<Tensor<T>> {
    if lo >= hi {
        return Err(SmpError::Arg(format!("lo {lo} must be < hi {hi}")));
    }
    let span = hi - lo;
    let data = (0..shape.len())
        .map(|_| {
            let u = rng.gen::<u32>() as f64 / (u32::MAX as f64 + 1.0);
            T::from(lo + span * u).unwrap()
        })
        .collect();
    Ok(Tensor { shape, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(n: usize, c: usize, h: usize, w: usize) -> Shape4 {
        Shape4::new(n, c, h, w).unwrap()
    }

    #[test]
    fn create_row_major_layout() {
        let t = Tensor::<f32>::new(s(1, 1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(t.get(0, 0, 1, 0), 3.0);
        assert_eq!(t.get(0, 0, 0, 1), 2.0);
    }

    #[test]
    fn create_singleton() {
        let t = Tensor::<f32>::new(s(1, 1, 1, 1), vec![5.0]).unwrap();
        assert_eq!(t.get(0, 0, 0, 0), 5.0);
    }

    #[test]
    fn create_length_mismatch() {
        let r = Tensor::<f32>::new(s(1, 1, 2, 2), vec![1.0, 2.0, 3.0]);
        assert!(matches!(r, Err(SmpError::Size { expected: 4, got: 3 })));
    }

    #[test]
    fn layout_round_trip() {
        let shape = s(2, 3, 4, 5);
        let values: Vec<f32> = (0..shape.len()).map(|i| i as f32).collect();
        let t = Tensor::new(shape, values.clone()).unwrap();
        for n in 0..2 {
            for c in 0..3 {
                for r in 0..4 {
                    for col in 0..5 {
                        assert_eq!(t.get(n, c, r, col), values[shape.idx(n, c, r, col)]);
                    }
                }
            }
        }
    }

    #[test]
    fn batch_select_and_restack() {
        let t = random_uniform::<f32>(s(4, 2, 3, 3), 11, -1.0, 1.0).unwrap();
        let parts: Vec<_> = (0..4).map(|b| t.batch_select(b).unwrap()).collect();
        let restacked = Tensor::stack_batches(&parts).unwrap();
        assert_eq!(t, restacked);
    }

    #[test]
    fn batch_select_identity_and_oob() {
        let t = random_uniform::<f32>(s(1, 3, 4, 4), 3, 0.0, 1.0).unwrap();
        assert_eq!(t.batch_select(0).unwrap(), t);
        let t4 = random_uniform::<f32>(s(4, 1, 2, 2), 3, 0.0, 1.0).unwrap();
        assert!(matches!(t4.batch_select(4), Err(SmpError::Index(_))));
    }

    #[test]
    fn random_uniform_deterministic() {
        let a = random_uniform::<f32>(s(2, 2, 5, 5), 7, -2.0, 2.0).unwrap();
        let b = random_uniform::<f32>(s(2, 2, 5, 5), 7, -2.0, 2.0).unwrap();
        assert_eq!(a, b);
        let c = random_uniform::<f32>(s(2, 2, 5, 5), 8, -2.0, 2.0).unwrap();
        assert_ne!(a, c);
        assert!(a.data().iter().all(|v| (-2.0..2.0).contains(v)));
    }

    #[test]
    fn random_uniform_bad_range() {
        assert!(matches!(
            random_uniform::<f32>(s(1, 1, 1, 1), 0, 1.0, 1.0),
            Err(SmpError::Arg(_))
        ));
    }

    #[test]
    fn all_close_cases() {
        let a = random_uniform::<f32>(s(1, 1, 2, 2), 1, 0.0, 1.0).unwrap();
        assert!(a.all_close(&a, 0.0).unwrap());
        let b = a.map(|v| v + 0.2);
        assert!(!a.all_close(&b, 0.1).unwrap());
        let c = Tensor::<f32>::zeros(s(1, 1, 4, 1));
        assert!(matches!(a.all_close(&c, 0.1), Err(SmpError::Shape(_))));
    }

    #[test]
    fn map2_cases() {
        let a = Tensor::<f32>::new(s(1, 1, 1, 2), vec![1.0, 2.0]).unwrap();
        let b = Tensor::<f32>::new(s(1, 1, 1, 2), vec![3.0, 4.0]).unwrap();
        assert_eq!(a.add(&b).unwrap().data(), &[4.0, 6.0]);
        assert_eq!(a.sub(&a).unwrap().data(), &[0.0, 0.0]);
        let ones = Tensor::<f32>::full(s(1, 1, 1, 2), 1.0);
        assert_eq!(a.mul(&ones).unwrap(), a);
    }

    #[test]
    fn shape_rejects_zero_extent() {
        assert!(Shape4::new(0, 1, 1, 1).is_err());
        assert!(Shape4::new(1, 1, 0, 1).is_err());
    }
}
