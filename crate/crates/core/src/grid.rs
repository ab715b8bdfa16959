use num_complex::Complex64;
use rand::Rng;

use crate::cube::DyadicCube;
use crate::error::{Error, Result};

/// A complex-valued function on the periodic grid `Z_N^d`, `N = 2^J`.
///
/// Values are stored row-major: for `d = 2` the point `(x0, x1)` lives at
/// index `x0 * N + x1`. All norms are counting-measure sums with no `1/N^d`
/// normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    dim: u8,
    log_size: u32,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn zero(dim: u8, log_size: u32) -> Self {
        assert!(dim == 1 || dim == 2, "dim must be 1 or 2");
        assert!(log_size >= 2, "grid needs J >= 2");
        let n = 1usize << log_size;
        let len = n.pow(dim as u32);
        GridFunction { dim, log_size, values: vec![Complex64::new(0.0, 0.0); len] }
    }

    pub fn from_values(dim: u8, log_size: u32, values: Vec<Complex64>) -> Result<Self> {
        assert!(dim == 1 || dim == 2, "dim must be 1 or 2");
        let n = 1usize << log_size;
        let expect = n.pow(dim as u32);
        if values.len() != expect {
            return Err(Error::InvalidParameter(format!(
                "expected {} values for d={} J={}, got {}",
                expect, dim, log_size, values.len()
            )));
        }
        Ok(GridFunction { dim, log_size, values })
    }

    pub fn from_reals(dim: u8, log_size: u32, reals: &[f64]) -> Result<Self> {
        let values = reals.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        Self::from_values(dim, log_size, values)
    }

    /// Complex Gaussian samples at every grid point (Box-Muller).
    pub fn random_gaussian<R: Rng>(dim: u8, log_size: u32, rng: &mut R) -> Self {
        let mut f = Self::zero(dim, log_size);
        for v in f.values.iter_mut() {
            *v = Complex64::new(gaussian(rng), gaussian(rng));
        }
        f
    }

    /// Gaussian samples inside `cube`, zero elsewhere.
    pub fn random_gaussian_on<R: Rng>(
        dim: u8,
        log_size: u32,
        cube: &DyadicCube,
        rng: &mut R,
    ) -> Self {
        let mut f = Self::zero(dim, log_size);
        for p in cube.points(log_size) {
            let idx = f.index_of(&p);
            f.values[idx] = Complex64::new(gaussian(rng), gaussian(rng));
        }
        f
    }

    pub fn dim(&self) -> u8 {
        self.dim
    }

    pub fn log_size(&self) -> u32 {
        self.log_size
    }

    pub fn side(&self) -> usize {
        1usize << self.log_size
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    #[inline]
    pub fn index_of(&self, p: &[usize; 2]) -> usize {
        match self.dim {
            1 => p[0],
            _ => p[0] * self.side() + p[1],
        }
    }

    #[inline]
    pub fn point_of(&self, idx: usize) -> [usize; 2] {
        match self.dim {
            1 => [idx, 0],
            _ => [idx / self.side(), idx % self.side()],
        }
    }

    #[inline]
    pub fn get(&self, p: &[usize; 2]) -> Complex64 {
        self.values[self.index_of(p)]
    }

    #[inline]
    pub fn set(&mut self, p: &[usize; 2], v: Complex64) {
        let idx = self.index_of(p);
        self.values[idx] = v;
    }

    /// `(sum |f|^p)^(1/p)` over the whole grid, counting measure.
    pub fn norm_p(&self, p: f64) -> f64 {
        assert!(p >= 1.0);
        if p == 2.0 {
            return self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        }
        self.values
            .iter()
            .map(|v| v.norm().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Counting-measure L^p norm restricted to a cube.
    pub fn norm_p_on(&self, cube: &DyadicCube, p: f64) -> f64 {
        assert!(p >= 1.0);
        cube.points(self.log_size)
            .map(|pt| self.get(&pt).norm().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }

    pub fn inner(&self, other: &GridFunction) -> Complex64 {
        assert_eq!(self.len(), other.len());
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a * b.conj())
            .sum()
    }

    pub fn add(&self, other: &GridFunction) -> GridFunction {
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(other.values.iter()) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(other.values.iter()) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, c: Complex64) -> GridFunction {
        let mut out = self.clone();
        for a in out.values.iter_mut() {
            *a *= c;
        }
        out
    }

    /// Pointwise restriction to a cube (multiplication by its indicator).
    pub fn restrict(&self, cube: &DyadicCube) -> GridFunction {
        let mut out = GridFunction::zero(self.dim, self.log_size);
        for p in cube.points(self.log_size) {
            let idx = self.index_of(&p);
            out.values[idx] = self.values[idx];
        }
        out
    }

    /// Checks that the function vanishes outside `cube`.
    pub fn supported_in(&self, cube: &DyadicCube) -> bool {
        let n = self.side();
        for (idx, v) in self.values.iter().enumerate() {
            if v.norm() != 0.0 {
                let p = self.point_of(idx);
                if !cube.contains_point(&p, n) {
                    return false;
                }
            }
        }
        true
    }

    pub fn require_supported_in(&self, cube: &DyadicCube, what: &str) -> Result<()> {
        if self.supported_in(cube) {
            Ok(())
        } else {
            Err(Error::SupportViolation(format!("{what} must be supported in {cube:?}")))
        }
    }

    /// Translation by `v` (periodic).
    pub fn translate(&self, v: &[i64; 2]) -> GridFunction {
        let n = self.side() as i64;
        let mut out = GridFunction::zero(self.dim, self.log_size);
        for idx in 0..self.len() {
            let p = self.point_of(idx);
            let q = [
                ((p[0] as i64 + v[0]).rem_euclid(n)) as usize,
                ((p[1] as i64 + v[1]).rem_euclid(n)) as usize,
            ];
            let qidx = self.index_of(&q);
            out.values[qidx] = self.values[idx];
        }
        out
    }
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Signed representative of a periodic coordinate, in `[-N/2, N/2)`.
#[inline]
pub fn signed_coord(x: usize, n: usize) -> i64 {
    let x = x as i64;
    let n = n as i64;
    if x < n / 2 {
        x
    } else {
        x - n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_counting_measure() {
        let f = GridFunction::from_reals(1, 2, &[0.0, 0.0, 0.0, 2.0]).unwrap();
        assert_eq!(f.norm_p(1.0), 2.0);
        assert_eq!(f.norm_p(2.0), 2.0);
        assert_eq!(f.norm_inf(), 2.0);
    }

    #[test]
    fn translate_wraps() {
        let f = GridFunction::from_reals(1, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let g = f.translate(&[-1, 0]);
        assert_eq!(g.values()[3].re, 1.0);
    }
}
