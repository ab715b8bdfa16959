//! FFT helpers on `Z_N^d`, wrapping `rustfft`.
//!
//! Conventions: `dft(f)(xi) = sum_x f(x) e^{-2 pi i <x, xi> / N}` and
//! `idft` carries the `1/N^d` factor, so `idft(dft(f)) = f`. A multiplier
//! `m` acts as `f -> idft(m . dft(f))`; its convolution kernel is
//! `idft(m)` and acts by `(k * f)(x) = sum_y k(x - y) f(y)` (periodic,
//! counting measure).

use std::collections::HashMap;
use std::sync::Arc;
use std::sync::Mutex;

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftPlanner};

use crate::grid::GridFunction;

static PLANS: Lazy<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut map = PLANS.lock().unwrap();
    map.entry((n, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

fn transform(f: &GridFunction, inverse: bool) -> GridFunction {
    let n = f.side();
    let mut buf: Vec<Complex64> = f.values().to_vec();
    let fft = plan(n, inverse);
    match f.dim() {
        1 => fft.process(&mut buf),
        _ => {
            // rows
            for row in buf.chunks_exact_mut(n) {
                fft.process(row);
            }
            // columns
            let mut col = vec![Complex64::default(); n];
            for j in 0..n {
                for i in 0..n {
                    col[i] = buf[i * n + j];
                }
                fft.process(&mut col);
                for i in 0..n {
                    buf[i * n + j] = col[i];
                }
            }
        }
    }
    GridFunction::from_values(f.dim(), f.log_size(), buf).unwrap()
}

pub fn dft(f: &GridFunction) -> GridFunction {
    transform(f, false)
}

pub fn idft(f: &GridFunction) -> GridFunction {
    let mut out = transform(f, true);
    let scale = 1.0 / out.len() as f64;
    for v in out.values_mut() {
        *v *= scale;
    }
    out
}

/// Applies the Fourier multiplier with symbol samples `m` (indexed like a
/// grid function over frequency indices).
pub fn apply_symbol(m: &GridFunction, f: &GridFunction) -> GridFunction {
    let mut fhat = dft(f);
    for (a, b) in fhat.values_mut().iter_mut().zip(m.values()) {
        *a *= b;
    }
    idft(&fhat)
}

/// Periodic convolution `(k * f)(x) = sum_y k(x-y) f(y)` via FFT.
pub fn convolve(k: &GridFunction, f: &GridFunction) -> GridFunction {
    let kh = dft(k);
    apply_symbol(&kh, f)
}

/// Direct `O(N^{2d})` periodic convolution, kept as an oracle for the FFT
/// path on small grids.
pub fn convolve_direct(k: &GridFunction, f: &GridFunction) -> GridFunction {
    assert_eq!(k.len(), f.len());
    let n = f.side() as i64;
    let mut out = GridFunction::zero(f.dim(), f.log_size());
    match f.dim() {
        1 => {
            for x in 0..n {
                let mut acc = Complex64::default();
                for y in 0..n {
                    let d = (x - y).rem_euclid(n) as usize;
                    acc += k.values()[d] * f.values()[y as usize];
                }
                out.values_mut()[x as usize] = acc;
            }
        }
        _ => {
            let nu = n as usize;
            for x0 in 0..n {
                for x1 in 0..n {
                    let mut acc = Complex64::default();
                    for y0 in 0..n {
                        for y1 in 0..n {
                            let d0 = (x0 - y0).rem_euclid(n) as usize;
                            let d1 = (x1 - y1).rem_euclid(n) as usize;
                            acc += k.values()[d0 * nu + d1] * f.values()[y0 as usize * nu + y1 as usize];
                        }
                    }
                    out.values_mut()[x0 as usize * nu + x1 as usize] = acc;
                }
            }
        }
    }
    out
}

/// Signed frequency coordinates of the row-major index, in `[-N/2, N/2)`.
pub fn freq_of_index(dim: u8, log_size: u32, idx: usize) -> [i64; 2] {
    let n = 1usize << log_size;
    let signed = |x: usize| -> i64 {
        if x < n / 2 {
            x as i64
        } else {
            x as i64 - n as i64
        }
    };
    if dim == 1 {
        [signed(idx), 0]
    } else {
        [signed(idx / n), signed(idx % n)]
    }
}

/// Euclidean modulus of the signed frequency at `idx`.
pub fn freq_modulus(dim: u8, log_size: u32, idx: usize) -> f64 {
    let q = freq_of_index(dim, log_size, idx);
    ((q[0] * q[0] + q[1] * q[1]) as f64).sqrt()
}

/// Builds a grid function from a function of the signed coordinate vector.
pub fn sample<F: Fn([i64; 2]) -> Complex64>(dim: u8, log_size: u32, f: F) -> GridFunction {
    let mut out = GridFunction::zero(dim, log_size);
    for idx in 0..out.len() {
        let q = freq_of_index(dim, log_size, idx);
        out.values_mut()[idx] = f(q);
    }
    out
}

/// Builds a real radial grid function from a profile of the signed modulus.
pub fn sample_radial<F: Fn(f64) -> f64>(dim: u8, log_size: u32, f: F) -> GridFunction {
    sample(dim, log_size, |q| {
        let r = ((q[0] * q[0] + q[1] * q[1]) as f64).sqrt();
        Complex64::new(f(r), 0.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for dim in [1u8, 2] {
            let f = GridFunction::random_gaussian(dim, 3, &mut rng);
            let g = idft(&dft(&f));
            assert!(g.sub(&f).norm_inf() < 1e-12);
        }
    }

    #[test]
    fn fft_convolution_matches_direct() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for dim in [1u8, 2] {
            let k = GridFunction::random_gaussian(dim, 3, &mut rng);
            let f = GridFunction::random_gaussian(dim, 3, &mut rng);
            let a = convolve(&k, &f);
            let b = convolve_direct(&k, &f);
            let rel = a.sub(&b).norm_inf() / b.norm_inf().max(1e-300);
            assert!(rel < 1e-12);
        }
    }

    #[test]
    fn translation_equivariance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let k = GridFunction::random_gaussian(1, 4, &mut rng);
        let f = GridFunction::random_gaussian(1, 4, &mut rng);
        let v = [5i64, 0];
        let a = convolve(&k, &f.translate(&v));
        let b = convolve(&k, &f).translate(&v);
        assert!(a.sub(&b).norm_inf() < 1e-10);
    }
}
