//! Concrete Calderón reproducing pair and spatial cutoffs on the grid,
//! plus the centralized scale-conversion helpers shared by every operator
//! piece and inequality check.

use num_complex::Complex64;

use crate::fft::{freq_modulus, sample_radial};
use crate::grid::GridFunction;
use crate::profiles::{eta_profile, phi0_profile, phi_profile};

/// Scale conversions between the classical `2^{-k}`-side conventions and
/// grid units. Grid frequency annuli are indexed by `k` (radius `~2^k`
/// in integer frequencies); spatial scales by the log radius `j` in grid
/// units. The convention-free relative spatial index is
/// `ell = j + k - J >= 0`, with `ell = 0` the base scale `j = J - k` dual
/// to annulus `k`. Martingale levels convert by `k_paper = -j_grid`.
pub mod scales {
    /// Base (dual) spatial log-scale of the frequency annulus `k`.
    pub fn base_spatial_log(grid_log: u32, k: i32) -> i32 {
        grid_log as i32 - k
    }

    /// Relative spatial index `ell = j + k - J` of the absolute spatial
    /// log-scale `j` against annulus `k`.
    pub fn rel_ell(grid_log: u32, k: i32, j: i32) -> i32 {
        j + k - grid_log as i32
    }

    /// Absolute spatial log-scale of the relative index `ell`.
    pub fn abs_spatial_log(grid_log: u32, k: i32, ell: i32) -> i32 {
        grid_log as i32 - k + ell
    }

    /// Paper martingale index of a grid level (side `2^j` ↔ side `2^{-k}`).
    pub fn paper_k_of_level(j: u32) -> i32 {
        -(j as i32)
    }

    /// Grid level of a paper martingale index.
    pub fn level_of_paper_k(k: i32) -> Option<u32> {
        if k < 0 {
            Some((-k) as u32)
        } else {
            None
        }
    }
}

/// The Calderón reproducing pair: `phi` a radial plateau supported in
/// `{1/2 < |xi| < 2}`, `eta = sqrt(psi / sum_k psi(2^-k .))` so that
/// `sum_k eta^2(2^-k xi) phi(2^-k xi) = 1` for every nonzero frequency.
#[derive(Debug, Clone, Copy, Default)]
pub struct CalderonPair;

impl CalderonPair {
    pub fn new() -> Self {
        CalderonPair
    }

    pub fn phi(&self, t: f64) -> f64 {
        phi_profile(t)
    }

    pub fn eta(&self, t: f64) -> f64 {
        eta_profile(t)
    }

    /// `phi(|xi| / 2^k)` sampled on the frequency grid.
    pub fn phi_k(&self, dim: u8, grid_log: u32, k: i32) -> GridFunction {
        let s = 2f64.powi(k);
        sample_radial(dim, grid_log, |r| phi_profile(r / s))
    }

    /// `eta(|xi| / 2^k)` sampled on the frequency grid.
    pub fn eta_k(&self, dim: u8, grid_log: u32, k: i32) -> GridFunction {
        let s = 2f64.powi(k);
        sample_radial(dim, grid_log, |r| eta_profile(r / s))
    }

    /// Annulus indices whose support meets the nonzero grid frequencies.
    pub fn k_range(&self, dim: u8, grid_log: u32) -> std::ops::RangeInclusive<i32> {
        let max_r = (dim as f64).sqrt() * (1u64 << (grid_log - 1)) as f64;
        // phi(r / 2^k) != 0 needs 2^{k-1} < r < 2^{k+1} for some grid r >= 1
        let k_max = max_r.log2().ceil() as i32 + 1;
        -1..=k_max
    }

    /// Max deviation of `sum_k eta^2 phi` from 1 over nonzero frequencies.
    pub fn reproducing_defect(&self, dim: u8, grid_log: u32) -> f64 {
        let mut worst = 0.0f64;
        let n = 1usize << grid_log;
        let len = n.pow(dim as u32);
        for idx in 0..len {
            let r = freq_modulus(dim, grid_log, idx);
            if r == 0.0 {
                continue;
            }
            let mut s = 0.0;
            for k in self.k_range(dim, grid_log) {
                let t = r / 2f64.powi(k);
                let e = eta_profile(t);
                s += e * e * phi_profile(t);
            }
            worst = worst.max((s - 1.0).abs());
        }
        worst
    }
}

/// Spatial cutoffs at a base scale `t` (grid units): `Phi0(x/t)` equals 1
/// for `|x| <= t/4` and vanishes for `|x| >= t/2`, and
/// `Psi_l(x) = Phi0(2^-l x / t) - Phi0(2^-l+1 x / t)` is supported in the
/// annulus `t 2^{l-3} <= |x| <= t 2^{l-1}`. The telescoping
/// `Phi0(2^-L x/t) = Phi0(x/t) + sum_{0<l<=L} Psi_l(x)` is exact pointwise.
#[derive(Debug, Clone, Copy)]
pub struct SpatialCutoffs {
    pub base_scale: f64,
}

impl SpatialCutoffs {
    pub fn new(base_scale: f64) -> Self {
        assert!(base_scale > 0.0);
        SpatialCutoffs { base_scale }
    }

    /// Base scale `2^j` in grid units.
    pub fn at_log_scale(j: i32) -> Self {
        Self::new(2f64.powi(j))
    }

    pub fn phi0(&self, r: f64) -> f64 {
        phi0_profile(r / self.base_scale)
    }

    /// `Phi0(2^-l x / t)`.
    pub fn phi0_dilated(&self, r: f64, l: i32) -> f64 {
        phi0_profile(r / (self.base_scale * 2f64.powi(l)))
    }

    pub fn psi(&self, r: f64, l: i32) -> f64 {
        self.phi0_dilated(r, l) - self.phi0_dilated(r, l - 1)
    }

    /// Samples `Phi0(. / t)` over signed spatial coordinates.
    pub fn sample_phi0(&self, dim: u8, grid_log: u32) -> GridFunction {
        sample_radial(dim, grid_log, |r| self.phi0(r))
    }

    /// Samples `Psi_l` over signed spatial coordinates.
    pub fn sample_psi(&self, dim: u8, grid_log: u32, l: i32) -> GridFunction {
        sample_radial(dim, grid_log, |r| self.psi(r, l))
    }
}

/// Pointwise multiply (in space) by a sampled cutoff.
pub fn multiply(f: &GridFunction, cutoff: &GridFunction) -> GridFunction {
    let mut out = f.clone();
    for (a, b) in out.values_mut().iter_mut().zip(cutoff.values()) {
        *a *= Complex64::new(b.re, 0.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducing_defect_machine_precision() {
        let pair = CalderonPair::new();
        assert!(pair.reproducing_defect(1, 6) < 1e-12);
        assert!(pair.reproducing_defect(2, 4) < 1e-12);
    }

    #[test]
    fn cutoff_telescoping_exact() {
        let c = SpatialCutoffs::at_log_scale(2);
        for l_max in 1..=4i32 {
            for r in [0.0, 0.7, 1.3, 2.9, 6.5, 13.0, 29.0] {
                let mut s = c.phi0(r);
                for l in 1..=l_max {
                    s += c.psi(r, l);
                }
                assert!((s - c.phi0_dilated(r, l_max)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn psi_annulus_support() {
        let c = SpatialCutoffs::at_log_scale(3); // t = 8
        // psi_1 supported in the annulus (t/4, t) = (2, 8)
        assert_eq!(c.psi(1.9, 1), 0.0);
        assert!(c.psi(3.0, 1) > 0.0);
        assert_eq!(c.psi(4.0, 1), 1.0);
        assert_eq!(c.psi(8.1, 1), 0.0);
    }

    #[test]
    fn scale_conversions() {
        assert_eq!(scales::base_spatial_log(10, 3), 7);
        assert_eq!(scales::rel_ell(10, 3, 7), 0);
        assert_eq!(scales::abs_spatial_log(10, 3, 2), 9);
        assert_eq!(scales::paper_k_of_level(4), -4);
        assert_eq!(scales::level_of_paper_k(-4), Some(4));
        assert_eq!(scales::level_of_paper_k(1), None);
    }
}
