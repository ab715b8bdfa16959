//! Frequency-localized, spatially truncated operator pieces and the
//! multiscale local operators built from them.

use num_complex::Complex64;

use crate::calderon::{multiply, scales, CalderonPair, SpatialCutoffs};
use crate::cube::DyadicCube;
use crate::error::{Error, Result};
use crate::fft::{apply_symbol, dft, idft, sample_radial};
use crate::grid::GridFunction;
use crate::symbols::MultiplierSymbol;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    /// `L_k`: multiply the transform by `phi(2^-k xi)`.
    L,
    /// `P_k`: multiply the transform by `eta(2^-k xi)`.
    P,
}

/// Littlewood-Paley projection at grid annulus `k`. When the annulus
/// misses all grid frequencies the result is the zero function.
pub fn lp_projection(f: &GridFunction, k: i32, which: Projection) -> GridFunction {
    let pair = CalderonPair::new();
    let sym = match which {
        Projection::L => pair.phi_k(f.dim(), f.log_size(), k),
        Projection::P => pair.eta_k(f.dim(), f.log_size(), k),
    };
    if sym.values().iter().all(|v| v.re == 0.0) {
        return GridFunction::zero(f.dim(), f.log_size());
    }
    apply_symbol(&sym, f)
}

/// Applies the full multiplier `m(D)` on the grid.
pub fn apply_multiplier(m: &MultiplierSymbol, f: &GridFunction) -> GridFunction {
    let sym = m.sample_on(f.dim(), f.log_size());
    apply_symbol(&sym, f)
}

/// Frequency-localized kernel `K_k = F^{-1}[phi_k m]`.
pub fn localized_kernel(m: &MultiplierSymbol, dim: u8, grid_log: u32, k: i32) -> GridFunction {
    let pair = CalderonPair::new();
    let phi_k = pair.phi_k(dim, grid_log, k);
    let mut sym = m.sample_on(dim, grid_log);
    for (s, p) in sym.values_mut().iter_mut().zip(phi_k.values()) {
        *s *= Complex64::new(p.re, 0.0);
    }
    idft(&sym)
}

/// Spatial decomposition of `K_k` into `n_pieces + 1` pieces: the base
/// piece carries `Phi0` at the dual scale `2^{J-k}`, pieces `1..n_pieces`
/// carry the annular `Psi_l`, and the final piece is the remainder so that
/// the telescoping sum reproduces `K_k` exactly (periodic wrap absorbed).
pub fn kernel_pieces(
    m: &MultiplierSymbol,
    dim: u8,
    grid_log: u32,
    k: i32,
    n_pieces: usize,
) -> Vec<GridFunction> {
    let kernel = localized_kernel(m, dim, grid_log, k);
    let base = scales::base_spatial_log(grid_log, k);
    let cut = SpatialCutoffs::at_log_scale(base);
    let mut out = Vec::with_capacity(n_pieces + 1);
    let mut acc = GridFunction::zero(dim, grid_log);
    let phi0 = cut.sample_phi0(dim, grid_log);
    let piece0 = multiply(&kernel, &phi0);
    acc = acc.add(&piece0);
    out.push(piece0);
    for l in 1..n_pieces as i32 {
        let psi = cut.sample_psi(dim, grid_log, l);
        let piece = multiply(&kernel, &psi);
        acc = acc.add(&piece);
        out.push(piece);
    }
    out.push(kernel.sub(&acc));
    out
}

/// The single piece `T_k^{(j)}`-kernel at absolute spatial log-scale `j`:
/// `F^{-1}[phi_k m] . Psi_ell(. / 2^{J-k})` with `ell = j + k - J >= 1`.
/// `final_piece` makes the outermost annulus absorb everything beyond it.
pub fn piece_kernel(
    m: &MultiplierSymbol,
    dim: u8,
    grid_log: u32,
    k: i32,
    j: i32,
    final_piece: bool,
) -> Option<GridFunction> {
    let ell = scales::rel_ell(grid_log, k, j);
    if ell < 1 {
        return None;
    }
    let kernel = localized_kernel(m, dim, grid_log, k);
    let base = scales::base_spatial_log(grid_log, k);
    let cut = SpatialCutoffs::at_log_scale(base);
    let cutoff = if final_piece {
        // 1 - Phi0(2^{-(ell-1)} x / t): everything outside the previous
        // telescoping stage
        sample_radial(dim, grid_log, |r| 1.0 - cut.phi0_dilated(r, ell - 1))
    } else {
        cut.sample_psi(dim, grid_log, ell)
    };
    Some(multiply(&kernel, &cutoff))
}

/// Largest useful absolute spatial log-scale: annuli beyond `J` cover no
/// grid point (`|x| <= sqrt(d) N/2 < 2^{J} `... the `Psi` support reaches
/// `2^{j-1}`, so `j = J + 1` still meets the 2-d corner region).
pub fn max_spatial_log(dim: u8, grid_log: u32) -> i32 {
    grid_log as i32 + if dim == 2 { 1 } else { 0 }
}

/// `T_j f = sum_{k in f_set, j + k - J >= 1} T_k^{(j)} P_k P_k f`, the
/// multiscale operator local at spatial scale `2^j`.
pub fn apply_t_j(
    f: &GridFunction,
    m: &MultiplierSymbol,
    j: i32,
    f_set: &[i32],
) -> GridFunction {
    apply_t_j_impl(f, m, j, f_set, false)
}

fn apply_t_j_impl(
    f: &GridFunction,
    m: &MultiplierSymbol,
    j: i32,
    f_set: &[i32],
    final_piece: bool,
) -> GridFunction {
    let dim = f.dim();
    let grid_log = f.log_size();
    let pair = CalderonPair::new();
    let mut out = GridFunction::zero(dim, grid_log);
    for &k in f_set {
        let Some(kernel) = piece_kernel(m, dim, grid_log, k, j, final_piece) else {
            continue;
        };
        if kernel.norm_inf() == 0.0 {
            continue;
        }
        // T_k^{(j)} P_k^2 f via one FFT chain
        let eta_k = pair.eta_k(dim, grid_log, k);
        let piece_sym = dft(&kernel);
        let mut fhat = dft(f);
        for ((a, e), s) in fhat.values_mut().iter_mut().zip(eta_k.values()).zip(piece_sym.values())
        {
            *a *= Complex64::new(e.re * e.re, 0.0) * s;
        }
        out = out.add(&idft(&fhat));
    }
    out
}

/// `sum_{j = n1..=n2} T_j f`; at `j = n2` the outermost annulus optionally
/// absorbs the telescoping remainder (used by reconstruction tests).
pub fn apply_truncated(
    f: &GridFunction,
    m: &MultiplierSymbol,
    n1: i32,
    n2: i32,
    f_set: &[i32],
) -> Result<GridFunction> {
    if n1 > n2 {
        return Err(Error::InvalidParameter(format!("need N1 <= N2, got {n1} > {n2}")));
    }
    let mut out = GridFunction::zero(f.dim(), f.log_size());
    for j in n1..=n2 {
        out = out.add(&apply_t_j(f, m, j, f_set));
    }
    Ok(out)
}

/// Same sum with the final `j = n2` stage replaced by the absorbing
/// remainder cutoff, so that together with the base pieces it reconstructs
/// `sum_k P_k^2 L_k m(D) f` exactly.
pub fn apply_truncated_absorbing(
    f: &GridFunction,
    m: &MultiplierSymbol,
    n1: i32,
    n2: i32,
    f_set: &[i32],
) -> Result<GridFunction> {
    if n1 > n2 {
        return Err(Error::InvalidParameter(format!("need N1 <= N2, got {n1} > {n2}")));
    }
    let mut out = GridFunction::zero(f.dim(), f.log_size());
    for j in n1..n2 {
        out = out.add(&apply_t_j(f, m, j, f_set));
    }
    out = out.add(&apply_t_j_impl(f, m, n2, f_set, true));
    Ok(out)
}

/// Base pieces `T_k^{(base)} P_k^2 f` (the `ell = 0` cutoff `Phi0`).
pub fn apply_base_pieces(f: &GridFunction, m: &MultiplierSymbol, f_set: &[i32]) -> GridFunction {
    let dim = f.dim();
    let grid_log = f.log_size();
    let pair = CalderonPair::new();
    let mut out = GridFunction::zero(dim, grid_log);
    for &k in f_set {
        let kernel = localized_kernel(m, dim, grid_log, k);
        let base = scales::base_spatial_log(grid_log, k);
        let cut = SpatialCutoffs::at_log_scale(base);
        let phi0 = cut.sample_phi0(dim, grid_log);
        let kernel = multiply(&kernel, &phi0);
        let eta_k = pair.eta_k(dim, grid_log, k);
        let piece_sym = dft(&kernel);
        let mut fhat = dft(f);
        for ((a, e), s) in fhat.values_mut().iter_mut().zip(eta_k.values()).zip(piece_sym.values())
        {
            *a *= Complex64::new(e.re * e.re, 0.0) * s;
        }
        out = out.add(&idft(&fhat));
    }
    out
}

/// Convolution kernel of the rescaled operator: the symbol is dilated to
/// `m(u / R)` and the kernel multiplied by the fixed annular cutoff `Psi`
/// (supported in `1/2 < |s| < 2` in mathematical units `s = x ref/N`).
///
/// `R` must be a power of two; `ref_freq * R <= N/4` keeps the dilated unit
/// sphere resolvable.
pub fn rescaled_kernel(
    m: &MultiplierSymbol,
    dim: u8,
    grid_log: u32,
    r_scale: f64,
    psi_profile: impl Fn(f64) -> f64,
) -> Result<GridFunction> {
    if r_scale <= 0.0 || r_scale.log2().fract().abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("R must be a power of two, got {r_scale}")));
    }
    let n = (1u64 << grid_log) as f64;
    if m.ref_freq * r_scale > n / 4.0 {
        return Err(Error::GridTooSmall(format!(
            "R = {r_scale} too large: ref * R = {} > N/4 = {}",
            m.ref_freq * r_scale,
            n / 4.0
        )));
    }
    let dilated = m.dilate(1.0 / r_scale);
    let kern = idft(&dilated.sample_on(dim, grid_log));
    let unit = n / m.ref_freq; // grid radius of math |s| = 1
    let cutoff = sample_radial(dim, grid_log, |rr| psi_profile(rr / unit));
    Ok(multiply(&kern, &cutoff))
}

/// Fraction of `||T_j f||_2` leaking outside `3 S` for `f` supported in a
/// cube `S` of side `2^j` (the discrete surrogate of exact locality).
pub fn locality_leakage(
    m: &MultiplierSymbol,
    f: &GridFunction,
    s: &DyadicCube,
    f_set: &[i32],
) -> Result<f64> {
    f.require_supported_in(s, "locality_leakage input")?;
    let j = s.log_side as i32;
    let g = apply_t_j(f, m, j, f_set);
    let total = g.norm_p(2.0);
    if total == 0.0 {
        return Ok(0.0);
    }
    let triple: std::collections::BTreeSet<[usize; 2]> =
        s.triple_points(f.log_size()).into_iter().collect();
    let mut outside = 0.0f64;
    for idx in 0..g.len() {
        let p = g.point_of(idx);
        if !triple.contains(&p) {
            outside += g.values()[idx].norm_sqr();
        }
    }
    Ok(outside.sqrt() / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft::convolve_direct;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lp_projection_disjoint_support_vanishes() {
        // f with transform supported at high annulus; L_k at a low annulus
        let mut fhat = GridFunction::zero(1, 6);
        // place mass at |xi| = 16 (annulus k = 4)
        fhat.values_mut()[16] = Complex64::new(1.0, 0.0);
        let f = idft(&fhat);
        let g = lp_projection(&f, 1, Projection::L);
        assert!(g.norm_inf() < 1e-14);
        // phi = 1 at |xi|/2^4 = 1, so L_4 reproduces the wave exactly
        let h = lp_projection(&f, 4, Projection::L);
        assert!(h.sub(&f).norm_inf() < 1e-13);
    }

    #[test]
    fn reproducing_sum() {
        // sum_k P_k^2 L_k f = f for zero-mean f
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut f = GridFunction::random_gaussian(1, 5, &mut rng);
        let mean: Complex64 = f.values().iter().sum::<Complex64>() / f.len() as f64;
        for v in f.values_mut() {
            *v -= mean;
        }
        let pair = CalderonPair::new();
        let mut acc = GridFunction::zero(1, 5);
        for k in pair.k_range(1, 5) {
            let lk = lp_projection(&f, k, Projection::L);
            let pk = lp_projection(&lk, k, Projection::P);
            let pk2 = lp_projection(&pk, k, Projection::P);
            acc = acc.add(&pk2);
        }
        let rel = acc.sub(&f).norm_p(2.0) / f.norm_p(2.0);
        assert!(rel < 1e-10, "reproducing defect {rel}");
    }

    #[test]
    fn lp_kernel_matches_direct_idft() {
        // Dirac input: output = kernel of L_k = idft(phi_k)
        let mut f = GridFunction::zero(1, 5);
        f.values_mut()[0] = Complex64::new(1.0, 0.0);
        let g = lp_projection(&f, 3, Projection::L);
        let want = idft(&CalderonPair::new().phi_k(1, 5, 3));
        assert!(g.sub(&want).norm_inf() < 1e-13);
    }

    #[test]
    fn kernel_pieces_telescope_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = MultiplierSymbol::custom("random-ish", 4.0, move |u| {
            Complex64::from_polar(1.0 / (1.0 + u[0] * u[0] + u[1] * u[1]), u[0] * 3.0)
        });
        let _ = &mut rng;
        for dim in [1u8, 2] {
            let grid_log = if dim == 1 { 6 } else { 5 };
            let k = 3;
            let pieces = kernel_pieces(&m, dim, grid_log, k, 4);
            let total = pieces.iter().fold(GridFunction::zero(dim, grid_log), |a, p| a.add(p));
            let want = localized_kernel(&m, dim, grid_log, k);
            let err = total.sub(&want).norm_inf();
            assert!(err <= 1e-12 * want.norm_inf().max(1e-300), "telescoping error {err}");
        }
        // zero symbol -> all pieces zero
        let z = MultiplierSymbol::custom("zero", 4.0, |_| Complex64::default());
        for p in kernel_pieces(&z, 1, 5, 2, 3) {
            assert_eq!(p.norm_inf(), 0.0);
        }
    }

    #[test]
    fn t_j_matches_direct_convolution() {
        // single k, m = 1: equals Psi_j-truncated L_k P_k^2 via direct convolution
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = GridFunction::random_gaussian(1, 5, &mut rng);
        let m = MultiplierSymbol::one();
        let grid_log = 5;
        let k = 3;
        let j = (grid_log - 3) as i32 + 1; // ell = 1
        let got = apply_t_j(&f, &m, j, &[k]);
        let kernel = piece_kernel(&m, 1, grid_log, k, j, false).unwrap();
        let pk = lp_projection(&lp_projection(&f, k, Projection::P), k, Projection::P);
        let want = convolve_direct(&kernel, &pk);
        let rel = got.sub(&want).norm_inf() / want.norm_inf().max(1e-300);
        assert!(rel < 1e-10, "direct convolution mismatch {rel}");
    }

    #[test]
    fn empty_f_set_gives_zero() {
        let f = GridFunction::zero(1, 4).add(&{
            let mut g = GridFunction::zero(1, 4);
            g.values_mut()[3] = Complex64::new(1.0, 0.0);
            g
        });
        let m = MultiplierSymbol::one();
        assert_eq!(apply_t_j(&f, &m, 3, &[]).norm_inf(), 0.0);
        // n1 = n2 equals apply_t_j
        let full: Vec<i32> = CalderonPair::new().k_range(1, 4).collect();
        let a = apply_truncated(&f, &m, 2, 2, &full).unwrap();
        let b = apply_t_j(&f, &m, 2, &full);
        assert!(a.sub(&b).norm_inf() < 1e-14);
    }

    #[test]
    fn rescaled_kernel_trivia() {
        let z = MultiplierSymbol::custom("zero", 4.0, |_| Complex64::default());
        let k = rescaled_kernel(&z, 1, 6, 1.0, crate::profiles::psi_annulus).unwrap();
        assert_eq!(k.norm_inf(), 0.0);
        // R too large rejected
        let m = MultiplierSymbol::one();
        assert!(rescaled_kernel(&m, 1, 6, 16.0, crate::profiles::psi_annulus).is_err());
        assert!(rescaled_kernel(&m, 1, 6, 3.0, crate::profiles::psi_annulus).is_err());
    }

    #[test]
    fn rescaled_single_bump_matches_direct() {
        // m = phi (one annulus bump), R = 1: kernel = Psi . idft(phi)
        let grid_log = 6;
        let m = MultiplierSymbol::custom("phi-bump", 4.0, |u| {
            Complex64::new(crate::profiles::phi_profile((u[0] * u[0] + u[1] * u[1]).sqrt()), 0.0)
        });
        let got = rescaled_kernel(&m, 1, grid_log, 1.0, crate::profiles::psi_annulus).unwrap();
        let direct = idft(&m.sample_on(1, grid_log));
        let n = (1u64 << grid_log) as f64;
        let unit = n / 4.0;
        let cutoff = sample_radial(1, grid_log, |r| crate::profiles::psi_annulus(r / unit));
        let want = multiply(&direct, &cutoff);
        assert!(got.sub(&want).norm_inf() < 1e-13);
    }
}
