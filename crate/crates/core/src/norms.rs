//! Numerical multiplier-norm estimation: exact endpoints, probe-based
//! lower bounds with nonlinear power refinement, Young-type upper bounds,
//! and the scale-invariant piece norms `A^{k,l}` and their aggregates.
//!
//! Operator norms are counting-measure `l^p -> l^q` norms of periodic
//! convolutions. `q = infinity` is the sentinel `f64::INFINITY`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::calderon::{multiply, scales, SpatialCutoffs};
use crate::error::{Error, Result};
use crate::fft::{apply_symbol, dft, idft};
use crate::grid::GridFunction;
use crate::symbols::MultiplierSymbol;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowerMethod {
    ExactL2,
    ExactKernelNorm,
    Probe,
    PowerIteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpperMethod {
    ExactL2,
    ExactKernelNorm,
    Young,
    TrivialInfinity,
}

#[derive(Debug, Clone, Copy)]
pub struct NormEstimate {
    pub lower: f64,
    pub upper: f64,
    pub method_lower: LowerMethod,
    pub method_upper: UpperMethod,
}

impl NormEstimate {
    pub fn exact(v: f64, m: LowerMethod, mu: UpperMethod) -> Self {
        NormEstimate { lower: v, upper: v, method_lower: m, method_upper: mu }
    }

    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }
}

fn inv(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

fn norm_with_inf(f: &GridFunction, p: f64) -> f64 {
    if p.is_infinite() {
        f.norm_inf()
    } else {
        f.norm_p(p)
    }
}

/// Probe battery size knobs.
#[derive(Debug, Clone, Copy)]
pub struct ProbeBudget {
    pub gaussians: usize,
    pub wave_packets: usize,
    pub ascent_steps: usize,
    pub seed: u64,
}

impl Default for ProbeBudget {
    fn default() -> Self {
        ProbeBudget { gaussians: 64, wave_packets: 16, ascent_steps: 20, seed: 0x9E0B }
    }
}

impl ProbeBudget {
    pub fn light() -> Self {
        ProbeBudget { gaussians: 12, wave_packets: 8, ascent_steps: 10, seed: 0x9E0B }
    }
}

/// Ratio `||T f||_q / ||f||_p` for the convolution with symbol samples.
fn ratio(symbol: &GridFunction, f: &GridFunction, p: f64, q: f64) -> f64 {
    let nf = norm_with_inf(f, p);
    if nf == 0.0 {
        return 0.0;
    }
    let tf = apply_symbol(symbol, f);
    norm_with_inf(&tf, q) / nf
}

/// Dual element maximizing `Re <f, h>` under `||f||_p = 1`:
/// `f = |h|^{p'-1} sgn(h)`, normalized. For `p = 1` a Dirac at the peak.
fn holder_dual(h: &GridFunction, p: f64) -> GridFunction {
    let mut out = GridFunction::zero(h.dim(), h.log_size());
    if p == 1.0 {
        let (idx, _) = h
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
            .unwrap();
        let v = h.values()[idx];
        out.values_mut()[idx] = if v.norm() > 0.0 { v / v.norm() } else { Complex64::new(1.0, 0.0) };
        return out;
    }
    let pd = p / (p - 1.0); // p'
    for (o, v) in out.values_mut().iter_mut().zip(h.values()) {
        let a = v.norm();
        if a > 0.0 {
            *o = (v / a) * a.powf(pd - 1.0);
        }
    }
    let n = norm_with_inf(&out, p);
    if n > 0.0 {
        out.scale(Complex64::new(1.0 / n, 0.0))
    } else {
        out
    }
}

/// One step of the nonlinear power method for `||T||_{p->q}` on a
/// convolution operator with the given symbol. Returns the refined probe.
fn power_step(symbol: &GridFunction, f: &GridFunction, p: f64, q: f64) -> GridFunction {
    let tf = apply_symbol(symbol, f);
    // g in the unit ball of L^{q'} pairing maximally with Tf
    let g = if q.is_infinite() {
        holder_dual(&tf, 1.0)
    } else {
        holder_dual(&tf, q / (q - 1.0))
    };
    // adjoint: symbol conjugate
    let mut conj_sym = symbol.clone();
    for v in conj_sym.values_mut() {
        *v = v.conj();
    }
    let tstar_g = apply_symbol(&conj_sym, &g);
    // f maximizing Re<f, T*g> under ||f||_p = 1
    holder_dual(&tstar_g, p)
}

/// Probe-based lower bound (no exact shortcuts); exposed separately so the
/// probe engine can be compared against exact paths.
pub fn probe_lower_bound(
    symbol: &GridFunction,
    p: f64,
    q: f64,
    budget: &ProbeBudget,
) -> f64 {
    let dim = symbol.dim();
    let grid_log = symbol.log_size();
    let n = symbol.side();
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let mut best = 0.0f64;
    let mut best_probe: Option<GridFunction> = None;
    let consider = |f: GridFunction, best: &mut f64, best_probe: &mut Option<GridFunction>| {
        let r = ratio(symbol, &f, p, q);
        if r > *best {
            *best = r;
            *best_probe = Some(f);
        }
    };

    // pure waves at the strongest symbol frequencies
    let mut order: Vec<usize> = (0..symbol.len()).collect();
    order.sort_by(|&a, &b| {
        symbol.values()[b]
            .norm()
            .partial_cmp(&symbol.values()[a].norm())
            .unwrap()
            .then(a.cmp(&b))
    });
    for &idx in order.iter().take(8) {
        if symbol.values()[idx].norm() == 0.0 {
            break;
        }
        let mut fhat = GridFunction::zero(dim, grid_log);
        fhat.values_mut()[idx] = Complex64::new(1.0, 0.0);
        consider(idft(&fhat), &mut best, &mut best_probe);
    }

    // Dirac
    let mut dirac = GridFunction::zero(dim, grid_log);
    dirac.values_mut()[0] = Complex64::new(1.0, 0.0);
    consider(dirac, &mut best, &mut best_probe);

    // Gaussian noise
    for _ in 0..budget.gaussians {
        consider(GridFunction::random_gaussian(dim, grid_log, &mut rng), &mut best, &mut best_probe);
    }

    // wave packets: modulated Gaussian envelopes at the strongest
    // frequencies, over a dyadic range of widths; in 2-d the envelope is
    // squeezed transversally to the modulation (Knapp-type packets)
    let top_freqs: Vec<usize> = order.iter().take(4).copied().collect();
    let mut wp = 0usize;
    'outer: for &fi in &top_freqs {
        let xi = crate::fft::freq_of_index(dim, grid_log, fi);
        let ximod = ((xi[0] * xi[0] + xi[1] * xi[1]) as f64).sqrt().max(1.0);
        for wexp in 1..=4u32 {
            if wp >= budget.wave_packets {
                break 'outer;
            }
            wp += 1;
            let sigma_par = (n as f64 / 2f64.powi(wexp as i32)).max(1.0);
            // transversal width ~ sqrt of the parallel wavelength scale
            let sigma_perp = if dim == 2 {
                (n as f64 / ximod.sqrt() / 2f64.powi(wexp as i32 - 1)).max(1.0)
            } else {
                sigma_par
            };
            let mut f = GridFunction::zero(dim, grid_log);
            let dir = if ximod > 0.0 {
                [xi[0] as f64 / ximod, xi[1] as f64 / ximod]
            } else {
                [1.0, 0.0]
            };
            for idx in 0..f.len() {
                let ptu = f.point_of(idx);
                let x = [
                    crate::grid::signed_coord(ptu[0], n) as f64,
                    crate::grid::signed_coord(ptu[1], n) as f64,
                ];
                let par = x[0] * dir[0] + x[1] * dir[1];
                let perp = -x[0] * dir[1] + x[1] * dir[0];
                let env =
                    (-0.5 * (par / sigma_par).powi(2) - 0.5 * (perp / sigma_perp).powi(2)).exp();
                let phase = 2.0 * std::f64::consts::PI
                    * (x[0] * xi[0] as f64 + x[1] * xi[1] as f64)
                    / n as f64;
                f.values_mut()[idx] = Complex64::from_polar(env, phase);
            }
            consider(f, &mut best, &mut best_probe);
        }
    }
    let _ = &mut rng;

    // nonlinear power refinement from the best probe
    if let Some(mut f) = best_probe {
        for _ in 0..budget.ascent_steps {
            f = power_step(symbol, &f, p, q);
            let r = ratio(symbol, &f, p, q);
            if r > best {
                best = r;
            }
        }
    }
    best
}

/// Young-type upper bound for the convolution with the given kernel:
/// `||K||_r` with `1 + 1/q = 1/r + 1/p`.
pub fn young_upper_bound(kernel: &GridFunction, p: f64, q: f64) -> f64 {
    let ir = 1.0 + inv(q) - inv(p);
    debug_assert!(ir >= 0.0 && ir <= 1.0 + 1e-12);
    if ir <= 0.0 {
        norm_with_inf(kernel, f64::INFINITY)
    } else {
        norm_with_inf(kernel, 1.0 / ir)
    }
}

/// Full `M^{p->q}` estimate for the convolution operator with the sampled
/// symbol. Exact when `p = q = 2` (sup of the symbol), when `p = 1` (the
/// kernel `l^q` norm), and at `(2, inf)` (the kernel `l^2` norm).
pub fn mpq_norm(symbol: &GridFunction, p: f64, q: f64, budget: &ProbeBudget) -> Result<NormEstimate> {
    if p < 1.0 || q < p {
        return Err(Error::InvalidExponent(format!("mpq_norm needs 1 <= p <= q, got ({p}, {q})")));
    }
    if p == 2.0 && q == 2.0 {
        let sup = symbol.norm_inf();
        return Ok(NormEstimate::exact(sup, LowerMethod::ExactL2, UpperMethod::ExactL2));
    }
    if p == 1.0 {
        let kernel = idft(symbol);
        let v = norm_with_inf(&kernel, q);
        let mu = if q.is_infinite() { UpperMethod::TrivialInfinity } else { UpperMethod::ExactKernelNorm };
        return Ok(NormEstimate::exact(v, LowerMethod::ExactKernelNorm, mu));
    }
    if p == 2.0 && q.is_infinite() {
        let kernel = idft(symbol);
        let v = kernel.norm_p(2.0);
        return Ok(NormEstimate::exact(v, LowerMethod::ExactKernelNorm, UpperMethod::ExactKernelNorm));
    }
    let kernel = idft(symbol);
    let upper = young_upper_bound(&kernel, p, q).min(if p <= 2.0 && q >= 2.0 {
        // interpolation-free cheap cap: ||T||_{p->q} <= ||K||_r always
        f64::INFINITY
    } else {
        f64::INFINITY
    });
    let lower = probe_lower_bound(symbol, p, q, budget);
    Ok(NormEstimate {
        lower: lower.min(upper),
        upper,
        method_lower: if budget.ascent_steps > 0 { LowerMethod::PowerIteration } else { LowerMethod::Probe },
        method_upper: UpperMethod::Young,
    })
}

/// The symbol samples of one spatially truncated piece of `m` at frequency
/// annulus `k` and relative spatial index `ell` (cutoff `Phi_0` at the
/// dual scale for `ell = 0`, the annular `Psi_ell` otherwise).
pub fn piece_symbol(
    m: &MultiplierSymbol,
    dim: u8,
    grid_log: u32,
    k: i32,
    ell: u32,
) -> GridFunction {
    let kernel = crate::operators::localized_kernel(m, dim, grid_log, k);
    let base = scales::base_spatial_log(grid_log, k);
    let cut = SpatialCutoffs::at_log_scale(base);
    let cutoff = if ell == 0 {
        cut.sample_phi0(dim, grid_log)
    } else {
        cut.sample_psi(dim, grid_log, ell as i32)
    };
    dft(&multiply(&kernel, &cutoff))
}

/// `A^{k,l}` entry: the `M^{r->q}` estimate of the truncated piece,
/// carried to the scale-invariant normalization
/// `2^{(J-k) d (1/r - 1/q)} * 2^{l d (1/p - 1/q)}`.
/// The first factor converts the grid counting-measure operator norm to
/// the dilation-invariant form (grid step `h`: norms scale by
/// `h^{d(1/r-1/q)}` and the annulus sits at `2^k = h^{-1} 2^{k-J}`).
pub fn akl(
    m: &MultiplierSymbol,
    dim: u8,
    grid_log: u32,
    k: i32,
    ell: u32,
    p: f64,
    r: f64,
    q: f64,
    budget: &ProbeBudget,
) -> Result<NormEstimate> {
    if !(p <= r && r <= q) {
        return Err(Error::InvalidExponent(format!("akl needs p <= r <= q, got ({p}, {r}, {q})")));
    }
    let sym = piece_symbol(m, dim, grid_log, k, ell);
    let est = mpq_norm(&sym, r, q, budget)?;
    let d = dim as f64;
    let factor = 2f64.powi(scales::base_spatial_log(grid_log, k))
        .powf(d * (inv(r) - inv(q)))
        * 2f64.powi(ell as i32).powf(d * (inv(p) - inv(q)));
    Ok(NormEstimate {
        lower: est.lower * factor,
        upper: est.upper * factor,
        method_lower: est.method_lower,
        method_upper: est.method_upper,
    })
}

/// Table of `A^{k,l}` estimates.
#[derive(Debug, Clone)]
pub struct AklTable {
    pub p: f64,
    pub r: f64,
    pub q: f64,
    pub entries: std::collections::BTreeMap<(i32, u32), NormEstimate>,
}

impl AklTable {
    pub fn build(
        m: &MultiplierSymbol,
        dim: u8,
        grid_log: u32,
        k_range: &[i32],
        ell_max: u32,
        p: f64,
        r: f64,
        q: f64,
        budget: &ProbeBudget,
    ) -> Result<Self> {
        let mut entries = std::collections::BTreeMap::new();
        for &k in k_range {
            for ell in 0..=ell_max {
                // skip spatial scales beyond the grid
                if scales::abs_spatial_log(grid_log, k, ell as i32)
                    > crate::operators::max_spatial_log(dim, grid_log)
                {
                    break;
                }
                entries.insert((k, ell), akl(m, dim, grid_log, k, ell, p, r, q, budget)?);
            }
        }
        Ok(AklTable { p, r, q, entries })
    }

    /// `sup_k sum_l` aggregates of (lower, upper); the tail indicator is
    /// the largest final-entry magnitude across `k`.
    pub fn cal_a(&self) -> (f64, f64, f64) {
        let mut lower: f64 = 0.0;
        let mut upper: f64 = 0.0;
        let mut tail: f64 = 0.0;
        let ks: std::collections::BTreeSet<i32> = self.entries.keys().map(|(k, _)| *k).collect();
        for k in ks {
            let mut lo = 0.0;
            let mut up = 0.0;
            let mut last = 0.0;
            for ((_, _), est) in self.entries.range((k, 0)..=(k, u32::MAX)) {
                lo += est.lower;
                up += est.upper;
                last = est.upper;
            }
            lower = lower.max(lo);
            upper = upper.max(up);
            tail = tail.max(last);
        }
        (lower, upper, tail)
    }

    /// `C_{p,r,q}(j0) = sup_{k > J - j0} A^{k, j0+k-J}` (grid form of the
    /// single-scale constant; `j0` is the absolute spatial log-scale).
    pub fn single_scale_constant(&self, grid_log: u32, j0: i32, use_upper: bool) -> f64 {
        let mut best: f64 = 0.0;
        for (&(k, ell), est) in &self.entries {
            if scales::rel_ell(grid_log, k, j0) == ell as i32 && ell >= 1 {
                best = best.max(if use_upper { est.upper } else { est.lower });
            }
        }
        best
    }
}

/// `sup_k sum_{l <= ell_max} A^{k,l}` with a tail report, in one call.
#[allow(clippy::too_many_arguments)]
pub fn cal_a(
    m: &MultiplierSymbol,
    dim: u8,
    grid_log: u32,
    k_range: &[i32],
    ell_max: u32,
    p: f64,
    r: f64,
    q: f64,
    budget: &ProbeBudget,
) -> Result<(f64, f64, f64)> {
    Ok(AklTable::build(m, dim, grid_log, k_range, ell_max, p, r, q, budget)?.cal_a())
}

/// Besov norm on multiplier pieces:
/// `max_t [ est(m(t.) * Phi0-hat) + sum_{l>0} 2^{l alpha} est(m(t.) * Psi_l-hat) ]`
/// with the pieces taken at the reference annulus `k_ref`. Lower estimates
/// are summed for the lower value, uppers for the upper.
#[allow(clippy::too_many_arguments)]
pub fn besov_mult_norm(
    m: &MultiplierSymbol,
    dim: u8,
    grid_log: u32,
    alpha: f64,
    r: f64,
    q: f64,
    t_grid: &[f64],
    k_ref: i32,
    ell_max: u32,
    budget: &ProbeBudget,
) -> Result<(f64, f64)> {
    let mut lower: f64 = 0.0;
    let mut upper: f64 = 0.0;
    for &t in t_grid {
        let mt = m.dilate(t);
        let mut lo = 0.0;
        let mut up = 0.0;
        for ell in 0..=ell_max {
            if scales::abs_spatial_log(grid_log, k_ref, ell as i32)
                > crate::operators::max_spatial_log(dim, grid_log)
            {
                break;
            }
            let sym = piece_symbol(&mt, dim, grid_log, k_ref, ell);
            let est = mpq_norm(&sym, r, q, budget)?;
            let w = 2f64.powf(ell as f64 * alpha);
            lo += w * est.lower;
            up += w * est.upper;
        }
        lower = lower.max(lo);
        upper = upper.max(up);
    }
    Ok((lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft::sample_radial;

    #[test]
    fn constant_symbol_exact() {
        let mut sym = GridFunction::zero(1, 5);
        for v in sym.values_mut() {
            *v = Complex64::new(3.0, 0.0);
        }
        let est = mpq_norm(&sym, 2.0, 2.0, &ProbeBudget::light()).unwrap();
        assert_eq!(est.lower, 3.0);
        assert_eq!(est.upper, 3.0);
        let zero = GridFunction::zero(1, 5);
        let est = mpq_norm(&zero, 1.0, 2.0, &ProbeBudget::light()).unwrap();
        assert_eq!(est.upper, 0.0);
    }

    #[test]
    fn sandwich_and_exact_p1() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let sym = GridFunction::random_gaussian(1, 5, &mut rng);
        for (p, q) in [(1.0, 2.0), (1.5, 2.0), (2.0, 4.0), (1.25, 3.0), (2.0, f64::INFINITY)] {
            let est = mpq_norm(&sym, p, q, &ProbeBudget::light()).unwrap();
            assert!(est.lower <= est.upper * (1.0 + 1e-12), "({p},{q}): {est:?}");
        }
        // p = 1: probe engine should reach >= 0.9 of the exact value
        let exact = mpq_norm(&sym, 1.0, 2.0, &ProbeBudget::light()).unwrap();
        assert!(exact.is_exact());
        let probe = probe_lower_bound(&sym, 1.0, 2.0, &ProbeBudget::default());
        assert!(
            probe >= 0.9 * exact.lower,
            "probe {probe} vs exact {}",
            exact.lower
        );
        assert!(probe <= exact.lower * (1.0 + 1e-9));
    }

    #[test]
    fn probe_matches_exact_l2() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let sym = GridFunction::random_gaussian(1, 5, &mut rng);
        let exact = sym.norm_inf();
        let probe = probe_lower_bound(&sym, 2.0, 2.0, &ProbeBudget::light());
        assert!((probe - exact).abs() <= 1e-6 * exact, "{probe} vs {exact}");
    }

    #[test]
    fn oscillatory_l2_is_one() {
        // m_{a,0} restricted to its support is unimodular
        let m = MultiplierSymbol::oscillatory(2.0, 0.0, 4.0);
        let sym = m.sample_on(1, 6);
        let est = mpq_norm(&sym, 2.0, 2.0, &ProbeBudget::light()).unwrap();
        assert!((est.lower - 1.0).abs() < 1e-12);
    }

    #[test]
    fn akl_decays_for_smooth_symbol() {
        // m = 1 near scale 2^k: smooth symbol concentrates its kernel. The
        // first annuli still overlap the kernel core and the ringing of
        // the plateau edges; past that the decay is >= factor 4 per step.
        let m = MultiplierSymbol::one();
        let grid_log = 11;
        let k = 5;
        let budget = ProbeBudget::light();
        let mut prev = akl(&m, 1, grid_log, k, 4, 2.0, 2.0, 2.0, &budget).unwrap().upper;
        for ell in 5..=6u32 {
            let est = akl(&m, 1, grid_log, k, ell, 2.0, 2.0, 2.0, &budget).unwrap();
            assert!(est.upper < prev / 4.0, "ell={ell}: {} vs prev {prev}", est.upper);
            prev = est.upper;
        }
        // zero symbol -> zero entries
        let z = MultiplierSymbol::custom("zero", 4.0, |_| Complex64::default());
        let est = akl(&z, 1, grid_log, 3, 1, 1.5, 1.5, 2.0, &budget).unwrap();
        assert_eq!(est.upper, 0.0);
    }

    #[test]
    fn scaling_relation_two_routes() {
        // piece symbol via space-side multiplication vs frequency-side
        // circular convolution: the M^{2->2} values agree
        let m = MultiplierSymbol::oscillatory(2.0, 0.5, 4.0);
        let dim = 1u8;
        let grid_log = 7u32;
        let k = 4i32;
        let ell = 2u32;
        let route1 = piece_symbol(&m, dim, grid_log, k, ell).norm_inf();
        // route 2: convolve symbol samples with the DFT of the cutoff
        let kernel_sym = {
            let pair = CalderonPair::new();
            let phi_k = pair.phi_k(dim, grid_log, k);
            let mut sym = m.sample_on(dim, grid_log);
            for (s, p) in sym.values_mut().iter_mut().zip(phi_k.values()) {
                *s *= Complex64::new(p.re, 0.0);
            }
            sym
        };
        let base = scales::base_spatial_log(grid_log, k);
        let cutoff = SpatialCutoffs::at_log_scale(base).sample_psi(dim, grid_log, ell as i32);
        let cutoff_hat = dft(&cutoff);
        // frequency-side circular convolution, normalized by N^d
        let conv = crate::fft::convolve(&kernel_sym, &cutoff_hat)
            .scale(Complex64::new(1.0 / kernel_sym.len() as f64, 0.0));
        let route2 = conv.norm_inf();
        let rel = (route1 - route2).abs() / route1.max(1e-300);
        assert!(rel < 1e-6, "routes differ: {route1} vs {route2} (rel {rel})");
    }

    #[test]
    fn cal_a_dilation_invariance() {
        // calA of m(2 .) equals calA of m with the k-range shifted by one
        let m = MultiplierSymbol::radial_bump(0.5, 64.0);
        let grid_log = 9;
        let budget = ProbeBudget::light();
        let t1 = AklTable::build(&m, 1, grid_log, &[6], 2, 2.0, 2.0, 2.0, &budget).unwrap();
        let m2 = m.dilate(2.0);
        let t2 = AklTable::build(&m2, 1, grid_log, &[5], 2, 2.0, 2.0, 2.0, &budget).unwrap();
        // the dilated symbol at annulus k-1 samples the same mathematical
        // object at halved resolution; values agree to grid accuracy
        let a1 = t1.cal_a().1;
        let a2 = t2.cal_a().1;
        assert!((a1 - a2).abs() / a1.max(1e-300) < 0.1, "{a1} vs {a2}");
    }
}
