//! Smooth profiles sampled on the grid: the standard `exp(-1/(1-t^2))`
//! bump, smooth steps, plateaus, and the concrete Calderón pair profiles.

/// `exp(1 - 1/(1-t^2))` for `|t| < 1`, zero outside; normalized to 1 at 0.
pub fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

/// Smooth transition rising from 0 at `a` to 1 at `b`: the closed form
/// `g(u) / (g(u) + g(1-u))` with `g(u) = exp(-1/u)`, flat to infinite
/// order at both ends.
pub fn smoothstep(t: f64, a: f64, b: f64) -> f64 {
    debug_assert!(a < b);
    if t <= a {
        return 0.0;
    }
    if t >= b {
        return 1.0;
    }
    let u = (t - a) / (b - a);
    let g = |x: f64| (-1.0 / x).exp();
    let gu = g(u);
    gu / (gu + g(1.0 - u))
}

/// 1 on `[flat_lo, flat_hi]`, 0 outside `(supp_lo, supp_hi)`, smooth between.
pub fn plateau(t: f64, supp_lo: f64, flat_lo: f64, flat_hi: f64, supp_hi: f64) -> f64 {
    debug_assert!(supp_lo < flat_lo && flat_lo <= flat_hi && flat_hi < supp_hi);
    if t <= supp_lo || t >= supp_hi {
        0.0
    } else if t < flat_lo {
        smoothstep(t, supp_lo, flat_lo)
    } else if t <= flat_hi {
        1.0
    } else {
        1.0 - smoothstep(t, flat_hi, supp_hi)
    }
}

/// Calderón plateau profile `phi`: 1 on `[0.7, 1.5]`, supported in
/// `(1/2, 2)` (radial, evaluated at `|xi| / 2^k`).
pub fn phi_profile(t: f64) -> f64 {
    plateau(t, 0.5, 0.7, 1.5, 2.0)
}

/// Log-symmetric bump `psi`, positive exactly on `(0.7, 1.5)`. The dyadic
/// dilates of its support overlap, so `S(t) = sum_k psi(2^-k t) > 0` for
/// every `t > 0`.
pub fn psi_profile(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let lo: f64 = 0.7;
    let hi: f64 = 1.5;
    let center = 0.5 * (lo.log2() + hi.log2());
    let half = 0.5 * (hi.log2() - lo.log2());
    bump((t.log2() - center) / half)
}

/// `S(t) = sum_k psi(2^-k t)`; log-2-periodic and strictly positive.
pub fn psi_sum(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    // supp(psi) spans less than two octaves, so only nearby k contribute
    let k0 = t.log2().floor() as i32;
    let mut s = 0.0;
    for k in (k0 - 2)..=(k0 + 2) {
        s += psi_profile(t / 2f64.powi(k));
    }
    s
}

/// `eta = sqrt(psi / S)`: `sum_k eta^2(2^-k xi) phi(2^-k xi) = 1` for
/// `xi != 0` since `phi = 1` on `supp psi`.
pub fn eta_profile(t: f64) -> f64 {
    let p = psi_profile(t);
    if p == 0.0 {
        0.0
    } else {
        (p / psi_sum(t)).sqrt()
    }
}

/// Space profile `Phi_0`: 1 for `r <= 1/4`, 0 for `r >= 1/2`.
pub fn phi0_profile(r: f64) -> f64 {
    plateau(r.abs(), -1.0, -0.5, 0.25, 0.5)
}

/// `chi_infty`: vanishes for `r <= 1/2`, equals 1 for `r >= 1`; the smooth
/// transition on `[1/2, 1]` is fixed once here.
pub fn chi_infty(r: f64) -> f64 {
    smoothstep(r.abs(), 0.5, 1.0)
}

/// `chi`: smooth bump supported in `(-1/2, 1/2)` with `chi(0) = 1`.
pub fn chi_bump(t: f64) -> f64 {
    bump(2.0 * t)
}

/// Annular plateau for necessity probes: supported in `{3/4 < r < 5/4}`,
/// equal to 1 on `[7/8, 9/8]`.
pub fn phi_circ(r: f64) -> f64 {
    plateau(r.abs(), 0.75, 0.875, 1.125, 1.25)
}

/// Spatial annulus cutoff for rescaled kernels: supported in
/// `{1/2 < r < 2}`, equal to 1 on `[2^-1/2, 2^1/2]`.
pub fn psi_annulus(r: f64) -> f64 {
    plateau(r.abs(), 0.5, std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::SQRT_2, 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducing_identity_pointwise() {
        for &t in &[0.07, 0.3, 0.75, 1.0, 1.5, 3.0, 17.0, 1024.0, 3.0 * 16.0] {
            let mut s = 0.0;
            for k in -16..32 {
                let x = t / 2f64.powi(k);
                s += eta_profile(x) * eta_profile(x) * phi_profile(x);
            }
            assert!((s - 1.0).abs() < 1e-12, "t={t}: {s}");
        }
    }

    #[test]
    fn phi_supported_in_half_two() {
        assert_eq!(phi_profile(0.5), 0.0);
        assert_eq!(phi_profile(2.0), 0.0);
        assert_eq!(phi_profile(1.0), 1.0);
        assert_eq!(phi_profile(0.75), 1.0);
        assert_eq!(phi_profile(1.5), 1.0);
    }

    #[test]
    fn psi_sum_positive() {
        for i in 1..2000 {
            let t = i as f64 * 0.01;
            assert!(psi_sum(t) > 0.0, "t={t}");
        }
    }

    #[test]
    fn phi0_shape() {
        assert_eq!(phi0_profile(0.2), 1.0);
        assert_eq!(phi0_profile(0.25), 1.0);
        assert_eq!(phi0_profile(0.5), 0.0);
        assert!(phi0_profile(0.3) > 0.0 && phi0_profile(0.3) < 1.0);
    }

    #[test]
    fn chi_shapes() {
        assert_eq!(chi_infty(1.0), 1.0);
        assert_eq!(chi_infty(0.5), 0.0);
        assert_eq!(chi_bump(0.0), 1.0);
        assert_eq!(chi_bump(0.5), 0.0);
    }
}
