//! The symbol bank: oscillatory multipliers, radial bumps, multiscale bump
//! sums and the two-branch necessity pair, evaluated on grid frequencies.
//!
//! Symbols are functions of the mathematical frequency `u = xi / ref_freq`,
//! where `xi` is an integer grid frequency and `ref_freq` fixes which grid
//! radius plays the role of `|u| = 1`. The default `ref_freq = 4` leaves
//! several dyadic scales on both sides.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::sample;
use crate::grid::GridFunction;
use crate::profiles::{chi_bump, chi_infty, phi_circ};

pub type CustomEval = Arc<dyn Fn([f64; 2]) -> Complex64 + Send + Sync>;

#[derive(Clone)]
pub enum SymbolKind {
    /// `e^{i |u|^a} |u|^{-b} chi_inf(u)`.
    Oscillatory { a: f64, b: f64 },
    /// A concrete member of the derivative class with parameters `(a, b)`:
    /// the traveling-bump sum `sum_k 2^{-kb} phi_o(2^-k u) e^{-i 2^{-k(1-a)} u_1}`
    /// over the given scales.
    MiyachiSample { a: f64, b: f64, scales: Vec<i32> },
    /// `h_delta(|u|) = chi(delta^{-1}(1 - |u|))`.
    RadialBump { delta: f64 },
    /// `sum_k a_k h_delta(2^k |u|)`.
    MultiscaleBump { delta: f64, coeffs: Vec<(i32, f64)> },
    /// Two-branch lower-bound example: traveling bumps on `n1`, chirps on
    /// `n2`.
    NecessityPair { a: f64, b: f64, n1: Vec<i32>, n2: Vec<i32> },
    /// Identity symbol (`m = 1`).
    One,
    /// User-supplied evaluator.
    Custom { label: String, eval: CustomEval },
}

impl std::fmt::Debug for SymbolKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SymbolKind::Oscillatory { a, b } => write!(f, "oscillatory(a={a}, b={b})"),
            SymbolKind::MiyachiSample { a, b, scales } => {
                write!(f, "miyachi_sample(a={a}, b={b}, scales={scales:?})")
            }
            SymbolKind::RadialBump { delta } => write!(f, "radial_bump(delta={delta})"),
            SymbolKind::MultiscaleBump { delta, coeffs } => {
                write!(
                    f,
                    "multiscale_bump(delta={delta}, k={:?})",
                    coeffs.iter().map(|c| c.0).collect::<Vec<_>>()
                )
            }
            SymbolKind::NecessityPair { a, b, n1, n2 } => {
                write!(f, "necessity_pair(a={a}, b={b}, n1={n1:?}, n2={n2:?})")
            }
            SymbolKind::One => write!(f, "one"),
            SymbolKind::Custom { label, .. } => write!(f, "custom({label})"),
        }
    }
}

/// A multiplier symbol with its frequency convention and an optional
/// dilation: `eval` computes `m(dilation * xi / ref_freq)`.
#[derive(Debug, Clone)]
pub struct MultiplierSymbol {
    pub kind: SymbolKind,
    pub ref_freq: f64,
    pub dilation: f64,
}

impl MultiplierSymbol {
    pub fn new(kind: SymbolKind, ref_freq: f64) -> Self {
        assert!(ref_freq > 0.0);
        MultiplierSymbol { kind, ref_freq, dilation: 1.0 }
    }

    pub fn oscillatory(a: f64, b: f64, ref_freq: f64) -> Self {
        Self::new(SymbolKind::Oscillatory { a, b }, ref_freq)
    }

    pub fn radial_bump(delta: f64, ref_radius: f64) -> Self {
        Self::new(SymbolKind::RadialBump { delta }, ref_radius)
    }

    pub fn one() -> Self {
        Self::new(SymbolKind::One, 4.0)
    }

    pub fn custom<F>(label: &str, ref_freq: f64, eval: F) -> Self
    where
        F: Fn([f64; 2]) -> Complex64 + Send + Sync + 'static,
    {
        Self::new(SymbolKind::Custom { label: label.to_string(), eval: Arc::new(eval) }, ref_freq)
    }

    /// Multiscale bump with unit coefficients on every scale representable
    /// on a grid of size `2^grid_log` (the truncation is recorded in the
    /// coefficient list itself).
    pub fn multiscale_bump_representable(delta: f64, ref_freq: f64, grid_log: u32) -> Self {
        let n = (1u64 << grid_log) as f64;
        // bump at |u| ~ 2^-k sits at grid radius ref_freq * 2^-k; keep it
        // within [2, N/4]
        let k_min = -((n / 4.0 / ref_freq).log2().floor() as i32);
        let k_max = (ref_freq / 2.0).log2().floor() as i32;
        let coeffs = (k_min..=k_max).map(|k| (k, 1.0)).collect();
        Self::new(SymbolKind::MultiscaleBump { delta, coeffs }, ref_freq)
    }

    /// The dilated symbol `m(t .)`.
    pub fn dilate(&self, t: f64) -> Self {
        let mut out = self.clone();
        out.dilation *= t;
        out
    }

    /// Evaluates at an integer grid frequency.
    pub fn eval(&self, xi: [i64; 2]) -> Complex64 {
        let u = [
            self.dilation * xi[0] as f64 / self.ref_freq,
            self.dilation * xi[1] as f64 / self.ref_freq,
        ];
        self.eval_math(u)
    }

    /// Evaluates at a mathematical frequency vector.
    pub fn eval_math(&self, u: [f64; 2]) -> Complex64 {
        let r = (u[0] * u[0] + u[1] * u[1]).sqrt();
        match &self.kind {
            SymbolKind::One => Complex64::new(1.0, 0.0),
            SymbolKind::Oscillatory { a, b } => {
                let cut = chi_infty(r);
                if cut == 0.0 {
                    return Complex64::default();
                }
                let mag = cut * r.powf(-b);
                Complex64::from_polar(mag, r.powf(*a))
            }
            SymbolKind::RadialBump { delta } => {
                Complex64::new(chi_bump((1.0 - r.abs()) / delta), 0.0)
            }
            SymbolKind::MultiscaleBump { delta, coeffs } => {
                let mut s = 0.0;
                for &(k, ak) in coeffs {
                    let t = 2f64.powi(k) * r;
                    if (1.0 - t).abs() < *delta {
                        s += ak * chi_bump((1.0 - t) / delta);
                    }
                }
                Complex64::new(s, 0.0)
            }
            SymbolKind::MiyachiSample { a, b, scales } => {
                let mut acc = Complex64::default();
                for &k in scales {
                    let scale = 2f64.powi(-k);
                    let amp = phi_circ(r * scale);
                    if amp > 0.0 {
                        let phase = -2f64.powf(-(k as f64) * (1.0 - a)) * u[0];
                        acc += Complex64::from_polar(2f64.powf(-(k as f64) * b) * amp, phase);
                    }
                }
                acc
            }
            SymbolKind::NecessityPair { a, b, n1, n2 } => {
                let mut acc = Complex64::default();
                for &k in n1 {
                    let amp = phi_circ(r * 2f64.powi(-k));
                    if amp > 0.0 {
                        let phase = -2f64.powf(-(k as f64) * (1.0 - a)) * u[0];
                        acc += Complex64::from_polar(2f64.powf(-(k as f64) * b) * amp, phase);
                    }
                }
                for &k in n2 {
                    let amp = phi_circ(r * 2f64.powi(-k));
                    if amp > 0.0 {
                        let phase = 2f64.powf(-(k as f64) * (2.0 - a)) * r * r / 2.0;
                        acc += Complex64::from_polar(2f64.powf(-(k as f64) * b) * amp, phase);
                    }
                }
                acc
            }
            SymbolKind::Custom { eval, .. } => eval(u),
        }
    }

    /// Samples the symbol on the frequency grid.
    pub fn sample_on(&self, dim: u8, grid_log: u32) -> GridFunction {
        sample(dim, grid_log, |xi| self.eval(xi))
    }

    /// Minimal index separation `1 + 10/|1-a|` under which the two-branch
    /// cross terms are provably negligible in the continuum; grid runs use
    /// closer indices and verify the main/error ratio numerically instead.
    pub fn necessity_separation(a: f64) -> f64 {
        1.0 + 10.0 / (1.0 - a).abs()
    }
}

/// Parses a symbol from a `key=value` text spec, one pair per whitespace
/// separated token. Example: `kind=oscillatory a=2 b=0.5 ref_freq=4`.
pub fn parse_symbol_spec(text: &str) -> Result<MultiplierSymbol> {
    let mut map = std::collections::BTreeMap::new();
    for tok in text.split_whitespace() {
        if let Some((k, v)) = tok.split_once('=') {
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let get_f = |k: &str| -> Result<f64> {
        map.get(k)
            .ok_or_else(|| Error::Parse(format!("missing field {k}")))?
            .parse()
            .map_err(|e| Error::Parse(format!("field {k}: {e}")))
    };
    let get_list = |k: &str| -> Result<Vec<i32>> {
        map.get(k)
            .ok_or_else(|| Error::Parse(format!("missing field {k}")))?
            .split(',')
            .map(|s| s.trim().parse().map_err(|e| Error::Parse(format!("field {k}: {e}"))))
            .collect()
    };
    let ref_freq = map.get("ref_freq").map(|s| s.parse().unwrap_or(4.0)).unwrap_or(4.0);
    let kind = map
        .get("kind")
        .ok_or_else(|| Error::Parse("missing field kind".into()))?
        .as_str();
    let kind = match kind {
        "one" => SymbolKind::One,
        "oscillatory" => SymbolKind::Oscillatory { a: get_f("a")?, b: get_f("b")? },
        "radial_bump" => SymbolKind::RadialBump { delta: get_f("delta")? },
        "multiscale_bump" => {
            let delta = get_f("delta")?;
            let ks = get_list("scales")?;
            SymbolKind::MultiscaleBump { delta, coeffs: ks.into_iter().map(|k| (k, 1.0)).collect() }
        }
        "miyachi_sample" => SymbolKind::MiyachiSample {
            a: get_f("a")?,
            b: get_f("b")?,
            scales: get_list("scales")?,
        },
        "necessity_pair" => SymbolKind::NecessityPair {
            a: get_f("a")?,
            b: get_f("b")?,
            n1: get_list("n1")?,
            n2: get_list("n2")?,
        },
        other => return Err(Error::Parse(format!("unknown symbol kind {other}"))),
    };
    Ok(MultiplierSymbol::new(kind, ref_freq))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oscillatory_unimodular_away_from_origin() {
        let m = MultiplierSymbol::oscillatory(2.0, 0.0, 4.0);
        let v = m.eval([8, 0]);
        assert!((v.norm() - 1.0).abs() < 1e-14);
        assert_eq!(m.eval([1, 0]).norm(), 0.0); // |u| = 1/4 < 1/2
    }

    #[test]
    fn radial_bump_peak() {
        let m = MultiplierSymbol::radial_bump(0.125, 8.0);
        assert!((m.eval([8, 0]).re - 1.0).abs() < 1e-14);
        assert_eq!(m.eval([4, 0]).re, 0.0);
    }

    #[test]
    fn parse_round_trip() {
        let m = parse_symbol_spec("kind=oscillatory a=2 b=0.5 ref_freq=8").unwrap();
        match m.kind {
            SymbolKind::Oscillatory { a, b } => {
                assert_eq!(a, 2.0);
                assert_eq!(b, 0.5);
            }
            _ => panic!(),
        }
        assert_eq!(m.ref_freq, 8.0);
        assert!(parse_symbol_spec("kind=unknown").is_err());
        let n = parse_symbol_spec("kind=necessity_pair a=2 b=0.5 n1=2,3 n2=4,5").unwrap();
        match n.kind {
            SymbolKind::NecessityPair { n1, n2, .. } => {
                assert_eq!(n1, vec![2, 3]);
                assert_eq!(n2, vec![4, 5]);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn dilation_composes() {
        let m = MultiplierSymbol::radial_bump(0.25, 8.0).dilate(2.0);
        // m(2u): peak where 2|u| = 1, i.e. grid radius 4
        assert!((m.eval([4, 0]).re - 1.0).abs() < 1e-14);
    }
}
