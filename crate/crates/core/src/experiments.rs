//! Experiment harness: scaling-law measurements on the grid with CSV
//! output and log-log exponent fits.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::calderon::CalderonPair;
use crate::cube::DyadicCube;
use crate::error::{Error, Result};
use crate::fft::idft;
use crate::grid::{signed_coord, GridFunction};
use crate::norms::{mpq_norm, AklTable, ProbeBudget};
use crate::operators::{apply_t_j, apply_truncated, rescaled_kernel};
use crate::profiles::psi_annulus;
use crate::sparse::{lambda_star_star, MaximizerOptions};
use crate::symbols::{MultiplierSymbol, SymbolKind};

/// Least-squares fit on `(log2 x, log2 y)`.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of `log2 y`.
    pub residual: f64,
    pub points: Vec<(f64, f64)>,
}

/// Fits a power law through positive points; at least 4 required.
pub fn fit_exponent(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 4 {
        return Err(Error::NotEnoughPoints(format!("fit needs >= 4 points, got {}", points.len())));
    }
    if points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return Err(Error::InvalidParameter("fit_exponent needs positive coordinates".into()));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.log2(), y.log2())).collect();
    let n = logs.len() as f64;
    let sx: f64 = logs.iter().map(|p| p.0).sum();
    let sy: f64 = logs.iter().map(|p| p.1).sum();
    let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom == 0.0 {
        return Err(Error::InvalidParameter("degenerate abscissae".into()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let residual = (logs
        .iter()
        .map(|&(x, y)| {
            let r = y - slope * x - intercept;
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(FitResult { slope, intercept, residual, points: logs })
}

/// Flat `key=value` experiment configuration.
#[derive(Debug, Clone, Default)]
pub struct ExperimentConfig {
    pub entries: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Self {
        let mut entries = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            for tok in line.split_whitespace() {
                if let Some((k, v)) = tok.split_once('=') {
                    entries.insert(k.to_string(), v.to_string());
                }
            }
        }
        ExperimentConfig { entries }
    }

    pub fn set(&mut self, k: &str, v: impl ToString) {
        self.entries.insert(k.to_string(), v.to_string());
    }

    pub fn f64_or(&self, k: &str, default: f64) -> f64 {
        self.entries.get(k).and_then(|v| v.parse().ok()).unwrap_or(default)
    }

    pub fn u64_or(&self, k: &str, default: u64) -> u64 {
        self.entries.get(k).and_then(|v| v.parse().ok()).unwrap_or(default)
    }

    pub fn str_or(&self, k: &str, default: &str) -> String {
        self.entries.get(k).cloned().unwrap_or_else(|| default.to_string())
    }

    pub fn list_or(&self, k: &str, default: &[f64]) -> Vec<f64> {
        match self.entries.get(k) {
            None => default.to_vec(),
            Some(v) => v.split(',').filter_map(|s| s.trim().parse().ok()).collect(),
        }
    }

    pub fn ilist_or(&self, k: &str, default: &[i32]) -> Vec<i32> {
        match self.entries.get(k) {
            None => default.to_vec(),
            Some(v) => v.split(',').filter_map(|s| s.trim().parse().ok()).collect(),
        }
    }
}

/// One experiment's result: fits plus the full CSV (config header block,
/// then a data header, then rows).
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub name: String,
    pub fits: Vec<(String, FitResult)>,
    pub csv: String,
}

fn csv_header(name: &str, cfg: &ExperimentConfig, extra: &[(String, String)]) -> String {
    let mut s = String::from("param,value\n");
    s.push_str(&format!("experiment,{name}\n"));
    for (k, v) in &cfg.entries {
        s.push_str(&format!("{k},{v}\n"));
    }
    for (k, v) in extra {
        s.push_str(&format!("{k},{v}\n"));
    }
    s
}

fn validate_oscillatory(a: f64, b: f64, d: u8) -> Result<()> {
    if a <= 0.0 || a == 1.0 {
        return Err(Error::InvalidParameter(format!("need a > 0, a != 1, got {a}")));
    }
    if !(b >= 0.0 && b < a * d as f64 / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= b < a d / 2 = {}, got {b}",
            a * d as f64 / 2.0
        )));
    }
    Ok(())
}

/// Stationary-phase profile of the oscillatory kernel: for each `t`, the
/// kernel of `phi m_{a,b}(t .)` is computed on the reference annulus and
/// the peak magnitude near the predicted radius is fitted against `t`.
pub fn exp_stationary_phase(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let a = cfg.f64_or("a", 2.0);
    let b = cfg.f64_or("b", 0.0);
    let grid_log = cfg.u64_or("grid_log", 14) as u32;
    validate_oscillatory(a, b, 1)?;
    let n = (1u64 << grid_log) as f64;
    let xi0 = cfg.f64_or("ref_freq", if a > 1.0 { (n / 2.0).sqrt() } else { 64.0 });
    // default t sweep: dyadic values whose phase peak stays on the grid
    let default_t: Vec<f64> = {
        let mut v = Vec::new();
        let mut t = 2.0f64;
        while v.len() < 8 {
            let peak = n * a / (2.0 * std::f64::consts::PI) * t.powf(a) * 2f64.powf(a - 1.0) / xi0;
            if peak > n / 2.2 || 2.0 * xi0 > n / 2.0 {
                break;
            }
            if peak >= 3.0 {
                v.push(t);
            }
            t *= 2.0;
        }
        v
    };
    let t_list = cfg.list_or("t_list", &default_t);
    if t_list.len() < 5 {
        return Err(Error::GridTooSmall(format!(
            "only {} usable dyadic t values at J={grid_log}, need >= 5",
            t_list.len()
        )));
    }
    let t_max = t_list.iter().cloned().fold(0.0, f64::max);
    let peak_max = n * a / (2.0 * std::f64::consts::PI) * t_max.powf(a) * 2f64.powf(a - 1.0) / xi0;
    if peak_max > n / 2.0 {
        return Err(Error::GridTooSmall(format!("t = {t_max} pushes the peak off the grid")));
    }

    let m = MultiplierSymbol::oscillatory(a, b, xi0);
    let phi = CalderonPair::new();
    let k_ref = xi0.log2().round() as i32;
    let rows: Vec<(f64, f64, f64, f64)> = t_list
        .par_iter()
        .map(|&t| {
            let mt = m.dilate(t);
            let mut sym = mt.sample_on(1, grid_log);
            let phi_ref = phi.phi_k(1, grid_log, k_ref);
            for (s, p) in sym.values_mut().iter_mut().zip(phi_ref.values()) {
                *s *= num_complex::Complex64::new(p.re, 0.0);
            }
            let kern = idft(&sym);
            let nn = kern.side();
            let peak_pred = n * a / (2.0 * std::f64::consts::PI) * t.powf(a) / xi0;
            let lo = peak_pred * 2f64.powf(a - 1.0).min(1.0) / 4.0;
            let hi = peak_pred * 2f64.powf(a - 1.0).max(1.0) * 4.0;
            let mut peak = 0.0f64;
            let mut off = 0.0f64;
            for x in 0..nn {
                let s = signed_coord(x, nn).abs() as f64;
                let v = kern.values()[x].norm();
                if s >= lo && s <= hi {
                    peak = peak.max(v);
                }
                if s <= lo / 4.0 {
                    off = off.max(v);
                }
            }
            (t, peak, peak_pred, off)
        })
        .collect();

    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.0, r.1)).collect();
    let fit = fit_exponent(&points)?;
    let mut csv = csv_header(
        "stationary_phase",
        cfg,
        &[
            ("ref_freq_used".into(), format!("{xi0}")),
            ("fitted_slope".into(), format!("{}", fit.slope)),
            ("expected_slope".into(), format!("{}", -(b + a / 2.0))),
        ],
    );
    csv.push_str("t,peak,peak_radius_pred,offpeak_sup\n");
    for (t, peak, pred, off) in &rows {
        csv.push_str(&format!("{t},{peak},{pred},{off}\n"));
    }
    Ok(ExperimentOutput {
        name: "stationary_phase".into(),
        fits: vec![("peak_vs_t".into(), fit)],
        csv,
    })
}

/// Lower bounds for the rescaled two-branch example operators, fitted per
/// branch in `log2` units against the branch index `n`.
pub fn exp_necessity(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let a = cfg.f64_or("a", 2.0);
    let b = cfg.f64_or("b", 0.5);
    let grid_log = cfg.u64_or("grid_log", 14) as u32;
    let xi0 = cfg.f64_or("ref_freq", 4.0);
    validate_oscillatory(a, b, 1)?;
    let p = cfg.f64_or("p", 2.0);
    let q_raw = cfg.str_or("q", "2");
    let q = if q_raw == "inf" { f64::INFINITY } else { q_raw.parse().unwrap_or(2.0) };
    let n1 = cfg.ilist_or("n1", &[2, 3, 4, 5]);
    let n2 = cfg.ilist_or("n2", &[2, 3, 4, 5]);
    let n = (1u64 << grid_log) as f64;

    let r_of = |nn: i32| -> f64 {
        let exact = 2f64.powf(-(nn as f64) * (1.0 - a));
        2f64.powf(exact.log2().round())
    };
    let k_top = *n1.iter().chain(n2.iter()).max().unwrap();
    let usable = |list: &[i32]| -> Vec<i32> {
        list.iter()
            .copied()
            .filter(|&nn| {
                let r = r_of(nn);
                xi0 * 2f64.powi(k_top) * r * 1.25 <= n / 2.0 && xi0 * r <= n / 4.0
            })
            .collect()
    };
    let usable1 = usable(&n1);
    let usable2 = usable(&n2);
    if usable1.len() < 3 && usable2.len() < 3 {
        return Err(Error::GridTooSmall(format!(
            "fewer than 3 representable indices per branch at J={grid_log}"
        )));
    }
    let sep = MultiplierSymbol::necessity_separation(a);
    let min_gap = usable1
        .windows(2)
        .chain(usable2.windows(2))
        .map(|w| (w[1] - w[0]) as f64)
        .fold(f64::INFINITY, f64::min);
    let separation_ok = min_gap > sep;

    let sym = MultiplierSymbol::new(
        SymbolKind::NecessityPair { a, b, n1: n1.clone(), n2: n2.clone() },
        xi0,
    );
    let budget = ProbeBudget::default();

    let eval_branch = |nn: i32, branch: u8| -> Result<(f64, f64, f64, f64)> {
        let r = r_of(nn);
        let kappa = rescaled_kernel(&sym, 1, grid_log, r, psi_annulus)?;
        let est = mpq_norm(&crate::fft::dft(&kappa), p, q, &budget)?;
        let single = MultiplierSymbol::new(
            if branch == 1 {
                SymbolKind::NecessityPair { a, b, n1: vec![nn], n2: vec![] }
            } else {
                SymbolKind::NecessityPair { a, b, n1: vec![], n2: vec![nn] }
            },
            xi0,
        );
        let kmain = rescaled_kernel(&single, 1, grid_log, r, psi_annulus)?;
        let err = kappa.sub(&kmain);
        Ok((est.lower, kmain.norm_p(2.0), err.norm_p(2.0), r))
    };

    let mut rows: Vec<(u8, i32, f64, f64, f64, f64)> = Vec::new();
    let mut pts1 = Vec::new();
    let mut pts2 = Vec::new();
    for &nn in &usable1 {
        let (lo, main, err, r) = eval_branch(nn, 1)?;
        rows.push((1, nn, r, lo, main, err));
        pts1.push((2f64.powi(nn), lo));
    }
    for &nn in &usable2 {
        let (lo, main, err, r) = eval_branch(nn, 2)?;
        rows.push((2, nn, r, lo, main, err));
        pts2.push((2f64.powi(nn), lo));
    }

    let mut fits = Vec::new();
    if pts1.len() >= 4 {
        fits.push(("branch1_slope".to_string(), fit_exponent(&pts1)?));
    }
    if pts2.len() >= 4 {
        fits.push(("branch2_slope".to_string(), fit_exponent(&pts2)?));
    }
    let iq = if q.is_infinite() { 0.0 } else { 1.0 / q };
    let expected1 = -(b - a * (1.0 / p - iq));
    let expected2 = -(b - a * (1.0 / p - 0.5));
    let mut csv = csv_header(
        "necessity",
        cfg,
        &[
            ("separation_required".into(), format!("{sep}")),
            ("separation_ok".into(), format!("{separation_ok}")),
            ("expected_slope_branch1".into(), format!("{expected1}")),
            ("expected_slope_branch2".into(), format!("{expected2}")),
        ],
    );
    csv.push_str("branch,n,r_rounded,norm_lower,main_l2,error_l2\n");
    for (br, nn, r, lo, main, err) in &rows {
        csv.push_str(&format!("{br},{nn},{r},{lo},{main},{err}\n"));
    }
    Ok(ExperimentOutput { name: "necessity".into(), fits, csv })
}

/// Radial-bump piece norms across `(delta, l)`: exact `M^{2->2}` and
/// `M^{1->infty}` values with the `l`- and `delta`-slope fits.
pub fn exp_radial_bump(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let dim = cfg.u64_or("dim", 2) as u8;
    let grid_log = cfg.u64_or("grid_log", 9) as u32;
    let n = (1u64 << grid_log) as f64;
    let rho0 = cfg.f64_or("ref_radius", n / 4.0);
    let delta_list = cfg.list_or("delta_list", &[0.25, 0.125, 0.0625, 0.03125]);
    for &d in &delta_list {
        if d * rho0 < 2.0 {
            return Err(Error::GridTooSmall(format!(
                "delta = {d} below grid resolution (width {} cells)",
                d * rho0
            )));
        }
    }
    let base = (n / rho0).log2() as i32;
    let ell_max = cfg.u64_or("ell_max", (rho0.log2() as u64).saturating_sub(1)) as i32;

    let cutoffs = crate::calderon::SpatialCutoffs::at_log_scale(base);
    let mut rows: Vec<(f64, i32, f64, f64)> = Vec::new();
    for &delta in &delta_list {
        let m = MultiplierSymbol::radial_bump(delta, rho0);
        let kern = idft(&m.sample_on(dim, grid_log));
        let per_ell: Vec<(f64, i32, f64, f64)> = (1..=ell_max)
            .into_par_iter()
            .map(|ell| {
                let psi = cutoffs.sample_psi(dim, grid_log, ell);
                let piece = crate::calderon::multiply(&kern, &psi);
                let m22 = crate::fft::dft(&piece).norm_inf();
                let m1inf = piece.norm_inf();
                (delta, ell, m22, m1inf)
            })
            .collect();
        rows.extend(per_ell);
    }

    let mut fits = Vec::new();
    for &delta in &delta_list {
        let knee = (1.0 / delta).log2();
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.0 == delta && (r.1 as f64) < knee - 0.5 && r.3 > 0.0)
            .map(|r| (2f64.powi(r.1), r.3))
            .collect();
        if pts.len() >= 4 {
            fits.push((format!("m1inf_ell_slope_delta_{delta}"), fit_exponent(&pts)?));
        }
    }
    let pts_delta: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.1 == 1 && r.3 > 0.0).map(|r| (r.0, r.3)).collect();
    if pts_delta.len() >= 4 {
        fits.push(("m1inf_delta_slope".to_string(), fit_exponent(&pts_delta)?));
    }
    let mut knee_rows = Vec::new();
    for &delta in &delta_list {
        let vals: Vec<(i32, f64)> =
            rows.iter().filter(|r| r.0 == delta && r.2 > 0.0).map(|r| (r.1, r.2)).collect();
        let mut best_drop = 0.0;
        let mut knee_at = 0;
        for w in vals.windows(2) {
            let drop = (w[0].1 / w[1].1).log2();
            if drop > best_drop {
                best_drop = drop;
                knee_at = w[1].0;
            }
        }
        knee_rows.push((delta, knee_at, (1.0 / delta).log2()));
    }

    let mut csv = csv_header(
        "radial_bump",
        cfg,
        &[
            ("ref_radius_used".into(), format!("{rho0}")),
            ("expected_ell_slope".into(), format!("{}", -((dim as f64 - 1.0) / 2.0))),
        ],
    );
    csv.push_str("delta,ell,m22,m1inf\n");
    for (d, l, m22, m1) in &rows {
        csv.push_str(&format!("{d},{l},{m22},{m1}\n"));
    }
    csv.push_str("knee_delta,knee_ell,knee_expected\n");
    for (d, k, e) in &knee_rows {
        csv.push_str(&format!("{d},{k},{e}\n"));
    }
    Ok(ExperimentOutput { name: "radial_bump".into(), fits, csv })
}

/// Single-scale operator bound: the measured ratio
/// `||T_j0 f||_q / (2^{-j0 d (1/p - 1/q)} C(j0) ||f||_p)` across `j0` and
/// seeds, with `C(j0)` from the piece-norm table (upper estimates).
pub fn exp_single_scale(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let a = cfg.f64_or("a", 2.0);
    let b = cfg.f64_or("b", 0.5);
    let grid_log = cfg.u64_or("grid_log", 9) as u32;
    let dim = cfg.u64_or("dim", 1) as u8;
    let xi0 = cfg.f64_or("ref_freq", 4.0);
    let p = cfg.f64_or("p", 2.0 * a / (a + 2.0 * b));
    let q = cfg.f64_or("q", 2.0);
    if !(1.0 < p && p <= 2.0 && 2.0 <= q && q <= p / (p - 1.0)) {
        return Err(Error::InvalidExponent(format!(
            "single_scale needs 1 < p <= 2 <= q <= p', got ({p}, {q})"
        )));
    }
    let seeds = cfg.u64_or("seeds", 10);
    let j0_default: Vec<i32> = (3..=grid_log as i32 - 2).collect();
    let j0_list = cfg.ilist_or("j0_list", &j0_default);
    let m = MultiplierSymbol::oscillatory(a, b, xi0);
    let pair = CalderonPair::new();
    let k_all: Vec<i32> = pair.k_range(dim, grid_log).collect();
    let budget = ProbeBudget::light();

    let ell_needed = j0_list
        .iter()
        .map(|&j| j + *k_all.iter().max().unwrap() - grid_log as i32)
        .max()
        .unwrap()
        .max(1) as u32;
    let table = AklTable::build(&m, dim, grid_log, &k_all, ell_needed, p, p, q, &budget)?;

    let d = dim as f64;
    let mut rows = Vec::new();
    for &j0 in &j0_list {
        let c_j0 = table.single_scale_constant(grid_log, j0, true);
        if c_j0 == 0.0 {
            continue;
        }
        let scale = 2f64.powi(j0).powf(-d * (1.0 / p - 1.0 / q)) * c_j0;
        let mut worst: f64 = 0.0;
        for seed in 0..seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.u64_or("seed", 0) * 7919 + seed);
            let side = 1usize << j0 as u32;
            let corner = ((1usize << grid_log) / 2 / side) * side;
            let s0 = DyadicCube::new(dim, [corner, if dim == 2 { corner } else { 0 }], j0 as u32);
            let f = GridFunction::random_gaussian_on(dim, grid_log, &s0, &mut rng);
            let tf = apply_t_j(&f, &m, j0, &k_all);
            let num = if q.is_infinite() { tf.norm_inf() } else { tf.norm_p(q) };
            let ratio = num / (scale * f.norm_p(p));
            worst = worst.max(ratio);
        }
        rows.push((j0, c_j0, worst));
    }
    let mut csv = csv_header(
        "single_scale",
        cfg,
        &[("p_used".into(), format!("{p}")), ("q_used".into(), format!("{q}"))],
    );
    csv.push_str("j0,c_j0_upper,max_ratio\n");
    for (j0, c, r) in &rows {
        csv.push_str(&format!("{j0},{c},{r}\n"));
    }
    Ok(ExperimentOutput { name: "single_scale".into(), fits: vec![], csv })
}

/// Regime tag for the sparse constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparseRegime {
    QBelow2,
    QEquals2,
    QAbove2,
}

impl SparseRegime {
    pub fn parse(s: &str) -> SparseRegime {
        match s {
            "q<2" => SparseRegime::QBelow2,
            "q>2" => SparseRegime::QAbove2,
            _ => SparseRegime::QEquals2,
        }
    }
}

/// Sparse-domination ratio: `|<sum_j T_j f1, f2>| / (C * Lambda**)` for
/// growing window lengths `N2 - N1`, reporting the running maximum.
pub fn exp_sparse_ratio(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let dim = cfg.u64_or("dim", 1) as u8;
    let grid_log = cfg.u64_or("grid_log", if dim == 1 { 10 } else { 7 }) as u32;
    let gamma = cfg.f64_or("gamma", 0.5);
    let seeds = cfg.u64_or("seeds", 5);
    let symbol_kind = cfg.str_or("symbol", "oscillatory");
    let xi0 = cfg.f64_or("ref_freq", 4.0);
    let regime = SparseRegime::parse(&cfg.str_or("regime", "q=2"));
    let n = (1u64 << grid_log) as f64;
    let (m, p, q): (MultiplierSymbol, f64, f64) = if symbol_kind == "multiscale_bump" {
        let delta = cfg.f64_or("delta", 0.125);
        let d = dim as f64;
        let p = cfg.f64_or("p", 2.0 * (d + 1.0) / (d + 3.0));
        let q = cfg.f64_or("q", 2.0);
        (MultiplierSymbol::multiscale_bump_representable(delta, n / 4.0, grid_log), p, q)
    } else {
        let a = cfg.f64_or("a", 2.0);
        let b = cfg.f64_or("b", 0.5);
        validate_oscillatory(a, b, dim)?;
        let d = dim as f64;
        let p = cfg.f64_or("p", 1.0 / (0.5 + b / (a * d)));
        let q = cfg.f64_or("q", p / (p - 1.0));
        (MultiplierSymbol::oscillatory(a, b, xi0), p, q)
    };
    let q_dual = q / (q - 1.0);
    let r = cfg.f64_or("r", 2.0);
    let spans = cfg.ilist_or("spans", &[2, 3, 4, 5, 6]);

    let pair = CalderonPair::new();
    let k_all: Vec<i32> = pair.k_range(dim, grid_log).collect();
    let budget = ProbeBudget::light();
    let ell_max = cfg.u64_or("ell_max", 6) as u32;
    let c_sparse = match regime {
        SparseRegime::QBelow2 => {
            crate::norms::cal_a(&m, dim, grid_log, &k_all, ell_max, p, r, q, &budget)?.0
        }
        SparseRegime::QEquals2 => {
            crate::norms::cal_a(&m, dim, grid_log, &k_all, ell_max, p, p, 2.0, &budget)?.0
        }
        SparseRegime::QAbove2 => {
            let a1 = crate::norms::cal_a(&m, dim, grid_log, &k_all, ell_max, p, p, q, &budget)?.0;
            let a2 =
                crate::norms::cal_a(&m, dim, grid_log, &k_all, ell_max, q_dual, r, r, &budget)?.0;
            a1 + a2
        }
    };
    if c_sparse == 0.0 {
        return Err(Error::InvalidParameter("sparse constant estimate is zero".into()));
    }

    let s0 = DyadicCube::root(dim, grid_log);
    let opts = MaximizerOptions { min_log: cfg.u64_or("min_log", 2) as u32, ..Default::default() };
    let n2 = grid_log as i32;
    let mut rows = Vec::new();
    let mut max_by_span: BTreeMap<i32, f64> = BTreeMap::new();
    for &span in &spans {
        let n1 = n2 - span;
        let ratios: Vec<(u64, f64, f64, f64)> = (0..seeds)
            .into_par_iter()
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.u64_or("seed", 0) * 104729 + seed);
                let f1 = GridFunction::random_gaussian_on(dim, grid_log, &s0, &mut rng);
                let f2 = GridFunction::random_gaussian(dim, grid_log, &mut rng);
                let tf = apply_truncated(&f1, &m, n1, n2, &k_all).unwrap();
                let num = tf.inner(&f2).norm();
                let (lstar, _) = lambda_star_star(&f1, &f2, &s0, p, q_dual, gamma, &opts).unwrap();
                let ratio = if lstar > 0.0 { num / (c_sparse * lstar) } else { 0.0 };
                (seed, num, lstar, ratio)
            })
            .collect();
        for (seed, num, lstar, ratio) in ratios {
            max_by_span.entry(span).and_modify(|v| *v = v.max(ratio)).or_insert(ratio);
            rows.push((span, seed, num, lstar, ratio));
        }
    }
    let mut csv = csv_header(
        "sparse_ratio",
        cfg,
        &[
            ("p_used".into(), format!("{p}")),
            ("q_used".into(), format!("{q}")),
            ("c_sparse_lower".into(), format!("{c_sparse}")),
            (
                "note".into(),
                "denominator uses lower estimates for C and Lambda**; ratios are upper bounds"
                    .into(),
            ),
        ],
    );
    csv.push_str("span,seed,inner_product,lambda_star_star,ratio\n");
    for (span, seed, num, lstar, ratio) in &rows {
        csv.push_str(&format!("{span},{seed},{num},{lstar},{ratio}\n"));
    }
    csv.push_str("span,max_ratio\n");
    for (span, v) in &max_by_span {
        csv.push_str(&format!("{span},{v}\n"));
    }
    Ok(ExperimentOutput { name: "sparse_ratio".into(), fits: vec![], csv })
}

/// Besov-norm delta-scaling for the multiscale bump family at fixed
/// exponents: fits the value against delta.
pub fn exp_besov_delta(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let dim = cfg.u64_or("dim", 2) as u8;
    let grid_log = cfg.u64_or("grid_log", 9) as u32;
    let n = (1u64 << grid_log) as f64;
    let d = dim as f64;
    let p = cfg.f64_or("p", 2.0 * (d + 1.0) / (d + 3.0));
    let q = cfg.f64_or("q", 2.0);
    let r = cfg.f64_or("r", p);
    let alpha = d * (1.0 / p - 1.0 / q);
    let rho0 = cfg.f64_or("ref_radius", n / 4.0);
    let delta_list = cfg.list_or("delta_list", &[0.25, 0.125, 0.0625, 0.03125]);
    let k_ref = rho0.log2() as i32;
    let ell_max = cfg.u64_or("ell_max", 7) as u32;
    let t_list = cfg.list_or("t_grid", &[1.0]);
    let budget = ProbeBudget {
        gaussians: cfg.u64_or("probe_gaussians", 24) as usize,
        wave_packets: 12,
        ascent_steps: cfg.u64_or("probe_ascent", 14) as usize,
        seed: 0x9E0B,
    };
    let mut rows = Vec::new();
    for &delta in &delta_list {
        if delta * rho0 < 2.0 {
            return Err(Error::GridTooSmall(format!("delta {delta} unresolved at radius {rho0}")));
        }
        let m = MultiplierSymbol::multiscale_bump_representable(delta, rho0, grid_log);
        let (lo, up) = crate::norms::besov_mult_norm(
            &m, dim, grid_log, alpha, r, q, &t_list, k_ref, ell_max, &budget,
        )?;
        rows.push((delta, lo, up));
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|row| (row.0, row.1)).collect();
    let fit = fit_exponent(&pts)?;
    let expected = -(d * (1.0 / p - 0.5) - 0.5);
    let mut csv = csv_header(
        "besov_delta",
        cfg,
        &[
            ("alpha".into(), format!("{alpha}")),
            ("expected_slope".into(), format!("{expected}")),
            ("fitted_slope".into(), format!("{}", fit.slope)),
        ],
    );
    csv.push_str("delta,besov_lower,besov_upper\n");
    for (dl, lo, up) in &rows {
        csv.push_str(&format!("{dl},{lo},{up}\n"));
    }
    Ok(ExperimentOutput {
        name: "besov_delta".into(),
        fits: vec![("delta_slope".into(), fit)],
        csv,
    })
}

/// Dispatch by name.
pub fn run_experiment(name: &str, cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    match name {
        "stationary_phase" => exp_stationary_phase(cfg),
        "necessity" => exp_necessity(cfg),
        "radial_bump" => exp_radial_bump(cfg),
        "single_scale" => exp_single_scale(cfg),
        "sparse_ratio" => exp_sparse_ratio(cfg),
        "besov_delta" => exp_besov_delta(cfg),
        other => Err(Error::InvalidParameter(format!("unknown experiment {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_exponent_examples() {
        let pts: Vec<(f64, f64)> = (1..=5).map(|i| (i as f64, (i as f64).powi(2))).collect();
        let fit = fit_exponent(&pts).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        let flat: Vec<(f64, f64)> = (1..=5).map(|i| (i as f64, 3.0)).collect();
        assert!(fit_exponent(&flat).unwrap().slope.abs() < 1e-12);
        assert!(fit_exponent(&pts[..3]).is_err());
        assert!(fit_exponent(&[(1.0, -1.0), (2.0, 1.0), (3.0, 1.0), (4.0, 1.0)]).is_err());
    }

    #[test]
    fn fit_exponent_with_noise() {
        let mut pts = Vec::new();
        for i in 1..=8 {
            let x = 2f64.powi(i);
            let noise = 1.0 + 0.05 * if i % 2 == 0 { 1.0 } else { -1.0 };
            pts.push((x, x.powf(1.5) * noise));
        }
        let fit = fit_exponent(&pts).unwrap();
        assert!((fit.slope - 1.5).abs() < 0.05, "slope {}", fit.slope);
    }

    #[test]
    fn config_parsing() {
        let cfg = ExperimentConfig::parse("a=2 b=0.5\n# comment\nt_list=2,4,8\n");
        assert_eq!(cfg.f64_or("a", 0.0), 2.0);
        assert_eq!(cfg.list_or("t_list", &[]), vec![2.0, 4.0, 8.0]);
        assert_eq!(cfg.f64_or("missing", 7.0), 7.0);
    }

    #[test]
    fn stationary_phase_rejects_small_grid() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("grid_log", 6);
        cfg.set("a", 2.0);
        cfg.set("b", 0.0);
        assert!(exp_stationary_phase(&cfg).is_err());
    }

    #[test]
    fn oscillatory_validation() {
        assert!(validate_oscillatory(1.0, 0.2, 1).is_err());
        assert!(validate_oscillatory(2.0, 1.5, 1).is_err()); // b >= ad/2
        assert!(validate_oscillatory(2.0, 0.5, 1).is_ok());
    }
}
