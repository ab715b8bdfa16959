//! Atomic decomposition on a reference cube: level sets of the Peetre
//! square function, classification of dyadic cubes, Whitney families,
//! subatoms and atoms with their coefficient aggregates.
//!
//! Scale conversion: the classical presentation indexes subatom cubes by
//! `L(R) = -k` (side `2^-k`); on the grid we index by the log side `j` in
//! grid units, so `k = -j`. See [`crate::scales`] for the conversion
//! helpers used by every inequality check.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;

use crate::cube::{DyadicCube, DyadicLattice, PointSet};
use crate::dyadic::{hl_maximal, interior_levels, mart_diff, peetre_square_fn, top_expectation};
use crate::error::{Error, Result};
use crate::grid::GridFunction;

/// `mu_min` truncation parameter: `-inf` keeps every generation,
/// `+inf` keeps none.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MuMin {
    NegInf,
    Value(i32),
    PosInf,
}

impl MuMin {
    pub fn admits(&self, mu: i32) -> bool {
        match self {
            MuMin::NegInf => true,
            MuMin::Value(v) => mu > *v,
            MuMin::PosInf => false,
        }
    }
}

/// Maximal-function threshold for the fattened level sets:
/// `2^{-1} (10 sqrt d)^{-d}`.
pub fn omega_tilde_threshold(dim: u8) -> f64 {
    let d = dim as f64;
    0.5 * (10.0 * d.sqrt()).powf(-d)
}

/// The constant `C_d = 5^d * 2 * (10 sqrt d)^d` from the classical
/// weak-type bound `|~Omega_mu| <= C_d |Omega_mu|`.
pub fn c_d(dim: u8) -> f64 {
    let d = dim as f64;
    5f64.powf(d) * 2.0 * (10.0 * d.sqrt()).powf(d)
}

/// Level sets `Omega_mu = {G f > 2^mu}` and their maximal fattenings.
#[derive(Debug, Clone)]
pub struct LevelSets {
    pub dim: u8,
    pub grid_log: u32,
    /// Empty iff the input vanished identically.
    pub mu_range: Option<(i32, i32)>,
    omega: Vec<PointSet>,
    omega_tilde: Vec<PointSet>,
}

impl LevelSets {
    pub fn mu_lo(&self) -> Option<i32> {
        self.mu_range.map(|(lo, _)| lo)
    }

    pub fn mu_hi(&self) -> Option<i32> {
        self.mu_range.map(|(_, hi)| hi)
    }

    /// `Omega_mu`, extended outside the stored range: full positivity set
    /// below `mu_lo`, empty above `mu_hi`.
    pub fn omega(&self, mu: i32) -> PointSet {
        match self.mu_range {
            None => PointSet::empty(self.dim, self.grid_log),
            Some((lo, hi)) => {
                if mu < lo {
                    self.omega[0].clone()
                } else if mu > hi {
                    PointSet::empty(self.dim, self.grid_log)
                } else {
                    self.omega[(mu - lo) as usize].clone()
                }
            }
        }
    }

    pub fn omega_tilde(&self, mu: i32) -> PointSet {
        match self.mu_range {
            None => PointSet::empty(self.dim, self.grid_log),
            Some((lo, hi)) => {
                if mu < lo {
                    self.omega_tilde[0].clone()
                } else if mu > hi {
                    PointSet::empty(self.dim, self.grid_log)
                } else {
                    self.omega_tilde[(mu - lo) as usize].clone()
                }
            }
        }
    }
}

/// Builds the level sets of a nonnegative function `gf` (typically the
/// Peetre square function) supported in `s0`. The range is chosen so that
/// `Omega_{mu_lo} = {gf > 0}` and `Omega_{mu_hi}` is empty.
pub fn level_sets(gf: &GridFunction, s0: &DyadicCube) -> Result<LevelSets> {
    gf.require_supported_in(s0, "level_sets input")?;
    let dim = gf.dim();
    let grid_log = gf.log_size();
    let vals: Vec<f64> = gf.values().iter().map(|v| v.norm()).collect();
    let max = vals.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(LevelSets { dim, grid_log, mu_range: None, omega: vec![], omega_tilde: vec![] });
    }
    let minpos = vals.iter().cloned().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
    let mu_lo = minpos.log2().floor() as i32 - 1;
    let mu_hi = max.log2().ceil() as i32;
    let thr = omega_tilde_threshold(dim);
    let mut omega = Vec::new();
    let mut omega_tilde = Vec::new();
    for mu in mu_lo..=mu_hi {
        let t = 2f64.powi(mu);
        let mut om = PointSet::empty(dim, grid_log);
        let mut indicator = GridFunction::zero(dim, grid_log);
        for p in s0.points(grid_log) {
            let idx = gf.index_of(&p);
            if vals[idx] > t {
                om.insert(&p);
                indicator.values_mut()[idx] = Complex64::new(1.0, 0.0);
            }
        }
        let m = hl_maximal(&indicator);
        let mut omt = PointSet::empty(dim, grid_log);
        for idx in 0..m.len() {
            if m.values()[idx].re > thr {
                omt.insert_idx(idx);
            }
        }
        omega.push(om);
        omega_tilde.push(omt);
    }
    Ok(LevelSets { dim, grid_log, mu_range: Some((mu_lo, mu_hi)), omega, omega_tilde })
}

/// A Whitney family together with the measured `dist/diam` ratio per cube.
#[derive(Debug, Clone)]
pub struct WhitneyFamily {
    pub cubes: Vec<DyadicCube>,
    /// `dist(W, complement) / (sqrt(d) * side)` per cube; infinite when the
    /// complement is empty (the whole-grid degenerate case).
    pub ratios: Vec<f64>,
    pub c_lo: f64,
    pub c_hi: f64,
    pub degenerate_whole: bool,
}

impl WhitneyFamily {
    /// Cubes whose achieved upper ratio exceeds the target `c_hi`.
    pub fn upper_violations(&self) -> Vec<(DyadicCube, f64)> {
        self.cubes
            .iter()
            .zip(&self.ratios)
            .filter(|(_, &r)| r.is_finite() && r > self.c_hi)
            .map(|(c, &r)| (*c, r))
            .collect()
    }
}

/// Exact squared Euclidean distance transform (Felzenszwalb-Huttenlocher).
/// `f[i] = 0` at sites, `INF` elsewhere; returns squared distances.
fn dt_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0f64; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let num = (f[q] + (q * q) as f64) - (f[v[k]] + (v[k] * v[k]) as f64);
            let den = (2 * q - 2 * v[k]) as f64;
            let s = num / den;
            if s <= z[k] {
                if k == 0 {
                    // replace the lone parabola
                    v[0] = q;
                    z[0] = f64::NEG_INFINITY;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        d[q] = dq * dq + f[v[k]];
    }
    d
}

/// Squared distance from every grid point to the complement of `set`
/// (non-periodic). `None` when the complement is empty.
fn edt_sq_to_complement(set: &PointSet) -> Option<Vec<f64>> {
    let n = set.side();
    let len = set.universe_len();
    let mut f = vec![0.0f64; len];
    let mut any = false;
    for i in 0..len {
        if set.contains_idx(i) {
            f[i] = f64::INFINITY;
        } else {
            any = true;
        }
    }
    if !any {
        return None;
    }
    if set.dim == 1 {
        return Some(dt_1d(&f));
    }
    // rows then columns
    let mut tmp = vec![0.0f64; len];
    for i in 0..n {
        let row = dt_1d(&f[i * n..(i + 1) * n]);
        tmp[i * n..(i + 1) * n].copy_from_slice(&row);
    }
    let mut out = vec![0.0f64; len];
    let mut col = vec![0.0f64; n];
    for j in 0..n {
        for i in 0..n {
            col[i] = tmp[i * n + j];
        }
        let dcol = dt_1d(&col);
        for i in 0..n {
            out[i * n + j] = dcol[i];
        }
    }
    Some(out)
}

/// Whitney decomposition of an open set into maximal dyadic cubes `W`
/// contained in the set with `dist(W, complement) >= c_lo * diam(W)`.
///
/// `diam` is the exact point-set diameter `sqrt(d) * (side - 1)`, so single
/// points always qualify and the selected cubes tile the set exactly. The
/// achieved upper ratio `dist / (sqrt(d) * side)` is reported per cube
/// against the target `c_hi`. An empty complement returns the ambient cube.
pub fn whitney(
    open_set: &PointSet,
    c_lo: f64,
    c_hi: f64,
    ambient: &DyadicCube,
) -> Result<WhitneyFamily> {
    if c_lo < 1.0 {
        return Err(Error::InvalidParameter(format!("whitney needs c_lo >= 1, got {c_lo}")));
    }
    let grid_log = open_set.grid_log;
    let dim = open_set.dim;
    if open_set.is_empty() {
        return Ok(WhitneyFamily { cubes: vec![], ratios: vec![], c_lo, c_hi, degenerate_whole: false });
    }
    let edt = edt_sq_to_complement(open_set);
    if edt.is_none() {
        // complement empty: the whole grid is the set
        return Ok(WhitneyFamily {
            cubes: vec![*ambient],
            ratios: vec![f64::INFINITY],
            c_lo,
            c_hi,
            degenerate_whole: true,
        });
    }
    let edt = edt.unwrap();
    let d = dim as f64;
    let mut cubes = Vec::new();
    let mut ratios = Vec::new();
    // recursive maximal selection
    let mut stack = vec![*ambient];
    while let Some(q) = stack.pop() {
        // inside the set?
        let inside = q.points(grid_log).all(|p| open_set.contains(&p));
        let mut ok = false;
        let mut dist = 0.0;
        if inside {
            let d2 = q
                .points(grid_log)
                .map(|p| edt[open_set.index_of(&p)])
                .fold(f64::INFINITY, f64::min);
            dist = d2.sqrt();
            let diam = d.sqrt() * (q.side() as f64 - 1.0);
            ok = dist >= c_lo * diam;
        }
        if ok {
            ratios.push(dist / (d.sqrt() * q.side() as f64));
            cubes.push(q);
        } else if q.log_side > 0 {
            let mut ch = q.children();
            // deterministic order
            ch.sort();
            for c in ch.into_iter().rev() {
                stack.push(c);
            }
        } else if inside {
            // single point inside the set always satisfies dist >= 0
            ratios.push(dist / d.sqrt());
            cubes.push(q);
        }
    }
    let mut pairs: Vec<(DyadicCube, f64)> = cubes.into_iter().zip(ratios).collect();
    pairs.sort_by(|a, b| a.0.cmp(&b.0));
    let (cubes, ratios) = pairs.into_iter().unzip();
    Ok(WhitneyFamily { cubes, ratios, c_lo, c_hi, degenerate_whole: false })
}

/// A subatom `e_R = (D_j f) 1_R` stored on the points of `R` only.
#[derive(Debug, Clone)]
pub struct SubAtom {
    pub cube: DyadicCube,
    pub mu: i32,
    /// Whitney host `W(R)`.
    pub host: DyadicCube,
    vals: Vec<Complex64>,
    pub l2_sq: f64,
}

impl SubAtom {
    pub fn iter_points<'a>(
        &'a self,
        grid_log: u32,
    ) -> impl Iterator<Item = ([usize; 2], Complex64)> + 'a {
        self.cube.points(grid_log).zip(self.vals.iter().copied())
    }
}

/// Standalone subatom operation: `e_R = D_{j}(f 1_R) = (D_j f) 1_R` for a
/// dyadic `R` strictly inside the reference cube, zero-extended to the
/// grid. Cubes at level 0 carry no martingale difference and yield zero.
pub fn subatom(f: &GridFunction, r: &DyadicCube) -> Result<GridFunction> {
    r.require_in_grid(f.log_size())?;
    let mut out = GridFunction::zero(f.dim(), f.log_size());
    if r.log_side == 0 {
        return Ok(out);
    }
    let d = mart_diff(f, r.log_side)?;
    for p in r.points(f.log_size()) {
        let idx = d.index_of(&p);
        out.values_mut()[idx] = d.values()[idx];
    }
    Ok(out)
}

/// Full atomic decomposition of `f` on `s0` at integrability exponent `p`.
#[derive(Debug, Clone)]
pub struct AtomicDecomposition {
    pub s0: DyadicCube,
    pub p: f64,
    pub grid_log: u32,
    pub dim: u8,
    /// Peetre square function of `f` on `s0`.
    pub gf: GridFunction,
    pub levels: LevelSets,
    /// Top conditional expectation (children-of-`s0` averages).
    pub top: GridFunction,
    /// All subatoms with nonzero mass, each classified and hosted.
    pub subatoms: Vec<SubAtom>,
    /// Whitney families indexed by generation.
    pub whitney: BTreeMap<i32, WhitneyFamily>,
}

impl AtomicDecomposition {
    /// Map `R -> mu` over contributing cubes.
    pub fn classification(&self) -> BTreeMap<DyadicCube, i32> {
        self.subatoms.iter().map(|s| (s.cube, s.mu)).collect()
    }

    /// Atom `a_{W,mu}` assembled on the grid.
    pub fn atom(&self, host: &DyadicCube, mu: i32) -> GridFunction {
        let mut out = GridFunction::zero(self.dim, self.grid_log);
        for s in self.subatoms.iter().filter(|s| s.mu == mu && s.host == *host) {
            for (p, v) in s.iter_points(self.grid_log) {
                let idx = out.index_of(&p);
                out.values_mut()[idx] += v;
            }
        }
        out
    }

    /// Hosts `(mu, W)` with at least one subatom.
    pub fn hosts(&self) -> BTreeSet<(i32, DyadicCube)> {
        self.subatoms.iter().map(|s| (s.mu, s.host)).collect()
    }

    /// `gamma_{W,mu} = (|W|^{-1} sum_{R in R_{W,mu}} ||e_R||_2^2)^{1/2}`.
    pub fn gamma(&self, host: &DyadicCube, mu: i32) -> f64 {
        let s: f64 = self
            .subatoms
            .iter()
            .filter(|s| s.mu == mu && s.host == *host)
            .map(|s| s.l2_sq)
            .sum();
        (s / host.volume() as f64).sqrt()
    }

    /// Fixed-subatom-scale coefficient `gamma^k_{W,mu}` for grid level `j`.
    pub fn gamma_at_level(&self, host: &DyadicCube, mu: i32, j: u32) -> f64 {
        let s: f64 = self
            .subatoms
            .iter()
            .filter(|s| s.mu == mu && s.host == *host && s.cube.log_side == j)
            .map(|s| s.l2_sq)
            .sum();
        (s / host.volume() as f64).sqrt()
    }

    /// `F_p(x) = (sum_{mu, W} gamma_{W,mu}^p 1_W(x))^{1/p}` (real valued).
    pub fn f_p(&self) -> GridFunction {
        self.f_p_with(self.p)
    }

    pub fn f_p_with(&self, p: f64) -> GridFunction {
        let mut acc = vec![0.0f64; self.top.len()];
        for (mu, w) in self.hosts() {
            let g = self.gamma(&w, mu).powf(p);
            for pt in w.points(self.grid_log) {
                acc[self.top.index_of(&pt)] += g;
            }
        }
        let mut out = GridFunction::zero(self.dim, self.grid_log);
        for (o, a) in out.values_mut().iter_mut().zip(acc) {
            *o = Complex64::new(a.powf(1.0 / p), 0.0);
        }
        out
    }

    /// Exact reconstruction `top + sum of all subatoms`.
    pub fn reconstruct(&self) -> GridFunction {
        let mut out = self.top.clone();
        for s in &self.subatoms {
            for (p, v) in s.iter_points(self.grid_log) {
                let idx = out.index_of(&p);
                out.values_mut()[idx] += v;
            }
        }
        out
    }

    /// `beta_{Q,p} = (sum_{mu} sum_{W in W_{Q,mu}} |W| gamma^p)^{1/p}`;
    /// the `mu`-sum is never truncated here.
    pub fn beta(&self, q: &DyadicCube, p: f64) -> f64 {
        let mut s = 0.0;
        for (mu, w) in self.hosts() {
            if q.contains_cube(&w) {
                s += w.volume() as f64 * self.gamma(&w, mu).powf(p);
            }
        }
        s.powf(1.0 / p)
    }

    /// `beta^k_{Q,p}` for subatom grid level `j`.
    pub fn beta_at_level(&self, q: &DyadicCube, p: f64, j: u32) -> f64 {
        let mut s = 0.0;
        for (mu, w) in self.hosts() {
            if q.contains_cube(&w) {
                s += w.volume() as f64 * self.gamma_at_level(&w, mu, j).powf(p);
            }
        }
        s.powf(1.0 / p)
    }

    /// `beta^{k,n}_{Q,p}`: subatom grid level `j`, host level `j + n`.
    pub fn beta_at_level_n(&self, q: &DyadicCube, p: f64, j: u32, n: u32) -> f64 {
        let mut s = 0.0;
        for (mu, w) in self.hosts() {
            if w.log_side == j + n && q.contains_cube(&w) {
                s += w.volume() as f64 * self.gamma_at_level(&w, mu, j).powf(p);
            }
        }
        s.powf(1.0 / p)
    }

    /// Bad piece `b^{k,n}_Q`: subatoms at grid level `j = -k` whose host
    /// `W` satisfies `W ⊆ Q`, `L(W) = j + n`, with generation `mu`
    /// admitted by `mu_min`.
    pub fn bad_piece(&self, q: &DyadicCube, mu_min: MuMin, k: i32, n: u32) -> GridFunction {
        let mut out = GridFunction::zero(self.dim, self.grid_log);
        if k >= 0 {
            return out; // grid levels are positive: j = -k >= 1
        }
        let j = (-k) as u32;
        for s in self.subatoms.iter().filter(|s| {
            s.cube.log_side == j
                && s.host.log_side == j + n
                && mu_min.admits(s.mu)
                && q.contains_cube(&s.host)
        }) {
            for (p, v) in s.iter_points(self.grid_log) {
                let idx = out.index_of(&p);
                out.values_mut()[idx] += v;
            }
        }
        out
    }

    /// `b^k_Q = sum_n b^{k,n}_Q`.
    pub fn bad_piece_level(&self, q: &DyadicCube, mu_min: MuMin, k: i32) -> GridFunction {
        let mut out = GridFunction::zero(self.dim, self.grid_log);
        if k >= 0 {
            return out;
        }
        let j = (-k) as u32;
        for s in self.subatoms.iter().filter(|s| {
            s.cube.log_side == j && mu_min.admits(s.mu) && q.contains_cube(&s.host)
        }) {
            for (p, v) in s.iter_points(self.grid_log) {
                let idx = out.index_of(&p);
                out.values_mut()[idx] += v;
            }
        }
        out
    }

    /// `b_Q = sum_k b^k_Q`.
    pub fn bad_total(&self, q: &DyadicCube, mu_min: MuMin) -> GridFunction {
        let mut out = GridFunction::zero(self.dim, self.grid_log);
        for s in self
            .subatoms
            .iter()
            .filter(|s| mu_min.admits(s.mu) && q.contains_cube(&s.host))
        {
            for (p, v) in s.iter_points(self.grid_log) {
                let idx = out.index_of(&p);
                out.values_mut()[idx] += v;
            }
        }
        out
    }

    /// Paper-convention `k` values carrying subatoms: `k = -j` over
    /// interior grid levels of `s0`.
    pub fn paper_k_range(&self) -> Vec<i32> {
        interior_levels(&self.s0).map(|j| -(j as i32)).collect()
    }
}

/// Classification map `R -> mu`: `R` runs over dyadic cubes strictly inside
/// `s0` with nonzero subatom, and `mu` is the unique generation with
/// `|R ∩ Omega_mu| > |R|/2 >= |R ∩ Omega_{mu+1}|`.
pub fn classify_cubes(f: &GridFunction, s0: &DyadicCube) -> Result<BTreeMap<DyadicCube, i32>> {
    let dec = atomic_decomposition(f, s0, 2.0)?;
    Ok(dec.classification())
}

/// Builds the atomic decomposition of `f` (supported in `s0`) at exponent
/// `p` in `(1, 2]`.
pub fn atomic_decomposition(
    f: &GridFunction,
    s0: &DyadicCube,
    p: f64,
) -> Result<AtomicDecomposition> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::InvalidExponent(format!("atomic decomposition needs 1 < p <= 2, got {p}")));
    }
    f.require_supported_in(s0, "atomic_decomposition input")?;
    s0.require_in_grid(f.log_size())?;
    let gf = peetre_square_fn(f, s0)?;
    let levels = level_sets(&gf, s0)?;
    let top = top_expectation(f, s0)?;
    let grid_log = f.log_size();
    let dim = f.dim();

    let mut subatoms: Vec<SubAtom> = Vec::new();
    let lat = DyadicLattice::new(dim, grid_log);
    let gvals: Vec<f64> = gf.values().iter().map(|v| v.norm()).collect();
    let mut used_mus: BTreeSet<i32> = BTreeSet::new();
    for j in interior_levels(s0) {
        let d = mart_diff(f, j)?;
        for r in lat.cubes_within(s0, j) {
            if r.log_side != j {
                continue;
            }
            let vals: Vec<Complex64> = r.points(grid_log).map(|pt| d.get(&pt)).collect();
            let l2_sq: f64 = vals.iter().map(|v| v.norm_sqr()).sum();
            if l2_sq == 0.0 {
                continue;
            }
            // unique mu: largest with #{x in R : gf > 2^mu} > |R|/2, found
            // from the (|R|/2 + 1)-th largest value of gf on R
            let mut rv: Vec<f64> = r.points(grid_log).map(|pt| gvals[gf.index_of(&pt)]).collect();
            rv.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let m = rv[r.volume() / 2];
            debug_assert!(m > 0.0, "peetre sup makes gf positive on all of R");
            let mut mu = m.log2().floor() as i32;
            while 2f64.powi(mu) >= m {
                mu -= 1;
            }
            while 2f64.powi(mu + 1) < m {
                mu += 1;
            }
            used_mus.insert(mu);
            subatoms.push(SubAtom { cube: r, mu, host: r, vals, l2_sq });
        }
    }

    // Whitney families per generation in use
    let mut whitney_by_mu: BTreeMap<i32, WhitneyFamily> = BTreeMap::new();
    let root = DyadicCube::root(dim, grid_log);
    for &mu in &used_mus {
        let omt = levels.omega_tilde(mu);
        let fam = whitney(&omt, 1.0, 4.0, &root)?;
        whitney_by_mu.insert(mu, restrict_whitney_to_s0(fam, s0));
    }

    // assign hosts
    for s in subatoms.iter_mut() {
        let fam = &whitney_by_mu[&s.mu];
        s.host = host_of(&s.cube, fam).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "no Whitney host for {:?} at mu={} (cannot happen for c_lo=1)",
                s.cube, s.mu
            ))
        })?;
    }
    subatoms.sort_by(|a, b| (a.mu, a.cube).cmp(&(b.mu, b.cube)));

    Ok(AtomicDecomposition { s0: *s0, p, grid_log, dim, gf, levels, top, subatoms, whitney: whitney_by_mu })
}

/// Applies the reference-cube convention: if some Whitney cube contains
/// `s0` the family collapses to `{s0}`, otherwise it is restricted to the
/// cubes meeting `s0` (which are then contained in it).
fn restrict_whitney_to_s0(fam: WhitneyFamily, s0: &DyadicCube) -> WhitneyFamily {
    if fam.cubes.iter().any(|w| w.contains_cube(s0)) {
        return WhitneyFamily {
            cubes: vec![*s0],
            ratios: vec![f64::INFINITY],
            c_lo: fam.c_lo,
            c_hi: fam.c_hi,
            degenerate_whole: true,
        };
    }
    let mut cubes = Vec::new();
    let mut ratios = Vec::new();
    for (w, r) in fam.cubes.iter().zip(&fam.ratios) {
        if s0.contains_cube(w) {
            cubes.push(*w);
            ratios.push(*r);
        }
    }
    WhitneyFamily { cubes, ratios, c_lo: fam.c_lo, c_hi: fam.c_hi, degenerate_whole: false }
}

fn host_of(r: &DyadicCube, fam: &WhitneyFamily) -> Option<DyadicCube> {
    let set: BTreeSet<DyadicCube> = fam.cubes.iter().copied().collect();
    for j in r.log_side..=fam.cubes.iter().map(|c| c.log_side).max().unwrap_or(r.log_side) {
        let anc = r.ancestor(j);
        if set.contains(&anc) {
            return Some(anc);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn level_sets_trivia() {
        // gf = [4,4,2,2] -> Omega_1 = {0,1}, Omega_2 = empty
        let gf = GridFunction::from_reals(1, 2, &[4.0, 4.0, 2.0, 2.0]).unwrap();
        let s0 = DyadicCube::root(1, 2);
        let ls = level_sets(&gf, &s0).unwrap();
        let om1 = ls.omega(1);
        assert!(om1.contains(&[0, 0]) && om1.contains(&[1, 0]));
        assert_eq!(om1.card(), 2);
        assert!(ls.omega(2).is_empty());
        // constant positive: Omega_mu = S0 below, empty above
        let c = GridFunction::from_reals(1, 2, &[3.0; 4]).unwrap();
        let lc = level_sets(&c, &s0).unwrap();
        assert_eq!(lc.omega(1).card(), 4);
        assert!(lc.omega(2).is_empty());
        // zero input: empty structure
        let z = GridFunction::zero(1, 2);
        assert!(level_sets(&z, &s0).unwrap().mu_range.is_none());
    }

    #[test]
    fn level_sets_monotone_and_contained() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s0 = DyadicCube::root(1, 4);
        let f = GridFunction::random_gaussian(1, 4, &mut rng);
        let gf = peetre_square_fn(&f, &s0).unwrap();
        let ls = level_sets(&gf, &s0).unwrap();
        let (lo, hi) = ls.mu_range.unwrap();
        for mu in lo..hi {
            assert!(ls.omega(mu + 1).is_subset_of(&ls.omega(mu)));
            assert!(ls.omega_tilde(mu + 1).is_subset_of(&ls.omega_tilde(mu)));
            assert!(ls.omega(mu).is_subset_of(&ls.omega_tilde(mu)));
        }
    }

    #[test]
    fn whitney_trivia() {
        let root = DyadicCube::root(1, 3);
        let empty = PointSet::empty(1, 3);
        assert!(whitney(&empty, 1.0, 4.0, &root).unwrap().cubes.is_empty());
        // whole grid
        let mut all = PointSet::empty(1, 3);
        for i in 0..8 {
            all.insert_idx(i);
        }
        let fam = whitney(&all, 1.0, 4.0, &root).unwrap();
        assert_eq!(fam.cubes, vec![root]);
        assert!(fam.degenerate_whole);
        // single point
        let mut one = PointSet::empty(1, 3);
        one.insert(&[5, 0]);
        let fam = whitney(&one, 1.0, 4.0, &root).unwrap();
        assert_eq!(fam.cubes.len(), 1);
        assert_eq!(fam.cubes[0].log_side, 0);
        assert_eq!(fam.cubes[0].corner[0], 5);
    }

    #[test]
    fn whitney_tiles_disjointly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dim in [1u8, 2] {
            let grid_log = if dim == 1 { 5 } else { 4 };
            let root = DyadicCube::root(dim, grid_log);
            let f = GridFunction::random_gaussian(dim, grid_log, &mut rng);
            let mut set = PointSet::empty(dim, grid_log);
            for (i, v) in f.values().iter().enumerate() {
                if v.re > 0.0 {
                    set.insert_idx(i);
                }
            }
            let fam = whitney(&set, 1.0, 4.0, &root).unwrap();
            let total: usize = fam.cubes.iter().map(|c| c.volume()).sum();
            assert_eq!(total, set.card(), "union must be the open set");
            let mut seen = PointSet::empty(dim, grid_log);
            for w in &fam.cubes {
                for p in w.points(grid_log) {
                    assert!(set.contains(&p));
                    assert!(!seen.contains(&p), "cubes overlap");
                    seen.insert(&p);
                }
                let d2 = edt_sq_to_complement(&set).unwrap();
                let dist = w
                    .points(grid_log)
                    .map(|p| d2[set.index_of(&p)])
                    .fold(f64::INFINITY, f64::min)
                    .sqrt();
                let diam = (dim as f64).sqrt() * (w.side() as f64 - 1.0);
                assert!(dist >= 1.0 * diam);
            }
        }
    }

    #[test]
    fn subatom_examples() {
        let f = GridFunction::from_reals(1, 2, &[4.0, 0.0, 2.0, 2.0]).unwrap();
        let r = DyadicCube::new(1, [0, 0], 1);
        let e = subatom(&f, &r).unwrap();
        assert!((e.values()[0].re - 2.0).abs() < 1e-14);
        assert!((e.values()[1].re + 2.0).abs() < 1e-14);
        assert_eq!(e.values()[2].norm(), 0.0);
        // constant f -> zero
        let c = GridFunction::from_reals(1, 2, &[1.0; 4]).unwrap();
        assert!(subatom(&c, &r).unwrap().norm_inf() < 1e-15);
        // mean zero for random f over all R
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = GridFunction::random_gaussian(1, 3, &mut rng);
        for j in 1..3u32 {
            for r in DyadicLattice::new(1, 3).level(j) {
                let e = subatom(&g, &r).unwrap();
                let s: Complex64 = e.values().iter().sum();
                assert!(s.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn decomposition_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for dim in [1u8, 2] {
            let grid_log = 4;
            let s0 = DyadicCube::root(dim, grid_log);
            let f = GridFunction::random_gaussian(dim, grid_log, &mut rng);
            let dec = atomic_decomposition(&f, &s0, 1.5).unwrap();
            let rec = dec.reconstruct();
            let rel = rec.sub(&f).norm_inf() / f.norm_inf();
            assert!(rel < 1e-12, "reconstruction error {rel}");
        }
    }

    #[test]
    fn decomposition_empty_for_zero() {
        let z = GridFunction::zero(1, 3);
        let s0 = DyadicCube::root(1, 3);
        let dec = atomic_decomposition(&z, &s0, 2.0).unwrap();
        assert!(dec.subatoms.is_empty());
        assert!(dec.reconstruct().norm_inf() == 0.0);
    }

    #[test]
    fn rejects_bad_exponent() {
        let z = GridFunction::zero(1, 3);
        let s0 = DyadicCube::root(1, 3);
        assert!(atomic_decomposition(&z, &s0, 1.0).is_err());
        assert!(atomic_decomposition(&z, &s0, 2.5).is_err());
    }

    #[test]
    fn single_subatom_gamma() {
        // f = single subatom on a pair: gamma_{W,mu} = |R|^{-1/2} ||e_R||_2
        // when W = R
        let mut f = GridFunction::zero(1, 4);
        f.values_mut()[4] = Complex64::new(1.0, 0.0);
        f.values_mut()[5] = Complex64::new(-1.0, 0.0);
        let s0 = DyadicCube::root(1, 4);
        let dec = atomic_decomposition(&f, &s0, 2.0).unwrap();
        // exactly one classified cube of level 1 carrying mass
        let r = DyadicCube::new(1, [4, 0], 1);
        let cls = dec.classification();
        assert!(cls.contains_key(&r));
        let mu = cls[&r];
        let host = dec.subatoms.iter().find(|s| s.cube == r).unwrap().host;
        if host == r {
            let e = subatom(&f, &r).unwrap();
            let want = e.norm_p(2.0) / (r.volume() as f64).sqrt();
            assert!((dec.gamma(&host, mu) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_piece_mu_inf_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let s0 = DyadicCube::root(1, 4);
        let f = GridFunction::random_gaussian(1, 4, &mut rng);
        let dec = atomic_decomposition(&f, &s0, 2.0).unwrap();
        let b = dec.bad_total(&s0, MuMin::PosInf);
        assert_eq!(b.norm_inf(), 0.0);
        // mu_min = -inf over S0 sums to f - top
        let b = dec.bad_total(&s0, MuMin::NegInf);
        let want = f.sub(&dec.top);
        assert!(b.sub(&want).norm_inf() < 1e-12);
    }
}
