//! Sparse forms over dyadic cube families: evaluation, packing-constrained
//! maximization (exact tree DP on small lattices, value-greedy insertion on
//! large ones) and an exhaustive oracle.
//!
//! Operational sparseness is the Carleson packing condition: a family `S`
//! is `gamma`-packed when every `Q in S` satisfies
//! `sum_{P in S, P ⊆ Q} |P| <= |Q| / gamma`. The measurable-selection
//! definition (`E_Q ⊆ Q` disjoint with `|E_Q| >= gamma |Q|`) can be
//! verified a posteriori by a greedy bottom-up assignment.

use std::collections::BTreeMap;

use crate::cube::{DyadicCube, DyadicLattice};
use crate::dyadic::average;
use crate::error::{Error, Result};
use crate::grid::GridFunction;

/// A family of dyadic cubes with its packing certificate.
#[derive(Debug, Clone)]
pub struct SparseFamily {
    pub cubes: Vec<DyadicCube>,
    pub gamma: f64,
    /// Per-cube `sum_{P ⊆ Q} |P|` over the family, paired with the budget
    /// `|Q| / gamma`.
    pub packing_certificate: Vec<(DyadicCube, usize, f64)>,
}

impl SparseFamily {
    pub fn new(cubes: Vec<DyadicCube>, gamma: f64) -> Self {
        let packing_certificate = cubes
            .iter()
            .map(|q| {
                let mass: usize =
                    cubes.iter().filter(|p| q.contains_cube(p)).map(|p| p.volume()).sum();
                (*q, mass, q.volume() as f64 / gamma)
            })
            .collect();
        SparseFamily { cubes, gamma, packing_certificate }
    }

    pub fn is_packed(&self) -> bool {
        self.packing_certificate.iter().all(|(_, m, b)| (*m as f64) <= *b + 1e-9)
    }

    /// Greedy bottom-up disjoint-set assignment: `E_Q = Q` minus the points
    /// already claimed by smaller members. Returns the smallest achieved
    /// `|E_Q| / |Q|` (the measurable-selection constant).
    pub fn disjoint_selection_constant(&self, grid_log: u32) -> f64 {
        let mut order = self.cubes.clone();
        order.sort_by_key(|c| (c.log_side, *c));
        let mut claimed: BTreeMap<[usize; 2], ()> = BTreeMap::new();
        let mut worst = f64::INFINITY;
        for q in order {
            let mut free = 0usize;
            let mut mine = Vec::new();
            for p in q.points(grid_log) {
                if !claimed.contains_key(&p) {
                    free += 1;
                    mine.push(p);
                }
            }
            for p in mine {
                claimed.insert(p, ());
            }
            worst = worst.min(free as f64 / q.volume() as f64);
        }
        if worst.is_infinite() {
            1.0
        } else {
            worst
        }
    }
}

/// `Lambda^S(f1, f2) = sum_Q |Q| <f1>_{Q,p1} <f2>_{Q,p2}` (exact sum).
pub fn sparse_form(
    family: &SparseFamily,
    f1: &GridFunction,
    f2: &GridFunction,
    p1: f64,
    p2: f64,
) -> Result<f64> {
    let mut s = 0.0;
    for q in &family.cubes {
        s += q.volume() as f64 * average(f1, q, p1)? * average(f2, q, p2)?;
    }
    Ok(s)
}

/// Term value of one cube in the `Lambda**` form: the second average runs
/// over the periodic triple `3Q`.
pub fn triple_term(
    q: &DyadicCube,
    f1: &GridFunction,
    f2: &GridFunction,
    p1: f64,
    p2: f64,
) -> f64 {
    let a1 = average(f1, q, p1).unwrap();
    let pts = q.triple_points(f1.log_size());
    let s: f64 = pts.iter().map(|pt| f2.get(pt).norm().powf(p2)).sum();
    let a2 = (s / pts.len() as f64).powf(1.0 / p2);
    q.volume() as f64 * a1 * a2
}

/// Options for the packed maximizer.
#[derive(Debug, Clone, Copy)]
pub struct MaximizerOptions {
    /// Cubes below this log side are not considered (coarsens the mass
    /// unit; the result stays a certified lower bound).
    pub min_log: u32,
    /// Mass-resolution cap above which the exact DP falls back to greedy
    /// insertion.
    pub dp_mass_cap: usize,
}

impl Default for MaximizerOptions {
    fn default() -> Self {
        MaximizerOptions { min_log: 0, dp_mass_cap: 1 << 15 }
    }
}

struct DpNode {
    /// best value by subtree mass (in units of `2^{min_log * d}`)
    best: Vec<f64>,
    /// `chose[m]`: this cube selected at the optimum of mass `m`
    chose: Vec<bool>,
    /// per-child prefix tables for reconstruction
    prefixes: Vec<Vec<f64>>,
}

fn dp_build(
    q: &DyadicCube,
    gamma: f64,
    min_log: u32,
    unit: usize,
    term: &dyn Fn(&DyadicCube) -> f64,
    nodes: &mut BTreeMap<DyadicCube, DpNode>,
) {
    let children: Vec<DyadicCube> = if q.log_side > min_log { q.children() } else { Vec::new() };
    for c in &children {
        dp_build(c, gamma, min_log, unit, term, nodes);
    }
    let q_mass = q.volume() / unit;
    let cap = q_mass * (q.log_side - min_log + 1) as usize; // total subtree mass
    let mut merged = vec![f64::NEG_INFINITY; cap + 1];
    merged[0] = 0.0;
    let mut prefixes = Vec::with_capacity(children.len());
    for c in &children {
        let child = &nodes[c];
        let mut next = vec![f64::NEG_INFINITY; cap + 1];
        for m in 0..merged.len() {
            if merged[m] == f64::NEG_INFINITY {
                continue;
            }
            for (cm, cv) in child.best.iter().enumerate() {
                if *cv == f64::NEG_INFINITY {
                    continue;
                }
                let t = m + cm;
                if t <= cap {
                    let v = merged[m] + cv;
                    if v > next[t] {
                        next[t] = v;
                    }
                }
            }
        }
        merged = next;
        prefixes.push(merged.clone());
    }
    let budget = ((q.volume() as f64 / gamma) / unit as f64 + 1e-9).floor() as usize;
    let tq = term(q);
    let mut best = merged.clone();
    let mut chose = vec![false; cap + 1];
    for m in 0..=cap.saturating_sub(q_mass) {
        if merged[m] == f64::NEG_INFINITY {
            continue;
        }
        let t = m + q_mass;
        if t <= budget && t <= cap {
            let v = merged[m] + tq;
            if v > best[t] {
                best[t] = v;
                chose[t] = true;
            }
        }
    }
    nodes.insert(*q, DpNode { best, chose, prefixes });
}

fn dp_reconstruct(
    q: &DyadicCube,
    mass: usize,
    min_log: u32,
    unit: usize,
    nodes: &BTreeMap<DyadicCube, DpNode>,
    family: &mut Vec<DyadicCube>,
) {
    let node = &nodes[q];
    let mut m = mass;
    if node.chose[m] {
        family.push(*q);
        m -= q.volume() / unit;
    }
    let children: Vec<DyadicCube> = if q.log_side > min_log { q.children() } else { Vec::new() };
    if children.is_empty() {
        return;
    }
    // split the remaining mass over the children, walking prefixes backwards
    for i in (1..children.len()).rev() {
        let child = &nodes[&children[i]];
        let prev = &node.prefixes[i - 1];
        let cur = node.prefixes[i][m];
        let mut found = 0usize;
        for (cm, cv) in child.best.iter().enumerate() {
            if cm > m || *cv == f64::NEG_INFINITY {
                continue;
            }
            if m - cm < prev.len()
                && prev[m - cm] != f64::NEG_INFINITY
                && (prev[m - cm] + cv - cur).abs() <= 1e-9 * cur.abs().max(1.0)
            {
                found = cm;
                break;
            }
        }
        dp_reconstruct(&children[i], found, min_log, unit, nodes, family);
        m -= found;
    }
    dp_reconstruct(&children[0], m, min_log, unit, nodes, family);
}

/// Exact maximizer over packed subfamilies by bottom-up knapsack over
/// subtree masses.
fn maximize_dp(
    root: &DyadicCube,
    gamma: f64,
    min_log: u32,
    term: &dyn Fn(&DyadicCube) -> f64,
) -> (f64, Vec<DyadicCube>) {
    let unit = (1usize << min_log).pow(root.dim as u32);
    let mut nodes: BTreeMap<DyadicCube, DpNode> = BTreeMap::new();
    dp_build(root, gamma, min_log, unit, term, &mut nodes);
    let root_node = &nodes[root];
    let (best_mass, best_val) = root_node
        .best
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
        .map(|(m, v)| (m, *v))
        .unwrap();
    let mut family = Vec::new();
    if best_val > 0.0 {
        dp_reconstruct(root, best_mass, min_log, unit, &nodes, &mut family);
    }
    family.sort();
    (best_val.max(0.0), family)
}

/// Value-ordered greedy insertion with packing feasibility checks.
fn maximize_greedy(
    root: &DyadicCube,
    lattice: &DyadicLattice,
    gamma: f64,
    min_log: u32,
    term: &dyn Fn(&DyadicCube) -> f64,
) -> (f64, Vec<DyadicCube>) {
    let mut cubes = lattice.cubes_within(root, min_log);
    let mut scored: Vec<(f64, DyadicCube)> = cubes.drain(..).map(|q| (term(&q), q)).collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut selected: Vec<DyadicCube> = Vec::new();
    let mut masses: BTreeMap<DyadicCube, usize> = BTreeMap::new();
    let mut total = 0.0;
    for (v, q) in scored {
        if v <= 0.0 {
            break;
        }
        let budget = |c: &DyadicCube| (c.volume() as f64 / gamma) + 1e-9;
        let inside: usize =
            selected.iter().filter(|p| q.contains_cube(p)).map(|p| p.volume()).sum();
        if (inside + q.volume()) as f64 > budget(&q) {
            continue;
        }
        let mut ok = true;
        for a in selected.iter() {
            if a.contains_cube(&q) {
                let m = masses[a] + q.volume();
                if m as f64 > budget(a) {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        for a in selected.iter() {
            if a.contains_cube(&q) {
                *masses.get_mut(a).unwrap() += q.volume();
            }
        }
        masses.insert(q, inside + q.volume());
        selected.push(q);
        total += v;
    }
    selected.sort();
    (total, selected)
}

/// Maximizes a nonnegative cube functional over `gamma`-packed families of
/// dyadic cubes inside `root`. Exact (tree DP) whenever the mass
/// resolution allows, greedy insertion otherwise; deterministic either
/// way, and the returned family is always feasible, so the value is a
/// certified lower bound for the packed supremum.
pub fn maximize_packed_form(
    root: &DyadicCube,
    grid_log: u32,
    gamma: f64,
    opts: &MaximizerOptions,
    term: &dyn Fn(&DyadicCube) -> f64,
) -> Result<(f64, SparseFamily)> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!("gamma must be in (0,1), got {gamma}")));
    }
    if opts.min_log > root.log_side {
        return Err(Error::InvalidParameter("min_log exceeds the root scale".into()));
    }
    let lattice = DyadicLattice::new(root.dim, grid_log);
    let unit = (1usize << opts.min_log).pow(root.dim as u32);
    let cap = root.volume() / unit * (root.log_side - opts.min_log + 1) as usize;
    let (value, cubes) = if cap <= opts.dp_mass_cap {
        maximize_dp(root, gamma, opts.min_log, term)
    } else {
        maximize_greedy(root, &lattice, gamma, opts.min_log, term)
    };
    let fam = SparseFamily::new(cubes, gamma);
    debug_assert!(fam.is_packed());
    Ok((value, fam))
}

/// Maximizer of the sparse form `Lambda` over packed families; the
/// deterministic certified lower bound for the sparse supremum.
pub fn greedy_lambda_star(
    f1: &GridFunction,
    f2: &GridFunction,
    p1: f64,
    p2: f64,
    gamma: f64,
    opts: &MaximizerOptions,
) -> Result<(f64, SparseFamily)> {
    let root = DyadicCube::root(f1.dim(), f1.log_size());
    let term = |q: &DyadicCube| {
        q.volume() as f64 * average(f1, q, p1).unwrap() * average(f2, q, p2).unwrap()
    };
    maximize_packed_form(&root, f1.log_size(), gamma, opts, &term)
}

/// The reference-cube-restricted maximal form: cubes inside `s0`, second
/// function averaged over periodic triples.
pub fn lambda_star_star(
    f1: &GridFunction,
    f2: &GridFunction,
    s0: &DyadicCube,
    p: f64,
    q_dual: f64,
    gamma: f64,
    opts: &MaximizerOptions,
) -> Result<(f64, SparseFamily)> {
    let term = |q: &DyadicCube| triple_term(q, f1, f2, p, q_dual);
    maximize_packed_form(s0, f1.log_size(), gamma, opts, &term)
}

/// Exhaustive maximum of `Lambda` over packed subfamilies; exponential
/// time, restricted to tiny lattices.
pub fn brute_lambda_star(
    f1: &GridFunction,
    f2: &GridFunction,
    p1: f64,
    p2: f64,
    gamma: f64,
    max_cubes: usize,
    min_log: u32,
) -> Result<(f64, SparseFamily)> {
    let root = DyadicCube::root(f1.dim(), f1.log_size());
    let lattice = DyadicLattice::new(f1.dim(), f1.log_size());
    let cubes = lattice.cubes_within(&root, min_log);
    if cubes.len() > max_cubes || cubes.len() > 22 {
        return Err(Error::TooLarge(format!(
            "brute force over {} cubes refused (cap {max_cubes}, hard cap 22)",
            cubes.len()
        )));
    }
    let terms: Vec<f64> = cubes
        .iter()
        .map(|q| q.volume() as f64 * average(f1, q, p1).unwrap() * average(f2, q, p2).unwrap())
        .collect();
    let n = cubes.len();
    let mut best_val = 0.0f64;
    let mut best_mask = 0usize;
    for mask in 0usize..(1 << n) {
        let mut val = 0.0;
        for i in 0..n {
            if mask >> i & 1 == 1 {
                val += terms[i];
            }
        }
        if val <= best_val {
            continue;
        }
        let mut ok = true;
        'outer: for i in 0..n {
            if mask >> i & 1 == 0 {
                continue;
            }
            let mut mass = 0usize;
            for j in 0..n {
                if mask >> j & 1 == 1 && cubes[i].contains_cube(&cubes[j]) {
                    mass += cubes[j].volume();
                }
            }
            if mass as f64 > cubes[i].volume() as f64 / gamma + 1e-9 {
                ok = false;
                break 'outer;
            }
        }
        if ok {
            best_val = val;
            best_mask = mask;
        }
    }
    let family: Vec<DyadicCube> =
        (0..n).filter(|i| best_mask >> i & 1 == 1).map(|i| cubes[i]).collect();
    Ok((best_val, SparseFamily::new(family, gamma)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ones(dim: u8, j: u32) -> GridFunction {
        let mut f = GridFunction::zero(dim, j);
        for v in f.values_mut() {
            *v = Complex64::new(1.0, 0.0);
        }
        f
    }

    #[test]
    fn sparse_form_examples() {
        let f = ones(1, 2);
        let root = DyadicCube::root(1, 2);
        let fam = SparseFamily::new(vec![root], 0.5);
        assert_eq!(sparse_form(&fam, &f, &f, 1.0, 1.0).unwrap(), 4.0);
        // root + left child: |S0| + |S0|/2
        let child = DyadicCube::new(1, [0, 0], 1);
        let fam2 = SparseFamily::new(vec![root, child], 0.5);
        assert_eq!(sparse_form(&fam2, &f, &f, 1.0, 1.0).unwrap(), 6.0);
        assert!(
            sparse_form(&fam2, &f, &f, 1.0, 1.0).unwrap()
                >= sparse_form(&fam, &f, &f, 1.0, 1.0).unwrap()
        );
    }

    #[test]
    fn packing_certificate() {
        let root = DyadicCube::root(1, 2);
        let child = DyadicCube::new(1, [0, 0], 1);
        let fam = SparseFamily::new(vec![root, child], 0.5);
        assert!(fam.is_packed());
        let tight = SparseFamily::new(vec![root, child], 0.9);
        assert!(!tight.is_packed());
    }

    #[test]
    fn dirac_tower_found() {
        // f1 = f2 = Dirac: the optimal family is the tower at x0
        let mut f = GridFunction::zero(1, 3);
        f.values_mut()[5] = Complex64::new(1.0, 0.0);
        let gamma = 0.5;
        let (val, fam) =
            greedy_lambda_star(&f, &f, 1.0, 1.0, gamma, &MaximizerOptions::default()).unwrap();
        let mut tower_val = 0.0;
        for j in 0..=3u32 {
            let q = DyadicCube::containing(1, &[5, 0], j);
            tower_val += q.volume() as f64
                * average(&f, &q, 1.0).unwrap()
                * average(&f, &q, 1.0).unwrap();
        }
        assert!(fam.is_packed());
        assert!((val - tower_val).abs() < 1e-12, "{val} vs tower {tower_val}");
    }

    #[test]
    fn greedy_matches_brute_on_small_grids() {
        let mut worst: f64 = 1.0;
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let f1 = GridFunction::random_gaussian(1, 3, &mut rng);
            let f2 = GridFunction::random_gaussian(1, 3, &mut rng);
            let (bval, _) = brute_lambda_star(&f1, &f2, 1.5, 2.0, 0.5, 22, 0).unwrap();
            let (gval, fam) =
                greedy_lambda_star(&f1, &f2, 1.5, 2.0, 0.5, &MaximizerOptions::default()).unwrap();
            assert!(fam.is_packed());
            assert!(gval <= bval + 1e-9);
            worst = worst.min(gval / bval);
        }
        assert!(worst >= 0.95, "greedy within 5% of brute force, worst {worst}");
    }

    #[test]
    fn brute_rejects_large() {
        let f = ones(1, 5);
        assert!(brute_lambda_star(&f, &f, 1.0, 1.0, 0.5, 100, 0).is_err());
    }

    #[test]
    fn determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let f1 = GridFunction::random_gaussian(1, 3, &mut rng);
        let f2 = GridFunction::random_gaussian(1, 3, &mut rng);
        let a = brute_lambda_star(&f1, &f2, 1.0, 2.0, 0.5, 22, 0).unwrap();
        let b = brute_lambda_star(&f1, &f2, 1.0, 2.0, 0.5, 22, 0).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.cubes, b.1.cubes);
    }

    #[test]
    fn gamma_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let f1 = GridFunction::random_gaussian(1, 4, &mut rng);
        let f2 = GridFunction::random_gaussian(1, 4, &mut rng);
        let opts = MaximizerOptions::default();
        let mut prev = f64::INFINITY;
        for gamma in [0.25, 0.5, 0.75, 0.95] {
            let (v, _) = greedy_lambda_star(&f1, &f2, 1.5, 1.5, gamma, &opts).unwrap();
            assert!(v <= prev + 1e-9, "gamma={gamma}: {v} > {prev}");
            prev = v;
        }
    }

    #[test]
    fn gamma_near_one_is_disjoint_packing() {
        // gamma -> 1: only antichains of disjoint cubes are feasible
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        let f1 = GridFunction::random_gaussian(1, 3, &mut rng);
        let f2 = GridFunction::random_gaussian(1, 3, &mut rng);
        let gamma = 0.99;
        let (bval, bfam) = brute_lambda_star(&f1, &f2, 1.0, 1.0, gamma, 22, 0).unwrap();
        for a in &bfam.cubes {
            for b in &bfam.cubes {
                if a != b {
                    assert!(!a.contains_cube(b) && !b.contains_cube(a));
                }
            }
        }
        let (gval, _) =
            greedy_lambda_star(&f1, &f2, 1.0, 1.0, gamma, &MaximizerOptions::default()).unwrap();
        assert!((gval - bval).abs() <= 1e-9 * bval.max(1.0));
    }

    #[test]
    fn holder_monotone_in_exponents() {
        let mut rng = ChaCha8Rng::seed_from_u64(80);
        let f1 = GridFunction::random_gaussian(1, 3, &mut rng);
        let f2 = GridFunction::random_gaussian(1, 3, &mut rng);
        let root = DyadicCube::root(1, 3);
        let fam = SparseFamily::new(vec![root, DyadicCube::new(1, [0, 0], 1)], 0.5);
        let v11 = sparse_form(&fam, &f1, &f2, 1.0, 1.0).unwrap();
        let v12 = sparse_form(&fam, &f1, &f2, 1.0, 2.0).unwrap();
        let v22 = sparse_form(&fam, &f1, &f2, 2.0, 2.0).unwrap();
        assert!(v11 <= v12 && v12 <= v22);
    }

    #[test]
    fn disjoint_selection_constant_reported() {
        let root = DyadicCube::root(1, 3);
        let fam = SparseFamily::new(
            vec![root, DyadicCube::new(1, [0, 0], 2), DyadicCube::new(1, [4, 0], 2)],
            0.5,
        );
        assert!(fam.is_packed());
        let c = fam.disjoint_selection_constant(3);
        assert!((0.0..=1.0).contains(&c));
    }
}
