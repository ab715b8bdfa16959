//! Conditional expectations, martingale differences, local square functions
//! and the uncentered Hardy-Littlewood maximal operator on the grid.
//!
//! Levels are indexed by side length: level `j` refers to dyadic cubes of
//! side `2^j` in grid units, `j = 0` the finest. The classical `E_n`/`D_n`
//! indexing over sides `2^{-n}` maps to ours by `n = -j`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cube::{DyadicCube, DyadicLattice};
use crate::error::{Error, Result};
use crate::grid::GridFunction;

/// Localized average `<f>_{Q,p} = (|Q|^{-1} sum_{x in Q} |f(x)|^p)^{1/p}`.
pub fn average(f: &GridFunction, q: &DyadicCube, p: f64) -> Result<f64> {
    if p < 1.0 {
        return Err(Error::InvalidExponent(format!("average needs p >= 1, got {p}")));
    }
    q.require_in_grid(f.log_size())?;
    let vol = q.volume() as f64;
    let s: f64 = q.points(f.log_size()).map(|pt| f.get(&pt).norm().powf(p)).sum();
    Ok((s / vol).powf(1.0 / p))
}

/// Conditional expectation at level `j`: constant on each dyadic cube of
/// side `2^j`, equal to the mean of `f` there.
pub fn cond_expect(f: &GridFunction, j: u32) -> Result<GridFunction> {
    if j > f.log_size() {
        return Err(Error::InvalidParameter(format!(
            "cond_expect level {j} out of range (J = {})",
            f.log_size()
        )));
    }
    if j == 0 {
        return Ok(f.clone());
    }
    let lat = DyadicLattice::new(f.dim(), f.log_size());
    let mut out = GridFunction::zero(f.dim(), f.log_size());
    for q in lat.level(j) {
        let vol = q.volume() as f64;
        let mean: Complex64 =
            q.points(f.log_size()).map(|p| f.get(&p)).sum::<Complex64>() / vol;
        for p in q.points(f.log_size()) {
            out.set(&p, mean);
        }
    }
    Ok(out)
}

/// Martingale difference `D_j = E_{j-1} - E_j`, mean zero on every cube of
/// side `2^j`.
pub fn mart_diff(f: &GridFunction, j: u32) -> Result<GridFunction> {
    if j == 0 || j > f.log_size() {
        return Err(Error::InvalidParameter(format!(
            "mart_diff level {j} out of range (1..={})",
            f.log_size()
        )));
    }
    Ok(cond_expect(f, j - 1)?.sub(&cond_expect(f, j)?))
}

/// Levels carrying martingale differences strictly inside `s0`:
/// `1..=L(S0)-1`. Empty for cubes of side <= 2.
pub fn interior_levels(s0: &DyadicCube) -> std::ops::RangeInclusive<u32> {
    if s0.log_side <= 1 {
        #[allow(clippy::reversed_empty_ranges)]
        return 1..=0;
    }
    1..=(s0.log_side - 1)
}

/// Top conditional expectation of the reproducing formula on `s0`: the
/// average over the children of `s0` (level `L(S0) - 1`), so that
/// `f = top + sum_{j in interior_levels} D_j f` exactly.
pub fn top_expectation(f: &GridFunction, s0: &DyadicCube) -> Result<GridFunction> {
    if s0.log_side == 0 {
        return Ok(f.clone());
    }
    cond_expect(f, s0.log_side - 1)
}

/// Local martingale square function on `s0`:
/// `g(x) = |top(x)| + (sum_j |D_j f(x)|^2)^{1/2}`.
pub fn local_square_fn(f: &GridFunction, s0: &DyadicCube) -> Result<GridFunction> {
    f.require_supported_in(s0, "local_square_fn input")?;
    let top = top_expectation(f, s0)?;
    let mut sq = vec![0.0f64; f.len()];
    for j in interior_levels(s0) {
        let d = mart_diff(f, j)?;
        for (acc, v) in sq.iter_mut().zip(d.values()) {
            *acc += v.norm_sqr();
        }
    }
    let mut out = GridFunction::zero(f.dim(), f.log_size());
    for p in s0.points(f.log_size()) {
        let idx = out.index_of(&p);
        let v = top.values()[idx].norm() + sq[idx].sqrt();
        out.values_mut()[idx] = Complex64::new(v, 0.0);
    }
    Ok(out)
}

/// Peetre-type square function: per level the martingale difference is
/// replaced by its supremum over the level-`j` cube containing `x`.
pub fn peetre_square_fn(f: &GridFunction, s0: &DyadicCube) -> Result<GridFunction> {
    f.require_supported_in(s0, "peetre_square_fn input")?;
    let top = top_expectation(f, s0)?;
    let lat = DyadicLattice::new(f.dim(), f.log_size());
    let mut sq = vec![0.0f64; f.len()];
    for j in interior_levels(s0) {
        let d = mart_diff(f, j)?;
        for q in lat.level(j) {
            let sup = q
                .points(f.log_size())
                .map(|p| d.get(&p).norm())
                .fold(0.0f64, f64::max);
            for p in q.points(f.log_size()) {
                let idx = d.index_of(&p);
                sq[idx] += sup * sup;
            }
        }
    }
    let mut out = GridFunction::zero(f.dim(), f.log_size());
    for p in s0.points(f.log_size()) {
        let idx = out.index_of(&p);
        let v = top.values()[idx].norm() + sq[idx].sqrt();
        out.values_mut()[idx] = Complex64::new(v, 0.0);
    }
    Ok(out)
}

/// Uncentered Hardy-Littlewood maximal function: the maximum over all
/// axis-parallel integer boxes containing `x` (clipped to the grid, not
/// periodic) of the mean of `|f|`. Exact, via prefix sums and sliding
/// window maxima per box shape.
pub fn hl_maximal(f: &GridFunction) -> GridFunction {
    let n = f.side();
    let abs: Vec<f64> = f.values().iter().map(|v| v.norm()).collect();
    let res = match f.dim() {
        1 => hl_max_1d(&abs, n),
        _ => hl_max_2d(&abs, n),
    };
    let mut out = GridFunction::zero(f.dim(), f.log_size());
    for (o, v) in out.values_mut().iter_mut().zip(res) {
        *o = Complex64::new(v, 0.0);
    }
    out
}

fn hl_max_1d(a: &[f64], n: usize) -> Vec<f64> {
    let mut prefix = vec![0.0f64; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + a[i];
    }
    let mut best = vec![0.0f64; n];
    for w in 1..=n {
        let means: Vec<f64> =
            (0..=n - w).map(|s| (prefix[s + w] - prefix[s]) / w as f64).collect();
        containing_window_max(&means, w, n, &mut best);
    }
    best
}

/// For a vector `means[s]` indexed by window starts (windows of length `w`
/// over `0..n`), updates `best[i] = max(best[i], max over starts s with
/// s <= i < s + w of means[s])` using a monotone deque.
fn containing_window_max(means: &[f64], w: usize, n: usize, best: &mut [f64]) {
    use std::collections::VecDeque;
    let n_starts = means.len(); // = n - w + 1
    let mut dq: VecDeque<usize> = VecDeque::new();
    let mut next = 0usize;
    for (i, b) in best.iter_mut().enumerate().take(n) {
        let hi = i.min(n_starts - 1);
        while next <= hi {
            while let Some(&back) = dq.back() {
                if means[back] <= means[next] {
                    dq.pop_back();
                } else {
                    break;
                }
            }
            dq.push_back(next);
            next += 1;
        }
        let lo = i.saturating_sub(w - 1);
        while let Some(&front) = dq.front() {
            if front < lo {
                dq.pop_front();
            } else {
                break;
            }
        }
        if let Some(&front) = dq.front() {
            if means[front] > *b {
                *b = means[front];
            }
        }
    }
}

fn hl_max_2d(a: &[f64], n: usize) -> Vec<f64> {
    // prefix[i][j] = sum over [0,i) x [0,j)
    let mut prefix = vec![0.0f64; (n + 1) * (n + 1)];
    let at = |i: usize, j: usize| i * (n + 1) + j;
    for i in 0..n {
        for j in 0..n {
            prefix[at(i + 1, j + 1)] =
                a[i * n + j] + prefix[at(i, j + 1)] + prefix[at(i + 1, j)] - prefix[at(i, j)];
        }
    }
    let box_sum = |i0: usize, j0: usize, w1: usize, w2: usize| -> f64 {
        prefix[at(i0 + w1, j0 + w2)] - prefix[at(i0, j0 + w2)] - prefix[at(i0 + w1, j0)]
            + prefix[at(i0, j0)]
    };
    let mut best = vec![0.0f64; n * n];
    let mut row_max = vec![0.0f64; n * n];
    for w1 in 1..=n {
        for w2 in 1..=n {
            let area = (w1 * w2) as f64;
            // step 1: for each start row s1, means over column starts; take
            // containing-window max along axis 2
            row_max.iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
            for s1 in 0..=n - w1 {
                let means: Vec<f64> =
                    (0..=n - w2).map(|s2| box_sum(s1, s2, w1, w2) / area).collect();
                let mut line = vec![f64::NEG_INFINITY; n];
                containing_window_max(&means, w2, n, &mut line);
                row_max[s1 * n..(s1 + 1) * n].copy_from_slice(&line);
            }
            // step 2: containing-window max along axis 1, per column j
            for j in 0..n {
                let col: Vec<f64> = (0..=n - w1).map(|s1| row_max[s1 * n + j]).collect();
                let mut line = vec![f64::NEG_INFINITY; n];
                containing_window_max(&col, w1, n, &mut line);
                for i in 0..n {
                    if line[i] > best[i * n + j] {
                        best[i * n + j] = line[i];
                    }
                }
            }
        }
    }
    best
}

/// Measured square-function constant `C_sq,p`: the maximum of
/// `||G_{S0} f||_p / ||f||_p` over a seeded battery of random functions
/// supported in the root cube.
pub fn measure_csq(dim: u8, log_size: u32, p: f64, n_seeds: u64) -> f64 {
    let s0 = DyadicCube::root(dim, log_size);
    let mut worst = 0.0f64;
    for seed in 0..n_seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC5_0000 + seed);
        let f = GridFunction::random_gaussian(dim, log_size, &mut rng);
        let g = peetre_square_fn(&f, &s0).expect("root support");
        let nf = f.norm_p(p);
        if nf > 0.0 {
            worst = worst.max(g.norm_p(p) / nf);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn gf(vals: &[f64]) -> GridFunction {
        let j = (vals.len() as f64).log2() as u32;
        GridFunction::from_reals(1, j, vals).unwrap()
    }

    #[test]
    fn average_examples() {
        let f = gf(&[0.0, 0.0, 0.0, 2.0]);
        let q = DyadicCube::root(1, 2);
        assert_eq!(average(&f, &q, 1.0).unwrap(), 0.5);
        assert_eq!(average(&f, &q, 2.0).unwrap(), 1.0);
        // constant function, any p
        let c = gf(&[3.0, 3.0, 3.0, 3.0]);
        assert!((average(&c, &q, 1.7).unwrap() - 3.0).abs() < 1e-14);
        assert!(average(&f, &q, 0.5).is_err());
    }

    #[test]
    fn cond_expect_examples() {
        let f = gf(&[4.0, 0.0, 2.0, 2.0]);
        assert_eq!(cond_expect(&f, 0).unwrap(), f);
        let e2 = cond_expect(&f, 2).unwrap();
        assert!(e2.values().iter().all(|v| (v.re - 2.0).abs() < 1e-15));
        let e1 = cond_expect(&f, 1).unwrap();
        assert!(e1.values().iter().all(|v| (v.re - 2.0).abs() < 1e-15));
        assert!(cond_expect(&f, 3).is_err());
        // idempotent
        let e1e1 = cond_expect(&e1, 1).unwrap();
        assert_eq!(e1, e1e1);
    }

    #[test]
    fn mart_diff_examples() {
        let f = gf(&[4.0, 0.0, 2.0, 2.0]);
        let d1 = mart_diff(&f, 1).unwrap();
        let want = [2.0, -2.0, 0.0, 0.0];
        for (v, w) in d1.values().iter().zip(want) {
            assert!((v.re - w).abs() < 1e-15);
        }
        // constant -> zero
        let c = gf(&[5.0, 5.0, 5.0, 5.0]);
        assert!(mart_diff(&c, 1).unwrap().norm_inf() < 1e-15);
        // D^2 = D
        let dd = mart_diff(&d1, 1).unwrap();
        assert!(dd.sub(&d1).norm_inf() < 1e-12);
        // mean zero on every cube of side 2^j
        for q in DyadicLattice::new(1, 2).level(1) {
            let s: Complex64 = q.points(2).map(|p| d1.get(&p)).sum();
            assert!(s.norm() < 1e-14);
        }
        assert!(mart_diff(&f, 0).is_err());
    }

    #[test]
    fn square_fn_examples() {
        let f = gf(&[4.0, 0.0, 2.0, 2.0]);
        let s0 = DyadicCube::root(1, 2);
        let g = local_square_fn(&f, &s0).unwrap();
        let want = [4.0, 4.0, 2.0, 2.0];
        for (v, w) in g.values().iter().zip(want) {
            assert!((v.re - w).abs() < 1e-14, "{} vs {}", v.re, w);
        }
        let gg = peetre_square_fn(&f, &s0).unwrap();
        for (v, w) in gg.values().iter().zip(want) {
            assert!((v.re - w).abs() < 1e-14);
        }
        // constant on S0
        let c = gf(&[3.0, 3.0, 3.0, 3.0]);
        let gc = local_square_fn(&c, &s0).unwrap();
        assert!(gc.values().iter().all(|v| (v.re - 3.0).abs() < 1e-14));
    }

    #[test]
    fn square_fn_rejects_support_violation() {
        let f = gf(&[4.0, 0.0, 2.0, 2.0]);
        let half = DyadicCube::new(1, [0, 0], 1);
        assert!(local_square_fn(&f, &half).is_err());
    }

    #[test]
    fn hl_maximal_dirac() {
        let mut f = GridFunction::zero(1, 4);
        f.values_mut()[0] = Complex64::new(1.0, 0.0);
        let m = hl_maximal(&f);
        // brute force oracle
        let n = 16usize;
        for x in 0..n {
            let mut want = 0.0f64;
            for s in 0..=x {
                for e in x..n {
                    let w = (e - s + 1) as f64;
                    let sum = if s == 0 { 1.0 } else { 0.0 };
                    want = want.max(sum / w);
                }
            }
            assert!(
                (m.values()[x].re - want).abs() < 1e-14,
                "x={x}: {} vs {}",
                m.values()[x].re,
                want
            );
        }
        assert_eq!(m.values()[0].re, 1.0);
    }

    #[test]
    fn hl_maximal_dominates() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let f = GridFunction::random_gaussian(2, 3, &mut rng);
        let m = hl_maximal(&f);
        for (mv, fv) in m.values().iter().zip(f.values()) {
            assert!(mv.re >= fv.norm() - 1e-12);
        }
    }

    #[test]
    fn hl_maximal_2d_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let f = GridFunction::random_gaussian(2, 2, &mut rng);
        let n = 4usize;
        let m = hl_maximal(&f);
        let abs: Vec<f64> = f.values().iter().map(|v| v.norm()).collect();
        for x0 in 0..n {
            for x1 in 0..n {
                let mut want = 0.0f64;
                for s0 in 0..=x0 {
                    for e0 in x0..n {
                        for s1 in 0..=x1 {
                            for e1 in x1..n {
                                let mut sum = 0.0;
                                for i in s0..=e0 {
                                    for j in s1..=e1 {
                                        sum += abs[i * n + j];
                                    }
                                }
                                let area = ((e0 - s0 + 1) * (e1 - s1 + 1)) as f64;
                                want = want.max(sum / area);
                            }
                        }
                    }
                }
                let got = m.values()[x0 * n + x1].re;
                assert!((got - want).abs() < 1e-12, "({x0},{x1}): {got} vs {want}");
            }
        }
    }
}
