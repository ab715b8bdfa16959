use crate::error::{Error, Result};

/// A half-open dyadic cube `corner + [0, 2^j)^d` of the lattice inside
/// `[0, N)^d`. Corners are aligned: every coordinate is a multiple of `2^j`.
/// `L(Q) = log_side` and `|Q| = 2^{j d}` (point count).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicCube {
    pub corner: [usize; 2],
    pub log_side: u32,
    pub dim: u8,
}

impl DyadicCube {
    pub fn new(dim: u8, corner: [usize; 2], log_side: u32) -> Self {
        let s = 1usize << log_side;
        assert!(corner[0] % s == 0, "corner not aligned to scale");
        if dim == 2 {
            assert!(corner[1] % s == 0, "corner not aligned to scale");
        }
        DyadicCube { corner, log_side, dim }
    }

    /// The root cube `[0, N)^d`.
    pub fn root(dim: u8, grid_log: u32) -> Self {
        DyadicCube { corner: [0, 0], log_side: grid_log, dim }
    }

    pub fn side(&self) -> usize {
        1usize << self.log_side
    }

    /// Number of grid points.
    pub fn volume(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn fits_in_grid(&self, grid_log: u32) -> bool {
        let n = 1usize << grid_log;
        let s = self.side();
        if self.log_side > grid_log {
            return false;
        }
        let mut ok = self.corner[0] + s <= n;
        if self.dim == 2 {
            ok = ok && self.corner[1] + s <= n;
        } else {
            ok = ok && self.corner[1] == 0;
        }
        ok
    }

    pub fn require_in_grid(&self, grid_log: u32) -> Result<()> {
        if self.fits_in_grid(grid_log) {
            Ok(())
        } else {
            Err(Error::OutOfBounds(format!("{self:?} in grid J={grid_log}")))
        }
    }

    #[inline]
    pub fn contains_point(&self, p: &[usize; 2], _n: usize) -> bool {
        let s = self.side();
        let mut ok = p[0] >= self.corner[0] && p[0] < self.corner[0] + s;
        if self.dim == 2 {
            ok = ok && p[1] >= self.corner[1] && p[1] < self.corner[1] + s;
        }
        ok
    }

    pub fn contains_cube(&self, other: &DyadicCube) -> bool {
        if other.log_side > self.log_side {
            return false;
        }
        let s = self.side();
        let mut ok = other.corner[0] >= self.corner[0] && other.corner[0] < self.corner[0] + s;
        if self.dim == 2 {
            ok = ok && other.corner[1] >= self.corner[1] && other.corner[1] < self.corner[1] + s;
        }
        ok
    }

    /// The dyadic ancestor at level `log_side >= self.log_side`.
    pub fn ancestor(&self, log_side: u32) -> DyadicCube {
        assert!(log_side >= self.log_side);
        let s = 1usize << log_side;
        DyadicCube {
            corner: [self.corner[0] / s * s, if self.dim == 2 { self.corner[1] / s * s } else { 0 }],
            log_side,
            dim: self.dim,
        }
    }

    /// Children one level down (2^d of them); none for single points.
    pub fn children(&self) -> Vec<DyadicCube> {
        if self.log_side == 0 {
            return vec![];
        }
        let j = self.log_side - 1;
        let h = 1usize << j;
        let mut out = Vec::with_capacity(1 << self.dim);
        if self.dim == 1 {
            for a in 0..2 {
                out.push(DyadicCube { corner: [self.corner[0] + a * h, 0], log_side: j, dim: 1 });
            }
        } else {
            for a in 0..2 {
                for b in 0..2 {
                    out.push(DyadicCube {
                        corner: [self.corner[0] + a * h, self.corner[1] + b * h],
                        log_side: j,
                        dim: 2,
                    });
                }
            }
        }
        out
    }

    /// Iterates the grid points of the cube.
    pub fn points(&self, grid_log: u32) -> impl Iterator<Item = [usize; 2]> + '_ {
        let s = self.side();
        let dim = self.dim;
        let c = self.corner;
        let n = 1usize << grid_log;
        debug_assert!(self.fits_in_grid(grid_log), "cube outside grid");
        let _ = n;
        (0..s.pow(dim as u32)).map(move |i| {
            if dim == 1 {
                [c[0] + i, 0]
            } else {
                [c[0] + i / s, c[1] + i % s]
            }
        })
    }

    /// The dyadic cube of side `2^j` containing the point.
    pub fn containing(dim: u8, p: &[usize; 2], log_side: u32) -> DyadicCube {
        let s = 1usize << log_side;
        DyadicCube {
            corner: [p[0] / s * s, if dim == 2 { p[1] / s * s } else { 0 }],
            log_side,
            dim,
        }
    }

    /// Geometric diameter of the point set: `sqrt(d) * (side - 1)`.
    /// A single point has diameter zero, which is what makes the Whitney
    /// selection exhaust an open set on a finite grid.
    pub fn diam(&self) -> f64 {
        (self.dim as f64).sqrt() * (self.side() as f64 - 1.0)
    }

    /// Axis-parallel box `{lo[i]..=hi[i]}` (closed, clipped) around the cube
    /// dilated by factor `c` about its center; used for `cR` dilates.
    pub fn dilate_box(&self, c: f64, grid_log: u32) -> ([i64; 2], [i64; 2]) {
        let n = 1i64 << grid_log;
        let s = self.side() as f64;
        let half = (c * s - 1.0) / 2.0;
        let mut lo = [0i64; 2];
        let mut hi = [0i64; 2];
        for ax in 0..self.dim as usize {
            let center = self.corner[ax] as f64 + (s - 1.0) / 2.0;
            lo[ax] = (center - half).ceil() as i64;
            hi[ax] = (center + half).floor() as i64;
            lo[ax] = lo[ax].max(0);
            hi[ax] = hi[ax].min(n - 1);
        }
        (lo, hi)
    }

    /// Triple dilate `3Q` as a point set, wrapping periodically.
    pub fn triple_points(&self, grid_log: u32) -> Vec<[usize; 2]> {
        let n = 1i64 << grid_log;
        let s = self.side() as i64;
        let mut out = Vec::new();
        if self.dim == 1 {
            for x in -s..2 * s {
                out.push([((self.corner[0] as i64 + x).rem_euclid(n)) as usize, 0]);
            }
        } else {
            for x in -s..2 * s {
                for y in -s..2 * s {
                    out.push([
                        ((self.corner[0] as i64 + x).rem_euclid(n)) as usize,
                        ((self.corner[1] as i64 + y).rem_euclid(n)) as usize,
                    ]);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// The lattice of all dyadic cubes inside the root `[0, N)^d`.
#[derive(Debug, Clone, Copy)]
pub struct DyadicLattice {
    pub dim: u8,
    pub grid_log: u32,
}

impl DyadicLattice {
    pub fn new(dim: u8, grid_log: u32) -> Self {
        DyadicLattice { dim, grid_log }
    }

    pub fn root(&self) -> DyadicCube {
        DyadicCube::root(self.dim, self.grid_log)
    }

    /// All cubes at level `j` (they tile the root).
    pub fn level(&self, j: u32) -> Vec<DyadicCube> {
        assert!(j <= self.grid_log);
        let n = 1usize << self.grid_log;
        let s = 1usize << j;
        let mut out = Vec::new();
        if self.dim == 1 {
            for x in (0..n).step_by(s) {
                out.push(DyadicCube { corner: [x, 0], log_side: j, dim: 1 });
            }
        } else {
            for x in (0..n).step_by(s) {
                for y in (0..n).step_by(s) {
                    out.push(DyadicCube { corner: [x, y], log_side: j, dim: 2 });
                }
            }
        }
        out
    }

    /// All cubes, all levels, coarse to fine.
    pub fn all_cubes(&self) -> Vec<DyadicCube> {
        let mut out = Vec::new();
        for j in (0..=self.grid_log).rev() {
            out.extend(self.level(j));
        }
        out
    }

    /// All cubes of side `>= 2^min_log` inside `root_cube`.
    pub fn cubes_within(&self, root_cube: &DyadicCube, min_log: u32) -> Vec<DyadicCube> {
        let mut out = Vec::new();
        for j in (min_log..=root_cube.log_side).rev() {
            let s = 1usize << j;
            let side = root_cube.side();
            if self.dim == 1 {
                for x in (0..side).step_by(s) {
                    out.push(DyadicCube {
                        corner: [root_cube.corner[0] + x, 0],
                        log_side: j,
                        dim: 1,
                    });
                }
            } else {
                for x in (0..side).step_by(s) {
                    for y in (0..side).step_by(s) {
                        out.push(DyadicCube {
                            corner: [root_cube.corner[0] + x, root_cube.corner[1] + y],
                            log_side: j,
                            dim: 2,
                        });
                    }
                }
            }
        }
        out
    }
}

/// A set of grid points, stored as a bitmask over row-major indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSet {
    pub dim: u8,
    pub grid_log: u32,
    bits: Vec<u64>,
    len: usize,
}

impl PointSet {
    pub fn empty(dim: u8, grid_log: u32) -> Self {
        let n = 1usize << grid_log;
        let len = n.pow(dim as u32);
        PointSet { dim, grid_log, bits: vec![0; (len + 63) / 64], len }
    }

    pub fn side(&self) -> usize {
        1usize << self.grid_log
    }

    pub fn universe_len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn index_of(&self, p: &[usize; 2]) -> usize {
        if self.dim == 1 {
            p[0]
        } else {
            p[0] * self.side() + p[1]
        }
    }

    #[inline]
    pub fn insert(&mut self, p: &[usize; 2]) {
        let i = self.index_of(p);
        self.bits[i / 64] |= 1u64 << (i % 64);
    }

    #[inline]
    pub fn insert_idx(&mut self, i: usize) {
        self.bits[i / 64] |= 1u64 << (i % 64);
    }

    #[inline]
    pub fn contains_idx(&self, i: usize) -> bool {
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn contains(&self, p: &[usize; 2]) -> bool {
        self.contains_idx(self.index_of(p))
    }

    /// Number of points in the set.
    pub fn card(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    pub fn union(&self, other: &PointSet) -> PointSet {
        let mut out = self.clone();
        for (a, b) in out.bits.iter_mut().zip(other.bits.iter()) {
            *a |= b;
        }
        out
    }

    pub fn is_subset_of(&self, other: &PointSet) -> bool {
        self.bits.iter().zip(other.bits.iter()).all(|(a, b)| a & !b == 0)
    }

    pub fn iter_points(&self) -> impl Iterator<Item = [usize; 2]> + '_ {
        let n = self.side();
        let dim = self.dim;
        (0..self.len).filter(|&i| self.contains_idx(i)).map(move |i| {
            if dim == 1 {
                [i, 0]
            } else {
                [i / n, i % n]
            }
        })
    }

    /// Points of `cube` that belong to the set.
    pub fn count_in_cube(&self, cube: &DyadicCube) -> usize {
        cube.points(self.grid_log).filter(|p| self.contains(p)).count()
    }

    /// Euclidean distance from `cube`'s points to the complement of the set
    /// (within the non-periodic grid box). `None` when the complement is
    /// empty.
    pub fn dist_cube_to_complement(&self, cube: &DyadicCube) -> Option<f64> {
        let n = self.side() as i64;
        let s = cube.side() as i64;
        let c0 = cube.corner[0] as i64;
        let c1 = cube.corner[1] as i64;
        let mut best: Option<i64> = None; // squared distance
        let clamp_dist = |x: i64, lo: i64, hi: i64| -> i64 {
            if x < lo {
                lo - x
            } else if x > hi {
                x - hi
            } else {
                0
            }
        };
        let mut visit = |p: [usize; 2]| {
            // squared distance from point to the cube (as integer boxes)
            let dx = clamp_dist(p[0] as i64, c0, c0 + s - 1);
            let dy = if self.dim == 2 { clamp_dist(p[1] as i64, c1, c1 + s - 1) } else { 0 };
            let d2 = dx * dx + dy * dy;
            best = Some(best.map_or(d2, |b| b.min(d2)));
        };
        if self.dim == 1 {
            for x in 0..n as usize {
                if !self.contains_idx(x) {
                    visit([x, 0]);
                }
            }
        } else {
            for i in 0..self.len {
                if !self.contains_idx(i) {
                    visit([i / n as usize, i % n as usize]);
                }
            }
        }
        best.map(|d2| (d2 as f64).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nesting_or_disjoint() {
        let lat = DyadicLattice::new(1, 3);
        let cubes = lat.all_cubes();
        for a in &cubes {
            for b in &cubes {
                let inter = a.points(3).filter(|p| b.contains_point(p, 8)).count();
                if inter > 0 {
                    assert!(a.contains_cube(b) || b.contains_cube(a));
                }
            }
        }
    }

    #[test]
    fn levels_tile() {
        let lat = DyadicLattice::new(2, 3);
        for j in 0..=3 {
            let total: usize = lat.level(j).iter().map(|c| c.volume()).sum();
            assert_eq!(total, 64);
        }
    }

    #[test]
    fn volume_and_align() {
        let q = DyadicCube::new(2, [4, 4], 2);
        assert_eq!(q.volume(), 16);
        assert_eq!(q.ancestor(3).corner, [0, 0]);
    }
}
