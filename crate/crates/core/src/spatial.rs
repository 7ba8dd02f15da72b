//! Hashed uniform-grid index over a borrowed point slice.

use nalgebra::Vector3;
use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::scalar::Real;

type Cell = [i32; 3];

pub struct GridIndex<'a, T: Real> {
    points: &'a [Vector3<T>],
    cell: T,
    /// Point indices grouped by cell.
    order: Vec<u32>,
    ranges: FxHashMap<Cell, (u32, u32)>,
    /// Occupied cells, for queries whose box spans more cells than exist.
    occupied: Vec<Cell>,
}

impl<'a, T: Real> GridIndex<'a, T> {
    /// Buckets `points` into cubes of side `cell` (meters).
    pub fn new(points: &'a [Vector3<T>], cell: T) -> Self {
        assert!(cell > T::zero(), "cell size must be positive");
        let mut keyed: Vec<(Cell, u32)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (cell_of(p, cell), i as u32))
            .collect();
        keyed.sort_unstable();
        let mut ranges = FxHashMap::default();
        let mut start = 0usize;
        while start < keyed.len() {
            let key = keyed[start].0;
            let mut end = start + 1;
            while end < keyed.len() && keyed[end].0 == key {
                end += 1;
            }
            ranges.insert(key, (start as u32, end as u32));
            start = end;
        }
        let mut occupied: Vec<Cell> = ranges.keys().copied().collect();
        occupied.sort_unstable();
        Self {
            points,
            cell,
            order: keyed.into_iter().map(|(_, i)| i).collect(),
            ranges,
            occupied,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn bucket(&self, key: &Cell) -> &[u32] {
        match self.ranges.get(key) {
            Some(&(s, e)) => &self.order[s as usize..e as usize],
            None => &[],
        }
    }

    /// Indices of all points with `|p - q| <= radius`, in ascending index order.
    pub fn within(&self, q: &Vector3<T>, radius: T) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(q, radius, |i| out.push(i));
        out.sort_unstable();
        out
    }

    /// Calls `f` on every point index with `|p - q| <= radius`, in no particular order.
    pub fn for_each_within(&self, q: &Vector3<T>, radius: T, mut f: impl FnMut(usize)) {
        let r2 = radius * radius;
        let lo = cell_of(&q.add_scalar(-radius), self.cell);
        let hi = cell_of(&q.add_scalar(radius), self.cell);
        let mut visit = |key: &Cell| {
            for &i in self.bucket(key) {
                if (self.points[i as usize] - q).norm_squared() <= r2 {
                    f(i as usize);
                }
            }
        };
        let span = (0..3).map(|a| (hi[a] - lo[a] + 1) as usize).product::<usize>();
        if span > self.occupied.len() {
            self.occupied
                .iter()
                .filter(|c| (0..3).all(|a| lo[a] <= c[a] && c[a] <= hi[a]))
                .for_each(&mut visit);
        } else {
            for x in lo[0]..=hi[0] {
                for y in lo[1]..=hi[1] {
                    for z in lo[2]..=hi[2] {
                        visit(&[x, y, z]);
                    }
                }
            }
        }
    }

    /// The `k` nearest points to `q` (including `q` itself if indexed),
    /// ordered by distance then index.
    pub fn knn(&self, q: &Vector3<T>, k: usize) -> Vec<usize> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let center = cell_of(q, self.cell);
        let mut found: Vec<(T, u32)> = Vec::new();
        let mut ring = 0i32;
        loop {
            for_shell(center, ring, |key| {
                for &i in self.bucket(&key) {
                    found.push(((self.points[i as usize] - q).norm_squared(), i));
                }
            });
            if found.len() >= k {
                if found.len() > k {
                    found.select_nth_unstable_by(k - 1, by_distance);
                    found.truncate(k);
                }
                // unvisited cells are at least `ring * cell` away
                let reach = self.cell * T::lit(ring as f64);
                let kth = found.iter().fold(T::zero(), |m, f| m.max(f.0));
                if kth <= reach * reach {
                    break;
                }
            }
            ring += 1;
        }
        found.sort_unstable_by(by_distance);
        found.into_iter().map(|(_, i)| i as usize).collect()
    }
    /// `f(i, &knn(points[i], k))` for every indexed point, in index order.
    ///
    /// Points of one cell share a single gather of the surrounding 3×3×3
    /// block. A point whose k-th neighbor is not provably inside the block
    /// falls back to [`GridIndex::knn`].
    pub fn map_knn<R: Send>(&self, k: usize, f: impl Fn(usize, &[usize]) -> R + Sync) -> Vec<R> {
        let k = k.min(self.points.len());
        let per_cell: Vec<Vec<(u32, R)>> = self
            .occupied
            .par_iter()
            .map(|c| {
                let mut block: Vec<u32> = Vec::new();
                for x in c[0] - 1..=c[0] + 1 {
                    for y in c[1] - 1..=c[1] + 1 {
                        for z in c[2] - 1..=c[2] + 1 {
                            block.extend_from_slice(self.bucket(&[x, y, z]));
                        }
                    }
                }
                let lo = c.map(|v| self.cell * T::lit((v - 1) as f64));
                let hi = c.map(|v| self.cell * T::lit((v + 2) as f64));
                let mut found: Vec<(T, u32)> = Vec::with_capacity(block.len());
                let mut nbrs: Vec<usize> = Vec::with_capacity(k);
                self.bucket(c)
                    .iter()
                    .map(|&i| {
                        let q = &self.points[i as usize];
                        let reach = (0..3)
                            .map(|a| (q[a] - lo[a]).min(hi[a] - q[a]))
                            .fold(self.cell, |m, d| m.min(d))
                            * T::lit(1.0 - 1e-9);
                        found.clear();
                        found.extend(block.iter().map(|&j| ((self.points[j as usize] - q).norm_squared(), j)));
                        let inside = k == 0
                            || (found.len() >= k && {
                                found.select_nth_unstable_by(k - 1, by_distance);
                                found.truncate(k);
                                found[k - 1].0 < reach * reach
                            });
                        let r = if inside {
                            found.sort_unstable_by(by_distance);
                            nbrs.clear();
                            nbrs.extend(found.iter().take(k).map(|&(_, j)| j as usize));
                            f(i as usize, &nbrs)
                        } else {
                            f(i as usize, &self.knn(q, k))
                        };
                        (i, r)
                    })
                    .collect()
            })
            .collect();
        let mut out: Vec<Option<R>> = (0..self.points.len()).map(|_| None).collect();
        for (i, r) in per_cell.into_iter().flatten() {
            out[i as usize] = Some(r);
        }
        out.into_iter().map(|r| r.expect("every point is in a cell")).collect()
    }
}

fn by_distance<T: Real>(a: &(T, u32), b: &(T, u32)) -> std::cmp::Ordering {
    a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1))
}

fn cell_of<T: Real>(p: &Vector3<T>, cell: T) -> Cell {
    let f = |v: T| (v / cell).floor().as_f64() as i32;
    [f(p.x), f(p.y), f(p.z)]
}

/// Calls `f` on every cell at Chebyshev distance exactly `ring` from `c`.
fn for_shell(c: Cell, ring: i32, mut f: impl FnMut(Cell)) {
    if ring == 0 {
        f(c);
        return;
    }
    for dx in -ring..=ring {
        for dy in -ring..=ring {
            let edge = dx.abs() == ring || dy.abs() == ring;
            if edge {
                for dz in -ring..=ring {
                    f([c[0] + dx, c[1] + dy, c[2] + dz]);
                }
            } else {
                f([c[0] + dx, c[1] + dy, c[2] - ring]);
                f([c[0] + dx, c[1] + dy, c[2] + ring]);
            }
        }
    }
}
