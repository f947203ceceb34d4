//! Radius-based point-cloud intersection and IoU.

use super::geometry::{dist2, Vec3};

/// World-frame points in meters. All coordinates are finite.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
}

impl PointCloud {
    /// Drops non-finite points.
    pub fn new(mut points: Vec<Vec3>) -> Self {
        points.retain(|p| p.iter().all(|c| c.is_finite()));
        PointCloud { points }
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Uniform grid with cell size equal to the query radius, so a radius query
/// only needs the 27 surrounding cells. Cells are stored densely over the
/// bounding box of the points when that is small, otherwise as a sorted list.
struct Grid<'a> {
    points: &'a [Vec3],
    size: f64,
    origin: [i64; 3],
    dims: [i64; 3],
    lo: Vec3,
    hi: Vec3,
    cells: Cells,
}

enum Cells {
    /// `starts[c]..starts[c + 1]` indexes `order` for dense cell `c`.
    Dense { starts: Vec<u32>, order: Vec<u32> },
    /// `(cell key, point index)` sorted by key.
    Sparse(Vec<([i64; 3], u32)>),
}

const MAX_DENSE_CELLS: i64 = 1 << 16;

fn cell_of(p: Vec3, size: f64) -> [i64; 3] {
    [
        (p[0] / size).floor() as i64,
        (p[1] / size).floor() as i64,
        (p[2] / size).floor() as i64,
    ]
}

impl<'a> Grid<'a> {
    fn new(points: &'a [Vec3], size: f64) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let origin = cell_of(lo, size);
        let top = cell_of(hi, size);
        let dims = [0, 1, 2].map(|k| top[k].saturating_sub(origin[k]).saturating_add(1));
        let total = dims[0].saturating_mul(dims[1]).saturating_mul(dims[2]);
        let cells = if total <= MAX_DENSE_CELLS.max(8 * points.len() as i64) {
            let index = |c: [i64; 3]| {
                (((c[0] - origin[0]) * dims[1] + (c[1] - origin[1])) * dims[2] + (c[2] - origin[2])) as usize
            };
            let keys: Vec<usize> = points.iter().map(|&p| index(cell_of(p, size))).collect();
            let mut starts = vec![0u32; total as usize + 1];
            for &k in &keys {
                starts[k + 1] += 1;
            }
            for i in 1..starts.len() {
                starts[i] += starts[i - 1];
            }
            let mut fill = starts.clone();
            let mut order = vec![0u32; points.len()];
            for (i, &k) in keys.iter().enumerate() {
                order[fill[k] as usize] = i as u32;
                fill[k] += 1;
            }
            Cells::Dense { starts, order }
        } else {
            let mut v: Vec<([i64; 3], u32)> = points
                .iter()
                .enumerate()
                .map(|(i, &p)| (cell_of(p, size), i as u32))
                .collect();
            v.sort_unstable();
            Cells::Sparse(v)
        };
        Grid {
            points,
            size,
            origin,
            dims,
            lo,
            hi,
            cells,
        }
    }

    fn any_within(&self, p: Vec3, r2: f64) -> bool {
        let r = self.size;
        if (0..3).any(|k| p[k] < self.lo[k] - r || p[k] > self.hi[k] + r) {
            return false;
        }
        let c = cell_of(p, self.size);
        let near = |i: u32| dist2(self.points[i as usize], p) < r2;
        match &self.cells {
            Cells::Dense { starts, order } => {
                let rel = [c[0] - self.origin[0], c[1] - self.origin[1], c[2] - self.origin[2]];
                NEIGHBOURS.iter().any(|d| {
                    let q = [rel[0] + d[0], rel[1] + d[1], rel[2] + d[2]];
                    if (0..3).any(|k| q[k] < 0 || q[k] >= self.dims[k]) {
                        return false;
                    }
                    let cell = ((q[0] * self.dims[1] + q[1]) * self.dims[2] + q[2]) as usize;
                    order[starts[cell] as usize..starts[cell + 1] as usize]
                        .iter()
                        .any(|&i| near(i))
                })
            }
            Cells::Sparse(v) => NEIGHBOURS.iter().any(|d| {
                let q = [0, 1, 2].map(|k| c[k].saturating_add(d[k]));
                let from = v.partition_point(|e| e.0 < q);
                v[from..].iter().take_while(|e| e.0 == q).any(|e| near(e.1))
            }),
        }
    }
}

/// The 27 cells around a cell, its own cell first.
const NEIGHBOURS: [[i64; 3]; 27] = {
    let mut out = [[0i64; 3]; 27];
    let mut n = 1;
    let mut i = 0;
    while i < 27 {
        let d = [i as i64 / 9 - 1, (i as i64 / 3) % 3 - 1, i as i64 % 3 - 1];
        if !(d[0] == 0 && d[1] == 0 && d[2] == 0) {
            out[n] = d;
            n += 1;
        }
        i += 1;
    }
    out
};

/// Number of points of `p2` lying strictly closer than `r` to some point of
/// `p1`. Asymmetric in its arguments.
pub fn cloud_intersection_count(p1: &PointCloud, p2: &PointCloud, r: f64) -> usize {
    if p1.is_empty() || p2.is_empty() || r.is_nan() || r <= 0.0 {
        return 0;
    }
    let grid = Grid::new(&p1.points, r);
    let r2 = r * r;
    p2.points.iter().filter(|&&p| grid.any_within(p, r2)).count()
}

/// Symmetrised IoU: `I / (|P1| + |P2| - I)` with `I` the larger of the two
/// directed intersection counts.
pub fn cloud_iou(p1: &PointCloud, p2: &PointCloud, r: f64) -> f64 {
    if p1.is_empty() || p2.is_empty() {
        return 0.0;
    }
    let i = cloud_intersection_count(p1, p2, r).max(cloud_intersection_count(p2, p1, r));
    i as f64 / (p1.len() + p2.len() - i) as f64
}
