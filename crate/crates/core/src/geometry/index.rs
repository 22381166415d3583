use std::collections::HashMap;

use super::{euclidean_distance, GeometryError, Point2};
use crate::Real;

/// Uniform-grid bucket index over inserted points.
///
/// Ids are insertion positions. `nearest` and `near` both break distance
/// ties by the lower id so results never depend on hash iteration order.
#[derive(Debug, Clone)]
pub struct GridIndex<T> {
    cell: T,
    points: Vec<Point2<T>>,
    buckets: HashMap<(i64, i64), Vec<usize>>,
    lo: (i64, i64),
    hi: (i64, i64),
}

impl<T: Real> GridIndex<T> {
    pub fn new(cell: T) -> Self {
        assert!(cell > T::zero(), "grid cell size must be positive");
        Self {
            cell,
            points: Vec::new(),
            buckets: HashMap::new(),
            lo: (i64::MAX, i64::MAX),
            hi: (i64::MIN, i64::MIN),
        }
    }

    pub fn cell_size(&self) -> T {
        self.cell
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, id: usize) -> Point2<T> {
        self.points[id]
    }

    pub fn points(&self) -> &[Point2<T>] {
        &self.points
    }

    fn key(&self, p: Point2<T>) -> (i64, i64) {
        let f = |x: T| (x / self.cell).floor().to_i64().unwrap_or(0);
        (f(p.north), f(p.east))
    }

    pub fn insert(&mut self, p: Point2<T>) -> usize {
        let id = self.points.len();
        let k = self.key(p);
        self.points.push(p);
        self.buckets.entry(k).or_default().push(id);
        self.lo = (self.lo.0.min(k.0), self.lo.1.min(k.1));
        self.hi = (self.hi.0.max(k.0), self.hi.1.max(k.1));
        id
    }

    fn visit_bucket(&self, key: (i64, i64), q: Point2<T>, best: &mut Option<(T, usize)>) {
        if let Some(ids) = self.buckets.get(&key) {
            for &id in ids {
                let d = euclidean_distance(self.points[id], q);
                let better = match *best {
                    None => true,
                    Some((bd, bid)) => d < bd || (d == bd && id < bid),
                };
                if better {
                    *best = Some((d, id));
                }
            }
        }
    }

    /// Id of the stored point closest to `q`.
    pub fn nearest(&self, q: Point2<T>) -> Result<usize, GeometryError> {
        if self.is_empty() {
            return Err(GeometryError::EmptyIndex);
        }
        let (qi, qj) = self.key(q);
        // Chebyshev ring distance from the query cell to the occupied box
        let gap = |v: i64, lo: i64, hi: i64| {
            if v < lo {
                lo - v
            } else if v > hi {
                v - hi
            } else {
                0
            }
        };
        let start = gap(qi, self.lo.0, self.hi.0).max(gap(qj, self.lo.1, self.hi.1));
        let reach = (qi - self.lo.0)
            .abs()
            .max((qi - self.hi.0).abs())
            .max((qj - self.lo.1).abs())
            .max((qj - self.hi.1).abs());
        let mut best = None;
        for ring in start..=reach {
            if ring == 0 {
                self.visit_bucket((qi, qj), q, &mut best);
            } else {
                for dj in -ring..=ring {
                    self.visit_bucket((qi - ring, qj + dj), q, &mut best);
                    self.visit_bucket((qi + ring, qj + dj), q, &mut best);
                }
                for di in (-ring + 1)..ring {
                    self.visit_bucket((qi + di, qj - ring), q, &mut best);
                    self.visit_bucket((qi + di, qj + ring), q, &mut best);
                }
            }
            // anything in a later ring is at least `ring` cells away
            if let Some((d, _)) = best {
                if d < self.cell * T::from_usize_lossy(ring as usize) {
                    break;
                }
            }
        }
        Ok(best.expect("non-empty index yields a nearest point").1)
    }

    /// All ids within `radius` of `q` (inclusive), ascending.
    pub fn near(&self, q: Point2<T>, radius: T) -> Vec<usize> {
        if self.is_empty() {
            return Vec::new();
        }
        let lo = self.key(Point2::new(q.north - radius, q.east - radius));
        let hi = self.key(Point2::new(q.north + radius, q.east + radius));
        let (i0, i1) = (lo.0.max(self.lo.0), hi.0.min(self.hi.0));
        let (j0, j1) = (lo.1.max(self.lo.1), hi.1.min(self.hi.1));
        let mut out = Vec::new();
        for i in i0..=i1 {
            for j in j0..=j1 {
                if let Some(ids) = self.buckets.get(&(i, j)) {
                    out.extend(
                        ids.iter()
                            .copied()
                            .filter(|&id| euclidean_distance(self.points[id], q) <= radius),
                    );
                }
            }
        }
        out.sort_unstable();
        out
    }
}
