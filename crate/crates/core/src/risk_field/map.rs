use serde::{Deserialize, Serialize};

use super::RiskError;
use crate::geometry::{euclidean_distance, Point2, Workspace};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Cells filled by inverse-distance weighting (power 2); queries return
    /// the containing cell.
    #[default]
    InverseDistance,
    /// Queries interpolate bilinearly between cell centres.
    Bilinear,
}

/// Gridded hazard field over the workspace. Cell `(r, c)` spans
/// `origin + [r, r+1) x [c, c+1) * resolution`, rows along north.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskMap<T> {
    pub origin: Point2<T>,
    pub resolution: T,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<T>,
    pub interpolation: Interpolation,
    /// Upper bound of any cell (`n_R`).
    pub ceiling: T,
}

impl<T: Real> RiskMap<T> {
    fn shape(ws: &Workspace<T>, resolution: T) -> (usize, usize) {
        let ext = ws.extent();
        let r = (ext.north / resolution)
            .ceil()
            .to_usize()
            .unwrap_or(1)
            .max(1);
        let c = (ext.east / resolution)
            .ceil()
            .to_usize()
            .unwrap_or(1)
            .max(1);
        (r, c)
    }

    /// Evaluates `field` at every cell centre (clamped into the workspace).
    pub fn from_field<E>(
        ws: &Workspace<T>,
        resolution: T,
        ceiling: T,
        mut field: impl FnMut(Point2<T>) -> Result<T, E>,
    ) -> Result<Self, E> {
        let (rows, cols) = Self::shape(ws, resolution);
        let mut map = Self {
            origin: ws.min,
            resolution,
            rows,
            cols,
            values: Vec::with_capacity(rows * cols),
            interpolation: Interpolation::InverseDistance,
            ceiling,
        };
        for r in 0..rows {
            for c in 0..cols {
                let p = ws.clamp(map.cell_center(r, c));
                let v = field(p)?;
                map.values.push(v.max(T::zero()).min(ceiling));
            }
        }
        Ok(map)
    }

    pub fn uniform(ws: &Workspace<T>, resolution: T, ceiling: T, value: T) -> Self {
        Self::from_field::<()>(ws, resolution, ceiling, |_| Ok(value)).expect("infallible")
    }

    pub fn cell_center(&self, r: usize, c: usize) -> Point2<T> {
        let half = T::lit(0.5);
        self.origin
            + Point2::new(
                (T::from_usize_lossy(r) + half) * self.resolution,
                (T::from_usize_lossy(c) + half) * self.resolution,
            )
    }

    pub fn cell_of(&self, p: Point2<T>) -> (usize, usize) {
        let f = |x: T, n: usize| {
            let i = (x / self.resolution).floor().to_i64().unwrap_or(0);
            i.clamp(0, n as i64 - 1) as usize
        };
        (
            f(p.north - self.origin.north, self.rows),
            f(p.east - self.origin.east, self.cols),
        )
    }

    pub fn cell(&self, r: usize, c: usize) -> T {
        self.values[r * self.cols + c]
    }

    pub fn value_at(&self, p: Point2<T>) -> T {
        match self.interpolation {
            Interpolation::InverseDistance => {
                let (r, c) = self.cell_of(p);
                self.cell(r, c)
            }
            Interpolation::Bilinear => {
                let half = T::lit(0.5);
                let fr = ((p.north - self.origin.north) / self.resolution - half)
                    .max(T::zero())
                    .min(T::from_usize_lossy(self.rows - 1));
                let fc = ((p.east - self.origin.east) / self.resolution - half)
                    .max(T::zero())
                    .min(T::from_usize_lossy(self.cols - 1));
                let r0 = fr.floor().to_usize().unwrap_or(0);
                let c0 = fc.floor().to_usize().unwrap_or(0);
                let r1 = (r0 + 1).min(self.rows - 1);
                let c1 = (c0 + 1).min(self.cols - 1);
                let tr = fr - T::from_usize_lossy(r0);
                let tc = fc - T::from_usize_lossy(c0);
                let top = self.cell(r0, c0) * (T::one() - tc) + self.cell(r0, c1) * tc;
                let bot = self.cell(r1, c0) * (T::one() - tc) + self.cell(r1, c1) * tc;
                top * (T::one() - tr) + bot * tr
            }
        }
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(T::zero(), T::max)
    }

    /// Header line `origin_north,origin_east,resolution,rows,cols`, its
    /// values, then one comma-separated line per row (south to north).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("origin_north,origin_east,resolution,rows,cols\n");
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            self.origin.north, self.origin.east, self.resolution, self.rows, self.cols
        ));
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|c| format!("{:.6e}", self.cell(r, c).as_f64()))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Risk map from scattered `(position, hazard)` samples such as the planner's
/// node lookup table. A cell containing samples takes their mean (so a lone
/// sample is reproduced exactly); every other cell takes the inverse-distance
/// (power 2) weighted value at its centre.
pub fn build_risk_map<T: Real>(
    nodes: &[(Point2<T>, T)],
    ws: &Workspace<T>,
    resolution: T,
    ceiling: T,
    method: Interpolation,
) -> Result<RiskMap<T>, RiskError> {
    if nodes.is_empty() {
        return Err(RiskError::Config("risk map needs at least one node".into()));
    }
    if !(resolution > T::zero()) {
        return Err(RiskError::Config(
            "risk map resolution must be positive".into(),
        ));
    }
    let mut map = RiskMap::uniform(ws, resolution, ceiling, T::zero());
    map.interpolation = method;
    let mut sums = vec![(T::zero(), 0usize); map.rows * map.cols];
    for (p, h) in nodes {
        let (r, c) = map.cell_of(*p);
        let slot = &mut sums[r * map.cols + c];
        slot.0 = slot.0 + *h;
        slot.1 += 1;
    }
    for r in 0..map.rows {
        for c in 0..map.cols {
            let k = r * map.cols + c;
            let v = if sums[k].1 > 0 {
                sums[k].0 / T::from_usize_lossy(sums[k].1)
            } else {
                idw(nodes, map.cell_center(r, c))
            };
            map.values[k] = v.max(T::zero()).min(ceiling);
        }
    }
    Ok(map)
}

fn idw<T: Real>(nodes: &[(Point2<T>, T)], q: Point2<T>) -> T {
    let mut num = T::zero();
    let mut den = T::zero();
    for (p, h) in nodes {
        let d = euclidean_distance(*p, q);
        if d == T::zero() {
            return *h;
        }
        let w = T::one() / (d * d);
        num = num + w * *h;
        den = den + w;
    }
    num / den
}
