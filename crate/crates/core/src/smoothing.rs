//! Clamped B-spline smoothing of waypoint paths.
//!
//! Waypoints are used directly as control points, so the curve starts and
//! ends on the path but cuts corners in between. Degree three is used when
//! there are at least four waypoints and drops to `n - 1` otherwise.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point2;
use crate::risk_field::EnvironmentState;
use crate::Real;

#[derive(Debug, Error, PartialEq)]
pub enum SmoothError {
    #[error("need at least 2 waypoints, got {0}")]
    TooFewPoints(usize),
    #[error("parameter {0} outside [0, 1]")]
    ParameterOutOfRange(f64),
    #[error("spacing must be positive")]
    NonPositiveSpacing,
    #[error("knot vector is malformed")]
    BadKnots,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnotSpacing {
    #[default]
    Uniform,
    /// Interior knots averaged from chord-length parameters.
    ChordLength,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSplineCurve<T> {
    pub degree: usize,
    pub control_points: Vec<Point2<T>>,
    /// Clamped and normalized to `[0, 1]`.
    pub knots: Vec<T>,
}

/// A resampled curve point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample<T> {
    pub t: T,
    /// Arc length from the start.
    pub s: T,
    pub point: Point2<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmoothCheck<T> {
    Clear,
    /// First resampled point outside free space.
    Collision {
        t: T,
        point: Point2<T>,
    },
}

impl<T> SmoothCheck<T> {
    pub fn is_clear(&self) -> bool {
        matches!(self, SmoothCheck::Clear)
    }
}

impl<T: Real> BSplineCurve<T> {
    pub fn fit(waypoints: &[Point2<T>]) -> Result<Self, SmoothError> {
        Self::fit_with(waypoints, KnotSpacing::Uniform)
    }

    pub fn fit_with(waypoints: &[Point2<T>], spacing: KnotSpacing) -> Result<Self, SmoothError> {
        let n = waypoints.len();
        if n < 2 {
            return Err(SmoothError::TooFewPoints(n));
        }
        let p = (n - 1).min(3);
        let interior = n - p - 1;
        let mut knots = vec![T::zero(); p + 1];
        let chord = match spacing {
            KnotSpacing::Uniform => None,
            KnotSpacing::ChordLength => chord_params(waypoints),
        };
        for j in 1..=interior {
            let k = match &chord {
                None => T::from_usize_lossy(j) / T::from_usize_lossy(interior + 1),
                Some(u) => {
                    let sum: T = (j..j + p).map(|i| u[i]).sum();
                    sum / T::from_usize_lossy(p)
                }
            };
            knots.push(k);
        }
        knots.extend(std::iter::repeat_n(T::one(), p + 1));
        let curve = Self {
            degree: p,
            control_points: waypoints.to_vec(),
            knots,
        };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<(), SmoothError> {
        let n = self.control_points.len();
        let p = self.degree;
        if n < p + 1 || n < 2 {
            return Err(SmoothError::TooFewPoints(n));
        }
        if self.knots.len() != n + p + 1 {
            return Err(SmoothError::BadKnots);
        }
        let clamped = self.knots[..=p].iter().all(|&k| k == T::zero())
            && self.knots[n..].iter().all(|&k| k == T::one());
        let sorted = self.knots.windows(2).all(|w| w[0] <= w[1]);
        if !clamped || !sorted {
            return Err(SmoothError::BadKnots);
        }
        Ok(())
    }

    /// Knot span `k` with `knots[k] <= t < knots[k + 1]`; `t = 1` maps to
    /// the last non-empty span.
    fn span(&self, t: T) -> usize {
        let n = self.control_points.len();
        if t >= T::one() {
            return n - 1;
        }
        let (mut lo, mut hi) = (self.degree, n);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.knots[mid] <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    pub fn evaluate(&self, t: T) -> Result<Point2<T>, SmoothError> {
        if !(t >= T::zero() && t <= T::one()) {
            return Err(SmoothError::ParameterOutOfRange(t.as_f64()));
        }
        Ok(self.eval_unchecked(t))
    }

    fn eval_unchecked(&self, t: T) -> Point2<T> {
        let p = self.degree;
        let k = self.span(t);
        let mut d: Vec<Point2<T>> = (0..=p).map(|j| self.control_points[j + k - p]).collect();
        for r in 1..=p {
            for j in (r..=p).rev() {
                let i = j + k - p;
                let denom = self.knots[i + p + 1 - r] - self.knots[i];
                let a = if denom > T::zero() {
                    (t - self.knots[i]) / denom
                } else {
                    T::zero()
                };
                d[j] = d[j - 1] * (T::one() - a) + d[j] * a;
            }
        }
        d[p]
    }

    fn dense(&self) -> Vec<(T, Point2<T>)> {
        let m = (64 * self.control_points.len()).max(512);
        (0..=m)
            .map(|i| {
                let t = T::from_usize_lossy(i) / T::from_usize_lossy(m);
                (t, self.eval_unchecked(t))
            })
            .collect()
    }

    /// Arc length by fine chord summation.
    pub fn arc_length(&self) -> T {
        self.dense()
            .windows(2)
            .map(|w| w[0].1.distance(w[1].1))
            .sum()
    }

    /// Points at equal arc-length intervals no longer than `spacing`,
    /// endpoints included.
    pub fn resample_detailed(&self, spacing: T) -> Result<Vec<CurveSample<T>>, SmoothError> {
        if !(spacing > T::zero()) {
            return Err(SmoothError::NonPositiveSpacing);
        }
        let dense = self.dense();
        let mut cum = Vec::with_capacity(dense.len());
        let mut acc = T::zero();
        cum.push(acc);
        for w in dense.windows(2) {
            acc = acc + w[0].1.distance(w[1].1);
            cum.push(acc);
        }
        let total = acc;
        let k = (total / spacing).ceil().to_usize().unwrap_or(1).max(1);
        let mut out = Vec::with_capacity(k + 1);
        let mut j = 0;
        for i in 0..=k {
            let s = total * T::from_usize_lossy(i) / T::from_usize_lossy(k);
            let t = if i == 0 {
                T::zero()
            } else if i == k {
                T::one()
            } else {
                while j + 1 < cum.len() - 1 && cum[j + 1] < s {
                    j += 1;
                }
                let seg = cum[j + 1] - cum[j];
                let f = if seg > T::zero() {
                    (s - cum[j]) / seg
                } else {
                    T::zero()
                };
                dense[j].0 + (dense[j + 1].0 - dense[j].0) * f
            };
            out.push(CurveSample {
                t,
                s,
                point: self.eval_unchecked(t),
            });
        }
        Ok(out)
    }

    pub fn resample(&self, spacing: T) -> Result<Vec<Point2<T>>, SmoothError> {
        Ok(self
            .resample_detailed(spacing)?
            .into_iter()
            .map(|c| c.point)
            .collect())
    }

    /// CSV `s,north,east` at the given spacing.
    pub fn to_csv(&self, spacing: T) -> Result<String, SmoothError> {
        let mut out = String::from("s,north,east\n");
        for c in self.resample_detailed(spacing)? {
            out.push_str(&format!(
                "{:.6},{:.6},{:.6}\n",
                c.s.as_f64(),
                c.point.north.as_f64(),
                c.point.east.as_f64()
            ));
        }
        Ok(out)
    }
}

fn chord_params<T: Real>(pts: &[Point2<T>]) -> Option<Vec<T>> {
    let mut u = vec![T::zero()];
    let mut acc = T::zero();
    for w in pts.windows(2) {
        acc = acc + w[0].distance(w[1]);
        u.push(acc);
    }
    if !(acc > T::zero()) {
        return None;
    }
    Some(u.into_iter().map(|x| x / acc).collect())
}

/// Checks every point resampled at `resolution` against free space.
pub fn validate_smoothed<T: Real>(
    curve: &BSplineCurve<T>,
    env: &EnvironmentState<T>,
    resolution: T,
) -> Result<SmoothCheck<T>, SmoothError> {
    for c in curve.resample_detailed(resolution)? {
        if !env.in_free_space(c.point) {
            return Ok(SmoothCheck::Collision {
                t: c.t,
                point: c.point,
            });
        }
    }
    Ok(SmoothCheck::Clear)
}

/// Trajectory produced from a waypoint path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    /// The spline when it passed validation.
    pub curve: Option<BSplineCurve<T>>,
    /// Dense points along whichever geometry is in use.
    pub points: Vec<Point2<T>>,
    pub length: T,
}

impl<T: Real> Trajectory<T> {
    pub fn is_smoothed(&self) -> bool {
        self.curve.is_some()
    }
}

/// Smooths `waypoints`, falling back to the raw polyline when the spline
/// leaves free space. A single waypoint gives a zero-length trajectory.
pub fn smooth_path<T: Real>(
    waypoints: &[Point2<T>],
    env: &EnvironmentState<T>,
    resolution: T,
) -> Result<Trajectory<T>, SmoothError> {
    if !(resolution > T::zero()) {
        return Err(SmoothError::NonPositiveSpacing);
    }
    if waypoints.len() < 2 {
        return Ok(Trajectory {
            curve: None,
            points: waypoints.to_vec(),
            length: T::zero(),
        });
    }
    let curve = BSplineCurve::fit(waypoints)?;
    if validate_smoothed(&curve, env, resolution)?.is_clear() {
        let samples = curve.resample_detailed(resolution)?;
        let length = samples.last().map(|c| c.s).unwrap_or_else(T::zero);
        return Ok(Trajectory {
            curve: Some(curve),
            points: samples.into_iter().map(|c| c.point).collect(),
            length,
        });
    }
    let length = waypoints.windows(2).map(|w| w[0].distance(w[1])).sum();
    Ok(Trajectory {
        curve: None,
        points: waypoints.to_vec(),
        length,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Obstacle, Workspace};
    use proptest::prelude::*;

    fn p(n: f64, e: f64) -> Point2<f64> {
        Point2::new(n, e)
    }

    fn zigzag() -> Vec<Point2<f64>> {
        vec![
            p(0.0, 0.0),
            p(10.0, 8.0),
            p(20.0, -4.0),
            p(30.0, 9.0),
            p(40.0, -6.0),
            p(50.0, 2.0),
        ]
    }

    /// Cox-de Boor basis with the last non-empty span closed on the right.
    fn basis(knots: &[f64], i: usize, p: usize, t: f64) -> f64 {
        if p == 0 {
            let last = knots[knots.len() - 1];
            let hit = knots[i] <= t && t < knots[i + 1];
            let end = t == last && knots[i] < last && knots[i + 1] == last;
            return if hit || end { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = knots[i + p] - knots[i];
        if d1 > 0.0 {
            v += (t - knots[i]) / d1 * basis(knots, i, p - 1, t);
        }
        let d2 = knots[i + p + 1] - knots[i + 1];
        if d2 > 0.0 {
            v += (knots[i + p + 1] - t) / d2 * basis(knots, i + 1, p - 1, t);
        }
        v
    }

    fn oracle(c: &BSplineCurve<f64>, t: f64) -> Point2<f64> {
        let mut acc = p(0.0, 0.0);
        for (i, cp) in c.control_points.iter().enumerate() {
            acc = acc + *cp * basis(&c.knots, i, c.degree, t);
        }
        acc
    }

    #[test]
    fn zigzag_matches_basis_summation() {
        for spacing in [KnotSpacing::Uniform, KnotSpacing::ChordLength] {
            let c = BSplineCurve::fit_with(&zigzag(), spacing).unwrap();
            assert_eq!(c.degree, 3);
            assert_eq!(c.knots.len(), 10);
            for i in 0..50 {
                let t = i as f64 / 49.0;
                let got = c.evaluate(t).unwrap();
                assert!(got.distance(oracle(&c, t)) < 1e-9, "t={t}");
            }
            assert!(c.evaluate(0.5).unwrap().distance(oracle(&c, 0.5)) < 1e-9);
        }
    }

    #[test]
    fn uniform_knots() {
        let c = BSplineCurve::fit(&zigzag()).unwrap();
        assert_eq!(
            c.knots,
            vec![0.0, 0.0, 0.0, 0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0, 1.0, 1.0]
        );
    }

    #[test]
    fn endpoints_interpolated() {
        let c = BSplineCurve::fit(&zigzag()).unwrap();
        assert_eq!(c.evaluate(0.0).unwrap(), p(0.0, 0.0));
        assert!(c.evaluate(1.0).unwrap().distance(p(50.0, 2.0)) < 1e-12);
    }

    #[test]
    fn degree_reduction() {
        let two = BSplineCurve::fit(&[p(0.0, 0.0), p(10.0, 4.0)]).unwrap();
        assert_eq!(two.degree, 1);
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            assert!(two.evaluate(t).unwrap().distance(p(10.0 * t, 4.0 * t)) < 1e-12);
        }
        let three = BSplineCurve::fit(&[p(0.0, 0.0), p(20.0, 0.0), p(20.0, 20.0)]).unwrap();
        assert_eq!(three.degree, 2);
        assert_eq!(three.evaluate(0.5).unwrap(), p(15.0, 5.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            BSplineCurve::<f64>::fit(&[p(1.0, 1.0)]),
            Err(SmoothError::TooFewPoints(1))
        );
        let c = BSplineCurve::fit(&zigzag()).unwrap();
        assert!(matches!(
            c.evaluate(1.1),
            Err(SmoothError::ParameterOutOfRange(_))
        ));
        assert!(matches!(
            c.evaluate(-1e-9),
            Err(SmoothError::ParameterOutOfRange(_))
        ));
        assert!(c.evaluate(f64::NAN).is_err());
        assert_eq!(c.resample(0.0), Err(SmoothError::NonPositiveSpacing));
    }

    #[test]
    fn collinear_stays_on_line() {
        let pts: Vec<_> = [0.0, 1.0, 3.0, 3.5, 7.0, 9.0]
            .iter()
            .map(|&s| p(2.0 + s, 1.0 - 2.0 * s))
            .collect();
        let c = BSplineCurve::fit(&pts).unwrap();
        for i in 0..=100 {
            let q = c.evaluate(i as f64 / 100.0).unwrap();
            assert!((q.east - (1.0 - 2.0 * (q.north - 2.0))).abs() < 1e-9);
        }
    }

    /// f'' extrapolated to `k` from one side, using points on that side only.
    fn second_derivative_at(c: &BSplineCurve<f64>, k: f64, side: f64, h: f64) -> Point2<f64> {
        let dd = |x: f64| {
            let a = c.evaluate(x - h).unwrap();
            let b = c.evaluate(x).unwrap();
            let d = c.evaluate(x + h).unwrap();
            (a + d - b * 2.0) * (1.0 / (h * h))
        };
        let near = dd(k + side * h);
        let far = dd(k + side * 2.0 * h);
        near * 2.0 - far
    }

    #[test]
    fn second_derivative_continuous_at_knots() {
        let c = BSplineCurve::fit(&zigzag()).unwrap();
        let h = 1e-3;
        for &k in &c.knots[4..6] {
            let left = second_derivative_at(&c, k, -1.0, h);
            let right = second_derivative_at(&c, k, 1.0, h);
            let scale = 1.0 + left.norm();
            assert!(
                left.distance(right) / scale < 1e-6,
                "k={k}: {left:?} vs {right:?}"
            );
        }
        // the degree-1 polyline is only C0, so the check is discriminating
        let poly = BSplineCurve {
            degree: 1,
            control_points: vec![p(0.0, 0.0), p(10.0, 0.0), p(10.0, 10.0)],
            knots: vec![0.0, 0.0, 0.5, 1.0, 1.0],
        };
        let l = poly.evaluate(0.5 - 1e-3).unwrap() - poly.evaluate(0.5 - 2e-3).unwrap();
        let r = poly.evaluate(0.5 + 2e-3).unwrap() - poly.evaluate(0.5 + 1e-3).unwrap();
        assert!(l.distance(r) > 1e-3);
    }

    #[test]
    fn straight_resample() {
        let c = BSplineCurve::fit(&[p(0.0, 0.0), p(10.0, 0.0)]).unwrap();
        let pts = c.resample_detailed(2.5).unwrap();
        assert_eq!(pts.len(), 5);
        for (i, s) in pts.iter().enumerate() {
            let want = 2.5 * i as f64;
            assert!((s.point.north - want).abs() < 0.025, "{s:?}");
        }
        let two = c.resample(50.0).unwrap();
        assert_eq!(two, vec![p(0.0, 0.0), p(10.0, 0.0)]);
    }

    #[test]
    fn curved_resample_gaps() {
        let c = BSplineCurve::fit(&zigzag()).unwrap();
        let spacing = 1.5;
        let samples = c.resample_detailed(spacing).unwrap();
        assert_eq!(samples[0].point, p(0.0, 0.0));
        assert!(samples.last().unwrap().point.distance(p(50.0, 2.0)) < 1e-12);
        for w in samples.windows(2) {
            assert!(w[0].t < w[1].t);
            // dense chord summation between consecutive samples
            let m = 2000;
            let mut arc = 0.0;
            let mut prev = w[0].point;
            for j in 1..=m {
                let t = w[0].t + (w[1].t - w[0].t) * j as f64 / m as f64;
                let q = c.evaluate(t).unwrap();
                arc += q.distance(prev);
                prev = q;
            }
            assert!(arc <= spacing * 1.01, "arc {arc}");
            assert!(w[0].point.distance(w[1].point) <= spacing * 1.01);
        }
    }

    fn env() -> EnvironmentState<f64> {
        let ws = Workspace::new(p(-10.0, -10.0), p(60.0, 60.0)).unwrap();
        EnvironmentState::open_water(ws, 30.0, p(50.0, 50.0))
    }

    #[test]
    fn validation_outcomes() {
        let turn = [p(0.0, 0.0), p(20.0, 0.0), p(20.0, 20.0)];
        let c = BSplineCurve::fit(&turn).unwrap();
        let mut e = env();
        assert_eq!(validate_smoothed(&c, &e, 0.5).unwrap(), SmoothCheck::Clear);
        // clear of both legs, but inside the cut corner
        let inside = Obstacle::circle(p(16.0, 4.0), 2.0).unwrap();
        assert!(inside.clearance(p(10.0, 0.0)) > 0.0);
        e.obstacles.push(inside);
        let report = validate_smoothed(&c, &e, 0.5).unwrap();
        let SmoothCheck::Collision { t, point } = report else {
            panic!("expected a collision")
        };
        assert!(e.obstacles[0].contains(point));
        assert!(t > 0.2 && t < 0.8);
        let fallback = smooth_path(&turn, &e, 0.5).unwrap();
        assert!(!fallback.is_smoothed());
        assert_eq!(fallback.points, turn.to_vec());
        assert_eq!(fallback.length, 40.0);
        // wide clearance
        let mut far = env();
        far.obstacles
            .push(Obstacle::circle(p(40.0, 40.0), 3.0).unwrap());
        let ok = smooth_path(&turn, &far, 0.5).unwrap();
        assert!(ok.is_smoothed());
        assert!(ok.length < 40.0 && ok.length > 20.0 * 2f64.sqrt());
    }

    #[test]
    fn csv_layout() {
        let c = BSplineCurve::fit(&[p(0.0, 0.0), p(10.0, 0.0)]).unwrap();
        let csv = c.to_csv(5.0).unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "s,north,east");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("10.0"));
    }

    fn inside_hull(pts: &[Point2<f64>], q: Point2<f64>) -> bool {
        let mut v: Vec<Point2<f64>> = pts.to_vec();
        v.sort_by(|a, b| a.north.total_cmp(&b.north).then(a.east.total_cmp(&b.east)));
        v.dedup();
        if v.len() < 3 {
            return v.iter().any(|a| a.distance(q) < 1e-9)
                || (v.len() == 2
                    && crate::geometry::Segment::new(v[0], v[1]).distance_to_point(q) < 1e-9);
        }
        let mut hull: Vec<Point2<f64>> = Vec::new();
        for pass in 0..2 {
            let start = hull.len();
            let iter: Box<dyn Iterator<Item = &Point2<f64>>> = if pass == 0 {
                Box::new(v.iter())
            } else {
                Box::new(v.iter().rev())
            };
            for &pt in iter {
                while hull.len() >= start + 2 {
                    let a = hull[hull.len() - 2];
                    let b = hull[hull.len() - 1];
                    if (b - a).cross(pt - a) <= 0.0 {
                        hull.pop();
                    } else {
                        break;
                    }
                }
                hull.push(pt);
            }
            hull.pop();
        }
        if hull.len() < 3 {
            return crate::geometry::Segment::new(v[0], v[v.len() - 1]).distance_to_point(q) < 1e-7;
        }
        (0..hull.len()).all(|i| {
            let a = hull[i];
            let b = hull[(i + 1) % hull.len()];
            (b - a).cross(q - a) >= -1e-7 * (1.0 + (b - a).norm())
        })
    }

    fn points_strategy() -> impl Strategy<Value = Vec<Point2<f64>>> {
        prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 2..12)
            .prop_map(|v| v.into_iter().map(|(n, e)| p(n, e)).collect())
    }

    proptest! {
        #[test]
        fn convex_hull_property(pts in points_strategy()) {
            let c = BSplineCurve::fit(&pts).unwrap();
            for i in 0..200 {
                let q = c.evaluate(i as f64 / 199.0).unwrap();
                prop_assert!(inside_hull(&pts, q));
            }
        }

        #[test]
        fn affine_invariance(
            pts in points_strategy(),
            angle in 0.0..std::f64::consts::TAU,
            scale in 0.1..10.0f64,
            shift in (-100.0..100.0f64, -100.0..100.0f64),
        ) {
            let (s, co) = angle.sin_cos();
            let map = |q: Point2<f64>| p(
                scale * (co * q.north - s * q.east) + shift.0,
                scale * (s * q.north + co * q.east) + shift.1,
            );
            let c = BSplineCurve::fit(&pts).unwrap();
            let moved: Vec<_> = pts.iter().map(|&q| map(q)).collect();
            let cm = BSplineCurve::fit(&moved).unwrap();
            for i in 0..=20 {
                let t = i as f64 / 20.0;
                let a = map(c.evaluate(t).unwrap());
                let b = cm.evaluate(t).unwrap();
                prop_assert!(a.distance(b) < 1e-9);
            }
        }
    }
}
