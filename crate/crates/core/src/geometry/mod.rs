//! Planar primitives, obstacles and collision predicates.
//!
//! Coordinates are local north/east metres. Orientation-dependent
//! quantities (polygon winding, cross products) treat `north` as the first
//! axis and `east` as the second.

mod index;

pub use index::GridIndex;

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate zero-length segment")]
    DegenerateSegment,
    #[error("spatial index is empty")]
    EmptyIndex,
    #[error("invalid obstacle: {0}")]
    InvalidObstacle(String),
    #[error("invalid workspace: {0}")]
    InvalidWorkspace(String),
    #[error("resolution must be positive")]
    NonPositiveResolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2<T> {
    pub north: T,
    pub east: T,
}

impl<T: Real> Point2<T> {
    pub fn new(north: T, east: T) -> Self {
        Self { north, east }
    }

    pub fn origin() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn is_finite(&self) -> bool {
        self.north.is_finite() && self.east.is_finite()
    }

    pub fn dot(self, other: Self) -> T {
        self.north * other.north + self.east * other.east
    }

    /// z-component of the planar cross product.
    pub fn cross(self, other: Self) -> T {
        self.north * other.east - self.east * other.north
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Self) -> T {
        euclidean_distance(self, other)
    }

    /// Linear interpolation, `t = 0` gives `self`.
    pub fn lerp(self, other: Self, t: T) -> Self {
        self + (other - self) * t
    }

    pub fn cast<U: Real>(self) -> Point2<U> {
        Point2::new(U::lit(self.north.as_f64()), U::lit(self.east.as_f64()))
    }
}

impl<T: Real> Add for Point2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.north + rhs.north, self.east + rhs.east)
    }
}

impl<T: Real> Sub for Point2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.north - rhs.north, self.east - rhs.east)
    }
}

impl<T: Real> Mul<T> for Point2<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        Self::new(self.north * rhs, self.east * rhs)
    }
}

impl<T: Real> Neg for Point2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.north, -self.east)
    }
}

/// Straight-line distance between two states.
pub fn euclidean_distance<T: Real>(u: Point2<T>, v: Point2<T>) -> T {
    let dn = u.north - v.north;
    let de = u.east - v.east;
    (dn * dn + de * de).sqrt()
}

/// Directed edge between two states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment<T> {
    pub a: Point2<T>,
    pub b: Point2<T>,
}

impl<T: Real> Segment<T> {
    pub fn new(a: Point2<T>, b: Point2<T>) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> T {
        euclidean_distance(self.a, self.b)
    }

    pub fn reversed(&self) -> Self {
        Self::new(self.b, self.a)
    }

    pub fn is_degenerate(&self) -> bool {
        self.a == self.b
    }

    pub fn point_at(&self, t: T) -> Point2<T> {
        self.a.lerp(self.b, t)
    }

    /// Exact distance from `p` to the closest point of the segment.
    pub fn distance_to_point(&self, p: Point2<T>) -> T {
        point_segment_distance(p, self.a, self.b)
    }

    /// `n + 1` equally spaced points (endpoints included) with spacing at
    /// most `resolution`.
    pub fn sample_points(&self, resolution: T) -> impl Iterator<Item = Point2<T>> + '_ {
        let n = intervals_for(self.length(), resolution);
        let nf = T::from_usize_lossy(n);
        (0..=n).map(move |i| self.point_at(T::from_usize_lossy(i) / nf))
    }
}

/// Number of equal sub-intervals needed so that none exceeds `spacing`.
pub(crate) fn intervals_for<T: Real>(length: T, spacing: T) -> usize {
    let n = (length / spacing).ceil().to_usize().unwrap_or(1);
    n.max(1)
}

pub fn point_segment_distance<T: Real>(p: Point2<T>, a: Point2<T>, b: Point2<T>) -> T {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == T::zero() {
        return euclidean_distance(p, a);
    }
    let t = ((p - a).dot(ab) / len2).max(T::zero()).min(T::one());
    euclidean_distance(p, a + ab * t)
}

/// Minimum distance from `p` to any polyline (each a vertex chain).
pub fn distance_to_polylines<T: Real>(p: Point2<T>, polylines: &[Vec<Point2<T>>]) -> Option<T> {
    let mut best: Option<T> = None;
    for line in polylines {
        let candidates: Box<dyn Iterator<Item = T>> = if line.len() == 1 {
            Box::new(std::iter::once(euclidean_distance(p, line[0])))
        } else {
            Box::new(
                line.windows(2)
                    .map(|w| point_segment_distance(p, w[0], w[1])),
            )
        };
        for d in candidates {
            best = Some(match best {
                Some(b) if b <= d => b,
                _ => d,
            });
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape<T> {
    Circle {
        center: Point2<T>,
        radius: T,
    },
    /// Convex polygon, vertices counterclockwise.
    Polygon {
        vertices: Vec<Point2<T>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKind {
    #[default]
    Static,
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de> + Default"))]
pub struct Obstacle<T> {
    pub shape: Shape<T>,
    #[serde(default)]
    pub kind: ObstacleKind,
    #[serde(default)]
    pub velocity: Point2<T>,
    /// Safety margin added around the shape.
    #[serde(default)]
    pub inflation: T,
}

impl<T: Real> Obstacle<T> {
    pub fn circle(center: Point2<T>, radius: T) -> Result<Self, GeometryError> {
        let ob = Self {
            shape: Shape::Circle { center, radius },
            kind: ObstacleKind::Static,
            velocity: Point2::origin(),
            inflation: T::zero(),
        };
        ob.validate()?;
        Ok(ob)
    }

    pub fn polygon(vertices: Vec<Point2<T>>) -> Result<Self, GeometryError> {
        let ob = Self {
            shape: Shape::Polygon { vertices },
            kind: ObstacleKind::Static,
            velocity: Point2::origin(),
            inflation: T::zero(),
        };
        ob.validate()?;
        Ok(ob)
    }

    pub fn with_inflation(mut self, inflation: T) -> Self {
        self.inflation = inflation;
        self
    }

    /// Marks the obstacle dynamic and sets its constant velocity.
    pub fn moving(mut self, velocity: Point2<T>) -> Self {
        self.kind = ObstacleKind::Dynamic;
        self.velocity = velocity;
        self
    }

    pub fn is_dynamic(&self) -> bool {
        self.kind == ObstacleKind::Dynamic
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: &str| Err(GeometryError::InvalidObstacle(m.to_string()));
        if !(self.inflation >= T::zero()) || !self.inflation.is_finite() {
            return bad("inflation must be finite and non-negative");
        }
        if self.kind == ObstacleKind::Static && self.velocity != Point2::origin() {
            return bad("static obstacle with non-zero velocity");
        }
        if !self.velocity.is_finite() {
            return bad("non-finite velocity");
        }
        match &self.shape {
            Shape::Circle { center, radius } => {
                if !center.is_finite() {
                    return bad("non-finite circle center");
                }
                if !(*radius > T::zero()) || !radius.is_finite() {
                    return bad("circle radius must be positive");
                }
            }
            Shape::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return bad("polygon needs at least 3 vertices");
                }
                if vertices.iter().any(|v| !v.is_finite()) {
                    return bad("non-finite polygon vertex");
                }
                let n = vertices.len();
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let c = vertices[(i + 2) % n];
                    if (b - a).cross(c - b) <= T::zero() {
                        return bad("polygon must be convex and counterclockwise");
                    }
                }
            }
        }
        Ok(())
    }

    /// Reference point used for motion and encounter geometry.
    pub fn center(&self) -> Point2<T> {
        match &self.shape {
            Shape::Circle { center, .. } => *center,
            Shape::Polygon { vertices } => {
                let n = T::from_usize_lossy(vertices.len());
                let sum = vertices.iter().fold(Point2::origin(), |acc, v| acc + *v);
                sum * (T::one() / n)
            }
        }
    }

    pub fn translate(&mut self, offset: Point2<T>) {
        match &mut self.shape {
            Shape::Circle { center, .. } => *center = *center + offset,
            Shape::Polygon { vertices } => {
                for v in vertices.iter_mut() {
                    *v = *v + offset;
                }
            }
        }
    }

    /// Signed clearance from `p` to the raw shape: negative inside.
    pub fn clearance(&self, p: Point2<T>) -> T {
        match &self.shape {
            Shape::Circle { center, radius } => euclidean_distance(p, *center) - *radius,
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                let mut inside = true;
                let mut best = T::infinity();
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    if (b - a).cross(p - a) < T::zero() {
                        inside = false;
                    }
                    best = best.min(point_segment_distance(p, a, b));
                }
                if inside {
                    -best
                } else {
                    best
                }
            }
        }
    }

    /// True when `p` lies inside the shape grown by `inflation` (boundary
    /// counts as inside).
    pub fn contains(&self, p: Point2<T>) -> bool {
        self.clearance(p) <= self.inflation
    }
}

pub fn point_in_free_space<T: Real>(p: Point2<T>, obstacles: &[Obstacle<T>]) -> bool {
    !obstacles.iter().any(|o| o.contains(p))
}

/// Fixed-resolution collision check. Samples every point spaced at most
/// `resolution` apart along `s`, endpoints included.
pub fn segment_clear<T: Real>(
    s: &Segment<T>,
    obstacles: &[Obstacle<T>],
    resolution: T,
) -> Result<bool, GeometryError> {
    if !(resolution > T::zero()) {
        return Err(GeometryError::NonPositiveResolution);
    }
    if s.is_degenerate() {
        return Err(GeometryError::DegenerateSegment);
    }
    Ok(s.sample_points(resolution)
        .all(|p| point_in_free_space(p, obstacles)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace<T> {
    pub min: Point2<T>,
    pub max: Point2<T>,
}

impl<T: Real> Workspace<T> {
    pub fn new(min: Point2<T>, max: Point2<T>) -> Result<Self, GeometryError> {
        let ws = Self { min, max };
        ws.validate()?;
        Ok(ws)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(GeometryError::InvalidWorkspace("non-finite bounds".into()));
        }
        if !(self.min.north < self.max.north && self.min.east < self.max.east) {
            return Err(GeometryError::InvalidWorkspace(
                "min must be strictly below max on both axes".into(),
            ));
        }
        Ok(())
    }

    pub fn contains(&self, p: Point2<T>) -> bool {
        p.north >= self.min.north
            && p.north <= self.max.north
            && p.east >= self.min.east
            && p.east <= self.max.east
    }

    pub fn clamp(&self, p: Point2<T>) -> Point2<T> {
        Point2::new(
            p.north.max(self.min.north).min(self.max.north),
            p.east.max(self.min.east).min(self.max.east),
        )
    }

    pub fn extent(&self) -> Point2<T> {
        self.max - self.min
    }

    pub fn area(&self) -> T {
        let e = self.extent();
        e.north * e.east
    }

    pub fn diagonal(&self) -> T {
        self.extent().norm()
    }
}
