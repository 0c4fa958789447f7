use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Wraps an angle into `[-pi, pi)`.
pub fn normalize_yaw(yaw: f64) -> f64 {
    let wrapped = (yaw + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can return exactly 2pi for tiny negative inputs
    if wrapped >= PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }
}

/// A bird's-eye-view box. Serialized as `{x, y, l, w, yaw, score}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    #[serde(rename = "x")]
    pub center_x: f64,
    #[serde(rename = "y")]
    pub center_y: f64,
    #[serde(rename = "l")]
    pub length: f64,
    #[serde(rename = "w")]
    pub width: f64,
    pub yaw: f64,
    #[serde(default = "default_score")]
    pub score: f64,
}

fn default_score() -> f64 {
    1.0
}

impl OrientedBox {
    /// A box with score 1.0 and its yaw wrapped into `[-pi, pi)`.
    pub fn new(center_x: f64, center_y: f64, length: f64, width: f64, yaw: f64) -> Self {
        Self { center_x, center_y, length, width, yaw: normalize_yaw(yaw), score: 1.0 }
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = score;
        self
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = [self.center_x, self.center_y, self.length, self.width, self.yaw, self.score]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(GeometryError::NonFinite);
        }
        if self.length <= 0.0 || self.width <= 0.0 {
            return Err(GeometryError::DegenerateBox { length: self.length, width: self.width });
        }
        Ok(())
    }

    pub fn center(&self) -> Point {
        Point::new(self.center_x, self.center_y)
    }

    pub fn area(&self) -> f64 {
        self.length * self.width
    }

    /// Radius of the circumscribed circle.
    pub fn circumradius(&self) -> f64 {
        0.5 * self.length.hypot(self.width)
    }

    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [Point; 4] {
        let (sin, cos) = self.yaw.sin_cos();
        let (hl, hw) = (0.5 * self.length, 0.5 * self.width);
        [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)].map(|(dx, dy)| {
            Point::new(self.center_x + dx * cos - dy * sin, self.center_y + dx * sin + dy * cos)
        })
    }

    /// Whether the box centre lies in the disc `(cx, cy, radius)`.
    pub fn center_within(&self, cx: f64, cy: f64, radius: f64) -> bool {
        (self.center_x - cx).hypot(self.center_y - cy) <= radius
    }

    /// Applies a rigid transform: rotate by `angle` about the origin, then translate.
    pub fn transformed(&self, angle: f64, tx: f64, ty: f64) -> Self {
        let (sin, cos) = angle.sin_cos();
        Self {
            center_x: self.center_x * cos - self.center_y * sin + tx,
            center_y: self.center_x * sin + self.center_y * cos + ty,
            yaw: normalize_yaw(self.yaw + angle),
            ..*self
        }
    }
}

fn polygon_area(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..poly.len() {
        let j = (i + 1) % poly.len();
        twice += poly[i].cross(poly[j]);
    }
    0.5 * twice.abs()
}

/// Sutherland-Hodgman clip of `subject` against the convex CCW polygon `clip`.
fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut output = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let (p, q) = (clip[i], clip[(i + 1) % clip.len()]);
        let edge = q.sub(p);
        let side = |v: Point| edge.cross(v.sub(p));
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let (sc, sp) = (side(cur), side(prev));
            if sc >= 0.0 {
                if sp < 0.0 {
                    output.push(intersect(prev, cur, sp, sc));
                }
                output.push(cur);
            } else if sp >= 0.0 {
                output.push(intersect(prev, cur, sp, sc));
            }
        }
    }
    output
}

fn intersect(a: Point, b: Point, sa: f64, sb: f64) -> Point {
    let t = sa / (sa - sb);
    Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
}

/// Vertices of the overlap of two oriented boxes, counter-clockwise; empty
/// when they are disjoint.
pub fn intersection_polygon(a: &OrientedBox, b: &OrientedBox) -> Vec<Point> {
    let gap = (a.center_x - b.center_x).hypot(a.center_y - b.center_y);
    if gap >= a.circumradius() + b.circumradius() {
        return Vec::new();
    }
    clip_convex(&a.corners(), &b.corners())
}

/// Area of the intersection of two oriented boxes.
pub fn intersection_area(a: &OrientedBox, b: &OrientedBox) -> f64 {
    polygon_area(&intersection_polygon(a, b))
}

/// Rotated-box intersection over union, via exact convex polygon clipping.
pub fn rotated_iou(a: &OrientedBox, b: &OrientedBox) -> Result<f64, GeometryError> {
    a.validate()?;
    b.validate()?;
    if a == b {
        return Ok(1.0);
    }
    let inter = intersection_area(a, b);
    if inter <= 0.0 {
        return Ok(0.0);
    }
    let union = a.area() + b.area() - inter;
    Ok((inter / union).clamp(0.0, 1.0))
}
