//! Planar helpers: points, axis-parallel rectangles and convex polygons.

use serde::Serialize;

pub type Point = [f64; 2];

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

/// Closed axis-parallel rectangle [x0,x1]×[y0,y1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const SIGMA: Rect = Rect { x0: -1.0, x1: 1.0, y0: -1.0, y1: 1.0 };

    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn centered(c: Point, half: f64) -> Self {
        Rect::new(c[0] - half, c[0] + half, c[1] - half, c[1] + half)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.x1 <= self.x0 || self.y1 <= self.y0
    }

    pub fn intersect(&self, o: &Rect) -> Rect {
        Rect::new(self.x0.max(o.x0), self.x1.min(o.x1), self.y0.max(o.y0), self.y1.min(o.y1))
    }

    pub fn contains(&self, z: Point) -> bool {
        z[0] >= self.x0 && z[0] <= self.x1 && z[1] >= self.y0 && z[1] <= self.y1
    }

    pub fn corners(&self) -> [Point; 4] {
        [[self.x0, self.y0], [self.x1, self.y0], [self.x1, self.y1], [self.x0, self.y1]]
    }

    pub fn center(&self) -> Point {
        [0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)]
    }
}

/// Convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    pub fn from_rect(r: &Rect) -> Self {
        Polygon { vertices: r.corners().to_vec() }
    }

    /// Parallelogram c + s·u + t·v, |s|,|t| ≤ 1.
    pub fn parallelogram(c: Point, u: Point, v: Point) -> Self {
        let p = |s: f64, t: f64| [c[0] + s * u[0] + t * v[0], c[1] + s * u[1] + t * v[1]];
        let mut vs = vec![p(-1.0, -1.0), p(1.0, -1.0), p(1.0, 1.0), p(-1.0, 1.0)];
        if signed_area(&vs) < 0.0 {
            vs.reverse();
        }
        Polygon { vertices: vs }
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices).abs()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3 || self.area() <= 0.0
    }

    pub fn bbox(&self) -> Rect {
        let mut r = Rect::new(f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            r.x0 = r.x0.min(v[0]);
            r.x1 = r.x1.max(v[0]);
            r.y0 = r.y0.min(v[1]);
            r.y1 = r.y1.max(v[1]);
        }
        r
    }

    /// Axis-parallel rectangle, if the polygon is one.
    pub fn as_rect(&self) -> Option<Rect> {
        if self.vertices.len() != 4 {
            return None;
        }
        let b = self.bbox();
        let on_corner = |v: &Point| {
            (v[0] == b.x0 || v[0] == b.x1) && (v[1] == b.y0 || v[1] == b.y1)
        };
        if self.vertices.iter().all(on_corner) {
            Some(b)
        } else {
            None
        }
    }

    pub fn contains(&self, z: Point) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            (b[0] - a[0]) * (z[1] - a[1]) - (b[1] - a[1]) * (z[0] - a[0]) >= -1e-14
        })
    }

    /// Sutherland–Hodgman clip against an axis-parallel rectangle.
    pub fn clip_rect(&self, r: &Rect) -> Polygon {
        let mut pts = self.vertices.clone();
        let planes: [(usize, f64, bool); 4] =
            [(0, r.x0, true), (0, r.x1, false), (1, r.y0, true), (1, r.y1, false)];
        for (axis, c, lower) in planes {
            if pts.is_empty() {
                break;
            }
            let inside = |p: &Point| if lower { p[axis] >= c } else { p[axis] <= c };
            let mut out = Vec::with_capacity(pts.len() + 2);
            for i in 0..pts.len() {
                let cur = pts[i];
                let prev = pts[(i + pts.len() - 1) % pts.len()];
                let (ci, pi) = (inside(&cur), inside(&prev));
                if ci != pi {
                    let t = (c - prev[axis]) / (cur[axis] - prev[axis]);
                    let mut q = [prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])];
                    q[axis] = c;
                    out.push(q);
                }
                if ci {
                    out.push(cur);
                }
            }
            pts = out;
        }
        Polygon { vertices: pts }
    }

    /// Intersection with another convex polygon (counter-clockwise).
    pub fn clip_convex(&self, other: &Polygon) -> Polygon {
        if let Some(r) = other.as_rect() {
            return self.clip_rect(&r);
        }
        let mut pts = self.vertices.clone();
        let n = other.vertices.len();
        for e in 0..n {
            if pts.is_empty() {
                break;
            }
            let a = other.vertices[e];
            let b = other.vertices[(e + 1) % n];
            let side = |p: &Point| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
            let mut out = Vec::with_capacity(pts.len() + 2);
            for i in 0..pts.len() {
                let cur = pts[i];
                let prev = pts[(i + pts.len() - 1) % pts.len()];
                let (sc, sp) = (side(&cur), side(&prev));
                if (sc >= 0.0) != (sp >= 0.0) {
                    let t = sp / (sp - sc);
                    out.push([prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])]);
                }
                if sc >= 0.0 {
                    out.push(cur);
                }
            }
            pts = out;
        }
        Polygon { vertices: pts }
    }

    /// x-range of the horizontal section at height y.
    pub fn x_section(&self, y: f64) -> Option<(f64, f64)> {
        let n = self.vertices.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let (ymin, ymax) = (a[1].min(b[1]), a[1].max(b[1]));
            if y < ymin || y > ymax {
                continue;
            }
            if a[1] == b[1] {
                lo = lo.min(a[0].min(b[0]));
                hi = hi.max(a[0].max(b[0]));
            } else {
                let t = (y - a[1]) / (b[1] - a[1]);
                let x = a[0] + t * (b[0] - a[0]);
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        (lo <= hi).then_some((lo, hi))
    }

    /// Sorted distinct vertex heights.
    pub fn y_breaks(&self) -> Vec<f64> {
        let mut ys: Vec<f64> = self.vertices.iter().map(|v| v[1]).collect();
        ys.sort_by(f64::total_cmp);
        ys.dedup();
        ys
    }
}

fn signed_area(vs: &[Point]) -> f64 {
    let n = vs.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = vs[i];
        let b = vs[(i + 1) % n];
        s += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * s
}
