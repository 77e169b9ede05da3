//! Planar predicates and small polygon utilities shared by the design,
//! pattern, fabrication and routing modules.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent f64 methods shadow this when std is linked
use num_traits::Float;
use nalgebra::{Point2, Vector2};

pub type P2 = Point2<f64>;
pub type V2 = Vector2<f64>;

#[inline]
pub fn cross(a: V2, b: V2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Twice the signed area of triangle `abc`; positive when counter-clockwise.
#[inline]
pub fn orient(a: P2, b: P2, c: P2) -> f64 {
    cross(b - a, c - a)
}

pub fn point_segment_distance(p: P2, a: P2, b: P2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Minimum distance between two closed segments.
pub fn segment_distance(a0: P2, a1: P2, b0: P2, b1: P2) -> f64 {
    let d1 = orient(a0, a1, b0);
    let d2 = orient(a0, a1, b1);
    let d3 = orient(b0, b1, a0);
    let d4 = orient(b0, b1, a1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return 0.0;
    }
    point_segment_distance(a0, b0, b1)
        .min(point_segment_distance(a1, b0, b1))
        .min(point_segment_distance(b0, a0, a1))
        .min(point_segment_distance(b1, a0, a1))
}

/// Parameters `(t, u)` of the proper crossing of `a0→a1` with `b0→b1`, if the
/// open segments cross transversally.
pub fn segment_crossing(a0: P2, a1: P2, b0: P2, b1: P2) -> Option<(f64, f64)> {
    let r = a1 - a0;
    let s = b1 - b0;
    let denom = cross(r, s);
    if denom.abs() <= f64::EPSILON * r.norm() * s.norm() {
        return None;
    }
    let qp = b0 - a0;
    let t = cross(qp, s) / denom;
    let u = cross(qp, r) / denom;
    Some((t, u))
}

pub fn signed_area(poly: &[P2]) -> f64 {
    let n = poly.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

pub fn centroid(poly: &[P2]) -> P2 {
    let area = signed_area(poly);
    let n = poly.len();
    if area.abs() < 1e-300 {
        let mut c = V2::zeros();
        for p in poly {
            c += p.coords;
        }
        return P2::from(c / n as f64);
    }
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let w = a.x * b.y - b.x * a.y;
        cx += (a.x + b.x) * w;
        cy += (a.y + b.y) * w;
    }
    P2::new(cx / (6.0 * area), cy / (6.0 * area))
}

/// Signed distance from `p` to the boundary of a counter-clockwise convex
/// polygon: positive inside, negative outside (exact outside only up to the
/// nearest supporting line).
pub fn convex_signed_distance(poly: &[P2], p: P2) -> f64 {
    let n = poly.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let e = b - a;
        let len = e.norm();
        if len == 0.0 {
            continue;
        }
        best = best.min(cross(e, p - a) / len);
    }
    best
}

pub fn is_convex_ccw(poly: &[P2], tol: f64) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    (0..n).all(|i| orient(poly[i], poly[(i + 1) % n], poly[(i + 2) % n]) >= -tol)
        && signed_area(poly) > 0.0
}

/// Unit normal pointing to the left of direction `d`.
#[inline]
pub fn left_normal(d: V2) -> V2 {
    V2::new(-d.y, d.x)
}

/// Wrap an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    use core::f64::consts::PI;
    let mut x = a % (2.0 * PI);
    if x <= -PI {
        x += 2.0 * PI;
    } else if x > PI {
        x -= 2.0 * PI;
    }
    x
}

pub fn bounding_box(points: &[P2]) -> Option<(P2, P2)> {
    let first = points.first()?;
    let mut lo = *first;
    let mut hi = *first;
    for p in points {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    Some((lo, hi))
}

/// Mean-value coordinates of `p` with respect to a simple polygon.
///
/// Points on an edge get linear weights on that edge's endpoints; points on a
/// vertex get a unit weight.
pub fn mean_value_coordinates(poly: &[P2], p: P2) -> Vec<f64> {
    let n = poly.len();
    let mut w = alloc::vec![0.0; n];
    let eps = 1e-12;
    for i in 0..n {
        if (poly[i] - p).norm() < eps {
            w[i] = 1.0;
            return w;
        }
    }
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if point_segment_distance(p, a, b) < eps {
            let t = (p - a).norm() / (b - a).norm();
            w[i] = 1.0 - t;
            w[(i + 1) % n] = t;
            return w;
        }
    }
    let tan_half = |i: usize| {
        let a = poly[i] - p;
        let b = poly[(i + 1) % n] - p;
        let ang = cross(a, b).atan2(a.dot(&b));
        (ang / 2.0).tan()
    };
    let mut total = 0.0;
    for i in 0..n {
        let prev = (i + n - 1) % n;
        let r = (poly[i] - p).norm();
        w[i] = (tan_half(prev) + tan_half(i)) / r;
        total += w[i];
    }
    for x in &mut w {
        *x /= total;
    }
    w
}
