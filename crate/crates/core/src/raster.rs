//! Convex hulls of integer pixel points and exact hull filling.
//!
//! Pixels are treated as lattice points `(u, v)` so that every test below is
//! evaluated in exact integer arithmetic. Hull membership is closed: points
//! on an edge are inside.

use alloc::vec::Vec;

use crate::geometry::Pixel;
use crate::mask::BinaryMask;

#[inline]
fn cross(o: Pixel, a: Pixel, b: Pixel) -> i128 {
    (a.u - o.u) as i128 * (b.v - o.v) as i128 - (a.v - o.v) as i128 * (b.u - o.u) as i128
}

/// Convex hull by Andrew's monotone chain, counter-clockwise in `(u, v)`
/// coordinates, without collinear vertices. Degenerate inputs give one or
/// two vertices.
pub fn convex_hull(points: &[Pixel]) -> Vec<Pixel> {
    let mut pts: Vec<Pixel> = points.to_vec();
    pts.sort();
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut hull: Vec<Pixel> = Vec::with_capacity(pts.len() * 2);
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Closed-hull membership by the half-plane system of the hull edges.
pub fn hull_contains(hull: &[Pixel], p: Pixel) -> bool {
    match hull.len() {
        0 => false,
        1 => hull[0] == p,
        2 => {
            let (a, b) = (hull[0], hull[1]);
            cross(a, b, p) == 0
                && p.u >= a.u.min(b.u)
                && p.u <= a.u.max(b.u)
                && p.v >= a.v.min(b.v)
                && p.v <= a.v.max(b.v)
        }
        n => (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], p) >= 0),
    }
}

fn div_floor(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn div_ceil(a: i128, b: i128) -> i128 {
    -div_floor(-a, b)
}

/// Inclusive column span of the hull on row `v`, unclipped.
fn row_span(hull: &[Pixel], v: i64) -> Option<(i64, i64)> {
    let n = hull.len();
    if n < 3 {
        let (lo, hi) = match n {
            0 => return None,
            1 => (hull[0], hull[0]),
            _ => (hull[0], hull[1]),
        };
        if v < lo.v.min(hi.v) || v > lo.v.max(hi.v) {
            return None;
        }
        if lo.v == hi.v {
            return Some((lo.u.min(hi.u), lo.u.max(hi.u)));
        }
        // Lattice points on the segment at this row, if any.
        let num = (hi.u - lo.u) as i128 * (v - lo.v) as i128;
        let den = (hi.v - lo.v) as i128;
        if num % den != 0 {
            return None;
        }
        let u = lo.u + (num / den) as i64;
        return Some((u, u));
    }
    let mut lo = i128::MIN;
    let mut hi = i128::MAX;
    for i in 0..n {
        let a = hull[i];
        let b = hull[(i + 1) % n];
        // cross(a, b, (u, v)) = dx (v - a.v) - dy (u - a.u) >= 0
        let dx = (b.u - a.u) as i128;
        let dy = (b.v - a.v) as i128;
        let c = dx * (v - a.v) as i128 + dy * a.u as i128;
        // dy * u <= c
        match dy.signum() {
            0 => {
                if c < 0 {
                    return None;
                }
            }
            1 => hi = hi.min(div_floor(c, dy)),
            _ => lo = lo.max(div_ceil(c, dy)),
        }
    }
    (lo <= hi).then_some((lo as i64, hi as i64))
}

/// Sets every lattice point of the closed hull that falls inside the frame.
pub fn fill_hull(mask: &mut BinaryMask, hull: &[Pixel]) {
    if hull.is_empty() {
        return;
    }
    let vmin = hull.iter().map(|p| p.v).min().unwrap().max(0);
    let vmax = hull
        .iter()
        .map(|p| p.v)
        .max()
        .unwrap()
        .min(mask.height() as i64 - 1);
    for v in vmin..=vmax {
        if let Some((u0, u1)) = row_span(hull, v) {
            let u0 = u0.max(0);
            let u1 = u1.min(mask.width() as i64 - 1);
            for u in u0..=u1 {
                mask.set(Pixel::new(u, v), true);
            }
        }
    }
}
