//! Points and axis-aligned boxes in R^d.

use serde::{Deserialize, Serialize};

use crate::error::{CraneError, Result};

/// A point in d-dimensional Euclidean space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn origin(dim: usize) -> Self {
        Self { coords: vec![0.0; dim] }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    #[inline]
    pub fn distance(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn translated(&self, offset: &[f64]) -> Point {
        Point::new(self.coords.iter().zip(offset).map(|(a, b)| a + b).collect())
    }

    /// Point on the segment from `self` to `other` at fraction `t` of the way.
    pub fn lerp(&self, other: &Point, t: f64) -> Point {
        Point::new(
            self.coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + (b - a) * t)
                .collect(),
        )
    }
}

impl From<Vec<f64>> for Point {
    fn from(coords: Vec<f64>) -> Self {
        Point::new(coords)
    }
}

impl<const N: usize> From<[f64; N]> for Point {
    fn from(coords: [f64; N]) -> Self {
        Point::new(coords.to_vec())
    }
}

/// Axis-aligned box `[lo_k, hi_k]` per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Aabb {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(CraneError::Argument(format!(
                "box bounds have mismatched dimensions {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for (k, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() || l > h {
                return Err(CraneError::Argument(format!(
                    "invalid box bounds on axis {k}: [{l}, {h}]"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn cube(center: &[f64], side: f64) -> Self {
        let h = side / 2.0;
        Self {
            lo: center.iter().map(|c| c - h).collect(),
            hi: center.iter().map(|c| c + h).collect(),
        }
    }

    pub fn unit(dim: usize) -> Self {
        Self {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.side(k)).product()
    }

    pub fn center(&self) -> Point {
        Point::new(
            self.lo
                .iter()
                .zip(&self.hi)
                .map(|(l, h)| 0.5 * (l + h))
                .collect(),
        )
    }

    /// Closed-box membership.
    pub fn contains(&self, p: &Point) -> bool {
        p.dim() == self.dim()
            && p
                .coords
                .iter()
                .enumerate()
                .all(|(k, &c)| c >= self.lo[k] && c <= self.hi[k])
    }

    /// Diameter: distance between opposite corners.
    pub fn diameter(&self) -> f64 {
        (0..self.dim())
            .map(|k| self.side(k).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn intersection(&self, other: &Aabb) -> Option<Aabb> {
        let lo: Vec<f64> = self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect();
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            None
        } else {
            Some(Aabb { lo, hi })
        }
    }

    pub fn intersection_volume(&self, other: &Aabb) -> f64 {
        (0..self.dim())
            .map(|k| (self.hi[k].min(other.hi[k]) - self.lo[k].max(other.lo[k])).max(0.0))
            .product()
    }

    /// Smallest box containing both.
    pub fn union_hull(&self, other: &Aabb) -> Aabb {
        Aabb {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        }
    }

    pub fn contains_box(&self, other: &Aabb, tol: f64) -> bool {
        (0..self.dim()).all(|k| other.lo[k] >= self.lo[k] - tol && other.hi[k] <= self.hi[k] + tol)
    }

    /// Smallest distance between any two points of the boxes: the norm of
    /// the per-axis interval gaps.
    pub fn min_distance(&self, other: &Aabb) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        (0..self.dim())
            .map(|k| {
                let gap = (other.lo[k] - self.hi[k]).max(self.lo[k] - other.hi[k]).max(0.0);
                gap * gap
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Largest distance between any two points of the boxes: the norm of the
    /// per-axis farthest-endpoint separations.
    pub fn max_distance(&self, other: &Aabb) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        (0..self.dim())
            .map(|k| {
                let far = (other.hi[k] - self.lo[k]).max(self.hi[k] - other.lo[k]);
                far * far
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Euclidean distance from a point to the box (0 inside).
    pub fn distance_to_point(&self, p: &Point) -> f64 {
        p.coords
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let gap = (self.lo[k] - c).max(c - self.hi[k]).max(0.0);
                gap * gap
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Distance from a point to the farthest corner of the box.
    pub fn farthest_distance_to_point(&self, p: &Point) -> f64 {
        p.coords
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let far = (c - self.lo[k]).abs().max((self.hi[k] - c).abs());
                far * far
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Lebesgue measure of the unit ball in R^d.
pub fn unit_ball_volume(dim: usize) -> f64 {
    use std::f64::consts::PI;
    match dim {
        1 => 2.0,
        2 => PI,
        3 => 4.0 / 3.0 * PI,
        d => {
            // V_d = V_{d-2} * 2π/d
            unit_ball_volume(d - 2) * 2.0 * PI / d as f64
        }
    }
}


/// Area of the intersection of a disk (centre `c`, radius `r`) with the
/// rectangle `[x0, x1] × [y0, y1]`. Closed form by inclusion–exclusion over
/// lower-left quadrants.
pub fn disk_rect_area(c: [f64; 2], r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    if r <= 0.0 || x1 <= x0 || y1 <= y0 {
        return 0.0;
    }
    let (x0, x1, y0, y1) = (x0 - c[0], x1 - c[0], y0 - c[1], y1 - c[1]);
    let a = quadrant_area(r, x1, y1) - quadrant_area(r, x0, y1) - quadrant_area(r, x1, y0)
        + quadrant_area(r, x0, y0);
    a.clamp(0.0, std::f64::consts::PI * r * r)
}

/// Area of `{(u, v) : u² + v² ≤ r², u ≤ a, v ≤ b}`.
fn quadrant_area(r: f64, a: f64, b: f64) -> f64 {
    if b <= -r || a <= -r {
        return 0.0;
    }
    let a = a.min(r);
    // antiderivative of sqrt(r² − u²)
    let chord = |u: f64| {
        let u = u.clamp(-r, r);
        0.5 * (u * (r * r - u * u).max(0.0).sqrt() + r * r * (u / r).asin())
    };
    let full = |lo: f64, hi: f64| {
        let hi = hi.min(a);
        if hi <= lo {
            0.0
        } else {
            2.0 * (chord(hi) - chord(lo))
        }
    };
    let capped = |lo: f64, hi: f64| {
        // integrand b + sqrt(r² − u²)
        let hi = hi.min(a);
        if hi <= lo {
            0.0
        } else {
            b * (hi - lo) + chord(hi) - chord(lo)
        }
    };
    if b >= r {
        return full(-r, r);
    }
    let c = (r * r - b * b).sqrt();
    if b >= 0.0 {
        full(-r, -c) + capped(-c, c) + full(c, r)
    } else {
        capped(-c, c)
    }
}

/// Volume of the intersection of a ball with a box, for d ∈ {2, 3}.
///
/// In 2-D this is the closed-form disk/rectangle area. In 3-D the disk area
/// of each x-slice is integrated by adaptive Simpson between the slice
/// positions where the cross-section changes topology.
pub fn ball_box_volume(center: &Point, radius: f64, cell: &Aabb) -> f64 {
    match cell.dim() {
        2 => disk_rect_area(
            [center.coords[0], center.coords[1]],
            radius,
            cell.lo[0],
            cell.hi[0],
            cell.lo[1],
            cell.hi[1],
        ),
        3 => ball_box_volume_3d(center, radius, cell),
        d => panic!("ball/box intersection is implemented for d = 2 and 3, got {d}"),
    }
}

fn ball_box_volume_3d(center: &Point, radius: f64, cell: &Aabb) -> f64 {
    let cx = center.coords[0];
    let a = cell.lo[0].max(cx - radius);
    let b = cell.hi[0].min(cx + radius);
    if b <= a || cell.distance_to_point(center) >= radius {
        return 0.0;
    }
    if cell.farthest_distance_to_point(center) <= radius {
        return cell.volume();
    }
    let (cy, cz) = (center.coords[1], center.coords[2]);
    let slice = |x: f64| {
        let rho2 = radius * radius - (x - cx) * (x - cx);
        if rho2 <= 0.0 {
            return 0.0;
        }
        disk_rect_area([cy, cz], rho2.sqrt(), cell.lo[1], cell.hi[1], cell.lo[2], cell.hi[2])
    };

    // cross-section radii at which the slice area changes form
    let ys = [cell.lo[1] - cy, cell.hi[1] - cy];
    let zs = [cell.lo[2] - cz, cell.hi[2] - cz];
    let mut radii: Vec<f64> = ys.iter().chain(zs.iter()).map(|t| t.abs()).collect();
    for y in ys {
        for z in zs {
            radii.push((y * y + z * z).sqrt());
        }
    }
    let mut cuts = vec![a, b, cx.clamp(a, b)];
    for t in radii {
        if t < radius {
            let dx = (radius * radius - t * t).sqrt();
            for x in [cx - dx, cx + dx] {
                if x > a && x < b {
                    cuts.push(x);
                }
            }
        }
    }
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    cuts.dedup();

    let tol = 1e-13 * cell.volume().max(1e-300);
    cuts.windows(2)
        .map(|w| adaptive_simpson(&slice, w[0], w[1], tol, 48))
        .sum::<f64>()
        .clamp(0.0, cell.volume())
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}
