//! Exact planar primitives: rotations, slopes, open rectangles, disks, strips,
//! and closed-form disk/rectangle intersection areas.
//!
//! Conventions:
//! - Angles are radians. A rectangle "slope" is the angle its first side makes
//!   with the x-axis, canonicalized to `[0, pi/2)` (the family of rectangles is
//!   invariant under quarter turns).
//! - Rectangles are open sets; membership is strict.
//! - Predicates compare exact dot products where possible and use a documented
//!   1e-12 slack elsewhere.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const EXACT_TOL: f64 = 1e-12;

/// A point (or vector) in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    #[inline]
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    #[inline]
    pub fn add(self, other: Point) -> Point {
        Point::new(self.x + other.x, self.y + other.y)
    }

    #[inline]
    pub fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    #[inline]
    pub fn scale(self, t: f64) -> Point {
        Point::new(t * self.x, t * self.y)
    }

    #[inline]
    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn dist(self, other: Point) -> f64 {
        self.sub(other).norm()
    }
}

/// Rotation of a point about the origin by `angle`.
#[inline]
pub fn rot_point(p: Point, angle: f64) -> Point {
    let (s, c) = angle.sin_cos();
    Point::new(c * p.x - s * p.y, s * p.x + c * p.y)
}

/// Unit vector at `angle` from the positive x-axis.
#[inline]
pub fn unit(angle: f64) -> Point {
    let (s, c) = angle.sin_cos();
    Point::new(c, s)
}

/// The minimal nonnegative angle between the line through `p`, `q` and the
/// x-axis, in `[0, pi/2]`. Rejects the degenerate input `p == q`.
pub fn arg_line(p: Point, q: Point) -> Result<f64> {
    if p == q {
        return Err(Error::InvalidParam(
            "arg_line: coincident points do not determine a line".into(),
        ));
    }
    let d = q.sub(p);
    let a = d.y.atan2(d.x).abs(); // in [0, pi]
    Ok(if a > std::f64::consts::FRAC_PI_2 {
        std::f64::consts::PI - a
    } else {
        a
    })
}

/// A rectangle slope, canonicalized to `[0, pi/2)`.
///
/// Rectangle families repeat with period `pi/2`; construction from any real
/// angle reduces modulo `pi/2`. The raw signed angle, when a hypothesis needs
/// it, travels alongside in query parameters rather than here.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slope(f64);

impl Slope {
    pub fn new(angle: f64) -> Self {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let mut a = angle % half_pi;
        if a < 0.0 {
            a += half_pi;
        }
        // `angle % half_pi` can round up to exactly half_pi for negative inputs.
        if a >= half_pi {
            a = 0.0;
        }
        Slope(a)
    }

    #[inline]
    pub fn angle(self) -> f64 {
        self.0
    }

    /// Distance to another slope in the `pi/2`-periodic metric.
    pub fn dist(self, other: Slope) -> f64 {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let d = (self.0 - other.0).abs();
        d.min(half_pi - d)
    }
}

/// An open rectangle with a side at angle `slope` to the x-axis.
///
/// `half_a` is half the side along the slope direction, `half_b` half the side
/// along the perpendicular.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub center: Point,
    pub half_a: f64,
    pub half_b: f64,
    pub slope: Slope,
}

impl Rectangle {
    pub fn new(center: Point, half_a: f64, half_b: f64, slope: Slope) -> Result<Self> {
        if !(half_a > 0.0) || !(half_b > 0.0) {
            return Err(Error::InvalidParam(format!(
                "rectangle half-sides must be positive, got ({half_a}, {half_b})"
            )));
        }
        Ok(Rectangle { center, half_a, half_b, slope })
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    pub fn axis_aligned(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        Rectangle::new(
            Point::new(0.5 * (x0 + x1), 0.5 * (y0 + y1)),
            0.5 * (x1 - x0),
            0.5 * (y1 - y0),
            Slope::new(0.0),
        )
    }

    /// Rectangle whose first side makes the raw (uncanonicalized) angle
    /// `angle` with the x-axis. When canonicalization to `[0, pi/2)` crosses
    /// an odd number of quarter turns the side roles swap, so the point set
    /// is preserved.
    pub fn with_raw_angle(center: Point, half_a: f64, half_b: f64, angle: f64) -> Result<Self> {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let q = (angle / half_pi).floor();
        let mut canon = angle - q * half_pi;
        let mut quarter_turns = q as i64;
        if canon >= half_pi {
            canon -= half_pi;
            quarter_turns += 1;
        }
        if canon < 0.0 {
            canon = 0.0;
        }
        if quarter_turns.rem_euclid(2) == 1 {
            Rectangle::new(center, half_b, half_a, Slope(canon))
        } else {
            Rectangle::new(center, half_a, half_b, Slope(canon))
        }
    }

    /// Side lengths `(a, b)`.
    #[inline]
    pub fn sides(&self) -> (f64, f64) {
        (2.0 * self.half_a, 2.0 * self.half_b)
    }

    #[inline]
    pub fn area(&self) -> f64 {
        4.0 * self.half_a * self.half_b
    }

    #[inline]
    pub fn diameter(&self) -> f64 {
        2.0 * self.half_a.hypot(self.half_b)
    }

    /// Coordinates of `p` in the rectangle frame (origin at center, first axis
    /// along the slope direction).
    #[inline]
    pub fn local(&self, p: Point) -> (f64, f64) {
        let d = p.sub(self.center);
        let (s, c) = self.slope.angle().sin_cos();
        (c * d.x + s * d.y, -s * d.x + c * d.y)
    }

    /// Strict membership in the open rectangle.
    #[inline]
    pub fn contains(&self, p: Point) -> bool {
        let (u, v) = self.local(p);
        u.abs() < self.half_a && v.abs() < self.half_b
    }

    /// The four corner points.
    pub fn corners(&self) -> [Point; 4] {
        let ua = unit(self.slope.angle()).scale(self.half_a);
        let ub = rot_point(unit(self.slope.angle()), std::f64::consts::FRAC_PI_2)
            .scale(self.half_b);
        [
            self.center.add(ua).add(ub),
            self.center.add(ua).sub(ub),
            self.center.sub(ua).add(ub),
            self.center.sub(ua).sub(ub),
        ]
    }

    /// Rectangle translated by `v`.
    pub fn translate(&self, v: Point) -> Rectangle {
        Rectangle { center: self.center.add(v), ..*self }
    }

    /// Rectangle scaled about the origin by `t > 0`.
    pub fn scale_about_origin(&self, t: f64) -> Rectangle {
        Rectangle {
            center: self.center.scale(t),
            half_a: self.half_a * t,
            half_b: self.half_b * t,
            slope: self.slope,
        }
    }

    /// Rectangle rotated about the origin by `angle` (slope rotates with it).
    pub fn rotate_about_origin(&self, angle: f64) -> Rectangle {
        Rectangle::with_raw_angle(
            rot_point(self.center, angle),
            self.half_a,
            self.half_b,
            self.slope.angle() + angle,
        )
        .expect("sides unchanged by rotation")
    }
}

/// Strict membership of `x` in the open rectangle `r`.
#[inline]
pub fn rect_contains(r: &Rectangle, x: Point) -> bool {
    r.contains(x)
}

/// An open disk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Point,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParam(format!(
                "disk radius must be positive, got {radius}"
            )));
        }
        Ok(Disk { center, radius })
    }

    #[inline]
    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }

    #[inline]
    pub fn contains(&self, p: Point) -> bool {
        self.center.dist(p) < self.radius
    }
}

/// The strip of half-width `half_width` around the line of angle `slope`
/// through the origin: rotate by `-slope`, then `|y| < half_width`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Strip {
    pub slope: f64,
    pub half_width: f64,
}

impl Strip {
    pub fn new(slope: f64, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::InvalidParam(format!(
                "strip half-width must be positive, got {half_width}"
            )));
        }
        Ok(Strip { slope, half_width })
    }

    #[inline]
    pub fn contains(&self, p: Point) -> bool {
        let (s, c) = self.slope.sin_cos();
        (-s * p.x + c * p.y).abs() < self.half_width
    }
}

/// Antiderivative of `sqrt(r^2 - v^2)`, clamped to the valid domain.
#[inline]
fn circle_seg_antideriv(r: f64, v: f64) -> f64 {
    let t = (v / r).clamp(-1.0, 1.0);
    let w = (r * r - v * v).max(0.0).sqrt();
    0.5 * (v * w + r * r * t.asin())
}

/// Area of the disk of radius `r` centered at the origin intersected with the
/// axis-aligned box `[x0, x1] x [y0, y1]`.
///
/// The vertical range splits at the heights where the chord endpoints cross
/// the box walls; on each piece the chord width has one of four closed forms,
/// integrated exactly. Accurate to floating-point roundoff.
pub fn circle_box_area(r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    debug_assert!(r > 0.0);
    if x1 <= x0 || y1 <= y0 {
        return 0.0;
    }
    let vlo = y0.max(-r);
    let vhi = y1.min(r);
    if vhi <= vlo || x0 >= r || x1 <= -r {
        return 0.0;
    }

    let mut cuts = [vlo, vhi, 0.0, 0.0, 0.0, 0.0];
    let mut ncuts = 2;
    for &x in &[x0, x1] {
        if x.abs() < r {
            let h = (r * r - x * x).sqrt();
            for v in [-h, h] {
                if v > vlo && v < vhi {
                    cuts[ncuts] = v;
                    ncuts += 1;
                }
            }
        }
    }
    let cuts = &mut cuts[..ncuts];
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut area = 0.0;
    for win in cuts.windows(2) {
        let (p, q) = (win[0], win[1]);
        if q <= p {
            continue;
        }
        let m = 0.5 * (p + q);
        let w = (r * r - m * m).max(0.0).sqrt();
        // Chord [-w, w] clipped to [x0, x1] at the sample height decides the
        // branch for the whole piece (branches only change at the cut heights).
        let right_is_wall = x1 < w;
        let left_is_wall = x0 > -w;
        let width_mid = if right_is_wall { x1 } else { w } - if left_is_wall { x0 } else { -w };
        if width_mid <= 0.0 {
            continue;
        }
        let dj = circle_seg_antideriv(r, q) - circle_seg_antideriv(r, p);
        let dv = q - p;
        area += match (right_is_wall, left_is_wall) {
            (true, true) => (x1 - x0) * dv,
            (true, false) => x1 * dv + dj,
            (false, true) => dj - x0 * dv,
            (false, false) => 2.0 * dj,
        };
    }
    area.max(0.0)
}

/// Exact area of `d ∩ rect` via the rectangle's own frame; zero for empty
/// intersections, `pi r^2` for containment, closed-form circular segments in
/// between.
pub fn disk_rect_area(d: &Disk, rect: &Rectangle) -> f64 {
    let (cx, cy) = rect.local(d.center);
    let r = d.radius;
    // Quick rejects/accepts keep the common fully-in/fully-out cases exact.
    if cx.abs() >= rect.half_a + r || cy.abs() >= rect.half_b + r {
        return 0.0;
    }
    if cx.abs() + r <= rect.half_a && cy.abs() + r <= rect.half_b {
        return d.area();
    }
    circle_box_area(
        r,
        -rect.half_a - cx,
        rect.half_a - cx,
        -rect.half_b - cy,
        rect.half_b - cy,
    )
}

/// Maximum number of disks a single line of direction `direction` can meet.
///
/// Projects centers on the perpendicular axis and returns the largest number
/// of open projection intervals `(c - r, c + r)` sharing a common point.
pub fn line_stab_count(direction: f64, disks: &[Disk]) -> usize {
    if disks.is_empty() {
        return 0;
    }
    let n = rot_point(unit(direction), std::f64::consts::FRAC_PI_2);
    let mut events: Vec<(f64, i32)> = Vec::with_capacity(2 * disks.len());
    for d in disks {
        let p = d.center.dot(n);
        events.push((p - d.radius, 1));
        events.push((p + d.radius, -1));
    }
    // Open intervals: close before opening at equal coordinates.
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut best = 0i32;
    let mut cur = 0i32;
    for (_, e) in events {
        cur += e;
        best = best.max(cur);
    }
    best as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};

    fn approx(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a} (tol {tol})");
    }

    #[test]
    fn rotation_examples() {
        let p = rot_point(Point::new(1.0, 0.0), FRAC_PI_2);
        approx(p.x, 0.0, 1e-15);
        approx(p.y, 1.0, 1e-15);
        let q = rot_point(Point::new(0.3, -0.7), 0.0);
        assert_eq!(q, Point::new(0.3, -0.7));
        let r = rot_point(Point::new(1.0, 1.0), FRAC_PI_4);
        approx(r.x, 0.0, 1e-15);
        approx(r.y, SQRT_2, 1e-15);
    }

    #[test]
    fn arg_line_examples() {
        approx(
            arg_line(Point::ORIGIN, Point::new(1.0, 0.0)).unwrap(),
            0.0,
            0.0,
        );
        approx(
            arg_line(Point::ORIGIN, Point::new(1.0, 1.0)).unwrap(),
            FRAC_PI_4,
            1e-15,
        );
        approx(
            arg_line(Point::ORIGIN, Point::new(-1.0, 2.0)).unwrap(),
            2f64.atan(),
            1e-15,
        );
        assert!(arg_line(Point::new(2.0, 2.0), Point::new(2.0, 2.0)).is_err());
    }

    #[test]
    fn slope_canonicalization() {
        approx(Slope::new(PI).angle(), 0.0, 1e-15);
        approx(Slope::new(-0.1).angle(), FRAC_PI_2 - 0.1, 1e-15);
        assert!(Slope::new(3.0 * FRAC_PI_2 + 0.2).angle() < FRAC_PI_2);
    }

    #[test]
    fn rect_contains_examples() {
        let unit_square =
            Rectangle::new(Point::ORIGIN, 0.5, 0.5, Slope::new(0.0)).unwrap();
        assert!(unit_square.contains(Point::ORIGIN));
        assert!(!unit_square.contains(Point::new(0.5, 0.0))); // open set
        let tilted =
            Rectangle::new(Point::ORIGIN, SQRT_2 / 2.0, SQRT_2 / 2.0, Slope::new(FRAC_PI_4))
                .unwrap();
        assert!(tilted.contains(Point::new(0.9, 0.0)));
    }

    #[test]
    fn disk_rect_area_examples() {
        let d = Disk::new(Point::ORIGIN, 1.0).unwrap();
        let big = Rectangle::new(Point::ORIGIN, 2.0, 2.0, Slope::new(0.0)).unwrap();
        approx(disk_rect_area(&d, &big), PI, 1e-14);

        // Disk centered at the midpoint of a long edge: half the disk.
        let r = Rectangle::new(Point::new(0.0, -5.0), 5.0, 5.0, Slope::new(0.0)).unwrap();
        approx(disk_rect_area(&d, &r), PI / 2.0, 1e-13);

        let far = Rectangle::new(Point::new(4.0, 0.0), 1.0, 1.0, Slope::new(0.0)).unwrap();
        assert_eq!(disk_rect_area(&d, &far), 0.0);
    }

    /// Brute-force quadrature oracle for circle/box intersection, independent
    /// of the closed-form path: midpoint rule on a fine grid over the box
    /// clipped to the disk's bounding square.
    fn circle_box_oracle(r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        let xa = x0.max(-r);
        let xb = x1.min(r);
        let ya = y0.max(-r);
        let yb = y1.min(r);
        if xb <= xa || yb <= ya {
            return 0.0;
        }
        let n = 2000;
        let dx = (xb - xa) / n as f64;
        let dy = (yb - ya) / n as f64;
        let mut hits = 0u64;
        for i in 0..n {
            let x = xa + (i as f64 + 0.5) * dx;
            for j in 0..n {
                let y = ya + (j as f64 + 0.5) * dy;
                if x * x + y * y < r * r {
                    hits += 1;
                }
            }
        }
        hits as f64 * dx * dy
    }

    #[test]
    fn circle_box_area_matches_oracle() {
        let cases = [
            (1.0, -0.3, 0.9, -1.5, 0.4),
            (1.0, -2.0, 2.0, -2.0, 0.0),
            (0.7, 0.1, 0.6, 0.05, 0.9),
            (2.0, -1.0, 1.0, -0.5, 3.0),
            (1.0, -0.2, 0.1, -0.05, 0.02),
        ];
        for (r, x0, x1, y0, y1) in cases {
            let exact = circle_box_area(r, x0, x1, y0, y1);
            let est = circle_box_oracle(r, x0, x1, y0, y1);
            // Midpoint-rule error scales with the arc length over cell size.
            assert!(
                (exact - est).abs() < 5e-3 * r * r + 1e-9,
                "r={r} box=[{x0},{x1}]x[{y0},{y1}]: exact={exact} oracle={est}"
            );
        }
    }

    #[test]
    fn disk_rect_additivity_and_invariance() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let d = Disk::new(
                Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                rng.gen_range(0.05..1.2),
            )
            .unwrap();
            let rect = Rectangle::new(
                Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                rng.gen_range(0.1..1.5),
                rng.gen_range(0.1..1.5),
                Slope::new(rng.gen_range(0.0..FRAC_PI_2)),
            )
            .unwrap();

            let whole = disk_rect_area(&d, &rect);
            assert!(whole >= 0.0 && whole <= d.area().min(rect.area()) + 1e-12);

            // Split along the first side into two halves.
            let ua = unit(rect.slope.angle()).scale(rect.half_a / 2.0);
            let left = Rectangle::new(
                rect.center.sub(ua),
                rect.half_a / 2.0,
                rect.half_b,
                rect.slope,
            )
            .unwrap();
            let right = Rectangle::new(
                rect.center.add(ua),
                rect.half_a / 2.0,
                rect.half_b,
                rect.slope,
            )
            .unwrap();
            let split = disk_rect_area(&d, &left) + disk_rect_area(&d, &right);
            assert!(
                (whole - split).abs() < 1e-12,
                "additivity violated: {whole} vs {split}"
            );

            // Rotating disk and rectangle together preserves the area.
            let ang = rng.gen_range(0.0..PI);
            let d2 = Disk::new(rot_point(d.center, ang), d.radius).unwrap();
            let r2 = rect.rotate_about_origin(ang);
            assert!((disk_rect_area(&d2, &r2) - whole).abs() < 1e-10);
        }
    }

    #[test]
    fn contains_implies_positive_area() {
        let rect = Rectangle::new(Point::new(0.3, 0.1), 0.4, 0.2, Slope::new(0.7)).unwrap();
        let p = Point::new(0.35, 0.15);
        assert!(rect.contains(p));
        let d = Disk::new(p, 1e-9).unwrap();
        assert!(disk_rect_area(&d, &rect) > 0.0);
    }

    #[test]
    fn rot_point_is_isometry() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let p = Point::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
            let q = Point::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
            let ang = rng.gen_range(-10.0..10.0);
            let d0 = p.dist(q);
            let d1 = rot_point(p, ang).dist(rot_point(q, ang));
            assert!((d0 - d1).abs() <= 1e-12 * d0.max(1.0));
        }
    }

    #[test]
    fn line_stab_examples() {
        let mk = |x: f64, y: f64, r: f64| Disk::new(Point::new(x, y), r).unwrap();
        let collinear = vec![mk(0.0, 0.0, 0.1), mk(1.0, 0.0, 0.1), mk(2.0, 0.0, 0.1)];
        assert_eq!(line_stab_count(0.0, &collinear), 3);

        let apart = vec![mk(0.0, 0.0, 0.1), mk(0.0, 5.0, 0.1)];
        assert_eq!(line_stab_count(0.0, &apart), 1);

        // Disks along a line of a known direction.
        let along = vec![mk(0.0, 0.0, 0.1), mk(1.0, 0.5, 0.1), mk(2.0, 1.0, 0.1)];
        let dir = arg_line(Point::ORIGIN, Point::new(2.0, 1.0)).unwrap();
        assert_eq!(line_stab_count(dir, &along), 3);
    }
}
