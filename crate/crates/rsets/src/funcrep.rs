//! Exact representations of the working functions: signed sums of disk
//! indicators, their lattice periodizations, and dilated finite series.
//!
//! Integrals over rectangles are computed from closed-form disk/rectangle
//! areas, never by sampling. Lattice functions report a rigorous error radius
//! for cells outside the materialized window; everything else is exact up to
//! floating-point roundoff.

use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};

use crate::geometry::{disk_rect_area, Disk, Point, Rectangle};
use crate::{Error, Result};

/// A value together with a rigorous error radius.
///
/// `value` is the computed midpoint; the true quantity lies within
/// `value ± radius` (up to floating-point roundoff of the exact parts).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub value: f64,
    pub radius: f64,
}

impl Interval {
    pub fn exact(value: f64) -> Self {
        Interval { value, radius: 0.0 }
    }

    #[inline]
    pub fn lo(self) -> f64 {
        self.value - self.radius
    }

    #[inline]
    pub fn hi(self) -> f64 {
        self.value + self.radius
    }

    pub fn add(self, other: Interval) -> Interval {
        Interval { value: self.value + other.value, radius: self.radius + other.radius }
    }

    pub fn scale(self, t: f64) -> Interval {
        Interval { value: self.value * t, radius: self.radius * t.abs() }
    }

    /// Interval for `|x|` given `x` in `self`.
    pub fn abs(self) -> Interval {
        let lo = (self.value.abs() - self.radius).max(0.0);
        let hi = self.value.abs() + self.radius;
        Interval { value: 0.5 * (lo + hi), radius: 0.5 * (hi - lo) }
    }

    /// True iff the whole interval lies strictly above `t`.
    pub fn certified_above(self, t: f64) -> bool {
        self.lo() > t
    }

    /// True iff the whole interval lies at or below `t`.
    pub fn certified_at_most(self, t: f64) -> bool {
        self.hi() <= t
    }
}

/// Anything with a pointwise value and an exact rectangle integral.
pub trait RectIntegrable {
    fn eval(&self, x: Point) -> f64;
    fn integral_rect(&self, rect: &Rectangle) -> Interval;
    /// A disk containing the support, when one is known.
    fn support_bound(&self) -> Option<Disk> {
        None
    }
}

/// One weighted disk indicator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub disk: Disk,
    pub weight: f64,
}

/// A finitely supported signed density: a weighted sum of disk indicators.
#[derive(Clone, Debug, PartialEq)]
pub struct DiskSum {
    atoms: Vec<Atom>,
    bound: Option<Disk>,
}

impl DiskSum {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        for a in &atoms {
            if !(a.disk.radius > 0.0) {
                return Err(Error::InvalidParam("disk-sum atom with nonpositive radius".into()));
            }
        }
        let bound = enclosing_disk(&atoms);
        Ok(DiskSum { atoms, bound })
    }

    pub fn empty() -> Self {
        DiskSum { atoms: Vec::new(), bound: None }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Signed integral over the whole plane, summed in atom order.
    pub fn total_integral(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.disk.area()).sum()
    }

    /// Integral of the absolute value, valid only when atoms are pairwise
    /// disjoint (checked; otherwise the weighted sum would not equal it).
    pub fn total_abs_integral(&self) -> Result<f64> {
        for (i, a) in self.atoms.iter().enumerate() {
            for b in &self.atoms[i + 1..] {
                if a.disk.center.dist(b.disk.center) < a.disk.radius + b.disk.radius {
                    return Err(Error::Precondition(
                        "total_abs_integral: overlapping atoms".into(),
                    ));
                }
            }
        }
        Ok(self.atoms.iter().map(|a| a.weight.abs() * a.disk.area()).sum())
    }

    /// The function `x -> f(n x)`: centers and radii shrink by `n`, weights
    /// are unchanged, integrals scale by `1/n^2`.
    pub fn dilate(&self, n: u32) -> Result<DiskSum> {
        if n == 0 {
            return Err(Error::InvalidParam("dilation factor must be >= 1".into()));
        }
        let t = 1.0 / n as f64;
        DiskSum::new(
            self.atoms
                .iter()
                .map(|a| Atom {
                    disk: Disk { center: a.disk.center.scale(t), radius: a.disk.radius * t },
                    weight: a.weight,
                })
                .collect(),
        )
    }

    pub fn translate(&self, v: Point) -> DiskSum {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                disk: Disk { center: a.disk.center.add(v), radius: a.disk.radius },
                weight: a.weight,
            })
            .collect();
        DiskSum::new(atoms).expect("radii unchanged")
    }

    pub fn rotate_about_origin(&self, angle: f64) -> DiskSum {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                disk: Disk {
                    center: crate::geometry::rot_point(a.disk.center, angle),
                    radius: a.disk.radius,
                },
                weight: a.weight,
            })
            .collect();
        DiskSum::new(atoms).expect("radii unchanged")
    }
}

fn enclosing_disk(atoms: &[Atom]) -> Option<Disk> {
    if atoms.is_empty() {
        return None;
    }
    // Center of the atom bounding box, radius to the farthest atom edge.
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for a in atoms {
        lo.x = lo.x.min(a.disk.center.x - a.disk.radius);
        lo.y = lo.y.min(a.disk.center.y - a.disk.radius);
        hi.x = hi.x.max(a.disk.center.x + a.disk.radius);
        hi.y = hi.y.max(a.disk.center.y + a.disk.radius);
    }
    let center = Point::new(0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y));
    let radius = atoms
        .iter()
        .map(|a| center.dist(a.disk.center) + a.disk.radius)
        .fold(0.0f64, f64::max);
    Some(Disk { center, radius: radius.max(f64::MIN_POSITIVE) })
}

impl RectIntegrable for DiskSum {
    fn eval(&self, x: Point) -> f64 {
        if let Some(b) = self.bound {
            if !b.contains(x) && x.dist(b.center) > b.radius {
                return 0.0;
            }
        }
        self.atoms
            .iter()
            .filter(|a| a.disk.contains(x))
            .map(|a| a.weight)
            .sum()
    }

    fn integral_rect(&self, rect: &Rectangle) -> Interval {
        let v: f64 = self
            .atoms
            .iter()
            .map(|a| a.weight * disk_rect_area(&a.disk, rect))
            .sum();
        Interval::exact(v)
    }

    fn support_bound(&self) -> Option<Disk> {
        self.bound
    }
}

/// JSON form: `{"atoms":[{"cx":..,"cy":..,"r":..,"w":..}]}`.
#[derive(Serialize, Deserialize)]
struct AtomJson {
    cx: f64,
    cy: f64,
    r: f64,
    w: f64,
}

impl Serialize for DiskSum {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        struct Atoms<'a>(&'a [Atom]);
        impl Serialize for Atoms<'_> {
            fn serialize<S: Serializer>(
                &self,
                serializer: S,
            ) -> std::result::Result<S::Ok, S::Error> {
                let mut seq = serializer.serialize_seq(Some(self.0.len()))?;
                for a in self.0 {
                    seq.serialize_element(&AtomJson {
                        cx: a.disk.center.x,
                        cy: a.disk.center.y,
                        r: a.disk.radius,
                        w: a.weight,
                    })?;
                }
                seq.end()
            }
        }
        let mut st = serializer.serialize_struct("DiskSum", 1)?;
        st.serialize_field("atoms", &Atoms(&self.atoms))?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for DiskSum {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            atoms: Vec<AtomJson>,
        }
        let repr = Repr::deserialize(deserializer)?;
        let atoms = repr
            .atoms
            .into_iter()
            .map(|a| {
                Ok(Atom {
                    disk: Disk::new(Point::new(a.cx, a.cy), a.r)
                        .map_err(serde::de::Error::custom)?,
                    weight: a.w,
                })
            })
            .collect::<std::result::Result<Vec<_>, D::Error>>()?;
        DiskSum::new(atoms).map_err(serde::de::Error::custom)
    }
}

/// Construction parameters of a periodized bump family; the serialized form
/// of a [`LatticeFunction`] (cells are deterministic and never enumerated).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    /// Scale of the whole family.
    pub eps: f64,
    /// Witness-region scale.
    pub delta: f64,
    /// Slope interval center (bump orientation).
    pub alpha: f64,
    /// Slope interval half-width.
    pub gamma: f64,
    /// Per-cell support scale: cell `k` has support radius
    /// `lambda * 2^-(|k1|+|k2|)`.
    pub lambda: f64,
    /// Cap on the per-cell point count (the honest-bound override).
    pub n_cap: u32,
    /// Cells with `max(|k1|,|k2|) <= window` are materialized.
    pub window: i64,
    pub seed: u64,
}

/// A cell-indexed family of disk sums: cell `k` carries a copy of the ring
/// bump for `|k1|+|k2|`, centered at `k` and supported in a ball of radius
/// `lambda 2^-(|k1|+|k2|)` around it.
///
/// Cells are deterministic in the index; rings up to `2 * window` are built
/// eagerly, cells beyond the window enter integrals as a certified error
/// radius (each cell's signed integral over any set is at most half its
/// absolute mass).
#[derive(Clone, Debug)]
pub struct LatticeFunction {
    params: LatticeParams,
    /// Ring bump for `|k1|+|k2| = i`, centered at the origin.
    ring_bumps: Vec<DiskSum>,
    /// Largest absolute cell mass (1 for the standard construction).
    max_cell_mass: f64,
}

impl LatticeFunction {
    /// Assembles a lattice function from eagerly built ring bumps.
    /// `ring_bumps[i]` must be supported in `B(lambda 2^-i)` and integrate
    /// to zero; both are rechecked here.
    pub fn from_rings(params: LatticeParams, ring_bumps: Vec<DiskSum>) -> Result<Self> {
        let mut max_mass = 0.0f64;
        for (i, bump) in ring_bumps.iter().enumerate() {
            let eps_i = params.lambda * 0.5f64.powi(i as i32);
            if let Some(b) = bump.support_bound() {
                let reach = b.center.norm() + b.radius;
                if reach > eps_i * (1.0 + 1e-9) {
                    return Err(Error::InvalidParam(format!(
                        "ring {i} bump reaches {reach}, beyond its cell ball {eps_i}"
                    )));
                }
            }
            if bump.total_integral().abs() > 1e-12 {
                return Err(Error::InvalidParam(format!(
                    "ring {i} bump does not integrate to zero"
                )));
            }
            let mass = bump.total_abs_integral()?;
            if mass > 1.0 + 1e-9 {
                return Err(Error::InvalidParam(format!(
                    "ring {i} bump has absolute mass {mass} > 1"
                )));
            }
            max_mass = max_mass.max(mass);
        }
        Ok(LatticeFunction { params, ring_bumps, max_cell_mass: max_mass })
    }

    /// A lattice function with no mass anywhere.
    pub fn zero() -> Self {
        LatticeFunction {
            params: LatticeParams {
                eps: 0.0,
                delta: 0.0,
                alpha: 0.0,
                gamma: 0.0,
                lambda: f64::MIN_POSITIVE,
                n_cap: 0,
                window: 0,
                seed: 0,
            },
            ring_bumps: Vec::new(),
            max_cell_mass: 0.0,
        }
    }

    pub fn params(&self) -> &LatticeParams {
        &self.params
    }

    pub fn max_cell_mass(&self) -> f64 {
        self.max_cell_mass
    }

    /// Support-ball radius for cell `k`.
    #[inline]
    pub fn cell_eps(&self, k: (i64, i64)) -> f64 {
        let ring = (k.0.unsigned_abs() + k.1.unsigned_abs()) as i32;
        self.params.lambda * 0.5f64.powi(ring)
    }

    /// The ring bump (centered at the origin) for cell `k`, if materialized.
    pub fn cell_bump(&self, k: (i64, i64)) -> Option<&DiskSum> {
        let ring = (k.0.unsigned_abs() + k.1.unsigned_abs()) as usize;
        self.ring_bumps.get(ring)
    }

    pub fn materialized_rings(&self) -> usize {
        self.ring_bumps.len()
    }

    /// Integral over `rect` restricted to the single cell `k` (exactly the
    /// cell's own contribution). Errors if the cell is not materialized.
    pub fn cell_integral(&self, k: (i64, i64), rect: &Rectangle) -> Result<f64> {
        let bump = self.cell_bump(k).ok_or_else(|| {
            Error::Precondition(format!("cell {k:?} is outside the materialized window"))
        })?;
        let local = rect.translate(Point::new(-(k.0 as f64), -(k.1 as f64)));
        Ok(bump.integral_rect(&local).value)
    }

    /// Ranges of cell indices whose support ball can meet `rect`.
    fn cell_range(&self, rect: &Rectangle) -> (i64, i64, i64, i64) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for c in rect.corners() {
            lo.x = lo.x.min(c.x);
            lo.y = lo.y.min(c.y);
            hi.x = hi.x.max(c.x);
            hi.y = hi.y.max(c.y);
        }
        let m = self.params.lambda;
        (
            (lo.x - m).floor() as i64,
            (hi.x + m).ceil() as i64,
            (lo.y - m).floor() as i64,
            (hi.y + m).ceil() as i64,
        )
    }
}

impl RectIntegrable for LatticeFunction {
    fn eval(&self, x: Point) -> f64 {
        // Support balls have radius < 1/2, so only the nearest lattice point
        // can carry support containing x.
        let k = (x.x.round() as i64, x.y.round() as i64);
        let kp = Point::new(k.0 as f64, k.1 as f64);
        if x.dist(kp) > self.cell_eps(k) {
            return 0.0;
        }
        match self.cell_bump(k) {
            Some(b) => b.eval(x.sub(kp)),
            None => 0.0,
        }
    }

    fn integral_rect(&self, rect: &Rectangle) -> Interval {
        let (k1lo, k1hi, k2lo, k2hi) = self.cell_range(rect);
        let (sin_s, cos_s) = rect.slope.angle().sin_cos();
        let mut value = 0.0;
        let mut radius = 0.0;
        for k1 in k1lo..=k1hi {
            // Local coordinates of cell centers in this column are affine in
            // k2; the boundary band solves to at most two k2 intervals.
            let dx = k1 as f64 - rect.center.x;
            let u0 = cos_s * dx - sin_s * rect.center.y;
            let v0 = -sin_s * dx - cos_s * rect.center.y;
            // Enumerate k2 where the cell ball is neither fully outside nor
            // fully inside. Conservative: use the largest ball radius for the
            // band, then test each cell exactly.
            let m = self.params.lambda;
            let outer = match band_k2(u0, sin_s, v0, cos_s, rect.half_a + m, rect.half_b + m) {
                Some(r) => r,
                None => continue,
            };
            let inner = band_k2(u0, sin_s, v0, cos_s, rect.half_a - m, rect.half_b - m);
            for k2 in split_range(outer, inner, k2lo, k2hi) {
                let k = (k1, k2);
                let eps_k = self.cell_eps(k);
                let u = u0 + sin_s * k2 as f64;
                let v = v0 + cos_s * k2 as f64;
                let fully_out =
                    u.abs() >= rect.half_a + eps_k || v.abs() >= rect.half_b + eps_k;
                if fully_out {
                    continue;
                }
                let fully_in =
                    u.abs() + eps_k <= rect.half_a && v.abs() + eps_k <= rect.half_b;
                if fully_in {
                    continue; // interior cells integrate to zero
                }
                match self.cell_bump(k) {
                    Some(bump) => {
                        let local =
                            rect.translate(Point::new(-(k.0 as f64), -(k.1 as f64)));
                        value += bump.integral_rect(&local).value;
                    }
                    None => radius += 0.5 * self.max_cell_mass,
                }
            }
        }
        Interval { value, radius }
    }
}

impl Serialize for LatticeFunction {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.params.serialize(serializer)
    }
}

/// `k2` values where `|u0 + su * k2| < ha` and `|v0 + cv * k2| < hb`, as an
/// inclusive integer interval; `None` when empty.
fn band_k2(u0: f64, su: f64, v0: f64, cv: f64, ha: f64, hb: f64) -> Option<(i64, i64)> {
    if ha <= 0.0 || hb <= 0.0 {
        return None;
    }
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (c0, c1, h) in [(u0, su, ha), (v0, cv, hb)] {
        if c1.abs() < 1e-300 {
            if c0.abs() >= h {
                return None;
            }
        } else {
            let (a, b) = ((-h - c0) / c1, (h - c0) / c1);
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
    }
    if lo > hi {
        return None;
    }
    let (l, h) = (lo.ceil() as i64, hi.floor() as i64);
    if l > h {
        None
    } else {
        Some((l, h))
    }
}

/// Integers of `outer` minus the strict interior of `inner`, clamped.
fn split_range(
    outer: (i64, i64),
    inner: Option<(i64, i64)>,
    lo: i64,
    hi: i64,
) -> Vec<i64> {
    let (a, b) = (outer.0.max(lo), outer.1.min(hi));
    let mut out = Vec::new();
    match inner {
        Some((ia, ib)) if ia <= ib => {
            for k in a..=b.min(ia) {
                out.push(k);
            }
            for k in ib.max(a)..=b {
                if out.last() != Some(&k) && k > ia {
                    out.push(k);
                }
            }
        }
        _ => out.extend(a..=b),
    }
    out
}

/// One term of a finite series: `coeff * base(n x)`.
#[derive(Clone, Debug)]
pub struct SeriesTerm {
    pub coeff: f64,
    pub base: LatticeFunction,
    pub dilation: u32,
    /// Level index the term came from, for reporting.
    pub level: u32,
}

/// A finite truncation `sum_k coeff_k * base_k(n_k x)`.
#[derive(Clone, Debug)]
pub struct SeriesFunction {
    terms: Vec<SeriesTerm>,
}

impl SeriesFunction {
    pub fn new(terms: Vec<SeriesTerm>) -> Result<Self> {
        for w in terms.windows(2) {
            if w[1].dilation <= w[0].dilation && w[1].level != w[0].level {
                return Err(Error::InvalidParam(
                    "series dilations must be strictly increasing".into(),
                ));
            }
        }
        if terms.iter().any(|t| t.dilation == 0) {
            return Err(Error::InvalidParam("series dilation must be >= 1".into()));
        }
        Ok(SeriesFunction { terms })
    }

    pub fn terms(&self) -> &[SeriesTerm] {
        &self.terms
    }
}

impl RectIntegrable for SeriesFunction {
    fn eval(&self, x: Point) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff * t.base.eval(x.scale(t.dilation as f64)))
            .sum()
    }

    fn integral_rect(&self, rect: &Rectangle) -> Interval {
        let mut acc = Interval::exact(0.0);
        for t in &self.terms {
            let n = t.dilation as f64;
            let scaled = rect.scale_about_origin(n);
            acc = acc.add(t.base.integral_rect(&scaled).scale(t.coeff / (n * n)));
        }
        acc
    }
}

/// The function `x -> f(n x)` for any integrable `f`.
pub struct Dilated<'a, F> {
    pub inner: &'a F,
    pub factor: u32,
}

impl<'a, F: RectIntegrable> Dilated<'a, F> {
    pub fn new(inner: &'a F, factor: u32) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidParam("dilation factor must be >= 1".into()));
        }
        Ok(Dilated { inner, factor })
    }
}

impl<F: RectIntegrable> RectIntegrable for Dilated<'_, F> {
    fn eval(&self, x: Point) -> f64 {
        self.inner.eval(x.scale(self.factor as f64))
    }

    fn integral_rect(&self, rect: &Rectangle) -> Interval {
        let n = self.factor as f64;
        self.inner
            .integral_rect(&rect.scale_about_origin(n))
            .scale(1.0 / (n * n))
    }

    fn support_bound(&self) -> Option<Disk> {
        let b = self.inner.support_bound()?;
        let t = 1.0 / self.factor as f64;
        Some(Disk { center: b.center.scale(t), radius: b.radius * t })
    }
}

/// The zero function.
pub struct ZeroFn;

impl RectIntegrable for ZeroFn {
    fn eval(&self, _x: Point) -> f64 {
        0.0
    }
    fn integral_rect(&self, _rect: &Rectangle) -> Interval {
        Interval::exact(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Slope;
    use std::f64::consts::PI;

    fn unit_disk_sum(weight: f64) -> DiskSum {
        DiskSum::new(vec![Atom {
            disk: Disk::new(Point::ORIGIN, 1.0).unwrap(),
            weight,
        }])
        .unwrap()
    }

    #[test]
    fn eval_examples() {
        let f = unit_disk_sum(2.0);
        assert_eq!(f.eval(Point::ORIGIN), 2.0);
        assert_eq!(f.eval(Point::new(5.0, 0.0)), 0.0);
    }

    #[test]
    fn integral_examples() {
        let f = unit_disk_sum(1.0 / PI);
        let r = Rectangle::new(Point::ORIGIN, 2.0, 2.0, Slope::new(0.0)).unwrap();
        let i = f.integral_rect(&r);
        assert!((i.value - 1.0).abs() < 1e-13);
        assert_eq!(i.radius, 0.0);
    }

    #[test]
    fn dilate_scaling_law() {
        let f = unit_disk_sum(1.0);
        let g = f.dilate(2).unwrap();
        assert_eq!(g.atoms()[0].disk.radius, 0.5);
        assert_eq!(g.atoms()[0].weight, 1.0);
        let plane = Rectangle::new(Point::ORIGIN, 10.0, 10.0, Slope::new(0.0)).unwrap();
        assert!((g.integral_rect(&plane).value - PI / 4.0).abs() < 1e-12);

        let id = f.dilate(1).unwrap();
        assert_eq!(id, f);
    }

    #[test]
    fn dilate_change_of_variables_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut atoms = Vec::new();
        for _ in 0..6 {
            atoms.push(Atom {
                disk: Disk::new(
                    Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    rng.gen_range(0.05..0.4),
                )
                .unwrap(),
                weight: rng.gen_range(-2.0..2.0),
            });
        }
        let f = DiskSum::new(atoms).unwrap();
        for n in [2u32, 3, 7] {
            let g = f.dilate(n).unwrap();
            for _ in 0..100 {
                let r = Rectangle::new(
                    Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    rng.gen_range(0.05..1.0),
                    rng.gen_range(0.05..1.0),
                    Slope::new(rng.gen_range(0.0..std::f64::consts::FRAC_PI_2)),
                )
                .unwrap();
                let lhs = g.integral_rect(&r).value;
                let rhs = f.integral_rect(&r.scale_about_origin(n as f64)).value
                    / (n * n) as f64;
                assert!((lhs - rhs).abs() < 1e-10, "n={n}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn total_abs_integral_examples() {
        assert_eq!(DiskSum::empty().total_abs_integral().unwrap(), 0.0);

        let two = DiskSum::new(vec![
            Atom { disk: Disk::new(Point::new(-2.0, 0.0), 1.0).unwrap(), weight: 1.0 / PI },
            Atom { disk: Disk::new(Point::new(2.0, 0.0), 1.0).unwrap(), weight: -1.0 / PI },
        ])
        .unwrap();
        assert!((two.total_abs_integral().unwrap() - 2.0).abs() < 1e-14);
        assert!(two.total_integral().abs() < 1e-16);

        let overlapping = DiskSum::new(vec![
            Atom { disk: Disk::new(Point::ORIGIN, 1.0).unwrap(), weight: 1.0 },
            Atom { disk: Disk::new(Point::new(0.5, 0.0), 1.0).unwrap(), weight: 1.0 },
        ])
        .unwrap();
        assert!(overlapping.total_abs_integral().is_err());
    }

    #[test]
    fn disk_sum_json_round_trip() {
        let f = unit_disk_sum(0.25);
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains("\"atoms\""), "{s}");
        assert!(s.contains("\"cx\""), "{s}");
        let g: DiskSum = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
    }
}
