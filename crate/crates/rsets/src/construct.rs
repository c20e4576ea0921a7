//! Builders for the working objects: two-ray point configurations, ball
//! radius selection, the signed bump, lattice periodization, hyperbolic
//! witness regions, interval splitting, level schedules, and composite
//! assemblies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::funcrep::{
    Atom, DiskSum, Interval, LatticeFunction, LatticeParams, RectIntegrable, SeriesFunction,
    SeriesTerm,
};
use crate::geometry::{circle_box_area, line_stab_count, Disk, Point, Rectangle};
use crate::{Error, Result};

/// Smallest ball radius the builders will produce. Keeps `r^2` (areas) and
/// `1/(2 pi N r^2)` (weights) comfortably inside the normal f64 range.
pub const MIN_BALL_RADIUS: f64 = 1e-140;

/// Parameters of a two-ray point configuration.
///
/// Points sit at `(eps/2^k, sign(k) * tan(gamma) * eps/2^k)` for
/// `0 < |k| <= n_points`. The default point count is `floor(10 eps^-3) + 1`;
/// overrides are allowed for feasibility and recorded in `n_overridden`
/// (quantitative bounds then use `10/n` instead of `eps^3`).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ThetaConfig {
    pub eps: f64,
    pub gamma: f64,
    pub n_points: u64,
    pub n_overridden: bool,
}

impl ThetaConfig {
    /// Default point count `floor(10 eps^-3) + 1`.
    pub fn new(eps: f64, gamma: f64) -> Result<Self> {
        let n = default_n_points(eps);
        Self::with_n(eps, gamma, n)
    }

    /// Explicit point count; `n_overridden` is set when it differs from the
    /// default.
    pub fn with_n(eps: f64, gamma: f64, n_points: u64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParam(format!("eps must be in (0,1), got {eps}")));
        }
        if !(gamma > 0.0 && gamma <= std::f64::consts::FRAC_PI_2 / 6.0) {
            return Err(Error::InvalidParam(format!(
                "gamma must be in (0, pi/12], got {gamma}"
            )));
        }
        if n_points == 0 {
            return Err(Error::InvalidParam("n_points must be positive".into()));
        }
        Ok(ThetaConfig { eps, gamma, n_points, n_overridden: n_points != default_n_points(eps) })
    }

    /// Flat-integral bound for far-slope rectangles: `10 / n_points`.
    pub fn flat_bound(&self) -> f64 {
        10.0 / self.n_points as f64
    }

    /// True when `10/n < eps^3`, i.e. the flat bound is as strong as the
    /// default point count makes it.
    pub fn flat_bound_beats_eps_cubed(&self) -> bool {
        self.flat_bound() < self.eps.powi(3)
    }
}

pub fn default_n_points(eps: f64) -> u64 {
    let raw = 10.0 * eps.powi(-3);
    if raw >= u64::MAX as f64 {
        u64::MAX
    } else {
        raw.floor() as u64 + 1
    }
}

/// Largest point count whose predicted ball radius stays well above
/// [`MIN_BALL_RADIUS`] for this scale and opening angle. The target leaves
/// a factor `2^33` for the spread caps and validation halvings inside
/// [`select_radius`].
pub fn max_feasible_n(eps: f64, gamma: f64) -> u64 {
    // Predicted radius ~ 0.45 * 2 tan(gamma) * eps / 2^N.
    let budget = (0.9 * gamma.tan() * eps / (MIN_BALL_RADIUS * 1e10)).log2();
    if budget <= 1.0 {
        1
    } else {
        budget.floor() as u64
    }
}

/// The two-ray points `(index, point)` for `0 < |k| <= n`, interleaved
/// `+1, -1, +2, -2, ...`. All points lie on the rays `y = ±tan(gamma) x` and
/// inside the ball of radius `eps/sqrt(2)`.
pub fn theta_points(cfg: &ThetaConfig) -> Vec<(i64, Point)> {
    let t = cfg.gamma.tan();
    let mut pts = Vec::with_capacity(2 * cfg.n_points as usize);
    for k in 1..=cfg.n_points as i64 {
        let x = cfg.eps * 0.5f64.powi(k as i32);
        pts.push((k, Point::new(x, t * x)));
        pts.push((-k, Point::new(x, -t * x)));
    }
    pts
}

/// Brute-force signed membership count: the sum of `sign(k)` over points
/// `theta_k` inside `rect` with `0 < |k| <= m`.
pub fn sign_sum(rect: &Rectangle, pts: &[(i64, Point)], m: u64) -> i64 {
    pts.iter()
        .filter(|(k, p)| k.unsigned_abs() <= m && rect.contains(*p))
        .map(|(k, _)| k.signum())
        .sum()
}

/// Minimum 3-point spread of projections onto the axis perpendicular to
/// `direction`: the smallest window covering three of the points. A line of
/// that direction can meet three balls of radius `r` only if `2r` exceeds
/// this.
fn min_triple_spread(direction: f64, pts: &[Point]) -> f64 {
    if pts.len() < 3 {
        return f64::INFINITY;
    }
    let (s, c) = direction.sin_cos();
    let mut proj: Vec<f64> = pts.iter().map(|p| -s * p.x + c * p.y).collect();
    proj.sort_by(|a, b| a.partial_cmp(b).unwrap());
    proj.windows(3)
        .map(|w| w[2] - w[0])
        .fold(f64::INFINITY, f64::min)
}

/// Banned sweep directions: a uniform grid over `[3 gamma, pi/2]` and its
/// mirror, plus the exact directions of lines through nearby cross-ray pairs
/// (where triple spreads bottom out).
fn banned_directions(pts: &[(i64, Point)], gamma: f64, grid: usize) -> Vec<f64> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let lo = 3.0 * gamma;
    let mut dirs = Vec::with_capacity(2 * grid + 12 * pts.len() / 2);
    for i in 0..=grid {
        let a = lo + (half_pi - lo) * i as f64 / grid as f64;
        dirs.push(a);
        dirs.push(-a);
    }
    // Cross-ray pair directions with nearby indices.
    let mut by_index: std::collections::HashMap<i64, Point> = std::collections::HashMap::new();
    for (k, p) in pts {
        by_index.insert(*k, *p);
    }
    let max_k = pts.iter().map(|(k, _)| k.abs()).max().unwrap_or(0);
    for k in 1..=max_k {
        for dm in -3i64..=3 {
            let m = -(k + dm);
            if m >= 0 || m < -max_k {
                continue;
            }
            if let (Some(a), Some(b)) = (by_index.get(&k), by_index.get(&m)) {
                let d = b.sub(*a);
                let ang = d.y.atan2(d.x);
                // Map to (-pi/2, pi/2].
                let ang = if ang > half_pi {
                    ang - std::f64::consts::PI
                } else if ang <= -half_pi {
                    ang + std::f64::consts::PI
                } else {
                    ang
                };
                if ang.abs() >= lo * (1.0 - 1e-9) {
                    dirs.push(ang);
                }
            }
        }
    }
    dirs
}

/// Selects the common ball radius for a two-ray configuration so that
/// (1) all balls stay inside the scale ball and are pairwise disjoint,
/// (2) each ball stays strictly within its half-plane, and
/// (3) no line with minimal x-axis angle at least `3 gamma` meets three balls.
///
/// Starts from `0.45 * min(gap/2, min |y|, spread/2)` and halves until an
/// independent re-verification with a finer direction sweep passes.
pub fn select_radius(pts: &[(i64, Point)], eps: f64, gamma: f64) -> Result<f64> {
    if pts.is_empty() {
        return Err(Error::InvalidParam("select_radius: empty configuration".into()));
    }
    let points: Vec<Point> = pts.iter().map(|&(_, p)| p).collect();

    // Structured minimum pairwise gap: consecutive along each ray, mirror
    // pairs, and nearby cross-ray pairs. The geometric decay makes these the
    // only candidates for the minimum.
    let mut upper: Vec<(i64, Point)> =
        pts.iter().copied().filter(|(k, _)| *k > 0).collect();
    upper.sort_by_key(|(k, _)| *k);
    let mut min_gap = f64::INFINITY;
    for w in upper.windows(2) {
        min_gap = min_gap.min(w[0].1.dist(w[1].1)); // same-ray (mirrored below)
    }
    for (k, p) in &upper {
        let mirror = Point::new(p.x, -p.y);
        min_gap = min_gap.min(p.dist(mirror));
        for dm in 1..=3i64 {
            for other in [*k + dm, *k - dm] {
                if let Some((_, q)) = upper.iter().find(|(j, _)| *j == other) {
                    min_gap = min_gap.min(p.dist(Point::new(q.x, -q.y)));
                }
            }
        }
    }

    let min_y = pts.iter().map(|(_, p)| p.y.abs()).fold(f64::INFINITY, f64::min);

    let sweep = banned_directions(pts, gamma, 128);
    let min_spread = sweep
        .par_iter()
        .map(|&d| min_triple_spread(d, &points))
        .reduce(|| f64::INFINITY, f64::min);

    let mut r = 0.45 * (min_gap / 2.0).min(min_y).min(min_spread / 2.0);
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParam(format!(
            "select_radius: degenerate configuration (candidate radius {r})"
        )));
    }

    let max_norm = pts.iter().map(|(_, p)| p.norm()).fold(0.0f64, f64::max);
    let fine = banned_directions(pts, gamma, 256);
    for _ in 0..80 {
        if r < MIN_BALL_RADIUS {
            return Err(Error::Unsupported(format!(
                "select_radius: required radius fell below {MIN_BALL_RADIUS}; \
                 reduce the point count"
            )));
        }
        if validate_radius(pts, r, eps, min_gap, min_y, max_norm, &fine) {
            return Ok(r);
        }
        r *= 0.5;
    }
    Err(Error::Unsupported("select_radius: no radius validated after 80 halvings".into()))
}

#[allow(clippy::too_many_arguments)]
fn validate_radius(
    pts: &[(i64, Point)],
    r: f64,
    eps: f64,
    min_gap: f64,
    min_y: f64,
    max_norm: f64,
    fine_dirs: &[f64],
) -> bool {
    if max_norm + r > eps || r >= min_y || 2.0 * r >= min_gap {
        return false;
    }
    let disks: Vec<Disk> = pts
        .iter()
        .map(|&(_, p)| Disk { center: p, radius: r })
        .collect();
    fine_dirs
        .par_iter()
        .all(|&d| line_stab_count(d, &disks) <= 2)
}

/// The signed bump: balls of a common radius at the two-ray points, weighted
/// `sign(k) / (2 pi N r^2)` (positive on the upper ray, negative on the
/// lower), so the total integral is zero and the absolute integral is one.
#[derive(Clone, Debug)]
pub struct PhiBump {
    cfg: ThetaConfig,
    radius: f64,
    weight: f64,
    tan_gamma: f64,
    thetas: Vec<(i64, Point)>,
    disk_sum: DiskSum,
}

impl PhiBump {
    pub fn cfg(&self) -> &ThetaConfig {
        &self.cfg
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn thetas(&self) -> &[(i64, Point)] {
        &self.thetas
    }

    pub fn disk_sum(&self) -> &DiskSum {
        &self.disk_sum
    }

    pub fn tan_gamma(&self) -> f64 {
        self.tan_gamma
    }

    /// Exact integral over the rotated corner rectangle
    /// `rot_s([0, x1] x [0, x2])` where `tan s = tan_s`, evaluated in a frame
    /// anchored at the corner.
    ///
    /// The ball centers sit on the rays `y = ±tan(gamma) x`; computing their
    /// frame coordinates through the tangent difference keeps the edge-ray
    /// alignment exact: at `tan_s = ±tan(gamma)` the corresponding ray's ball
    /// centers land exactly on the rectangle edge, each contributing half its
    /// area, which grid-resolution transforms at unit scale cannot resolve.
    pub fn quadrant_integral(&self, x1: f64, x2: f64, tan_s: f64) -> f64 {
        let t = self.tan_gamma;
        let cos_s = 1.0 / (1.0 + tan_s * tan_s).sqrt();
        let sin_s = tan_s * cos_s;
        let r = self.radius;
        let mut total = 0.0;
        for &(k, p) in &self.thetas {
            let sigma = if k > 0 { 1.0 } else { -1.0 };
            let x = p.x;
            let u = x * (cos_s + sigma * t * sin_s);
            let v = x * cos_s * (sigma * t - tan_s);
            let area = circle_box_area(r, -u, x1 - u, -v, x2 - v);
            total += sigma * self.weight * area;
        }
        total
    }

    /// Far-slope flat bound `10/N` for this bump.
    pub fn flat_bound(&self) -> f64 {
        self.cfg.flat_bound()
    }
}

/// Builds the signed bump for a configuration: selects the ball radius, then
/// weights the balls `sign(k) / (2 pi N r^2)`. The atom order pairs `+k`
/// with `-k` so the zero total integral cancels exactly.
pub fn build_phi(cfg: &ThetaConfig) -> Result<PhiBump> {
    if cfg.n_points > 2_000_000 {
        return Err(Error::Unsupported(format!(
            "build_phi: {} points per half-plane is beyond desk scale \
             (about {:.1} GiB of atoms); override the point count",
            cfg.n_points,
            cfg.n_points as f64 * 2.0 * 48.0 / (1u64 << 30) as f64,
        )));
    }
    let thetas = theta_points(cfg);
    let r = select_radius(&thetas, cfg.eps, cfg.gamma)?;
    let n = cfg.n_points as f64;
    let weight = 1.0 / (2.0 * std::f64::consts::PI * n * r * r);
    let atoms: Vec<Atom> = thetas
        .iter()
        .map(|&(k, p)| Atom {
            disk: Disk { center: p, radius: r },
            weight: k.signum() as f64 * weight,
        })
        .collect();
    Ok(PhiBump {
        cfg: *cfg,
        radius: r,
        weight,
        tan_gamma: cfg.gamma.tan(),
        thetas,
        disk_sum: DiskSum::new(atoms)?,
    })
}

/// A closed slope interval `[center - half_width, center + half_width]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeInterval {
    pub center: f64,
    pub half_width: f64,
}

impl SlopeInterval {
    pub fn new(center: f64, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::InvalidParam("slope interval half-width must be positive".into()));
        }
        Ok(SlopeInterval { center, half_width })
    }

    pub fn from_endpoints(lo: f64, hi: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::InvalidParam(format!(
                "slope interval endpoints out of order: [{lo}, {hi}]"
            )));
        }
        SlopeInterval::new(0.5 * (lo + hi), 0.5 * (hi - lo))
    }

    pub fn lo(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.center + self.half_width
    }

    pub fn contains(&self, s: f64) -> bool {
        s >= self.lo() && s <= self.hi()
    }

    /// The concentric interval scaled by three.
    pub fn triple(&self) -> SlopeInterval {
        SlopeInterval { center: self.center, half_width: 3.0 * self.half_width }
    }
}

/// True when `s` sits in the far band for orientation `alpha` with opening
/// `gamma`: minimal quarter-turn distance from `alpha` strictly between
/// `3 gamma` and `pi/2 - 3 gamma`.
pub fn in_far_band(s: f64, alpha: f64, gamma: f64) -> bool {
    let d = crate::geometry::Slope::new(s).dist(crate::geometry::Slope::new(alpha));
    d > 3.0 * gamma && d < std::f64::consts::FRAC_PI_2 - 3.0 * gamma
}

/// Options for [`periodize`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PeriodizeOptions {
    /// Cap on per-cell point counts (recorded as an override).
    pub n_cap: u64,
    /// Cells with `max(|k1|,|k2|) <= window` are materialized.
    pub window: i64,
    /// Samples per cell for the small-scale flatness audit.
    pub nu_audit_samples: u32,
    pub seed: u64,
}

impl Default for PeriodizeOptions {
    fn default() -> Self {
        PeriodizeOptions { n_cap: 400, window: 4, nu_audit_samples: 10_000, seed: 0 }
    }
}

/// A periodized bump family together with its structured ring bumps and the
/// selected scale cutoffs `nu < nu_prime`.
#[derive(Clone, Debug)]
pub struct Periodized {
    pub lattice: LatticeFunction,
    /// Unrotated ring bumps, indexed by `|k1| + |k2|`; the lattice cells are
    /// these rotated by the interval center and translated to the cell.
    pub rings: Vec<PhiBump>,
    pub nu: f64,
    pub nu_prime: f64,
}

impl Periodized {
    /// Exact integral of the lattice function over the corner rectangle
    /// `cell + rot_s([0,x1] x [0,x2])`, where `tan(s - alpha) = tan_rel`,
    /// via the corner-anchored quadrature of the cell's own bump.
    ///
    /// Valid whenever the rectangle stays inside the ball of radius 1/2
    /// around the cell center, where no other cell has support.
    pub fn corner_integral(&self, cell: (i64, i64), x1: f64, x2: f64, tan_rel: f64) -> Result<f64> {
        if !(x1 > 0.0 && x2 > 0.0 && x1.hypot(x2) <= 0.5) {
            return Err(Error::Precondition(format!(
                "corner rectangle [0,{x1}]x[0,{x2}] leaves the half-ball around the cell"
            )));
        }
        let ring = (cell.0.unsigned_abs() + cell.1.unsigned_abs()) as usize;
        let bump = self.rings.get(ring).ok_or_else(|| {
            Error::Precondition(format!("cell {cell:?} outside the materialized window"))
        })?;
        Ok(bump.quadrant_integral(x1, x2, tan_rel))
    }
}

/// Builds the periodized family for scales `eps, delta` and slope interval
/// `s_int`: cell `k` carries the bump at scale `lambda 2^-(|k1|+|k2|)` with
/// `lambda = min(eps/100, delta)`, rotated to the interval center. Returns
/// the family with `nu_prime = 10/eps` and `nu` selected by shrinking until
/// the small-scale flatness certificate and a sampled audit both pass.
pub fn periodize(
    eps: f64,
    delta: f64,
    s_int: SlopeInterval,
    opts: &PeriodizeOptions,
) -> Result<Periodized> {
    if !(eps > 0.0 && eps < 0.1 && delta > 0.0 && delta < 0.1) {
        return Err(Error::Precondition(format!(
            "periodize requires 0 < eps, delta < 1/10, got ({eps}, {delta})"
        )));
    }
    if !(s_int.half_width > 0.0 && s_int.half_width <= std::f64::consts::PI / 12.0) {
        return Err(Error::Precondition(
            "periodize requires slope interval half-width in (0, pi/12]".into(),
        ));
    }
    if opts.window < 1 {
        return Err(Error::InvalidParam("periodize window must be >= 1".into()));
    }
    let lambda = (eps / 100.0).min(delta);
    let alpha = s_int.center;
    let gamma = s_int.half_width;
    let n_rings = (2 * opts.window + 1) as usize;

    let rings: Vec<PhiBump> = (0..n_rings)
        .into_par_iter()
        .map(|ring| {
            let eps_ring = lambda * 0.5f64.powi(ring as i32);
            let n = default_n_points(eps_ring)
                .min(opts.n_cap)
                .min(max_feasible_n(eps_ring, gamma));
            let cfg = ThetaConfig::with_n(eps_ring, gamma, n)?;
            build_phi(&cfg)
        })
        .collect::<Result<Vec<_>>>()?;

    let params = LatticeParams {
        eps,
        delta,
        alpha,
        gamma,
        lambda,
        n_cap: opts.n_cap as u32,
        window: opts.window,
        seed: opts.seed,
    };
    let rotated: Vec<DiskSum> = rings
        .iter()
        .map(|b| b.disk_sum().rotate_about_origin(alpha))
        .collect();
    let lattice = LatticeFunction::from_rings(params, rotated)?;

    let nu_prime = 10.0 / eps;
    let nu = select_nu(eps, delta, lambda, &lattice, opts)?;
    Ok(Periodized { lattice, rings, nu, nu_prime })
}

/// Shrink-until-valid selection of the small-scale cutoff `nu < delta`:
/// every rectangle with both sides below `nu` that meets a cell's support
/// ball stays within `sqrt(2) nu` of it, so points outside the inflated
/// balls certify a zero maximal value. The inflated-ball area must stay
/// below `eps` per cell, and a sampled per-cell audit with pessimistic
/// counting of the inflated region must also stay below `eps`.
fn select_nu(
    eps: f64,
    delta: f64,
    lambda: f64,
    lattice: &LatticeFunction,
    opts: &PeriodizeOptions,
) -> Result<f64> {
    let mut nu = (delta / 2.0).min((eps / std::f64::consts::PI).sqrt() / 4.0);
    for _ in 0..60 {
        let inflated = lambda + std::f64::consts::SQRT_2 * nu;
        let cert = std::f64::consts::PI * inflated * inflated < eps;
        if cert && nu_audit_passes(eps, lattice, nu, opts) {
            return Ok(nu);
        }
        nu *= 0.5;
    }
    Err(Error::Unsupported(
        "select_nu: no cutoff validated after 60 halvings".into(),
    ))
}

/// Sampled pessimistic audit: per cell, the fraction of sample points inside
/// the inflated support ball (where small rectangles cannot be certified
/// flat) must stay below `eps`.
fn nu_audit_passes(eps: f64, lattice: &LatticeFunction, nu: f64, opts: &PeriodizeOptions) -> bool {
    let w = lattice.params().window.min(4);
    let samples = opts.nu_audit_samples.max(100);
    let cells: Vec<(i64, i64)> = (-w..=w)
        .flat_map(|k1| (-w..=w).map(move |k2| (k1, k2)))
        .collect();
    cells.par_iter().all(|&(k1, k2)| {
        let mut rng = ChaCha8Rng::seed_from_u64(
            opts.seed ^ (k1 as u64).wrapping_mul(0x9E3779B97F4A7C15)
                ^ (k2 as u64).wrapping_mul(0xC2B2AE3D27D4EB4F),
        );
        let eps_cell = lattice.cell_eps((k1, k2));
        let inflated = eps_cell + std::f64::consts::SQRT_2 * nu;
        let mut undetermined = 0u32;
        for _ in 0..samples {
            let dx: f64 = rng.gen_range(-0.5..0.5);
            let dy: f64 = rng.gen_range(-0.5..0.5);
            if dx.hypot(dy) < inflated {
                undetermined += 1;
            }
        }
        (undetermined as f64) < eps * samples as f64
    })
}

/// The hyperbolic witness region
/// `{(x1, x2): x1 x2 <= delta/4, delta <= x1, x2 <= 1/4}` with its exact
/// area and the logarithmic lower bound.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HyperbolicRegion {
    pub delta: f64,
    pub area: f64,
    pub area_lower_bound: f64,
}

impl HyperbolicRegion {
    pub fn contains(&self, p: Point) -> bool {
        let d = self.delta;
        // Closed region; the hyperbola comparison gets a 1e-12 relative
        // slack so representable boundary points stay members.
        p.x >= d && p.x <= 0.25 && p.y >= d && p.y <= 0.25
            && p.x * p.y <= (d / 4.0) * (1.0 + 1e-12)
    }

    /// A point of the region on the hyperbola `x1 x2 = delta/4`, at
    /// parameter `t` in `[0, 1]` sweeping `x1` across `[delta, 1/4]`
    /// geometrically.
    pub fn hyperbola_point(&self, t: f64) -> Point {
        let d = self.delta;
        let x1 = d * (0.25 / d).powf(t.clamp(0.0, 1.0));
        Point::new(x1, d / (4.0 * x1))
    }
}

/// Closed-form area `(delta/4) ln(1/(4 delta)) - delta (1/4 - delta)` of the
/// hyperbolic region, its lower bound `(delta/4) ln(1/(12 delta))`, and a
/// membership predicate. Any rotation of the region stays inside the ball of
/// radius 1/2 (checked).
pub fn hyperbolic_region(delta: f64) -> Result<HyperbolicRegion> {
    if !(delta > 0.0 && delta < 0.1) {
        return Err(Error::Precondition(format!(
            "hyperbolic_region requires 0 < delta < 1/10, got {delta}"
        )));
    }
    let area = (delta / 4.0) * (1.0 / (4.0 * delta)).ln() - delta * (0.25 - delta);
    let area_lower_bound = (delta / 4.0) * (1.0 / (12.0 * delta)).ln();
    let reach = (0.25f64).hypot(0.25);
    if reach > 0.5 {
        return Err(Error::InvalidParam("hyperbolic region leaves the half-ball".into()));
    }
    Ok(HyperbolicRegion { delta, area, area_lower_bound })
}

/// A half-open interval `[lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfOpen {
    pub lo: f64,
    pub hi: f64,
}

impl HalfOpen {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        !(self.hi > self.lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x < self.hi
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// The concentric 3x dilation, as a closed-interval pair.
    pub fn triple(&self) -> (f64, f64) {
        let c = self.center();
        let h = 1.5 * self.len();
        (c - h, c + h)
    }

    pub fn as_slope_interval(&self) -> Result<SlopeInterval> {
        SlopeInterval::from_endpoints(self.lo, self.hi)
    }
}

/// One piece of a split interval, tagged with its source interval.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SplitPiece {
    pub piece: HalfOpen,
    pub source: usize,
}

/// Splits each open interval into half-open pieces by the affine image of
/// the model partition of `(-1, 1)` (geometric pieces accumulating at both
/// endpoints), subdividing any piece longer than `pi/12` into equal halves.
///
/// Every piece satisfies: length at most `pi/12`, concentric 3x dilation
/// inside the source interval, and at any point at most 8 of the dilations
/// overlap. Pieces are then intersected with `[0, pi/2)` and enumerated.
pub fn split_open_set(intervals: &[(f64, f64)], depth: u32) -> Result<Vec<SplitPiece>> {
    for (i, &(a, b)) in intervals.iter().enumerate() {
        if !(b > a) {
            return Err(Error::InvalidParam(format!(
                "interval {i} is empty or reversed: ({a}, {b})"
            )));
        }
        for &(c, d) in &intervals[i + 1..] {
            if a < d && c < b {
                return Err(Error::Precondition(
                    "split_open_set: intervals must be pairwise disjoint".into(),
                ));
            }
        }
    }
    let max_len = std::f64::consts::PI / 12.0;
    let mut out = Vec::new();
    for (idx, &(a, b)) in intervals.iter().enumerate() {
        // Model boundaries 1 - 0.9^j on the right side of (-1, 1); the left
        // side mirrors them. Consecutive boundaries share the same computed
        // value, so pieces abut exactly.
        let map = |t: f64| a + (b - a) * (t + 1.0) / 2.0;
        let side = |sign: f64, out: &mut Vec<SplitPiece>| {
            let mut boundary = map(sign * 0.0);
            for j in 0..depth {
                let next_t = 1.0 - 0.9f64.powi(j as i32 + 1);
                let next = map(sign * next_t);
                let (lo, hi) = if sign > 0.0 { (boundary, next) } else { (next, boundary) };
                subdivide_into(lo, hi, max_len, idx, out);
                boundary = next;
            }
        };
        side(1.0, &mut out);
        side(-1.0, &mut out);
    }
    // Clip to [0, pi/2) and drop empty pieces.
    let half_pi = std::f64::consts::FRAC_PI_2;
    let clipped: Vec<SplitPiece> = out
        .into_iter()
        .filter_map(|p| {
            let lo = p.piece.lo.max(0.0);
            let hi = p.piece.hi.min(half_pi);
            if hi > lo {
                Some(SplitPiece { piece: HalfOpen { lo, hi }, source: p.source })
            } else {
                None
            }
        })
        .collect();
    Ok(clipped)
}

fn subdivide_into(lo: f64, hi: f64, max_len: f64, source: usize, out: &mut Vec<SplitPiece>) {
    if !(hi > lo) {
        return;
    }
    if hi - lo <= max_len {
        out.push(SplitPiece { piece: HalfOpen { lo, hi }, source });
        return;
    }
    let parts = ((hi - lo) / max_len).ceil() as usize;
    for i in 0..parts {
        let a = lo + (hi - lo) * i as f64 / parts as f64;
        let b = lo + (hi - lo) * (i + 1) as f64 / parts as f64;
        out.push(SplitPiece { piece: HalfOpen { lo: a, hi: b }, source });
    }
}

/// Block product `prod_{k=m_prev+1}^{m} (1 - 1/(k ln k))`.
pub fn block_product(m_prev: u64, m: u64) -> f64 {
    let mut p = 1.0;
    for k in (m_prev + 1)..=m {
        let kf = k as f64;
        p *= 1.0 - 1.0 / (kf * kf.ln());
    }
    p
}

/// Smallest breakpoint `m > m_prev` whose block product drops below
/// `threshold`. Requires `m_prev >= 2` so every factor is defined.
pub fn next_breakpoint(m_prev: u64, threshold: f64) -> Result<u64> {
    if m_prev < 2 {
        return Err(Error::Precondition("breakpoints start at m >= 2".into()));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParam(format!("block target must be in (0,1), got {threshold}")));
    }
    let mut p = 1.0;
    let mut m = m_prev;
    loop {
        m += 1;
        let kf = m as f64;
        p *= 1.0 - 1.0 / (kf * kf.ln());
        if p < threshold {
            return Ok(m);
        }
        if m > m_prev + 100_000_000 {
            return Err(Error::Unsupported("next_breakpoint: no breakpoint within 1e8 levels".into()));
        }
    }
}

/// Smallest integer dilation exceeding
/// `n_prev * max(4/nu_prev, nu_prime_next/nu_prev)`.
pub fn next_dilation(n_prev: u64, nu_prev: f64, nu_prime_next: f64) -> Result<u64> {
    if !(nu_prev > 0.0 && nu_prime_next > 0.0) {
        return Err(Error::InvalidParam("scale cutoffs must be positive".into()));
    }
    let bound = n_prev as f64 * (4.0 / nu_prev).max(nu_prime_next / nu_prev);
    if bound >= u64::MAX as f64 / 4.0 {
        return Err(Error::Unsupported(format!(
            "next_dilation: required factor {bound:.3e} is beyond desk scale"
        )));
    }
    Ok(bound.floor() as u64 + 1)
}

/// Schedule construction mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ScheduleMode {
    /// Level parameters exactly `eps_k = 2^-k`, `delta_k = 1/(k ln^2 k)`,
    /// block targets `2^-t`. Fails fast when a level parameter leaves the
    /// feasible range.
    Faithful,
    /// Level parameters capped at `eps_cap`/`delta_cap` (caps recorded per
    /// level), block targets `block_target^t`. Structural inequalities are
    /// still asserted exactly.
    Relaxed { eps_cap: f64, delta_cap: f64, block_target: f64 },
}

impl ScheduleMode {
    pub fn relaxed_default() -> Self {
        ScheduleMode::Relaxed { eps_cap: 0.099, delta_cap: 0.05, block_target: 0.5 }
    }
}

/// Per-level schedule parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScheduleLevel {
    pub k: u64,
    pub interval: SlopeInterval,
    pub eps: f64,
    pub delta: f64,
    pub eps_capped: bool,
    pub delta_capped: bool,
    pub nu: f64,
    pub nu_prime: f64,
    pub dilation: u64,
    /// Lower band edge `nu_k / n_k`.
    pub mu: f64,
    /// Upper band edge `nu'_k / n_k`.
    pub mu_upper: f64,
    pub coeff: f64,
}

/// A level cascade: breakpoints, slope pieces, and per-level parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Schedule {
    pub mode: ScheduleMode,
    pub breakpoints: Vec<u64>,
    pub pieces: Vec<SplitPiece>,
    pub levels: Vec<ScheduleLevel>,
}

impl Schedule {
    pub fn level(&self, k: u64) -> Option<&ScheduleLevel> {
        self.levels.iter().find(|l| l.k == k)
    }

    /// Series coefficient `1/(k ln^{3/2} k)`.
    pub fn coeff(k: u64) -> f64 {
        let kf = k as f64;
        1.0 / (kf * kf.ln().powf(1.5))
    }
}

/// A schedule together with its periodized level functions.
#[derive(Clone, Debug)]
pub struct BuiltSchedule {
    pub schedule: Schedule,
    pub functions: Vec<Periodized>,
}

/// Builds the cascade for levels `3..=max_level`: splits the slope
/// intervals, chooses breakpoints greedily, assigns a piece per block,
/// periodizes each level, and chains dilations. All structural inequalities
/// are asserted; faithful mode rejects levels whose parameters leave the
/// feasible range.
pub fn build_schedule(
    intervals: &[(f64, f64)],
    max_level: u64,
    mode: ScheduleMode,
    opts: &PeriodizeOptions,
) -> Result<BuiltSchedule> {
    if max_level < 3 {
        return Err(Error::Precondition("schedules start at level 3".into()));
    }
    let pieces = split_open_set(intervals, 40)?;
    if pieces.is_empty() {
        return Err(Error::InvalidParam(
            "no slope pieces intersect [0, pi/2); nothing to schedule".into(),
        ));
    }
    // Breakpoints m_1 = 2 < m_2 < ... covering max_level.
    let mut breakpoints = vec![2u64];
    let mut t = 1u32;
    while *breakpoints.last().unwrap() < max_level {
        let threshold = match mode {
            ScheduleMode::Faithful => 0.5f64.powi(t as i32),
            ScheduleMode::Relaxed { block_target, .. } => block_target.powi(t as i32),
        };
        let next = next_breakpoint(*breakpoints.last().unwrap(), threshold)?;
        breakpoints.push(next);
        t += 1;
    }

    let mut levels: Vec<ScheduleLevel> = Vec::new();
    let mut functions: Vec<Periodized> = Vec::new();
    for k in 3..=max_level {
        let block = breakpoints.iter().position(|&m| k <= m).ok_or_else(|| {
            Error::InvalidParam("breakpoint chain does not cover the level range".into())
        })?; // block index t with m_{t-1} < k <= m_t; breakpoints[0] = m_1
        let piece = pieces[(block - 1) % pieces.len()];
        let interval = piece.piece.as_slope_interval()?;
        if interval.half_width > std::f64::consts::PI / 12.0 {
            return Err(Error::InvalidParam("slope piece wider than pi/12".into()));
        }
        let kf = k as f64;
        let eps_raw = 0.5f64.powi(k as i32);
        let delta_raw = 1.0 / (kf * kf.ln() * kf.ln());
        let (eps, delta, eps_capped, delta_capped) = match mode {
            ScheduleMode::Faithful => {
                if eps_raw >= 0.1 || delta_raw >= 0.1 {
                    return Err(Error::Unsupported(format!(
                        "faithful level {k} needs eps = {eps_raw}, delta = {delta_raw:.5} \
                         below 1/10; first feasible level is 5"
                    )));
                }
                (eps_raw, delta_raw, false, false)
            }
            ScheduleMode::Relaxed { eps_cap, delta_cap, .. } => {
                let e = eps_raw.min(eps_cap);
                let d = delta_raw.min(delta_cap);
                (e, d, e != eps_raw, d != delta_raw)
            }
        };
        let built = periodize(eps, delta, interval, opts)?;
        let dilation = match levels.last() {
            None => 1,
            Some(prev) => {
                let n = next_dilation(prev.dilation, prev.nu, built.nu_prime)?;
                // Growth strictly beyond both thresholds.
                let ratio = n as f64 / prev.dilation as f64;
                if !(ratio > (4.0 / prev.nu).max(built.nu_prime / prev.nu)) {
                    return Err(Error::InvalidParam("dilation growth check failed".into()));
                }
                n
            }
        };
        let mu = built.nu / dilation as f64;
        let mu_upper = built.nu_prime / dilation as f64;
        if let Some(prev) = levels.last() {
            // Band separation: previous lower edge above this band's top.
            if !(prev.mu > mu_upper && mu_upper > mu) {
                return Err(Error::InvalidParam(format!(
                    "scale bands overlap between levels {} and {k}",
                    prev.k
                )));
            }
        }
        levels.push(ScheduleLevel {
            k,
            interval,
            eps,
            delta,
            eps_capped,
            delta_capped,
            nu: built.nu,
            nu_prime: built.nu_prime,
            dilation,
            mu,
            mu_upper,
            coeff: Schedule::coeff(k),
        });
        functions.push(built);
    }
    Ok(BuiltSchedule {
        schedule: Schedule { mode, breakpoints, pieces, levels },
        functions,
    })
}

/// The finite series `sum_k coeff_k * phi_k(n_k x)` over the schedule's
/// levels.
pub fn assemble_f(built: &BuiltSchedule) -> Result<SeriesFunction> {
    let terms = built
        .schedule
        .levels
        .iter()
        .zip(&built.functions)
        .map(|(lvl, f)| SeriesTerm {
            coeff: lvl.coeff,
            base: f.lattice.clone(),
            dilation: lvl.dilation as u32,
            level: lvl.k as u32,
        })
        .collect();
    SeriesFunction::new(terms)
}

/// A sum of series functions, each cut off to its own open unit square.
#[derive(Clone, Debug)]
pub struct Composite {
    terms: Vec<(Point, SeriesFunction)>,
}

impl Composite {
    pub fn squares(&self) -> impl Iterator<Item = Point> + '_ {
        self.terms.iter().map(|(c, _)| *c)
    }

    pub fn term(&self, i: usize) -> Option<&(Point, SeriesFunction)> {
        self.terms.get(i)
    }

    fn square_of(&self, x: Point) -> Option<usize> {
        self.terms.iter().position(|(c, _)| {
            (x.x - c.x).abs() < 0.5 && (x.y - c.y).abs() < 0.5
        })
    }
}

/// Assembles the composite: one function per square, squares pairwise
/// disjoint (overlaps rejected). Inside a square the composite is that
/// function in square-local coordinates; outside every square it vanishes.
pub fn assemble_wr(funcs: Vec<SeriesFunction>, square_centers: Vec<Point>) -> Result<Composite> {
    if funcs.len() != square_centers.len() {
        return Err(Error::InvalidParam(
            "assemble_wr needs exactly one square per function".into(),
        ));
    }
    for (i, a) in square_centers.iter().enumerate() {
        for b in &square_centers[i + 1..] {
            if (a.x - b.x).abs() < 1.0 && (a.y - b.y).abs() < 1.0 {
                return Err(Error::Precondition(format!(
                    "assemble_wr: unit squares at {a:?} and {b:?} overlap"
                )));
            }
        }
    }
    Ok(Composite { terms: square_centers.into_iter().zip(funcs).collect() })
}

impl RectIntegrable for Composite {
    fn eval(&self, x: Point) -> f64 {
        match self.square_of(x) {
            Some(i) => {
                let (c, f) = &self.terms[i];
                f.eval(x.sub(*c))
            }
            None => 0.0,
        }
    }

    fn integral_rect(&self, rect: &Rectangle) -> Interval {
        let reach = 0.5 * rect.diameter();
        let mut value = Interval::exact(0.0);
        for (c, f) in &self.terms {
            let d = rect.center.sub(*c);
            // Square-disjoint: no overlap possible.
            if d.x.abs() >= 0.5 + reach || d.y.abs() >= 0.5 + reach {
                continue;
            }
            let corners_inside = rect.corners().iter().all(|p| {
                (p.x - c.x).abs() <= 0.5 && (p.y - c.y).abs() <= 0.5
            });
            if corners_inside {
                value = value.add(f.integral_rect(&rect.translate(Point::new(-c.x, -c.y))));
            } else {
                // Straddling rectangles get a pessimistic mass radius: the
                // cut-off makes the exact value a clipped integral we do not
                // compute.
                let mut mass = 0.0;
                for t in f.terms() {
                    let n = t.dilation as f64;
                    let (a, b) = rect.sides();
                    let cells = (a * n + 2.0) * 3.0 + (b * n + 2.0) * 3.0 + 9.0;
                    mass += t.coeff * 0.5 * cells * t.base.max_cell_mass() / (n * n);
                }
                value = value.add(Interval { value: 0.0, radius: mass });
            }
        }
        value
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Slope;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn approx(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a} (tol {tol})");
    }

    #[test]
    fn theta_examples() {
        let cfg = ThetaConfig::new(0.5, PI / 12.0).unwrap();
        assert_eq!(cfg.n_points, 81);
        assert!(!cfg.n_overridden);

        let pts = theta_points(&cfg);
        let p1 = pts.iter().find(|(k, _)| *k == 1).unwrap().1;
        approx(p1.x, 0.25, 0.0);
        approx(p1.y, 0.0669873, 1e-7);

        let pm2 = pts.iter().find(|(k, _)| *k == -2).unwrap().1;
        approx(pm2.x, 0.125, 0.0);
        approx(pm2.y, -0.0334936, 1e-7);

        // All inside B(eps/sqrt(2)); x-coordinates halve exactly.
        for (_, p) in &pts {
            assert!(p.norm() <= 0.5 / 2f64.sqrt() + 1e-15);
        }
        let x1 = pts.iter().find(|(k, _)| *k == 1).unwrap().1.x;
        let x2 = pts.iter().find(|(k, _)| *k == 2).unwrap().1.x;
        assert_eq!(x1 * 0.5, x2);
    }

    #[test]
    fn radius_conditions() {
        let cfg = ThetaConfig::new(0.5, PI / 12.0).unwrap();
        let pts = theta_points(&cfg);
        let r = select_radius(&pts, cfg.eps, cfg.gamma).unwrap();
        // Half-plane condition forces r below the smallest |y|.
        let bound = (PI / 12.0).tan() * 0.5 * 0.5f64.powi(81);
        assert!(r < bound, "r = {r} vs bound {bound}");
        assert!(r > 0.0);

        // Pairwise disjoint.
        for (i, (_, p)) in pts.iter().enumerate() {
            for (_, q) in &pts[i + 1..] {
                assert!(p.dist(*q) > 2.0 * r);
            }
        }

        // Vertical lines stab at most two balls.
        let disks: Vec<Disk> = pts
            .iter()
            .map(|&(_, p)| Disk { center: p, radius: r })
            .collect();
        assert!(line_stab_count(FRAC_PI_2, &disks) <= 2);
    }

    #[test]
    fn sign_sum_examples() {
        let cfg = ThetaConfig::new(0.5, PI / 12.0).unwrap();
        let pts = theta_points(&cfg);
        // Around theta_1 and theta_(-1): a tall thin box centered at x=0.25.
        let r = Rectangle::new(Point::new(0.25, 0.0), 0.01, 0.2, Slope::new(0.0)).unwrap();
        assert_eq!(sign_sum(&r, &pts, 81), 0);

        let empty = Rectangle::new(Point::new(10.0, 0.0), 0.1, 0.1, Slope::new(0.0)).unwrap();
        assert_eq!(sign_sum(&empty, &pts, 81), 0);
    }

    #[test]
    fn phi_bump_basic_identities() {
        let cfg = ThetaConfig::new(0.5, PI / 24.0).unwrap();
        let phi = build_phi(&cfg).unwrap();
        assert_eq!(phi.disk_sum().atoms().len(), 162);
        // Exact zero by pairing; absolute integral one by normalization.
        assert!(phi.disk_sum().total_integral().abs() <= 1e-12);
        approx(phi.disk_sum().total_abs_integral().unwrap(), 1.0, 1e-12);
        // eval at a ball center gives the weight.
        let p1 = phi.thetas().iter().find(|(k, _)| *k == 1).unwrap().1;
        approx(phi.disk_sum().eval(p1), phi.weight(), 0.0);
    }

    #[test]
    fn quadrant_integral_interior_and_edges() {
        let cfg = ThetaConfig::new(0.5, PI / 24.0).unwrap();
        let phi = build_phi(&cfg).unwrap();
        let t = phi.tan_gamma();

        // Interior slope: every upper ball is fully inside, value 1/2.
        approx(phi.quadrant_integral(1.0, 1.0, 0.0), 0.5, 1e-12);

        // Edge-aligned slopes: the touched ray contributes half per ball.
        approx(phi.quadrant_integral(1.0, 1.0, t), 0.25, 1e-12);
        approx(phi.quadrant_integral(1.0, 1.0, -t), 0.25, 1e-12);

        // Quadrant bound holds across a small tangent grid.
        for i in 0..=20 {
            let tau = t * (i as f64 / 10.0 - 1.0);
            let v = phi.quadrant_integral(0.5, 0.5, tau);
            assert!(v >= 0.25 - 1e-12, "tau={tau}: {v}");
        }
    }

    #[test]
    fn far_band_predicate() {
        assert!(in_far_band(0.5, 0.0, PI / 24.0));
        assert!(!in_far_band(0.1, 0.0, PI / 24.0));
        // Quarter-turn periodic: near pi/2 is near 0.
        assert!(!in_far_band(FRAC_PI_2 - 0.1, 0.0, PI / 24.0));
    }

    #[test]
    fn hyperbolic_region_values() {
        let region = hyperbolic_region(0.01).unwrap();
        approx(region.area, 0.0056472, 1e-7);
        approx(region.area_lower_bound, 0.0053007, 1e-7);
        assert!(region.area > region.area_lower_bound);

        // At delta = 1/12 the lower bound degenerates to zero.
        let degenerate = hyperbolic_region(1.0 / 12.0).unwrap();
        approx(degenerate.area_lower_bound, 0.0, 1e-15);

        // Members and the hyperbola parameterization.
        assert!(region.contains(Point::new(0.025, 0.1)));
        assert!(!region.contains(Point::new(0.2, 0.2)));
        for i in 0..=10 {
            let p = region.hyperbola_point(i as f64 / 10.0);
            assert!(region.contains(p), "{p:?}");
            approx(p.x * p.y, 0.01 / 4.0, 1e-15);
        }
    }

    #[test]
    fn split_model_partition() {
        let pieces = split_open_set(&[(-1.0, 1.0)], 30).unwrap();
        // First right-side pieces of the model partition.
        approx(pieces[0].piece.lo, 0.0, 0.0);
        approx(pieces[0].piece.hi, 0.1, 1e-15);
        approx(pieces[1].piece.lo, 0.1, 1e-15);
        approx(pieces[1].piece.hi, 0.19, 1e-15);
        approx(pieces[2].piece.hi, 0.271, 1e-15);

        // 3x dilation of the first piece stays inside the source interval.
        let (lo3, hi3) = pieces[0].piece.triple();
        approx(lo3, -0.1, 1e-15);
        approx(hi3, 0.2, 1e-15);
        assert!(lo3 > -1.0 && hi3 < 1.0);

        for p in &pieces {
            assert!(p.piece.len() <= PI / 12.0 + 1e-15);
            let (a, b) = p.piece.triple();
            assert!(a >= -1.0 && b <= 1.0, "{:?}", p.piece);
        }

        // Overlap count of 3x dilations at sampled points.
        for i in 0..2000 {
            let x = -0.999 + 1.998 * i as f64 / 1999.0;
            let count = pieces
                .iter()
                .filter(|p| {
                    let (a, b) = p.piece.triple();
                    x >= a && x < b
                })
                .count();
            assert!(count <= 8, "overlap {count} at {x}");
        }

        // Pieces of one side tile without gaps: consecutive boundaries match.
        let mut right: Vec<HalfOpen> = pieces
            .iter()
            .map(|p| p.piece)
            .filter(|p| p.lo >= 0.0)
            .collect();
        right.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap());
        for w in right.windows(2) {
            assert_eq!(w[0].hi.to_bits(), w[1].lo.to_bits());
        }
    }

    #[test]
    fn split_clips_to_quarter_turn() {
        let pieces = split_open_set(&[(-0.3, 0.4), (1.5, 1.7)], 25).unwrap();
        for p in &pieces {
            assert!(p.piece.lo >= 0.0 && p.piece.hi <= FRAC_PI_2);
        }
        assert!(pieces.iter().any(|p| p.source == 0));
        assert!(pieces.iter().any(|p| p.source == 1));
    }

    #[test]
    fn breakpoint_example() {
        // Product over k = 3..=5 stays just above 1/2; k = 6 crosses.
        assert!(block_product(2, 5) > 0.5);
        approx(block_product(2, 6), 0.4535, 5e-4);
        assert_eq!(next_breakpoint(2, 0.5).unwrap(), 6);
    }

    #[test]
    fn dilation_example() {
        assert_eq!(next_dilation(1, 0.01, 3.0).unwrap(), 401);
    }

    #[test]
    fn coefficient_formula() {
        approx(Schedule::coeff(4), 1.0 / (4.0 * 4f64.ln().powf(1.5)), 0.0);
        approx(Schedule::coeff(4), 0.1532, 2e-4);
    }

    #[test]
    fn periodize_small_family() {
        let s = SlopeInterval::from_endpoints(0.0, PI / 24.0).unwrap();
        let opts = PeriodizeOptions { n_cap: 60, window: 2, nu_audit_samples: 2000, seed: 1 };
        let built = periodize(0.05, 0.01, s, &opts).unwrap();
        // lambda = min(0.0005, 0.01); ring scales halve.
        approx(built.lattice.params().lambda, 0.0005, 1e-18);
        approx(built.lattice.cell_eps((1, 1)), 0.0005 / 4.0, 1e-20);
        assert!(built.nu < 0.01);
        approx(built.nu_prime, 200.0, 0.0);

        // Cell integrals vanish and have absolute mass at most one.
        for ring in 0..built.lattice.materialized_rings() {
            let bump = &built.rings[ring];
            assert!(bump.disk_sum().total_integral().abs() <= 1e-12);
            assert!(bump.disk_sum().total_abs_integral().unwrap() <= 1.0 + 1e-12);
        }

        // Integral over a cell-sized rectangle centered on a cell is zero
        // with no tail (all touched cells materialized).
        let r = Rectangle::new(Point::new(1.0, 0.0), 0.45, 0.45, Slope::new(0.0)).unwrap();
        let i = built.lattice.integral_rect(&r);
        assert!(i.value.abs() <= 1e-12 && i.radius == 0.0);
    }

    #[test]
    fn lambda_example_values() {
        // At (eps, delta) = (0.5-scale cells, 0.01): lambda = min(0.005, 0.01).
        let lambda = (0.5f64 / 100.0).min(0.01);
        approx(lambda, 0.005, 0.0);
        approx(lambda * 0.25, 0.00125, 0.0); // cell (1,1)
    }

    #[test]
    fn composite_delegation() {
        let zero_series = SeriesFunction::new(vec![]).unwrap();
        let composite = assemble_wr(
            vec![zero_series.clone(), zero_series],
            vec![Point::new(0.0, 0.0), Point::new(3.0, 0.0)],
        )
        .unwrap();
        assert_eq!(composite.eval(Point::new(1.5, 0.0)), 0.0);

        let overlapping = assemble_wr(
            vec![SeriesFunction::new(vec![]).unwrap(); 2],
            vec![Point::new(0.0, 0.0), Point::new(0.5, 0.0)],
        );
        assert!(overlapping.is_err());
    }
}
