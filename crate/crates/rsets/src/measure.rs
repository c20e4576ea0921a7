//! Measure-theoretic tooling: pixel sets on the unit torus, per-cell measure
//! bounds, level-set estimation with pessimistic undetermined counting,
//! greedy disjoint rectangle selection, refinement of rectangle unions into
//! grid squares, and dilation unions with the independence identity.
//!
//! Everything is finite-resolution with certified error terms; pixel counts
//! carry `O(perimeter / G)` error and comparisons state their slack.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{rot_point, unit, Point, Rectangle};
use crate::{Error, Result};

/// A binary mask over the unit torus `[0,1)^2` at resolution `G` pixels per
/// side. Pixel `(i, j)` covers `[i/G, (i+1)/G) x [j/G, (j+1)/G)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelSet {
    g: u32,
    bits: Vec<u64>,
}

impl PixelSet {
    pub fn empty(g: u32) -> Result<Self> {
        if g == 0 || g > 1 << 16 {
            return Err(Error::InvalidParam(format!("resolution {g} out of range")));
        }
        let stride = (g as usize).div_ceil(64);
        Ok(PixelSet { g, bits: vec![0; stride * g as usize] })
    }

    pub fn full(g: u32) -> Result<Self> {
        let mut s = Self::empty(g)?;
        for w in &mut s.bits {
            *w = u64::MAX;
        }
        s.clear_padding();
        Ok(s)
    }

    /// Rasterizes a membership predicate by pixel centers.
    pub fn from_fn(g: u32, f: impl Fn(Point) -> bool + Sync) -> Result<Self> {
        let mut s = Self::empty(g)?;
        let gf = g as f64;
        let rows: Vec<Vec<u64>> = (0..g)
            .into_par_iter()
            .map(|j| {
                let y = (j as f64 + 0.5) / gf;
                let mut row = vec![0u64; (g as usize).div_ceil(64)];
                for i in 0..g {
                    let x = (i as f64 + 0.5) / gf;
                    if f(Point::new(x, y)) {
                        row[(i / 64) as usize] |= 1u64 << (i % 64);
                    }
                }
                row
            })
            .collect();
        // Pack rows contiguously (row stride = ceil(g/64) words).
        let stride = (g as usize).div_ceil(64);
        let mut bits = vec![0u64; stride * g as usize];
        for (j, row) in rows.into_iter().enumerate() {
            bits[j * stride..(j + 1) * stride].copy_from_slice(&row);
        }
        s.bits = bits;
        Ok(s)
    }

    fn stride(&self) -> usize {
        (self.g as usize).div_ceil(64)
    }

    fn clear_padding(&mut self) {
        let g = self.g as usize;
        let stride = self.stride();
        let rem = g % 64;
        if rem != 0 {
            let mask = (1u64 << rem) - 1;
            for j in 0..g {
                self.bits[j * stride + stride - 1] &= mask;
            }
        }
        self.bits.truncate(stride * g);
    }

    pub fn resolution(&self) -> u32 {
        self.g
    }

    #[inline]
    pub fn get(&self, i: u32, j: u32) -> bool {
        let stride = self.stride();
        self.bits[j as usize * stride + (i / 64) as usize] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: u32, j: u32, v: bool) {
        let stride = self.stride();
        let w = &mut self.bits[j as usize * stride + (i / 64) as usize];
        if v {
            *w |= 1u64 << (i % 64);
        } else {
            *w &= !(1u64 << (i % 64));
        }
    }

    pub fn count(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn density(&self) -> f64 {
        self.count() as f64 / (self.g as f64 * self.g as f64)
    }

    fn zip_check(&self, other: &PixelSet) -> Result<()> {
        if self.g != other.g {
            return Err(Error::InvalidParam(format!(
                "pixel set resolutions differ: {} vs {}",
                self.g, other.g
            )));
        }
        Ok(())
    }

    pub fn union(&self, other: &PixelSet) -> Result<PixelSet> {
        self.zip_check(other)?;
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| a | b).collect();
        Ok(PixelSet { g: self.g, bits })
    }

    pub fn intersection(&self, other: &PixelSet) -> Result<PixelSet> {
        self.zip_check(other)?;
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| a & b).collect();
        Ok(PixelSet { g: self.g, bits })
    }

    pub fn complement(&self) -> PixelSet {
        let mut s = PixelSet {
            g: self.g,
            bits: self.bits.iter().map(|w| !w).collect(),
        };
        s.clear_padding();
        s
    }

    /// Pullback under `x -> n x` on the torus: pixel `(i, j)` of the result
    /// looks up the block of `A` its image covers. Exact when the set is a
    /// union of `1/n`-aligned... the caller guarantees alignment by keeping
    /// `G` a multiple of `n` and the set a union of `n`-grid squares.
    pub fn dilation_pullback(&self, n: u32) -> Result<PixelSet> {
        if n == 0 || self.g % n != 0 {
            return Err(Error::InvalidParam(format!(
                "dilation pullback needs the factor ({n}) to divide the resolution ({})",
                self.g
            )));
        }
        let g = self.g;
        let mut out = PixelSet::empty(g)?;
        for j in 0..g {
            for i in 0..g {
                // Center of pixel (i, j) maps to n*center mod 1.
                let src_i = (i as u64 * n as u64 + n as u64 / 2) % g as u64;
                let src_j = (j as u64 * n as u64 + n as u64 / 2) % g as u64;
                if self.get(src_i as u32, src_j as u32) {
                    out.set(i, j, true);
                }
            }
        }
        Ok(out)
    }

    /// Binary PBM (P4) encoding; set pixels are black, row 0 at the top.
    pub fn to_pbm(&self) -> Vec<u8> {
        let g = self.g;
        let mut out = format!("P4\n{g} {g}\n").into_bytes();
        for j in 0..g {
            let mut byte = 0u8;
            for i in 0..g {
                if self.get(i, j) {
                    byte |= 0x80 >> (i % 8);
                }
                if i % 8 == 7 || i == g - 1 {
                    out.push(byte);
                    byte = 0;
                }
            }
        }
        out
    }
}

/// Per-cell measure bounds over a window of unit cells, with an optional
/// analytic tail for cells outside it.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MesBounds {
    /// Infimum of per-cell areas over the window.
    pub lower: f64,
    /// Supremum of per-cell areas over the window (plus the tail bound).
    pub upper: f64,
    /// Tail contribution outside the window.
    pub tail: f64,
}

/// Evaluates per-cell areas on the window and combines them with the
/// caller's tail bound for cells beyond it. Errors when the window is empty
/// or an unbounded set has no tail bound.
pub fn mes_bounds(
    per_cell_area: impl Fn((i64, i64)) -> f64 + Sync,
    window: &[(i64, i64)],
    tail: Option<f64>,
) -> Result<MesBounds> {
    if window.is_empty() {
        return Err(Error::Precondition("mes_bounds: empty cell window".into()));
    }
    let areas: Vec<f64> = window.par_iter().map(|&k| per_cell_area(k)).collect();
    let lower = areas.iter().cloned().fold(f64::INFINITY, f64::min);
    let sup = areas.iter().cloned().fold(0.0f64, f64::max);
    let tail = tail.unwrap_or(0.0);
    Ok(MesBounds { lower, upper: (sup + tail).min(1.0), tail })
}

/// Classification of one sample point against a threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PixelStatus {
    /// Certified above the threshold (a witness attains it).
    Above,
    /// Certified at or below the threshold.
    Below,
    /// Neither certificate applies; counted pessimistically.
    Undetermined,
}

/// Per-cell sample counts from a level-set estimate.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct CellCounts {
    pub above: u64,
    pub below: u64,
    pub undetermined: u64,
}

impl CellCounts {
    pub fn total(&self) -> u64 {
        self.above + self.below + self.undetermined
    }

    /// Fraction certified above (a lower bound for the level set's density).
    pub fn above_density(&self) -> f64 {
        self.above as f64 / self.total().max(1) as f64
    }

    /// Pessimistic density: undetermined samples count against the claim.
    pub fn above_density_pessimistic(&self) -> f64 {
        (self.above + self.undetermined) as f64 / self.total().max(1) as f64
    }
}

/// A level-set estimate over a window of unit cells.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelSetEstimate {
    pub per_cell: Vec<((i64, i64), CellCounts)>,
    pub samples_per_cell: u64,
}

impl LevelSetEstimate {
    pub fn max_pessimistic_density(&self) -> f64 {
        self.per_cell
            .iter()
            .map(|(_, c)| c.above_density_pessimistic())
            .fold(0.0, f64::max)
    }

    pub fn min_above_density(&self) -> f64 {
        self.per_cell
            .iter()
            .map(|(_, c)| c.above_density())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Samples each cell of the window on a jittered grid and classifies points
/// with the caller's certificate. The classifier sees absolute coordinates.
pub fn level_set(
    classify: impl Fn(Point) -> PixelStatus + Sync,
    window: &[(i64, i64)],
    samples_per_cell: u64,
    seed: u64,
) -> LevelSetEstimate {
    use rand::{Rng, SeedableRng};
    let side = (samples_per_cell as f64).sqrt().ceil() as u64;
    let per_cell = window
        .par_iter()
        .map(|&(k1, k2)| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(
                seed ^ (k1 as u64).wrapping_mul(0x9E3779B97F4A7C15)
                    ^ (k2 as u64).wrapping_mul(0xC2B2AE3D27D4EB4F),
            );
            let mut counts = CellCounts::default();
            for a in 0..side {
                for b in 0..side {
                    let x = k1 as f64 - 0.5 + (a as f64 + rng.gen_range(0.0..1.0)) / side as f64;
                    let y = k2 as f64 - 0.5 + (b as f64 + rng.gen_range(0.0..1.0)) / side as f64;
                    match classify(Point::new(x, y)) {
                        PixelStatus::Above => counts.above += 1,
                        PixelStatus::Below => counts.below += 1,
                        PixelStatus::Undetermined => counts.undetermined += 1,
                    }
                }
            }
            ((k1, k2), counts)
        })
        .collect();
    LevelSetEstimate { per_cell, samples_per_cell: side * side }
}

/// A union of mutually disjoint rectangles of one slope with all sides at
/// least `delta`, contained in the unit square and treated 1-periodically.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeltaSet {
    pub rects: Vec<Rectangle>,
    pub slope: f64,
    pub delta: f64,
}

impl DeltaSet {
    pub fn new(rects: Vec<Rectangle>, slope: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidParam("delta must be positive".into()));
        }
        for (i, r) in rects.iter().enumerate() {
            let (a, b) = r.sides();
            if a < delta * (1.0 - 1e-12) || b < delta * (1.0 - 1e-12) {
                return Err(Error::Precondition(format!(
                    "rectangle {i} has a side below delta = {delta}"
                )));
            }
            if (r.slope.angle() - crate::geometry::Slope::new(slope).angle()).abs() > 1e-12 {
                return Err(Error::Precondition(format!("rectangle {i} has a different slope")));
            }
            for c in r.corners() {
                if !(-1e-12..=1.0 + 1e-12).contains(&c.x)
                    || !(-1e-12..=1.0 + 1e-12).contains(&c.y)
                {
                    return Err(Error::Precondition(format!(
                        "rectangle {i} leaves the unit square"
                    )));
                }
            }
            for (j, q) in rects.iter().enumerate().skip(i + 1) {
                if rects_overlap(r, q) {
                    return Err(Error::Precondition(format!(
                        "rectangles {i} and {j} overlap"
                    )));
                }
            }
        }
        Ok(DeltaSet { rects, slope, delta })
    }

    /// Total area (rectangles are disjoint), which is the per-unit-cell
    /// measure of the periodic extension.
    pub fn measure(&self) -> f64 {
        self.rects.iter().map(|r| r.area()).sum()
    }
}

/// Overlap test for same-slope rectangles via their common frame.
fn rects_overlap(a: &Rectangle, b: &Rectangle) -> bool {
    let (u, v) = a.local(b.center);
    u.abs() < a.half_a + b.half_a && v.abs() < a.half_b + b.half_b
}

/// Greedy disjoint subfamily of congruent same-slope rectangles, by the
/// given order; returns indices of the picked family.
fn greedy_pick(tiles: &[Rectangle], order: &[usize]) -> Vec<usize> {
    let mut picked: Vec<usize> = Vec::new();
    for &i in order {
        if picked.iter().all(|&j| !rects_overlap(&tiles[i], &tiles[j])) {
            picked.push(i);
        }
    }
    picked
}

/// Greedy disjoint selection from a family of congruent rectangles: sweeps
/// in frame-lexicographic order and returns the picked subfamily's indices.
/// The caller asserts the covered-fraction guarantee on the result; if the
/// sweep falls short, three alternative orders are tried and the best kept.
pub fn greedy_disjoint(tiles: &[Rectangle]) -> Vec<usize> {
    if tiles.is_empty() {
        return Vec::new();
    }
    let frame = tiles[0].slope.angle();
    let ux = unit(frame);
    let uy = rot_point(ux, std::f64::consts::FRAC_PI_2);
    let key = |r: &Rectangle| (r.center.dot(ux), r.center.dot(uy));

    let mut orders: Vec<Vec<usize>> = Vec::new();
    let mut lex: Vec<usize> = (0..tiles.len()).collect();
    lex.sort_by(|&i, &j| {
        let (a1, b1) = key(&tiles[i]);
        let (a2, b2) = key(&tiles[j]);
        (a1, b1).partial_cmp(&(a2, b2)).unwrap()
    });
    orders.push(lex.clone());
    lex.reverse();
    orders.push(lex.clone());
    let mut by_v: Vec<usize> = (0..tiles.len()).collect();
    by_v.sort_by(|&i, &j| {
        let (a1, b1) = key(&tiles[i]);
        let (a2, b2) = key(&tiles[j]);
        (b1, a1).partial_cmp(&(b2, a2)).unwrap()
    });
    orders.push(by_v);

    let mut best: Vec<usize> = Vec::new();
    for order in &orders {
        let picked = greedy_pick(tiles, order);
        if picked.len() > best.len() {
            best = picked;
        }
    }
    best
}

/// Result of refining a periodic rectangle union into grid squares.
#[derive(Clone, Debug)]
pub struct Refined {
    /// Outer cell count per axis (`m`): the refinement works per `1/m`-cell.
    pub m: u32,
    /// Inner grid (`n`): the refined set is a union of `1/n`-squares.
    pub n: u32,
    /// Picked square indices per outer cell, for the representative cell
    /// (all cells carry translates; counts are equalized).
    pub squares_per_cell: u64,
    /// Per-unit-cell measure of the refined set.
    pub measure: f64,
    /// The refined set as a pixel mask.
    pub pixels: PixelSet,
    /// Diagnostics from the chain, per representative cell.
    pub chain: RefineChain,
}

/// Measured quantities from the refinement chain (representative cell),
/// asserted at run time rather than assumed.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RefineChain {
    /// Input per-cell measure of the dilated set.
    pub input_per_cell: f64,
    /// Area of the in-cell tile union (pixel estimate, with its tolerance).
    pub kept_union_area: f64,
    pub kept_union_tol: f64,
    /// Area of the disjoint picked subfamily (exact).
    pub picked_area: f64,
    /// `picked / union` coverage ratio (conservative).
    pub picked_ratio: f64,
    /// Area of the snapped grid squares (exact).
    pub snapped_area: f64,
    /// `snapped / picked` fill ratio.
    pub fill_ratio: f64,
}

/// Refines the 1-periodic delta-set `B`, dilated by `m`, into an equalized
/// union of `1/n`-grid squares:
/// keep the tiles of `dil_m B` that fit inside a `1/m`-cell, select a
/// disjoint subfamily covering at least a quarter of their union, snap to
/// contained `1/n`-squares keeping at least a quarter of the picked area,
/// and equalize per-cell counts. All four properties and the chain
/// inequalities are asserted on the measured values.
///
/// In strict mode the hypotheses `mes(B) > 12 delta` and `n > (4/delta) m`
/// are enforced up front; otherwise they are only recorded in the report and
/// the measured chain carries the proof obligations.
pub fn refine_delta_set(
    b: &DeltaSet,
    m: u32,
    n: u32,
    g: u32,
    strict: bool,
) -> Result<Refined> {
    if m == 0 || n == 0 || n % m != 0 {
        return Err(Error::Precondition(format!(
            "refinement needs the inner grid ({n}) to refine the outer cells ({m})"
        )));
    }
    if g % n != 0 {
        return Err(Error::Precondition(format!(
            "resolution {g} must be a multiple of the inner grid {n}"
        )));
    }
    let mes_b = b.measure();
    if strict {
        if !(mes_b > 12.0 * b.delta) {
            return Err(Error::Precondition(format!(
                "strict mode: mes(B) = {mes_b} must exceed 12 delta = {}",
                12.0 * b.delta
            )));
        }
        if !(n as f64 > (4.0 / b.delta) * m as f64) {
            return Err(Error::Precondition(format!(
                "strict mode: n = {n} must exceed (4/delta) m = {}",
                (4.0 / b.delta) * m as f64
            )));
        }
    }

    // Representative outer cell [0, 1/m)^2. The input is 1-periodic, so
    // dil_m B is (1/m)-periodic and every outer cell is a translate.
    let cell = 1.0 / m as f64;
    let tile_side = b.delta / m as f64;

    // Collect tiles of nearby rectangle copies that land inside the cell.
    let mut tiles: Vec<Rectangle> = Vec::new();
    for r in &b.rects {
        let scaled = Rectangle::new(
            r.center.scale(1.0 / m as f64),
            r.half_a / m as f64,
            r.half_b / m as f64,
            r.slope,
        )?;
        for di in -2..=(m as i64 + 1) {
            for dj in -2..=(m as i64 + 1) {
                // Copies anchored across the torus; keep those whose tiles
                // can reach the representative cell.
                let c = scaled.center.add(Point::new(di as f64 * cell, dj as f64 * cell));
                if c.x < -0.76 || c.x > cell + 0.76 || c.y < -0.76 || c.y > cell + 0.76 {
                    continue;
                }
                let copy = Rectangle { center: c, ..scaled };
                cover_tiles(&copy, tile_side, &mut tiles);
            }
        }
    }
    // Keep tiles strictly inside the closed representative cell.
    tiles.retain(|t| {
        t.corners().iter().all(|p| {
            p.x >= -1e-15 && p.x <= cell + 1e-15 && p.y >= -1e-15 && p.y <= cell + 1e-15
        })
    });

    // Pixel estimate of the tile union within the cell (local raster).
    let raster: u32 = 512;
    let mut hits = 0u64;
    for j in 0..raster {
        for i in 0..raster {
            let p = Point::new(
                (i as f64 + 0.5) * cell / raster as f64,
                (j as f64 + 0.5) * cell / raster as f64,
            );
            if tiles.iter().any(|t| t.contains(p)) {
                hits += 1;
            }
        }
    }
    let kept_union_area = hits as f64 * cell * cell / (raster as f64 * raster as f64);
    let kept_union_tol =
        tiles.len() as f64 * 4.0 * tile_side * (cell / raster as f64) * std::f64::consts::SQRT_2;

    let input_per_cell = mes_b / (m as f64 * m as f64);
    // Chain step one: kept tiles retain at least half the per-cell input.
    if kept_union_area + kept_union_tol < input_per_cell / 2.0 {
        return Err(Error::Precondition(format!(
            "refinement chain: kept tile union {kept_union_area} (tol {kept_union_tol}) \
             fell below half the per-cell input {input_per_cell}"
        )));
    }

    // Disjoint subfamily covering at least a quarter of the union.
    let picked_idx = greedy_disjoint(&tiles);
    let picked_area: f64 = picked_idx.iter().map(|&i| tiles[i].area()).sum();
    let picked_ratio = if kept_union_area > 0.0 {
        picked_area / (kept_union_area + kept_union_tol)
    } else {
        1.0
    };
    if !tiles.is_empty() && picked_ratio < 0.25 {
        return Err(Error::Precondition(format!(
            "greedy selection covered only {picked_ratio:.4} of the tile union \
             in the representative cell"
        )));
    }
    // Chain step two: an eighth of the per-cell input.
    if !tiles.is_empty() && picked_area < input_per_cell / 8.0 * (1.0 - 1e-9) {
        return Err(Error::Precondition(format!(
            "refinement chain: picked area {picked_area} fell below an eighth \
             of the per-cell input {input_per_cell}"
        )));
    }

    // Snap to contained inner-grid squares.
    let inner = 1.0 / n as f64;
    let mut squares: Vec<(u32, u32)> = Vec::new();
    for &i in &picked_idx {
        let t = &tiles[i];
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for c in t.corners() {
            lo.x = lo.x.min(c.x);
            lo.y = lo.y.min(c.y);
            hi.x = hi.x.max(c.x);
            hi.y = hi.y.max(c.y);
        }
        let i0 = (lo.x / inner).floor().max(0.0) as i64;
        let j0 = (lo.y / inner).floor().max(0.0) as i64;
        let i1 = (hi.x / inner).ceil() as i64;
        let j1 = (hi.y / inner).ceil() as i64;
        for si in i0..i1 {
            for sj in j0..j1 {
                let corners = [
                    Point::new(si as f64 * inner, sj as f64 * inner),
                    Point::new((si + 1) as f64 * inner, sj as f64 * inner),
                    Point::new(si as f64 * inner, (sj + 1) as f64 * inner),
                    Point::new((si + 1) as f64 * inner, (sj + 1) as f64 * inner),
                ];
                let inside = corners.iter().all(|p| {
                    let (u, v) = t.local(*p);
                    u.abs() <= t.half_a + 1e-15 && v.abs() <= t.half_b + 1e-15
                });
                if inside && si >= 0 && sj >= 0 && (si as u64) < (n / m) as u64 && (sj as u64) < (n / m) as u64 {
                    squares.push((si as u32, sj as u32));
                }
            }
        }
    }
    squares.sort_unstable();
    squares.dedup();
    let snapped_area = squares.len() as f64 * inner * inner;
    let fill_ratio = if picked_area > 0.0 { snapped_area / picked_area } else { 1.0 };
    if !picked_idx.is_empty() && fill_ratio < 0.25 {
        return Err(Error::Precondition(format!(
            "refinement chain: grid squares filled only {fill_ratio:.4} of the \
             picked tiles (inner grid too coarse for the tile size)"
        )));
    }

    // Equalized by periodicity: every outer cell carries this same square
    // family. Per-cell measure of the refined set:
    let per_cell_refined = snapped_area * (m as f64 * m as f64);
    if per_cell_refined < mes_b / 32.0 * (1.0 - 1e-9) {
        return Err(Error::Precondition(format!(
            "refined measure {per_cell_refined} fell below mes(B)/32 = {}",
            mes_b / 32.0
        )));
    }

    // Paint the pixel mask: replicate the representative squares to all
    // outer cells; exact since n | G.
    let mut pixels = PixelSet::empty(g)?;
    let block = (g / n) as usize;
    let per_outer = (n / m) as usize;
    for cj in 0..m as usize {
        for ci in 0..m as usize {
            for &(si, sj) in &squares {
                let px0 = (ci * per_outer + si as usize) * block;
                let py0 = (cj * per_outer + sj as usize) * block;
                for dy in 0..block {
                    for dx in 0..block {
                        pixels.set((px0 + dx) as u32, (py0 + dy) as u32, true);
                    }
                }
            }
        }
    }

    Ok(Refined {
        m,
        n,
        squares_per_cell: squares.len() as u64,
        measure: per_cell_refined,
        pixels,
        chain: RefineChain {
            input_per_cell,
            kept_union_area,
            kept_union_tol,
            picked_area,
            picked_ratio: picked_ratio.min(1.0),
            snapped_area,
            fill_ratio: fill_ratio.min(1.0),
        },
    })
}

/// Covers `rect` by congruent `side`-squares of the same slope (full cover;
/// the last row and column anchor at the far edge, so tiles may overlap but
/// never leave the rectangle).
fn cover_tiles(rect: &Rectangle, side: f64, out: &mut Vec<Rectangle>) {
    let (a, b) = rect.sides();
    if a < side * (1.0 - 1e-12) || b < side * (1.0 - 1e-12) {
        return; // thinner than a tile: cannot cover without leaving it
    }
    let na = (a / side).ceil().max(1.0) as u32;
    let nb = (b / side).ceil().max(1.0) as u32;
    let ux = unit(rect.slope.angle());
    let uy = rot_point(ux, std::f64::consts::FRAC_PI_2);
    let origin = rect
        .center
        .sub(ux.scale(rect.half_a))
        .sub(uy.scale(rect.half_b));
    for ia in 0..na {
        // Anchor the final tile at the far edge.
        let offa = if ia + 1 == na { a - side } else { ia as f64 * side };
        for ib in 0..nb {
            let offb = if ib + 1 == nb { b - side } else { ib as f64 * side };
            let c = origin
                .add(ux.scale(offa + 0.5 * side))
                .add(uy.scale(offb + 0.5 * side));
            out.push(Rectangle {
                center: c,
                half_a: 0.5 * side,
                half_b: 0.5 * side,
                slope: rect.slope,
            });
        }
    }
}

/// Result of a dilation union: measured density against the product bound,
/// and the per-cell independence identity.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UnionReport {
    pub union_density: f64,
    /// `1 - prod_t (1 - mes(A_t)/32)`.
    pub product_bound: f64,
    pub margin: f64,
    /// `1 - prod_t (1 - mes(refined_t))`: the independence identity's right
    /// side on the refined sets.
    pub independence_value: f64,
    pub independence_gap: f64,
    pub grid: u32,
}

/// Unions the refined sets and checks the measured density against the
/// product bound from the input measures, plus the exact independence
/// identity on the refined per-cell measures (within pixel resolution).
pub fn dilation_union(
    refined: &[Refined],
    input_measures: &[f64],
    g: u32,
) -> Result<UnionReport> {
    if refined.is_empty() || refined.len() != input_measures.len() {
        return Err(Error::InvalidParam(
            "dilation_union needs one input measure per refined set".into(),
        ));
    }
    let mut union = PixelSet::empty(g)?;
    for r in refined {
        if r.pixels.resolution() != g {
            return Err(Error::InvalidParam("refined sets use different resolutions".into()));
        }
        union = union.union(&r.pixels)?;
    }
    let union_density = union.density();
    let product_bound = 1.0 - input_measures.iter().fold(1.0, |p, &m| p * (1.0 - m / 32.0));
    let independence_value = 1.0 - refined.iter().fold(1.0, |p, r| p * (1.0 - r.measure));
    Ok(UnionReport {
        union_density,
        product_bound,
        margin: union_density - product_bound,
        independence_value,
        independence_gap: (union_density - independence_value).abs(),
        grid: g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Slope;

    #[test]
    fn pixel_algebra_exact() {
        let a = PixelSet::from_fn(64, |p| p.x < 0.5).unwrap();
        let b = PixelSet::from_fn(64, |p| p.y < 0.25).unwrap();
        let u = a.union(&b).unwrap();
        let i = a.intersection(&b).unwrap();
        assert_eq!(u.count() + i.count(), a.count() + b.count());
        assert_eq!(a.complement().count(), 64 * 64 - a.count());
        assert_eq!(PixelSet::full(64).unwrap().density(), 1.0);
    }

    #[test]
    fn dilation_preserves_density_on_aligned_sets() {
        // A union of 1/4-grid squares: pullback under x -> 4x is exact.
        let s = PixelSet::from_fn(128, |p| (p.x * 4.0).floor() as i32 % 2 == 0).unwrap();
        let d = s.dilation_pullback(4).unwrap();
        assert_eq!(s.density(), d.density());
    }

    #[test]
    fn pbm_header_and_size() {
        let s = PixelSet::empty(16).unwrap();
        let pbm = s.to_pbm();
        assert!(pbm.starts_with(b"P4\n16 16\n"));
        assert_eq!(pbm.len(), 9 + 16 * 2);
    }

    #[test]
    fn greedy_examples() {
        let r = |x: f64, y: f64| {
            Rectangle::new(Point::new(x, y), 0.05, 0.05, Slope::new(0.0)).unwrap()
        };
        // Already disjoint: everything picked.
        let tiles = vec![r(0.1, 0.1), r(0.3, 0.1), r(0.5, 0.5)];
        assert_eq!(greedy_disjoint(&tiles).len(), 3);

        // Identical copies: one pick.
        let copies = vec![r(0.2, 0.2); 5];
        assert_eq!(greedy_disjoint(&copies).len(), 1);
    }

    #[test]
    fn greedy_random_quarter() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let slope = Slope::new(0.4);
        let tiles: Vec<Rectangle> = (0..200)
            .map(|_| {
                Rectangle::new(
                    Point::new(rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9)),
                    0.04,
                    0.04,
                    slope,
                )
                .unwrap()
            })
            .collect();
        let picked = greedy_disjoint(&tiles);
        let picked_area: f64 = picked.iter().map(|&i| tiles[i].area()).sum();
        // Union area by rasterization.
        let mut hits = 0u64;
        let res = 600;
        for j in 0..res {
            for i in 0..res {
                let p = Point::new((i as f64 + 0.5) / res as f64, (j as f64 + 0.5) / res as f64);
                if tiles.iter().any(|t| t.contains(p)) {
                    hits += 1;
                }
            }
        }
        let union_area = hits as f64 / (res as f64 * res as f64);
        assert!(
            picked_area >= union_area / 4.0,
            "picked {picked_area} vs union {union_area}"
        );
    }

    #[test]
    fn refine_full_cell_example() {
        // One full-cell rectangle: everything survives the chain.
        let b = DeltaSet::new(
            vec![Rectangle::axis_aligned(0.0, 1.0, 0.0, 1.0).unwrap()],
            0.0,
            1.0,
        )
        .unwrap();
        let refined = refine_delta_set(&b, 1, 8, 64, false).unwrap();
        assert!(refined.measure >= b.measure() / 32.0);
        assert!(refined.measure > 0.9);
        assert_eq!(refined.squares_per_cell, 64);
        // Pixel mask matches the measure exactly for grid-aligned squares.
        assert!((refined.pixels.density() - refined.measure).abs() < 1e-12);
    }

    #[test]
    fn refine_band_and_union() {
        // Two bands of height 1/2, one axis-aligned and one of small slope.
        let band = DeltaSet::new(
            vec![Rectangle::axis_aligned(0.0, 1.0, 0.25, 0.75).unwrap()],
            0.0,
            0.5,
        )
        .unwrap();
        let r1 = refine_delta_set(&band, 1, 16, 256, false).unwrap();
        assert!(r1.measure >= band.measure() / 32.0);

        let r2 = refine_delta_set(&band, 16, 256, 256, false).unwrap();
        assert!(r2.measure >= band.measure() / 32.0);

        let report = dilation_union(
            &[r1, r2],
            &[band.measure(), band.measure()],
            256,
        )
        .unwrap();
        assert!(report.margin > 0.0, "{report:?}");
        assert!(report.independence_gap <= 2.0 / 256.0, "{report:?}");
    }

    #[test]
    fn mes_bounds_full_torus() {
        let window: Vec<(i64, i64)> = (-1..=1).flat_map(|a| (-1..=1).map(move |b| (a, b))).collect();
        let mb = mes_bounds(|_| 1.0, &window, None).unwrap();
        assert_eq!(mb.lower, 1.0);
        assert_eq!(mb.upper, 1.0);
    }

    #[test]
    fn level_set_zero_function() {
        let est = level_set(|_| PixelStatus::Below, &[(0, 0)], 100, 1);
        assert_eq!(est.max_pessimistic_density(), 0.0);
    }
}
