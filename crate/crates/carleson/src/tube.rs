//! Thickened curves between partner points, window border strips, and the
//! gradient bookkeeping behind the window mass estimates.
//!
//! A [`Tube`] is a polyline with a width: the set it occupies is the union of
//! open discs of radius `width / 2` centered on the curve. Tubes are built
//! between partnered sequence points so that they stay clear of every other
//! point of the sequence, stay within a length budget proportional to the
//! endpoint distance, and can be tested for pairwise disjointness.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geometry::{
    cayley_to_halfplane, halfplane_to_disc, halfplane_window_box, CarlesonWindow, DiscPoint,
};
use crate::partition::Partition;
use crate::sequence::PointSequence;

/// Slack added to the `(pi/2) * |first - last|` curve-length budget.
const LENGTH_BUDGET_TOL: f64 = 1e-9;

/// Detour arcs run at this multiple of an obstacle's required clearance, so
/// the chord approximation of the arc still clears the obstacle strictly.
const DETOUR_MARGIN: f64 = 1.05;

/// Curves keep at least this multiple of the tube width away from every
/// obstacle, so the tube itself (half a width around the curve) misses the
/// obstacle with margin to spare.
const OBSTACLE_WIDTH_FACTOR: f64 = 0.525;

/// Angular resolution of detour arcs: at least eight chords per half turn.
const ARC_CHORD_ANGLE: f64 = PI / 8.0;

/// Soft cap on the vertex count of a resampled tube curve.
const MAX_TUBE_VERTICES: usize = 4096;

/// Default relative step for central-difference gradients: the absolute step
/// at `z` is this times the distance from `z` to the boundary.
pub const DEFAULT_GRADIENT_STEP: f64 = 1e-4;

/// Default mesh resolution (cells per axis) for window integrals.
pub const DEFAULT_MESH_CELLS: usize = 128;

fn point_segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a).re * ab.re + (p - a).im * ab.im) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn orientation(a: Complex64, b: Complex64, c: Complex64) -> f64 {
    (b.re - a.re) * (c.im - a.im) - (b.im - a.im) * (c.re - a.re)
}

fn segments_cross(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> bool {
    let o1 = orientation(a, b, c);
    let o2 = orientation(a, b, d);
    let o3 = orientation(c, d, a);
    let o4 = orientation(c, d, b);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

fn segment_segment_distance(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> f64 {
    if segments_cross(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

fn polyline_length(pts: &[Complex64]) -> f64 {
    pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

fn polyline_point_distance(pts: &[Complex64], p: Complex64) -> f64 {
    pts.windows(2)
        .map(|w| point_segment_distance(p, w[0], w[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Axis-aligned bounding box used to prune segment-pair distance tests.
#[derive(Clone, Copy, Debug)]
struct Aabb {
    min_x: f64,
    min_y: f64,
    max_x: f64,
    max_y: f64,
}

impl Aabb {
    fn of(pts: &[Complex64]) -> Self {
        let mut b = Aabb {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        };
        for p in pts {
            b.min_x = b.min_x.min(p.re);
            b.min_y = b.min_y.min(p.im);
            b.max_x = b.max_x.max(p.re);
            b.max_y = b.max_y.max(p.im);
        }
        b
    }

    fn meets(&self, other: &Aabb, margin: f64) -> bool {
        self.min_x - margin <= other.max_x
            && other.min_x - margin <= self.max_x
            && self.min_y - margin <= other.max_y
            && other.min_y - margin <= self.max_y
    }
}

fn polylines_closer_than(a: &[Complex64], b: &[Complex64], threshold: f64) -> bool {
    let box_b = Aabb::of(b);
    for sa in a.windows(2) {
        if !Aabb::of(sa).meets(&box_b, threshold) {
            continue;
        }
        for sb in b.windows(2) {
            if segment_segment_distance(sa[0], sa[1], sb[0], sb[1]) < threshold {
                return true;
            }
        }
    }
    false
}

/// A polyline thickened to a fixed width: the region covered is the union of
/// open discs of radius `width / 2` along the curve.
///
/// The curve length may not exceed `(pi/2)` times the straight-line distance
/// between its endpoints (plus a 1e-9 slack), so a tube is never a wildly
/// indirect connection. Deserialized values are taken as-is; only
/// [`Tube::new`] measures and validates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Tube {
    curve: Vec<DiscPoint>,
    width: f64,
    length: f64,
}

impl Tube {
    /// Validates the vertex list and width, measures the arc length, and
    /// enforces the length budget.
    pub fn new(curve: Vec<DiscPoint>, width: f64) -> Result<Self, Error> {
        if curve.len() < 2 {
            return Err(Error::InvalidConfig(
                "a tube needs at least two vertices".into(),
            ));
        }
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::InvalidThreshold {
                name: "width",
                value: width,
            });
        }
        let pts: Vec<Complex64> = curve.iter().map(DiscPoint::to_complex).collect();
        let length = polyline_length(&pts);
        let budget = FRAC_PI_2 * (pts[pts.len() - 1] - pts[0]).norm() + LENGTH_BUDGET_TOL;
        if length > budget {
            return Err(Error::BudgetExceeded { length, budget });
        }
        Ok(Tube {
            curve,
            width,
            length,
        })
    }

    /// Vertices of the centerline.
    pub fn curve(&self) -> &[DiscPoint] {
        &self.curve
    }

    /// Full width; the tube covers `width / 2` on each side of the curve.
    pub fn width(&self) -> f64 {
        self.width
    }

    /// Arc length of the centerline.
    pub fn length(&self) -> f64 {
        self.length
    }

    /// First vertex.
    pub fn start(&self) -> DiscPoint {
        self.curve[0]
    }

    /// Last vertex.
    pub fn end(&self) -> DiscPoint {
        self.curve[self.curve.len() - 1]
    }

    /// Euclidean distance from `z` to the centerline.
    pub fn distance_to_point(&self, z: &DiscPoint) -> f64 {
        polyline_point_distance(&self.complex_curve(), z.to_complex())
    }

    /// Whether `z` lies inside the open tube.
    pub fn contains(&self, z: &DiscPoint) -> bool {
        self.distance_to_point(z) < self.width / 2.0
    }

    /// The same tube with every segment split into `factor` equal pieces.
    /// Geometry, width and length are unchanged; only the sampling density
    /// grows, which sharpens curve integrals computed from the vertices.
    pub fn refined(&self, factor: u32) -> Tube {
        let factor = factor.max(1) as usize;
        let mut curve = Vec::with_capacity((self.curve.len() - 1) * factor + 1);
        for w in self.curve.windows(2) {
            let a = w[0].to_complex();
            let b = w[1].to_complex();
            curve.push(w[0]);
            for k in 1..factor {
                let t = k as f64 / factor as f64;
                curve.push(DiscPoint::from_complex_saturating(a + (b - a) * t));
            }
        }
        curve.push(self.end());
        Tube {
            curve,
            width: self.width,
            length: self.length,
        }
    }

    fn complex_curve(&self) -> Vec<Complex64> {
        self.curve.iter().map(DiscPoint::to_complex).collect()
    }
}

fn tube_pair_meets(a: &Tube, b: &Tube) -> bool {
    let threshold = (a.width() + b.width()) / 2.0;
    let ca = a.complex_curve();
    let cb = b.complex_curve();
    if !Aabb::of(&ca).meets(&Aabb::of(&cb), threshold) {
        return false;
    }
    polylines_closer_than(&ca, &cb, threshold)
}

/// Pairwise disjointness test: returns the first pair of tubes whose
/// thickened curves meet (centerline distance below the sum of half-widths),
/// or `None` when every pair is disjoint.
pub fn tubes_disjoint(tubes: &[Tube]) -> Option<(usize, usize)> {
    for i in 0..tubes.len() {
        for j in (i + 1)..tubes.len() {
            if tube_pair_meets(&tubes[i], &tubes[j]) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Side of a window's half-plane bounding box. In half-plane coordinates the
/// window image sits inside a box `[-half_width, half_width] x (0, top]`;
/// `Left` and `Right` are the vertical sides, `Top` the deep side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowSide {
    Left,
    Right,
    Top,
}

/// A straight strip from an anchor point toward one side of a window: the
/// chord from the anchor to its orthogonal projection (in half-plane
/// coordinates) onto that side, thickened by `width`. Membership is the union
/// of open discs of radius `width` along the chord.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BorderStrip {
    anchor: DiscPoint,
    segment: (DiscPoint, DiscPoint),
    width: f64,
}

impl BorderStrip {
    /// The point the strip emanates from.
    pub fn anchor(&self) -> DiscPoint {
        self.anchor
    }

    /// Chord endpoints: the anchor and its projection on the window side.
    pub fn segment(&self) -> (DiscPoint, DiscPoint) {
        self.segment
    }

    /// Thickening radius around the chord.
    pub fn width(&self) -> f64 {
        self.width
    }

    /// Whether `z` lies within `width` of the chord.
    pub fn contains(&self, z: &DiscPoint) -> bool {
        point_segment_distance(
            z.to_complex(),
            self.segment.0.to_complex(),
            self.segment.1.to_complex(),
        ) < self.width
    }
}

/// Builds the strip from `a` to the chosen side of `w`, thickened by
/// `r * (1 - |a|)`.
///
/// The projection happens in the window's half-plane coordinates, where the
/// window image is boxed by two vertical sides and a horizontal top; the far
/// endpoint is mapped back to the disc. Fails when `a` is not inside `w` or
/// `r` is not a positive finite number.
pub fn border_strip(
    a: &DiscPoint,
    w: &CarlesonWindow,
    side: WindowSide,
    r: f64,
) -> Result<BorderStrip, Error> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidThreshold {
            name: "r",
            value: r,
        });
    }
    if !w.contains(a) {
        return Err(Error::AnchorOutsideWindow);
    }
    let direction = w.direction();
    let (x, y) = cayley_to_halfplane(a, &direction);
    let (half_width, top) = halfplane_window_box(w.height());
    let far = match side {
        WindowSide::Left => halfplane_to_disc(-half_width, y, &direction),
        WindowSide::Right => halfplane_to_disc(half_width, y, &direction),
        WindowSide::Top => halfplane_to_disc(x, top, &direction),
    };
    Ok(BorderStrip {
        anchor: *a,
        segment: (*a, far),
        width: r * a.dist_to_boundary(),
    })
}

/// How many of the listed indices land inside the strip (the anchor itself
/// counts when listed). Out-of-range indices are ignored.
pub fn count_points_in_strip(s: &PointSequence, part: &[usize], strip: &BorderStrip) -> usize {
    part.iter()
        .filter(|&&i| i < s.len() && strip.contains(&s.points()[i]))
        .count()
}

/// A scalar field on the disc, evaluated through a clamp to `[0, 1]`, with a
/// relative step size for central-difference gradients.
pub struct ScalarFieldSamples {
    evaluator: Box<dyn Fn(&DiscPoint) -> f64>,
    gradient_step: f64,
}

impl fmt::Debug for ScalarFieldSamples {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarFieldSamples")
            .field("gradient_step", &self.gradient_step)
            .finish_non_exhaustive()
    }
}

impl ScalarFieldSamples {
    /// Wraps an evaluator with the given relative gradient step.
    pub fn new(
        evaluator: impl Fn(&DiscPoint) -> f64 + 'static,
        gradient_step: f64,
    ) -> Result<Self, Error> {
        if !(gradient_step > 0.0) || !gradient_step.is_finite() {
            return Err(Error::InvalidThreshold {
                name: "gradient_step",
                value: gradient_step,
            });
        }
        Ok(ScalarFieldSamples {
            evaluator: Box::new(evaluator),
            gradient_step,
        })
    }

    /// Affine ramp of `field`: `lower` maps to 0, `upper` to 1, values
    /// clamped outside. Uses the default gradient step.
    pub fn ramp(
        field: impl Fn(&DiscPoint) -> f64 + 'static,
        lower: f64,
        upper: f64,
    ) -> Result<Self, Error> {
        if !lower.is_finite() || !upper.is_finite() || !(upper > lower) {
            return Err(Error::InvalidConfig(format!(
                "ramp needs finite lower < upper, got {lower} and {upper}"
            )));
        }
        let span = upper - lower;
        Self::new(
            move |z| ((field(z) - lower) / span).clamp(0.0, 1.0),
            DEFAULT_GRADIENT_STEP,
        )
    }

    /// Relative gradient step.
    pub fn gradient_step(&self) -> f64 {
        self.gradient_step
    }

    /// Field value at `z`, clamped to `[0, 1]`. Non-finite evaluations are
    /// reported rather than clamped.
    pub fn value(&self, z: &DiscPoint) -> Result<f64, Error> {
        let v = (self.evaluator)(z);
        if !v.is_finite() {
            return Err(Error::NonFiniteField {
                re: z.re(),
                im: z.im(),
            });
        }
        Ok(v.clamp(0.0, 1.0))
    }

    /// Gradient magnitude at `z` by central differences with absolute step
    /// `gradient_step * (1 - |z|)`, so the stencil shrinks near the boundary
    /// and never leaves the disc.
    pub fn gradient_magnitude(&self, z: &DiscPoint) -> Result<f64, Error> {
        let step = self.gradient_step * z.dist_to_boundary();
        let c = z.to_complex();
        let dx = Complex64::new(step, 0.0);
        let dy = Complex64::new(0.0, step);
        let xp = self.value(&DiscPoint::from_complex_saturating(c + dx))?;
        let xm = self.value(&DiscPoint::from_complex_saturating(c - dx))?;
        let yp = self.value(&DiscPoint::from_complex_saturating(c + dy))?;
        let ym = self.value(&DiscPoint::from_complex_saturating(c - dy))?;
        let g = ((xp - xm) / (2.0 * step)).hypot((yp - ym) / (2.0 * step));
        if !g.is_finite() {
            return Err(Error::NonFiniteField {
                re: z.re(),
                im: z.im(),
            });
        }
        Ok(g)
    }
}

/// Average over transverse offsets of the variation of `psi` along the
/// tube: the discrete line integral of the tangential gradient, computed as
/// the sum of `|psi|` differences between consecutive curve vertices.
///
/// Offsets are spread uniformly across the tube width and pinched smoothly to
/// zero over the first and last quarter of arclength, so every offset curve
/// runs exactly from the tube's start to its end. For a field that is 0 at
/// the start and 1 at the end, each offset integral is therefore at least 1;
/// values near 1 mean the tube crosses the field's transition cleanly. The
/// per-segment differences lower-bound the integral of the full gradient
/// magnitude and can only grow when segments are subdivided, so refining the
/// tube converges upward toward the exact crossing integral.
/// `transverse_samples == 1` integrates along the centerline only.
pub fn gradient_crossing_integral(
    psi: &ScalarFieldSamples,
    tube: &Tube,
    transverse_samples: usize,
) -> Result<f64, Error> {
    if transverse_samples == 0 {
        return Err(Error::InvalidCount(0));
    }
    let pts = tube.complex_curve();
    let total = polyline_length(&pts);
    if total == 0.0 {
        return Ok(0.0);
    }
    let n = pts.len();
    let mut fractions = Vec::with_capacity(n);
    fractions.push(0.0);
    let mut acc = 0.0;
    for w in pts.windows(2) {
        acc += (w[1] - w[0]).norm();
        fractions.push(acc / total);
    }
    let directions: Vec<Complex64> = pts
        .windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            let norm = d.norm();
            if norm == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                d / norm
            }
        })
        .collect();
    let normal_at = |i: usize| -> Complex64 {
        let d = if i == 0 {
            directions[0]
        } else if i == n - 1 {
            directions[n - 2]
        } else {
            let sum = directions[i - 1] + directions[i];
            if sum.norm() < 1e-12 {
                directions[i]
            } else {
                sum / sum.norm()
            }
        };
        Complex64::new(-d.im, d.re)
    };
    let half = tube.width() / 2.0;
    let mut sum = 0.0;
    for k in 0..transverse_samples {
        let u = if transverse_samples == 1 {
            0.0
        } else {
            (2 * k + 1) as f64 / transverse_samples as f64 - 1.0
        };
        let offset = half * u;
        let mut line = 0.0;
        let mut prev: Option<f64> = None;
        for i in 0..n {
            let t = fractions[i];
            let ramp = (t.min(1.0 - t) / 0.25).clamp(0.0, 1.0);
            let taper = ramp * ramp * (3.0 - 2.0 * ramp);
            let p = pts[i] + normal_at(i) * (offset * taper);
            let v = psi.value(&DiscPoint::from_complex_saturating(p))?;
            if let Some(q) = prev {
                line += (v - q).abs();
            }
            prev = Some(v);
        }
        sum += line;
    }
    Ok(sum / transverse_samples as f64)
}

/// Total depth mass of the listed indices: the sum of `1 - |a|`.
pub fn e_w_mass(s: &PointSequence, e_w: &[usize]) -> Result<f64, Error> {
    let mut sum = 0.0;
    for &i in e_w {
        sum += s.point(i)?.dist_to_boundary();
    }
    Ok(sum)
}

/// Depth mass of the partnered points against the tube-supported gradient
/// integral, with the default mesh resolution. See
/// [`f_w_mass_bound_with_mesh`].
pub fn f_w_mass_bound(
    s: &PointSequence,
    f_w: &[usize],
    tubes: &[Tube],
    psi: &ScalarFieldSamples,
    w_prime: &CarlesonWindow,
) -> Result<(f64, f64), Error> {
    f_w_mass_bound_with_mesh(s, f_w, tubes, psi, w_prime, DEFAULT_MESH_CELLS)
}

/// Left side `sum over f_w of (1 - |a|)` and right side
/// `(pi / (4 s)) * integral over w_prime of |grad psi| dm`, where `s` is the
/// smallest tube width relative to twice the shallower endpoint depth and the
/// integral is a midpoint-rule mesh over the window.
///
/// Preconditions checked here: the tubes are pairwise disjoint
/// ([`Error::TubesOverlap`]) and each lies inside `w_prime` with its full
/// width ([`Error::TubeOutsideWindow`]); an empty tube list with a nonempty
/// `f_w` is rejected, while empty/empty returns `(0, 0)`.
pub fn f_w_mass_bound_with_mesh(
    s: &PointSequence,
    f_w: &[usize],
    tubes: &[Tube],
    psi: &ScalarFieldSamples,
    w_prime: &CarlesonWindow,
    mesh_cells: usize,
) -> Result<(f64, f64), Error> {
    if mesh_cells == 0 {
        return Err(Error::InvalidCount(0));
    }
    let mut lhs = 0.0;
    for &i in f_w {
        lhs += s.point(i)?.dist_to_boundary();
    }
    if tubes.is_empty() {
        if f_w.is_empty() {
            return Ok((0.0, 0.0));
        }
        return Err(Error::InvalidConfig(
            "no tubes provided for a nonempty partnered set".into(),
        ));
    }
    if let Some((i, j)) = tubes_disjoint(tubes) {
        return Err(Error::TubesOverlap(i, j));
    }
    let h = w_prime.height();
    for (idx, tube) in tubes.iter().enumerate() {
        let worst_gap = tube
            .curve()
            .iter()
            .map(|v| w_prime.boundary_gap(v))
            .fold(0.0, f64::max);
        // The boundary gap is 1-Lipschitz in the point, so clearing it by
        // half a width keeps the whole thickened tube inside the window.
        if !(worst_gap + tube.width() / 2.0 < h) {
            return Err(Error::TubeOutsideWindow(idx));
        }
    }
    let s_param = tubes
        .iter()
        .map(|t| {
            let shallow = t
                .start()
                .dist_to_boundary()
                .min(t.end().dist_to_boundary());
            t.width() / (2.0 * shallow)
        })
        .fold(f64::INFINITY, f64::min);
    // Rotate the window onto the direction 1 (u = conj(zeta) * z preserves
    // area) and mesh the bounding rectangle [1-h, 1] x [-h, h] of the region
    // |1 - u| < h, keeping midpoints that land inside the window and disc.
    let zeta = w_prime.direction().to_complex();
    let du = h / mesh_cells as f64;
    let dv = 2.0 * h / mesh_cells as f64;
    let cell_area = du * dv;
    let one = Complex64::new(1.0, 0.0);
    let mut integral = 0.0;
    for i in 0..mesh_cells {
        let x = 1.0 - h + (i as f64 + 0.5) * du;
        for j in 0..mesh_cells {
            let y = -h + (j as f64 + 0.5) * dv;
            let u = Complex64::new(x, y);
            if u.norm() >= 1.0 || (one - u).norm() >= h {
                continue;
            }
            let z = DiscPoint::from_complex_saturating(zeta * u);
            integral += psi.gradient_magnitude(&z)? * cell_area;
        }
    }
    let rhs = PI / (4.0 * s_param) * integral;
    Ok((lhs, rhs))
}

/// Largest relative radius `r` (located by bisection) such that `predicate`
/// holds on sampled discs `D(a, r * (1 - |a|))` around every anchor.
///
/// Each disc is probed at its center and on three concentric rings of twelve
/// points. Returns `0.999` when there are no anchors (any radius works) and
/// `0.0` when even `r = 1e-6` fails.
pub fn stability_radius<F>(anchors: &[DiscPoint], predicate: F) -> f64
where
    F: Fn(&DiscPoint) -> bool,
{
    const R_MIN: f64 = 1e-6;
    const R_MAX: f64 = 0.999;
    if anchors.is_empty() {
        return R_MAX;
    }
    let feasible = |r: f64| -> bool {
        for a in anchors {
            if !predicate(a) {
                return false;
            }
            let c = a.to_complex();
            let scale = r * a.dist_to_boundary();
            for ring in [0.35, 0.7, 1.0] {
                for k in 0..12 {
                    let angle = 2.0 * PI * k as f64 / 12.0;
                    let z = DiscPoint::from_complex_saturating(
                        c + Complex64::from_polar(ring * scale, angle),
                    );
                    if !predicate(&z) {
                        return false;
                    }
                }
            }
        }
        true
    };
    if !feasible(R_MIN) {
        return 0.0;
    }
    if feasible(R_MAX) {
        return R_MAX;
    }
    let (mut lo, mut hi) = (R_MIN, R_MAX);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// One point the curve must keep clear of, with its required clearance.
struct Obstacle {
    center: Complex64,
    clearance: f64,
}

/// Splices a circular detour into `poly` around the obstacle. Returns `None`
/// when an endpoint sits inside the clearance disc or no clean entry/exit
/// chord exists.
fn detour_around(poly: &[Complex64], ob: &Obstacle) -> Option<Vec<Complex64>> {
    let endpoint_dist = (poly[0] - ob.center)
        .norm()
        .min((poly[poly.len() - 1] - ob.center).norm());
    if endpoint_dist <= ob.clearance {
        return None;
    }
    // Detour at a margin above the clearance, but never so far out that an
    // endpoint would end up inside the detour circle.
    let arc_r = (DETOUR_MARGIN * ob.clearance).min(0.5 * (ob.clearance + endpoint_dist));
    let mut crossings: Vec<(usize, Complex64)> = Vec::new();
    for (i, w) in poly.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let ab = b - a;
        let len2 = ab.norm_sqr();
        if len2 == 0.0 {
            continue;
        }
        let rel = a - ob.center;
        let bq = 2.0 * (rel.re * ab.re + rel.im * ab.im);
        let cq = rel.norm_sqr() - arc_r * arc_r;
        let disc = bq * bq - 4.0 * len2 * cq;
        if disc <= 0.0 {
            continue;
        }
        let sq = disc.sqrt();
        for t in [(-bq - sq) / (2.0 * len2), (-bq + sq) / (2.0 * len2)] {
            if (0.0..=1.0).contains(&t) {
                crossings.push((i, a + ab * t));
            }
        }
    }
    if crossings.len() < 2 {
        return None;
    }
    let (seg_in, entry) = crossings[0];
    let (seg_out, exit) = crossings[crossings.len() - 1];
    let angle_in = (entry - ob.center).arg();
    let angle_out = (exit - ob.center).arg();
    let mut sweep = angle_out - angle_in;
    while sweep > PI {
        sweep -= 2.0 * PI;
    }
    while sweep <= -PI {
        sweep += 2.0 * PI;
    }
    // Chords of the detour arc must themselves clear the obstacle: cap the
    // chord angle so the sagitta stays above the clearance, give up when the
    // geometry is too cramped for that.
    let ratio = 1.005 * ob.clearance / arc_r;
    if ratio >= 1.0 {
        return None;
    }
    let chord_angle = (2.0 * ratio.acos()).min(ARC_CHORD_ANGLE);
    let required = (sweep.abs() / chord_angle).ceil() as usize;
    if required > 512 {
        return None;
    }
    let n_seg = required.max(2);
    let mut out: Vec<Complex64> = Vec::with_capacity(poly.len() + n_seg + 2);
    out.extend_from_slice(&poly[..=seg_in]);
    for k in 0..=n_seg {
        let angle = angle_in + sweep * k as f64 / n_seg as f64;
        out.push(ob.center + Complex64::from_polar(arc_r, angle));
    }
    out.extend_from_slice(&poly[seg_out + 1..]);
    out.dedup_by(|a, b| (*a - *b).norm() < 1e-14);
    Some(out)
}

/// Iteratively reroutes `base` until every obstacle clearance holds, then
/// checks the length budget. `None` when an endpoint is trapped, the scene is
/// too cramped, or the pass limit runs out before the clearances settle.
fn route_polyline(base: Vec<Complex64>, obstacles: &[Obstacle], budget: f64) -> Option<Vec<Complex64>> {
    let mut poly = base;
    let passes = 16 + 4 * obstacles.len();
    for _ in 0..passes {
        let mut worst: Option<(usize, f64)> = None;
        for (k, ob) in obstacles.iter().enumerate() {
            let margin = polyline_point_distance(&poly, ob.center) - ob.clearance;
            if margin < 0.0 && worst.map_or(true, |(_, m)| margin < m) {
                worst = Some((k, margin));
            }
        }
        let Some((k, _)) = worst else {
            return if polyline_length(&poly) <= budget {
                Some(poly)
            } else {
                None
            };
        };
        poly = detour_around(&poly, &obstacles[k])?;
    }
    None
}

/// Maximum angular step when sampling a band arc.
const ARC_SAMPLE_ANGLE: f64 = PI / 64.0;

/// Base path from `a` to `b` through the radial band the pair spans: a
/// radial leg from the outer endpoint in to the inner radius, the circle arc
/// at that radius the shorter way around, and a radial leg back out.
///
/// A semicircle is exactly pi/2 times its chord, and every other
/// radius/angle combination is cheaper, so this route always fits the
/// `(pi/2) * |a - b|` length budget. It also never leaves the closed annulus
/// between the endpoints' radii, which is what keeps tubes of pairs from
/// different bands apart.
///
/// `bump` rescales the depth profile by `1 + (beta - 1) * sin(pi t)` along
/// arclength: `beta > 1` sinks the middle away from the boundary, `beta < 1`
/// pushes it closer. Used to offer alternative shapes when two tubes
/// collide.
fn band_route(a: Complex64, b: Complex64, bump: Option<f64>) -> Vec<Complex64> {
    let (ra, rb) = (a.norm(), b.norm());
    let theta_a = if ra == 0.0 { b.arg() } else { a.arg() };
    let theta_b = if rb == 0.0 { theta_a } else { b.arg() };
    let mut dtheta = theta_b - theta_a;
    if dtheta > PI {
        dtheta -= TAU;
    } else if dtheta <= -PI {
        dtheta += TAU;
    }
    let rc = ra.min(rb);
    let mut polar: Vec<(f64, f64)> = Vec::new();
    const LEG_STEPS: usize = 8;
    for k in 0..=LEG_STEPS {
        polar.push((ra + (rc - ra) * k as f64 / LEG_STEPS as f64, theta_a));
    }
    let arc_steps = (dtheta.abs() / ARC_SAMPLE_ANGLE).ceil().max(1.0) as usize;
    for k in 1..=arc_steps {
        polar.push((rc, theta_a + dtheta * k as f64 / arc_steps as f64));
    }
    for k in 1..=LEG_STEPS {
        polar.push((rc + (rb - rc) * k as f64 / LEG_STEPS as f64, theta_b));
    }
    let mut pts: Vec<Complex64> = polar
        .iter()
        .map(|&(r, th)| Complex64::from_polar(r, th))
        .collect();
    pts.dedup_by(|p, q| (*p - *q).norm() < 1e-15);
    if let Some(beta) = bump {
        let total = polyline_length(&pts);
        if total > 0.0 {
            let mut acc = 0.0;
            let mut prev = pts[0];
            for p in pts.iter_mut() {
                acc += (*p - prev).norm();
                prev = *p;
                let modulus = p.norm();
                if modulus == 0.0 {
                    continue;
                }
                let t = acc / total;
                let depth = (1.0 - modulus) * (1.0 + (beta - 1.0) * (PI * t).sin());
                let scaled = (1.0 - depth).clamp(0.0, 1.0 - 1e-12);
                *p = *p / modulus * scaled;
            }
        }
    }
    // Polar round trips and the bump's endpoint evaluations can drift the
    // ends by an ulp; the tube contract is that the curve runs exactly from
    // `a` to `b`.
    *pts.first_mut().expect("route has vertices") = a;
    *pts.last_mut().expect("route has vertices") = b;
    pts
}

/// Splits segments so consecutive vertices are at most `spacing` apart
/// (original vertices are kept), bounded by the global vertex cap.
fn resample_polyline(pts: &[Complex64], spacing: f64) -> Vec<Complex64> {
    let total = polyline_length(pts);
    let spacing = spacing
        .max(total / (MAX_TUBE_VERTICES as f64 - 1.0))
        .max(1e-15);
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let parts = ((w[1] - w[0]).norm() / spacing).ceil().max(1.0) as usize;
        for k in 0..parts {
            out.push(w[0] + (w[1] - w[0]) * (k as f64 / parts as f64));
        }
    }
    out.push(pts[pts.len() - 1]);
    out.dedup_by(|a, b| (*a - *b).norm() < 1e-15);
    out
}

fn index_of(s: &PointSequence, p: &DiscPoint, role: &str) -> Result<usize, Error> {
    s.points()
        .iter()
        .position(|q| q == p)
        .ok_or_else(|| Error::InvalidConfig(format!("tube {role} is not a sequence point")))
}

/// Builds a tube from `a` to `b` that stays clear of every other point of the
/// sequence.
///
/// The tube width is `width_param * min(1 - |a|, 1 - |b|)`. Every other point
/// `c` is treated as an obstacle with clearance
/// `max(delta * (1 - |c|) / 2, 0.525 * width)`, so neither the protected disc
/// around `c` nor the tube body can touch `c`. The curve starts as the band
/// route — radially in to the inner endpoint radius, around that circle arc
/// the shorter way, and radially out — and detours around obstacles on
/// circular arcs; routing that cannot settle within the `(pi/2) * |a - b|`
/// length budget reports [`Error::TubeUnreachable`]. Staying inside the
/// endpoints' radial band means tubes of pairs from disjoint bands never
/// meet, and for a `delta`-separated sequence with `width_param` at or below
/// `delta / 4` the route's obstacles leave room to detour.
pub fn build_tube(
    s: &PointSequence,
    a: &DiscPoint,
    b: &DiscPoint,
    width_param: f64,
    delta: f64,
) -> Result<Tube, Error> {
    let ia = index_of(s, a, "start")?;
    let ib = index_of(s, b, "end")?;
    build_tube_between(s, ia, ib, width_param, delta)
}

/// [`build_tube`] with the endpoints addressed by index.
pub fn build_tube_between(
    s: &PointSequence,
    ia: usize,
    ib: usize,
    width_param: f64,
    delta: f64,
) -> Result<Tube, Error> {
    build_tube_shaped(s, ia, ib, width_param, delta, None)
}

fn build_tube_shaped(
    s: &PointSequence,
    ia: usize,
    ib: usize,
    width_param: f64,
    delta: f64,
    bump: Option<f64>,
) -> Result<Tube, Error> {
    if !(width_param > 0.0) || !width_param.is_finite() {
        return Err(Error::InvalidThreshold {
            name: "width_param",
            value: width_param,
        });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidDelta(delta));
    }
    let n = s.len();
    if ia >= n {
        return Err(Error::IndexOutOfRange { index: ia, len: n });
    }
    if ib >= n {
        return Err(Error::IndexOutOfRange { index: ib, len: n });
    }
    if ia == ib {
        return Err(Error::InvalidConfig(
            "tube endpoints must be distinct sequence points".into(),
        ));
    }
    let pa = s.points()[ia];
    let pb = s.points()[ib];
    let width = width_param * pa.dist_to_boundary().min(pb.dist_to_boundary());
    let obstacles: Vec<Obstacle> = s
        .points()
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != ia && i != ib)
        .map(|(_, c)| Obstacle {
            center: c.to_complex(),
            clearance: (delta * c.dist_to_boundary() / 2.0).max(OBSTACLE_WIDTH_FACTOR * width),
        })
        .collect();
    let base = band_route(pa.to_complex(), pb.to_complex(), bump);
    let budget = FRAC_PI_2 * (pb.to_complex() - pa.to_complex()).norm() + LENGTH_BUDGET_TOL;
    let routed =
        route_polyline(base, &obstacles, budget).ok_or(Error::TubeUnreachable(ia, ib))?;
    let curve: Vec<DiscPoint> = resample_polyline(&routed, width / 4.0)
        .into_iter()
        .map(DiscPoint::from_complex_saturating)
        .collect();
    match Tube::new(curve, width) {
        Ok(tube) => {
            // Conversions back to disc points saturate near the boundary; if
            // that perturbed a detour, reject rather than return a tube that
            // silently violates a clearance.
            let pts = tube.complex_curve();
            for ob in &obstacles {
                if polyline_point_distance(&pts, ob.center) < ob.clearance - 1e-12 {
                    return Err(Error::TubeUnreachable(ia, ib));
                }
            }
            Ok(tube)
        }
        Err(Error::BudgetExceeded { .. }) => Err(Error::TubeUnreachable(ia, ib)),
        Err(e) => Err(e),
    }
}

/// Alternative depth profiles offered when two tubes collide, tried in order.
const CONFLICT_BUMPS: [f64; 6] = [1.18, 0.85, 1.4, 0.7, 1.7, 0.55];

/// Builds one tube per matched partner pair of the partition; each entry is
/// `(from_index, to_index, tube)` with the tube running from the first-part
/// point to its partner.
///
/// Partner maps may legitimately share targets (several walk points can name
/// the same partner), and two tubes that share an endpoint can never be
/// disjoint, so the partner pairs are first reduced to a deterministic
/// maximal matching: unordered pairs sorted by index, each kept when both of
/// its endpoints are still unused. Tubes that collide afterwards are rebuilt
/// with bumped depth profiles until the family is pairwise disjoint; a
/// collision that survives every variant is left in place for
/// [`tubes_disjoint`] to report rather than papered over.
pub fn build_partition_tubes(
    s: &PointSequence,
    p: &Partition,
    width_param: f64,
    delta: f64,
) -> Result<Vec<(usize, usize, Tube)>, Error> {
    if p.len() != s.len() {
        return Err(Error::PartitionMismatch {
            partition_len: p.len(),
            sequence_len: s.len(),
        });
    }
    let n = s.len();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        if let Some(t) = p.phi_of(i) {
            if t != i && t < n {
                pairs.push((i, t));
            }
        }
        if let Some(t) = p.psi_of(i) {
            if t != i && t < n {
                pairs.push((t, i));
            }
        }
    }
    pairs.sort_by_key(|&(a, b)| (a.min(b), a.max(b)));
    pairs.dedup_by_key(|&mut (a, b)| (a.min(b), a.max(b)));
    let mut used = vec![false; n];
    let mut matched: Vec<(usize, usize)> = Vec::new();
    for (a, b) in pairs {
        if !used[a] && !used[b] {
            used[a] = true;
            used[b] = true;
            matched.push((a, b));
        }
    }
    let mut tubes: Vec<(usize, usize, Tube)> = Vec::with_capacity(matched.len());
    for &(a, b) in &matched {
        tubes.push((a, b, build_tube_shaped(s, a, b, width_param, delta, None)?));
    }
    let mut variant = vec![0usize; tubes.len()];
    let mut guard = 4 * tubes.len() + 8;
    loop {
        let collision = first_collision(&tubes);
        let Some((i, j)) = collision else { break };
        if guard == 0 {
            break;
        }
        guard -= 1;
        if !(rebump(s, &mut tubes, &mut variant, j, width_param, delta)
            || rebump(s, &mut tubes, &mut variant, i, width_param, delta))
        {
            break;
        }
    }
    Ok(tubes)
}

fn first_collision(tubes: &[(usize, usize, Tube)]) -> Option<(usize, usize)> {
    for i in 0..tubes.len() {
        for j in (i + 1)..tubes.len() {
            if tube_pair_meets(&tubes[i].2, &tubes[j].2) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Tries the remaining bump shapes for tube `k` until one clears every other
/// tube; reports whether a clean variant was installed.
fn rebump(
    s: &PointSequence,
    tubes: &mut [(usize, usize, Tube)],
    variant: &mut [usize],
    k: usize,
    width_param: f64,
    delta: f64,
) -> bool {
    while variant[k] < CONFLICT_BUMPS.len() {
        let beta = CONFLICT_BUMPS[variant[k]];
        variant[k] += 1;
        let Ok(candidate) = build_tube_shaped(s, tubes[k].0, tubes[k].1, width_param, delta, Some(beta))
        else {
            continue;
        };
        let clean = tubes
            .iter()
            .enumerate()
            .all(|(m, (_, _, other))| m == k || !tube_pair_meets(&candidate, other));
        if clean {
            tubes[k].2 = candidate;
            return true;
        }
    }
    false
}
