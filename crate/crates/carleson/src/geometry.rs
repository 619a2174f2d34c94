//! Points, metrics, windows, annuli and conformal maps of the open unit disc.
//!
//! Everything downstream (sequences, partitions, tubes) is built on the types
//! and distance functions in this module. All operations here are pure.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::Error;

/// Largest `f64` strictly below 1; used to clamp quantities that are < 1 in
/// exact arithmetic but may round up to 1.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// A point of the open unit disc. The invariant |z| < 1 holds by construction;
/// serialization round-trips through `[re, im]` pairs and re-validates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct DiscPoint {
    re: f64,
    im: f64,
}

impl DiscPoint {
    /// Validates |z| < 1 strictly (non-finite coordinates are rejected too).
    pub fn new(re: f64, im: f64) -> Result<Self, Error> {
        let modulus = re.hypot(im);
        if !modulus.is_finite() || modulus >= 1.0 {
            return Err(Error::PointOutsideDisc { re, im, modulus });
        }
        Ok(DiscPoint { re, im })
    }

    pub fn origin() -> Self {
        DiscPoint { re: 0.0, im: 0.0 }
    }

    pub fn from_polar(modulus: f64, angle: f64) -> Result<Self, Error> {
        Self::new(modulus * angle.cos(), modulus * angle.sin())
    }

    /// Accept a complex value that is inside the disc in exact arithmetic but
    /// may have drifted to |z| >= 1 by rounding; pull it back just inside
    /// instead of failing.
    pub(crate) fn from_complex_saturating(z: Complex64) -> Self {
        let m = z.norm();
        if m.is_finite() && m < 1.0 {
            DiscPoint { re: z.re, im: z.im }
        } else if m.is_finite() {
            let scale = BELOW_ONE / m;
            DiscPoint {
                re: z.re * scale,
                im: z.im * scale,
            }
        } else {
            DiscPoint { re: 0.0, im: 0.0 }
        }
    }

    pub fn re(&self) -> f64 {
        self.re
    }

    pub fn im(&self) -> f64 {
        self.im
    }

    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }

    /// Angle in [0, 2pi); the origin reports 0.
    pub fn argument(&self) -> f64 {
        if self.re == 0.0 && self.im == 0.0 {
            return 0.0;
        }
        let a = self.im.atan2(self.re).rem_euclid(TAU);
        if a >= TAU {
            0.0
        } else {
            a
        }
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// 1 - |z|, the Euclidean gap to the unit circle (in (0, 1]).
    pub fn dist_to_boundary(&self) -> f64 {
        1.0 - self.modulus()
    }
}

impl TryFrom<(f64, f64)> for DiscPoint {
    type Error = Error;

    fn try_from(value: (f64, f64)) -> Result<Self, Error> {
        DiscPoint::new(value.0, value.1)
    }
}

impl From<DiscPoint> for (f64, f64) {
    fn from(p: DiscPoint) -> (f64, f64) {
        (p.re, p.im)
    }
}

/// A unimodular boundary direction, stored as an angle so that the
/// represented complex number always has modulus exactly 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct BoundaryDirection {
    angle: f64,
}

impl BoundaryDirection {
    /// Wraps any finite angle into [0, 2pi).
    pub fn new(angle: f64) -> Self {
        let mut a = angle.rem_euclid(TAU);
        // rem_euclid of a tiny negative can round up to exactly TAU.
        if !a.is_finite() || a >= TAU {
            a = 0.0;
        }
        BoundaryDirection { angle: a }
    }

    /// The direction z/|z| of a nonzero point.
    pub fn from_point(p: &DiscPoint) -> Result<Self, Error> {
        if p.re == 0.0 && p.im == 0.0 {
            return Err(Error::DirectionFromOrigin);
        }
        Ok(Self::new(p.im.atan2(p.re)))
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::from_polar(1.0, self.angle)
    }
}

impl From<f64> for BoundaryDirection {
    fn from(angle: f64) -> Self {
        BoundaryDirection::new(angle)
    }
}

impl From<BoundaryDirection> for f64 {
    fn from(d: BoundaryDirection) -> f64 {
        d.angle
    }
}

/// The boundary box W(zeta, h) = { z : |1 - conj(zeta) z| < h }.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarlesonWindow {
    direction: BoundaryDirection,
    height: f64,
}

impl CarlesonWindow {
    pub fn new(direction: BoundaryDirection, height: f64) -> Result<Self, Error> {
        if !height.is_finite() || height <= 0.0 || height >= 1.0 {
            return Err(Error::InvalidWindowHeight(height));
        }
        Ok(CarlesonWindow { direction, height })
    }

    pub fn direction(&self) -> BoundaryDirection {
        self.direction
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    /// Strict membership test |1 - conj(zeta) z| < h.
    pub fn contains(&self, z: &DiscPoint) -> bool {
        self.boundary_gap(z) < self.height
    }

    /// |1 - conj(zeta) z|: the quantity the membership test compares to h.
    pub fn boundary_gap(&self, z: &DiscPoint) -> f64 {
        let zeta = self.direction.to_complex();
        (Complex64::new(1.0, 0.0) - zeta.conj() * z.to_complex()).norm()
    }

    /// Same direction, height scaled by `factor`; fails when the scaled
    /// height leaves (0, 1).
    pub fn enlarged(&self, factor: f64) -> Result<Self, Error> {
        Self::new(self.direction, self.height * factor)
    }
}

/// The index n of the band gamma^{n+1} < 1 - |z| <= gamma^n, together with
/// the ratio that defines it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusIndex {
    n: u32,
    gamma: f64,
}

impl AnnulusIndex {
    pub fn of(z: &DiscPoint, gamma: f64) -> Result<Self, Error> {
        let n = annulus_index(z, gamma)?;
        Ok(AnnulusIndex { n, gamma })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn contains(&self, z: &DiscPoint) -> bool {
        let depth = z.dist_to_boundary();
        let hi = self.gamma.powi(self.n as i32);
        let lo = self.gamma.powi(self.n as i32 + 1);
        lo < depth && depth <= hi
    }
}

fn check_gamma(gamma: f64) -> Result<(), Error> {
    if !gamma.is_finite() || gamma <= 0.0 || gamma >= 1.0 {
        return Err(Error::InvalidGamma(gamma));
    }
    Ok(())
}

/// The unique n >= 0 with gamma^{n+1} < 1 - |z| <= gamma^n.
///
/// A log-based first guess is corrected by direct comparisons, so the band
/// inequalities hold exactly for the returned index.
pub fn annulus_index(z: &DiscPoint, gamma: f64) -> Result<u32, Error> {
    check_gamma(gamma)?;
    let depth = z.dist_to_boundary();
    let mut n = (depth.ln() / gamma.ln()).floor().max(0.0) as i64;
    // Ensure the lower edge: gamma^{n+1} < depth.
    let mut guard = 0;
    while gamma.powi(n as i32 + 1) >= depth {
        n += 1;
        guard += 1;
        if guard > 4096 {
            break;
        }
    }
    // Ensure the upper edge: depth <= gamma^n.
    while n > 0 && gamma.powi(n as i32) < depth {
        n -= 1;
    }
    Ok(n as u32)
}

/// |(a - b) / (1 - conj(b) a)|, in [0, 1). Symmetric, 0 iff a = b.
pub fn pseudo_hyperbolic_distance(a: &DiscPoint, b: &DiscPoint) -> f64 {
    let (za, zb) = (a.to_complex(), b.to_complex());
    let num = (za - zb).norm();
    let den = (Complex64::new(1.0, 0.0) - zb.conj() * za).norm();
    // den >= 1 - |a||b| > 0; the clamp only matters for points so close to
    // the boundary that rounding pushes the quotient to 1.
    (num / den).min(BELOW_ONE)
}

/// atanh of the pseudo-hyperbolic distance; strictly increasing in it.
pub fn hyperbolic_distance(a: &DiscPoint, b: &DiscPoint) -> f64 {
    pseudo_hyperbolic_distance(a, b).atanh()
}

/// The involutive automorphism z -> (c - z)/(1 - conj(c) z) of the disc.
pub fn disc_automorphism(c: &DiscPoint, z: &DiscPoint) -> DiscPoint {
    let (zc, zz) = (c.to_complex(), z.to_complex());
    let w = (zc - zz) / (Complex64::new(1.0, 0.0) - zc.conj() * zz);
    DiscPoint::from_complex_saturating(w)
}

/// The distance functions the partition constructions can run on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    PseudoHyperbolic,
    Hyperbolic,
    Euclidean,
}

impl Metric {
    pub fn distance(&self, a: &DiscPoint, b: &DiscPoint) -> f64 {
        match self {
            Metric::PseudoHyperbolic => pseudo_hyperbolic_distance(a, b),
            Metric::Hyperbolic => hyperbolic_distance(a, b),
            Metric::Euclidean => (a.re - b.re).hypot(a.im - b.im),
        }
    }
}

/// Map the disc to the upper half plane, rotated so that `direction` goes to
/// the origin's side of the boundary: w = i (1 - u) / (1 + u) with
/// u = conj(zeta) z. Then z = 0 lands at (0, 1), the boundary point zeta at
/// (0, 0), and y is comparable to 1 - |z| (ratio within [1/2, 2]) whenever
/// |1 - conj(zeta) z| < 1/2.
pub fn cayley_to_halfplane(z: &DiscPoint, direction: &BoundaryDirection) -> (f64, f64) {
    let u = direction.to_complex().conj() * z.to_complex();
    let w = Complex64::i() * (Complex64::new(1.0, 0.0) - u) / (Complex64::new(1.0, 0.0) + u);
    (w.re, w.im)
}

/// Inverse of `cayley_to_halfplane`: any (x, y) with y > 0 maps back into
/// the disc.
pub(crate) fn halfplane_to_disc(x: f64, y: f64, direction: &BoundaryDirection) -> DiscPoint {
    let w = Complex64::new(x, y);
    let u = (Complex64::i() - w) / (Complex64::i() + w);
    DiscPoint::from_complex_saturating(direction.to_complex() * u)
}

/// Tight bounding box of the half-plane image of W(zeta, h): returns
/// (half_width, top) so the image lies in [-half_width, half_width] x (0, top].
/// The image itself is the upper half of the disc with center
/// (0, h^2/(4 - h^2)) and radius 2h/(4 - h^2).
pub(crate) fn halfplane_window_box(height: f64) -> (f64, f64) {
    let half_width = 2.0 * height / (4.0 - height * height);
    let top = height / (2.0 - height);
    (half_width, top)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(re: f64, im: f64) -> DiscPoint {
        DiscPoint::new(re, im).unwrap()
    }

    #[test]
    fn disc_point_rejects_boundary_and_outside() {
        assert!(DiscPoint::new(1.0, 0.0).is_err());
        assert!(DiscPoint::new(0.8, 0.7).is_err());
        assert!(DiscPoint::new(f64::NAN, 0.0).is_err());
        assert!(DiscPoint::new(0.999999, 0.0).is_ok());
    }

    #[test]
    fn disc_point_serde_round_trip() {
        let p = pt(0.3, -0.4);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, "[0.3,-0.4]");
        let back: DiscPoint = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<DiscPoint>("[1.5,0.0]").is_err());
    }

    #[test]
    fn argument_is_wrapped_and_origin_is_zero() {
        assert_eq!(DiscPoint::origin().argument(), 0.0);
        let p = pt(0.0, -0.5);
        assert!((p.argument() - 3.0 * std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn pseudo_distance_identity_and_origin() {
        let a = pt(0.37, -0.21);
        assert_eq!(pseudo_hyperbolic_distance(&a, &a), 0.0);
        let b = pt(0.3, 0.4);
        assert!((pseudo_hyperbolic_distance(&DiscPoint::origin(), &b) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pseudo_distance_half_and_minus_half() {
        let d = pseudo_hyperbolic_distance(&pt(0.5, 0.0), &pt(-0.5, 0.0));
        assert!((d - 0.8).abs() < 1e-15);
    }

    #[test]
    fn hyperbolic_distance_values() {
        let d = hyperbolic_distance(&pt(0.5, 0.0), &pt(-0.5, 0.0));
        // atanh(0.8) = ln 3
        assert!((d - 3.0_f64.ln()).abs() < 1e-12);
        let t = 1.0_f64.tanh();
        let d1 = hyperbolic_distance(&DiscPoint::origin(), &pt(t, 0.0));
        assert!((d1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn window_membership_examples() {
        let zeta = BoundaryDirection::new(0.0);
        let w = CarlesonWindow::new(zeta, 0.5).unwrap();
        assert!(w.contains(&pt(0.9, 0.0)));
        assert!(!w.contains(&DiscPoint::origin()));
        let small = CarlesonWindow::new(zeta, 0.05).unwrap();
        assert!(!small.contains(&pt(0.9, 0.0)));
    }

    #[test]
    fn window_rejects_bad_heights() {
        let zeta = BoundaryDirection::new(0.0);
        assert!(CarlesonWindow::new(zeta, 0.0).is_err());
        assert!(CarlesonWindow::new(zeta, 1.0).is_err());
        assert!(CarlesonWindow::new(zeta, f64::NAN).is_err());
    }

    #[test]
    fn window_nesting() {
        let zeta = BoundaryDirection::new(1.3);
        let small = CarlesonWindow::new(zeta, 0.2).unwrap();
        let large = CarlesonWindow::new(zeta, 0.6).unwrap();
        for k in 0..200 {
            let p = pt(0.7 * ((k as f64) * 0.37).cos(), 0.7 * ((k as f64) * 0.37).sin());
            if small.contains(&p) {
                assert!(large.contains(&p));
            }
        }
    }

    #[test]
    fn annulus_examples() {
        assert_eq!(annulus_index(&DiscPoint::origin(), 0.5).unwrap(), 0);
        assert_eq!(annulus_index(&pt(0.6, 0.0), 0.5).unwrap(), 1);
        // Band edges belong to the band whose top they close: depth = g^j
        // satisfies g^{j+1} < depth <= g^j, so the index is exactly j.
        assert_eq!(annulus_index(&pt(0.875, 0.0), 0.5).unwrap(), 3);
        assert_eq!(annulus_index(&pt(0.75, 0.0), 0.5).unwrap(), 2);
        assert!(annulus_index(&pt(0.5, 0.0), 1.2).is_err());
    }

    #[test]
    fn annulus_index_struct_contains_its_point() {
        for k in 1..60 {
            let m = k as f64 / 61.0;
            let p = pt(m, 0.0);
            let idx = AnnulusIndex::of(&p, 0.37).unwrap();
            assert!(idx.contains(&p), "band must contain its own point");
        }
    }

    #[test]
    fn automorphism_examples() {
        let c = pt(0.31, 0.12);
        let at_c = disc_automorphism(&c, &c);
        assert!(at_c.modulus() < 1e-15);
        let at_0 = disc_automorphism(&c, &DiscPoint::origin());
        assert!((at_0.re() - c.re()).abs() < 1e-15 && (at_0.im() - c.im()).abs() < 1e-15);
        let v = disc_automorphism(&pt(0.5, 0.0), &pt(-0.5, 0.0));
        assert!((v.re() - 0.8).abs() < 1e-15 && v.im().abs() < 1e-15);
    }

    #[test]
    fn cayley_origin_lands_at_unit_height() {
        let (x, y) = cayley_to_halfplane(&DiscPoint::origin(), &BoundaryDirection::new(0.0));
        assert!(x.abs() < 1e-15);
        assert!((y - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cayley_height_positive_everywhere() {
        let dir = BoundaryDirection::new(2.1);
        for k in 0..1000 {
            let t = k as f64 * 0.618_033_988_749_894_8;
            let m = (t - t.floor()) * 0.9999;
            let ang = k as f64 * 0.137;
            let p = DiscPoint::from_polar(m, ang).unwrap();
            let (_, y) = cayley_to_halfplane(&p, &dir);
            assert!(y > 0.0);
        }
    }

    #[test]
    fn cayley_height_comparable_to_boundary_gap_near_direction() {
        let dir = BoundaryDirection::new(0.7);
        let w = CarlesonWindow::new(dir, 0.5).unwrap();
        let mut checked = 0usize;
        for i in 0..250 {
            for j in 0..80 {
                let m = 0.5 + 0.4999 * (j as f64 / 79.0);
                let ang = dir.angle() + (i as f64 / 249.0 - 0.5) * 1.2;
                let p = DiscPoint::from_polar(m, ang).unwrap();
                if !w.contains(&p) {
                    continue;
                }
                let (_, y) = cayley_to_halfplane(&p, &dir);
                let ratio = y / p.dist_to_boundary();
                assert!(
                    (0.5 - 1e-12..=2.0).contains(&ratio),
                    "ratio {ratio} out of range"
                );
                checked += 1;
            }
        }
        assert!(checked > 1000, "mesh too sparse: {checked}");
    }

    #[test]
    fn halfplane_round_trip() {
        let dir = BoundaryDirection::new(4.0);
        for k in 0..200 {
            let p = DiscPoint::from_polar(0.95 * (k as f64 / 200.0), k as f64 * 0.7).unwrap();
            let (x, y) = cayley_to_halfplane(&p, &dir);
            let back = halfplane_to_disc(x, y, &dir);
            assert!((back.re() - p.re()).abs() < 1e-12);
            assert!((back.im() - p.im()).abs() < 1e-12);
        }
    }

    #[test]
    fn window_box_bounds_the_window_image() {
        let dir = BoundaryDirection::new(1.0);
        let h = 0.3;
        let w = CarlesonWindow::new(dir, h).unwrap();
        let (half_width, top) = halfplane_window_box(h);
        for i in 0..300 {
            for j in 0..40 {
                let m = 0.5 + 0.4999 * (j as f64 / 39.0);
                let ang = dir.angle() + (i as f64 / 299.0 - 0.5) * 0.9;
                let p = DiscPoint::from_polar(m, ang).unwrap();
                if !w.contains(&p) {
                    continue;
                }
                let (x, y) = cayley_to_halfplane(&p, &dir);
                assert!(x.abs() <= half_width + 1e-12);
                assert!(y > 0.0 && y <= top + 1e-12);
            }
        }
        // z = 0 is outside every window with h < 1, and indeed (0,1) is above
        // the box for small h.
        assert!(top < 1.0);
    }

    #[test]
    fn direction_wrapping() {
        let d = BoundaryDirection::new(-std::f64::consts::FRAC_PI_2);
        assert!((d.angle() - 3.0 * std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let tiny = BoundaryDirection::new(-1e-20);
        assert!(tiny.angle() < TAU);
        assert!(BoundaryDirection::from_point(&DiscPoint::origin()).is_err());
    }

    proptest! {
        #[test]
        fn moebius_invariance(
            (ra, ta) in (0.0..0.95f64, 0.0..TAU),
            (rb, tb) in (0.0..0.95f64, 0.0..TAU),
            (rc, tc) in (0.0..0.95f64, 0.0..TAU),
        ) {
            let a = DiscPoint::from_polar(ra, ta).unwrap();
            let b = DiscPoint::from_polar(rb, tb).unwrap();
            let c = DiscPoint::from_polar(rc, tc).unwrap();
            let d0 = pseudo_hyperbolic_distance(&a, &b);
            let d1 = pseudo_hyperbolic_distance(
                &disc_automorphism(&c, &a),
                &disc_automorphism(&c, &b),
            );
            prop_assert!((d0 - d1).abs() < 1e-12);
        }

        #[test]
        fn strong_triangle_inequality(
            (ra, ta) in (0.0..0.95f64, 0.0..TAU),
            (rb, tb) in (0.0..0.95f64, 0.0..TAU),
            (rc, tc) in (0.0..0.95f64, 0.0..TAU),
        ) {
            let a = DiscPoint::from_polar(ra, ta).unwrap();
            let b = DiscPoint::from_polar(rb, tb).unwrap();
            let c = DiscPoint::from_polar(rc, tc).unwrap();
            let dab = pseudo_hyperbolic_distance(&a, &b);
            let dbc = pseudo_hyperbolic_distance(&b, &c);
            let dac = pseudo_hyperbolic_distance(&a, &c);
            prop_assert!(dac <= (dab + dbc) / (1.0 + dab * dbc) + 1e-12);
        }

        #[test]
        fn automorphism_is_involutive(
            (rc, tc) in (0.0..0.95f64, 0.0..TAU),
            (rz, tz) in (0.0..0.95f64, 0.0..TAU),
        ) {
            let c = DiscPoint::from_polar(rc, tc).unwrap();
            let z = DiscPoint::from_polar(rz, tz).unwrap();
            let w = disc_automorphism(&c, &disc_automorphism(&c, &z));
            prop_assert!((w.re() - z.re()).abs() < 1e-12);
            prop_assert!((w.im() - z.im()).abs() < 1e-12);
        }

        #[test]
        fn annulus_bands_tile_the_depth_axis(m in 0.0..0.9999f64, g in 0.05..0.95f64) {
            let p = DiscPoint::new(m, 0.0).unwrap();
            let n = annulus_index(&p, g).unwrap();
            let depth = p.dist_to_boundary();
            prop_assert!(g.powi(n as i32 + 1) < depth);
            prop_assert!(depth <= g.powi(n as i32));
        }
    }
}
