//! Separation, Carleson-measure norm, Blaschke products, and the classical
//! interpolation criterion for finite point sequences.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geometry::{
    annulus_index, pseudo_hyperbolic_distance, BoundaryDirection, CarlesonWindow, DiscPoint,
};

/// Relative bump applied to candidate window heights so that the point
/// defining a height lands strictly inside the window.
const HEIGHT_EPS: f64 = 1e-9;

/// Below this modulus a Blaschke value at its own point is reported as a
/// degenerate denominator instead of being inverted.
const DENOMINATOR_FLOOR: f64 = 1e-300;

/// A finite, nonempty list of pairwise distinct disc points, with cached
/// moduli and arguments.
///
/// The JSON form is an array of `[re, im]` pairs; parsing re-validates every
/// invariant (disc membership, no exact duplicates, nonempty).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<DiscPoint>", into = "Vec<DiscPoint>")]
pub struct PointSequence {
    points: Vec<DiscPoint>,
    moduli: Vec<f64>,
    arguments: Vec<f64>,
}

impl PointSequence {
    pub fn new(points: Vec<DiscPoint>) -> Result<Self, Error> {
        if points.is_empty() {
            return Err(Error::EmptySequence);
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if points[i] == points[j] {
                    return Err(Error::DuplicatePoint(i, j));
                }
            }
        }
        let moduli = points.iter().map(|p| p.modulus()).collect();
        let arguments = points.iter().map(|p| p.argument()).collect();
        Ok(PointSequence {
            points,
            moduli,
            arguments,
        })
    }

    /// Parse the shared sequence-file format: a JSON array of [re, im] pairs.
    pub fn from_json_str(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(Error::from)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.points).expect("points always serialize")
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the constructor rejects empty sequences
    }

    pub fn points(&self) -> &[DiscPoint] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Result<&DiscPoint, Error> {
        self.points.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: self.points.len(),
        })
    }

    pub fn modulus(&self, index: usize) -> f64 {
        self.moduli[index]
    }

    pub fn argument(&self, index: usize) -> f64 {
        self.arguments[index]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DiscPoint> {
        self.points.iter()
    }

    /// Band index of every point for the given ratio.
    pub fn annulus_indices(&self, gamma: f64) -> Result<Vec<u32>, Error> {
        self.points
            .iter()
            .map(|p| annulus_index(p, gamma))
            .collect()
    }
}

impl TryFrom<Vec<DiscPoint>> for PointSequence {
    type Error = Error;

    fn try_from(points: Vec<DiscPoint>) -> Result<Self, Error> {
        PointSequence::new(points)
    }
}

impl From<PointSequence> for Vec<DiscPoint> {
    fn from(s: PointSequence) -> Vec<DiscPoint> {
        s.points
    }
}

/// Minimum pairwise pseudo-hyperbolic distance and the pair attaining it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub delta_p: f64,
    /// Absent for singletons (empty minimum, value 1 by convention).
    pub witness_pair: Option<(usize, usize)>,
}

/// Result of the candidate-window scan for the Carleson norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlesonReport {
    pub norm_estimate: f64,
    /// Absent only when no candidate window exists (e.g. a lone origin).
    pub witness_window: Option<CarlesonWindow>,
    pub candidate_count: usize,
}

/// Histogram of points per band and its maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusHistogram {
    pub counts: BTreeMap<u32, usize>,
    pub max_count: usize,
}

/// Exact minimum of d_P over all pairs; 1 with no witness for a singleton.
pub fn separation_constant(s: &PointSequence) -> SeparationReport {
    let mut best = 1.0f64;
    let mut witness = None;
    for i in 0..s.len() {
        for j in (i + 1)..s.len() {
            // d < 1 always holds, so the first pair installs a witness.
            let d = pseudo_hyperbolic_distance(&s.points[i], &s.points[j]);
            if d < best {
                best = d;
                witness = Some((i, j));
            }
        }
    }
    SeparationReport {
        delta_p: best,
        witness_pair: witness,
    }
}

/// True iff the Euclidean discs D(a, delta (1 - |a|)) are pairwise disjoint,
/// checked by center distance strictly above the sum of radii.
pub fn is_delta_separated(s: &PointSequence, delta: f64) -> Result<bool, Error> {
    if !delta.is_finite() || delta <= 0.0 || delta >= 1.0 {
        return Err(Error::InvalidDelta(delta));
    }
    for i in 0..s.len() {
        for j in (i + 1)..s.len() {
            let a = &s.points[i];
            let b = &s.points[j];
            let gap = (a.re() - b.re()).hypot(a.im() - b.im());
            let radii = delta * (a.dist_to_boundary() + b.dist_to_boundary());
            if gap <= radii {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Largest delta (strictly) below which `is_delta_separated` holds; 0 for
/// sequences with coincident-to-rounding pairs, capped at 0.999.
pub fn max_separation_delta(s: &PointSequence) -> f64 {
    let mut best = 0.999f64;
    for i in 0..s.len() {
        for j in (i + 1)..s.len() {
            let a = &s.points[i];
            let b = &s.points[j];
            let gap = (a.re() - b.re()).hypot(a.im() - b.im());
            let denom = a.dist_to_boundary() + b.dist_to_boundary();
            best = best.min(gap / denom);
        }
    }
    best.max(0.0)
}

/// Scan the finite candidate family (directions of the points and of the
/// pairwise midpoints; heights just above each point's window gap) and return
/// the maximal mass/height ratio with its witness window.
///
/// Ties resolve toward the smallest height, then the smallest angle, so the
/// result is independent of scan order.
pub fn carleson_norm(s: &PointSequence) -> CarlesonReport {
    let mut angles: Vec<f64> = Vec::new();
    for (i, p) in s.points.iter().enumerate() {
        if s.moduli[i] > 0.0 {
            angles.push(p.argument());
        }
    }
    for i in 0..s.len() {
        for j in (i + 1)..s.len() {
            let mid = Complex64::new(
                (s.points[i].re() + s.points[j].re()) / 2.0,
                (s.points[i].im() + s.points[j].im()) / 2.0,
            );
            if mid.norm() > 0.0 {
                let a = mid.im.atan2(mid.re).rem_euclid(std::f64::consts::TAU);
                angles.push(if a >= std::f64::consts::TAU { 0.0 } else { a });
            }
        }
    }
    angles.sort_by(f64::total_cmp);
    angles.dedup();

    let mut best_ratio = 0.0f64;
    let mut best_window: Option<CarlesonWindow> = None;
    let mut candidates = 0usize;
    for &angle in &angles {
        let dir = BoundaryDirection::new(angle);
        let zeta = dir.to_complex();
        let gaps: Vec<f64> = s
            .points
            .iter()
            .map(|p| (Complex64::new(1.0, 0.0) - zeta.conj() * p.to_complex()).norm())
            .collect();
        let mut heights: Vec<f64> = gaps
            .iter()
            .map(|g| g * (1.0 + HEIGHT_EPS))
            .filter(|h| *h > 0.0 && *h < 1.0)
            .collect();
        heights.sort_by(f64::total_cmp);
        heights.dedup();
        for &h in &heights {
            candidates += 1;
            let mass: f64 = gaps
                .iter()
                .zip(&s.moduli)
                .filter(|(g, _)| **g < h)
                .map(|(_, m)| 1.0 - *m)
                .fold(0.0, |acc, t| acc + t);
            let ratio = mass / h;
            let replace = match &best_window {
                None => ratio > 0.0,
                Some(w) => {
                    ratio > best_ratio
                        || (ratio == best_ratio
                            && (h < w.height()
                                || (h == w.height() && angle < w.direction().angle())))
                }
            };
            if replace {
                best_ratio = ratio;
                best_window = Some(CarlesonWindow::new(dir, h).expect("height validated"));
            }
        }
    }
    CarlesonReport {
        norm_estimate: best_ratio,
        witness_window: best_window,
        candidate_count: candidates,
    }
}

/// Count points per band and the maximal band occupancy.
pub fn points_per_annulus(s: &PointSequence, gamma: f64) -> Result<AnnulusHistogram, Error> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for idx in s.annulus_indices(gamma)? {
        *counts.entry(idx).or_insert(0) += 1;
    }
    let max_count = counts.values().copied().max().unwrap_or(0);
    Ok(AnnulusHistogram { counts, max_count })
}

/// m / (gamma (1 - gamma)): the mass bound per unit height implied by at
/// most m points per band.
pub fn carleson_bound_from_annuli(m: usize, gamma: f64) -> Result<f64, Error> {
    if m < 1 {
        return Err(Error::InvalidCount(m));
    }
    if !gamma.is_finite() || gamma <= 0.0 || gamma >= 1.0 {
        return Err(Error::InvalidGamma(gamma));
    }
    Ok(m as f64 / (gamma * (1.0 - gamma)))
}

fn blaschke_factor(a: &DiscPoint, z: Complex64) -> Result<Complex64, Error> {
    let za = a.to_complex();
    if a.modulus() == 0.0 {
        // Continuity limit of (a - z)/(1 - conj(a) z) * |a|/a as a -> 0
        // along the positive axis.
        return Ok(-z);
    }
    let den = Complex64::new(1.0, 0.0) - za.conj() * z;
    if den.norm() < DENOMINATOR_FLOOR {
        return Err(Error::DegenerateDenominator(den.norm()));
    }
    Ok((za - z) / den * Complex64::from_polar(1.0, -a.argument()))
}

/// Product over all points except `excluded` of the normalized factor
/// (a - z)/(1 - conj(a) z) * |a|/a. Empty products are 1.
pub fn blaschke_product(
    s: &PointSequence,
    excluded: Option<usize>,
    z: &DiscPoint,
) -> Result<Complex64, Error> {
    if let Some(e) = excluded {
        if e >= s.len() {
            return Err(Error::IndexOutOfRange {
                index: e,
                len: s.len(),
            });
        }
    }
    let zz = z.to_complex();
    let mut prod = Complex64::new(1.0, 0.0);
    for (i, a) in s.points.iter().enumerate() {
        if Some(i) == excluded {
            continue;
        }
        prod *= blaschke_factor(a, zz)?;
    }
    Ok(prod)
}

/// Product of normalized factors over the given subset of indices only.
pub fn blaschke_product_over(
    s: &PointSequence,
    zeros: &[usize],
    z: &DiscPoint,
) -> Result<Complex64, Error> {
    let zz = z.to_complex();
    let mut prod = Complex64::new(1.0, 0.0);
    for &i in zeros {
        let a = s.point(i)?;
        prod *= blaschke_factor(a, zz)?;
    }
    Ok(prod)
}

/// inf over a of the product of d_P(a, b) over b != a; 1 for singletons.
pub fn carleson_condition_inf(s: &PointSequence) -> f64 {
    if s.len() == 1 {
        return 1.0;
    }
    let mut inf = f64::INFINITY;
    for i in 0..s.len() {
        let mut prod = 1.0f64;
        for j in 0..s.len() {
            if i != j {
                prod *= pseudo_hyperbolic_distance(&s.points[i], &s.points[j]);
            }
        }
        inf = inf.min(prod);
    }
    inf
}

/// The normalized witness rho_a(z) = B_a(z) / B_a(a), which is 1 at a and 0
/// at every other sequence point.
pub fn dual_bound_witness(
    s: &PointSequence,
    a: usize,
    z: &DiscPoint,
) -> Result<Complex64, Error> {
    let at_a = blaschke_product(s, Some(a), s.point(a)?)?;
    if at_a.norm() < DENOMINATOR_FLOOR {
        return Err(Error::DegenerateDenominator(at_a.norm()));
    }
    let at_z = blaschke_product(s, Some(a), z)?;
    Ok(at_z / at_a)
}

/// Classical proxy: the sequence is treated as interpolating when the
/// condition infimum clears the configured threshold.
pub fn is_interpolating(s: &PointSequence, threshold: f64) -> Result<bool, Error> {
    if !threshold.is_finite() || threshold <= 0.0 {
        return Err(Error::InvalidThreshold {
            name: "threshold",
            value: threshold,
        });
    }
    Ok(carleson_condition_inf(s) >= threshold)
}
