//! Bipartite partitions of a point sequence with partner maps: the
//! nearest-neighbor walk construction, the per-half-disc alternating
//! construction, and the per-annulus restricted construction, together with
//! verification and window classification.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geometry::{CarlesonWindow, Metric};
use crate::sequence::PointSequence;

/// Tolerance for re-checking nearest-neighbor distances.
const NN_TOL: f64 = 1e-12;

/// Tolerance for the depth-ratio bound of per-annulus partitions.
const RATIO_TOL: f64 = 1e-9;

/// Which side of the bipartition a point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    A,
    B,
}

impl Part {
    pub fn opposite(self) -> Part {
        match self {
            Part::A => Part::B,
            Part::B => Part::A,
        }
    }
}

/// Which construction produced a partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionKind {
    /// Nearest-neighbor walk over the whole sequence.
    Good,
    /// Alternating scan per half-disc and band.
    Hoffman,
    /// Nearest-neighbor walks run independently inside each band.
    RestrictedGood,
}

/// A two-part split of sequence indices with partial partner maps
/// `phi` (A to B) and `psi` (B to A).
///
/// Deserialized values are not semantically validated; run
/// [`verify_partition`] to re-check every construction postcondition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    kind: PartitionKind,
    /// Metric used by walk-based constructions; absent for the scan-based one.
    metric: Option<Metric>,
    /// Band ratio for the band-aware constructions; absent otherwise.
    gamma: Option<f64>,
    membership: Vec<Part>,
    phi: Vec<Option<usize>>,
    psi: Vec<Option<usize>>,
}

impl Partition {
    /// Assemble a partition from raw parts, checking only that the three
    /// vectors agree in length. Semantic checks live in [`verify_partition`].
    pub fn from_parts(
        kind: PartitionKind,
        metric: Option<Metric>,
        gamma: Option<f64>,
        membership: Vec<Part>,
        phi: Vec<Option<usize>>,
        psi: Vec<Option<usize>>,
    ) -> Result<Self, Error> {
        if phi.len() != membership.len() || psi.len() != membership.len() {
            return Err(Error::PartitionMismatch {
                partition_len: phi.len().max(psi.len()),
                sequence_len: membership.len(),
            });
        }
        Ok(Partition {
            kind,
            metric,
            gamma,
            membership,
            phi,
            psi,
        })
    }

    pub fn kind(&self) -> PartitionKind {
        self.kind
    }

    pub fn metric(&self) -> Option<Metric> {
        self.metric
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn len(&self) -> usize {
        self.membership.len()
    }

    pub fn is_empty(&self) -> bool {
        self.membership.is_empty()
    }

    pub fn membership(&self) -> &[Part] {
        &self.membership
    }

    pub fn phi(&self) -> &[Option<usize>] {
        &self.phi
    }

    pub fn psi(&self) -> &[Option<usize>] {
        &self.psi
    }

    /// Part of index `i`; `None` when out of range.
    pub fn part_of(&self, i: usize) -> Option<Part> {
        self.membership.get(i).copied()
    }

    /// phi(i); `None` when undefined or out of range.
    pub fn phi_of(&self, i: usize) -> Option<usize> {
        self.phi.get(i).copied().flatten()
    }

    /// psi(i); `None` when undefined or out of range.
    pub fn psi_of(&self, i: usize) -> Option<usize> {
        self.psi.get(i).copied().flatten()
    }

    pub fn part_a(&self) -> Vec<usize> {
        self.indices_of(Part::A)
    }

    pub fn part_b(&self) -> Vec<usize> {
        self.indices_of(Part::B)
    }

    fn indices_of(&self, part: Part) -> Vec<usize> {
        self.membership
            .iter()
            .enumerate()
            .filter(|(_, p)| **p == part)
            .map(|(i, _)| i)
            .collect()
    }

    /// All defined (a, phi(a)) pairs in index order.
    pub fn phi_pairs(&self) -> Vec<(usize, usize)> {
        self.phi
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.map(|t| (i, t)))
            .collect()
    }

    /// All defined (b, psi(b)) pairs in index order.
    pub fn psi_pairs(&self) -> Vec<(usize, usize)> {
        self.psi
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.map(|t| (i, t)))
            .collect()
    }
}

/// Indices of part-A points inside a window, split by whether their phi
/// partner landed in the same window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowClassification {
    /// A-points in the window whose partner is undefined, a self-link, or
    /// outside the window.
    pub e_w: Vec<usize>,
    /// A-points in the window whose partner is also in the window.
    pub f_w: Vec<usize>,
}

impl WindowClassification {
    /// Sum of 1 - |a| over the unpartnered indices.
    pub fn e_w_mass(&self, s: &PointSequence) -> f64 {
        self.e_w
            .iter()
            .map(|&i| s.points()[i].dist_to_boundary())
            .fold(0.0, |acc, d| acc + d)
    }

    /// Sum of 1 - |a| over the partnered indices.
    pub fn f_w_mass(&self, s: &PointSequence) -> f64 {
        self.f_w
            .iter()
            .map(|&i| s.points()[i].dist_to_boundary())
            .fold(0.0, |acc, d| acc + d)
    }
}

/// One failed postcondition found by [`verify_partition`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    LengthMismatch {
        partition_len: usize,
        sequence_len: usize,
    },
    MissingParameter {
        name: &'static str,
    },
    MapOnWrongPart {
        index: usize,
    },
    TargetOnSamePart {
        from: usize,
        to: usize,
    },
    TargetOutOfRange {
        from: usize,
        to: usize,
    },
    SelfMap {
        index: usize,
    },
    MissingPartner {
        index: usize,
    },
    NotNearestNeighbor {
        from: usize,
        to: usize,
        distance: f64,
        nearest_distance: f64,
    },
    CellMismatch {
        from: usize,
        to: usize,
    },
    ArgumentDecreases {
        from: usize,
        to: usize,
    },
    AnnulusMismatch {
        from: usize,
        to: usize,
    },
    DepthRatioOutOfBounds {
        from: usize,
        to: usize,
        ratio: f64,
    },
    SingletonNotInA {
        index: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LengthMismatch {
                partition_len,
                sequence_len,
            } => write!(
                f,
                "partition covers {partition_len} indices but the sequence has {sequence_len}"
            ),
            Violation::MissingParameter { name } => {
                write!(f, "partition kind requires parameter `{name}`")
            }
            Violation::MapOnWrongPart { index } => {
                write!(f, "index {index} carries a map that its part does not allow")
            }
            Violation::TargetOnSamePart { from, to } => {
                write!(f, "map {from} -> {to} stays inside one part")
            }
            Violation::TargetOutOfRange { from, to } => {
                write!(f, "map {from} -> {to} leaves the index range")
            }
            Violation::SelfMap { index } => write!(f, "index {index} maps to itself"),
            Violation::MissingPartner { index } => {
                write!(f, "index {index} should have a partner but has none")
            }
            Violation::NotNearestNeighbor {
                from,
                to,
                distance,
                nearest_distance,
            } => write!(
                f,
                "map {from} -> {to} has distance {distance} but the nearest neighbor \
                 is at {nearest_distance}"
            ),
            Violation::CellMismatch { from, to } => write!(
                f,
                "map {from} -> {to} crosses a half-disc or band boundary"
            ),
            Violation::ArgumentDecreases { from, to } => {
                write!(f, "map {from} -> {to} decreases the argument")
            }
            Violation::AnnulusMismatch { from, to } => {
                write!(f, "map {from} -> {to} crosses a band boundary")
            }
            Violation::DepthRatioOutOfBounds { from, to, ratio } => write!(
                f,
                "map {from} -> {to} has boundary-depth ratio {ratio} outside the band range"
            ),
            Violation::SingletonNotInA { index } => write!(
                f,
                "index {index} is alone in its band and must sit in part A"
            ),
        }
    }
}

/// Run nearest-neighbor walks over `indices` (local view of `s`).
///
/// Returns the part and the partner target of every local index; requires at
/// least two indices. One shared distance matrix drives every comparison, so
/// equality chains between stored values are exact.
fn nearest_neighbor_walks(
    s: &PointSequence,
    indices: &[usize],
    metric: Metric,
) -> (Vec<Part>, Vec<usize>) {
    let n = indices.len();
    debug_assert!(n >= 2, "walks need at least two points");
    let pts = s.points();

    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = metric.distance(&pts[indices[i]], &pts[indices[j]]);
            dist[i * n + j] = v;
            dist[j * n + i] = v;
        }
    }
    let d = |i: usize, j: usize| dist[i * n + j];

    // All nearest neighbors of each point, ties included.
    let nn: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let best = (0..n)
                .filter(|&j| j != i)
                .map(|j| d(i, j))
                .fold(f64::INFINITY, f64::min);
            (0..n).filter(|&j| j != i && d(i, j) == best).collect()
        })
        .collect();

    // Deterministic tie order: (modulus, argument, input index).
    let tie_cmp = |x: usize, y: usize| {
        let (gx, gy) = (indices[x], indices[y]);
        s.modulus(gx)
            .total_cmp(&s.modulus(gy))
            .then(s.argument(gx).total_cmp(&s.argument(gy)))
            .then(gx.cmp(&gy))
    };

    let mut part: Vec<Option<Part>> = vec![None; n];
    let mut target: Vec<Option<usize>> = vec![None; n];
    let mut in_walk = vec![false; n];

    loop {
        // Each walk starts at the unassigned point closest to the origin;
        // every metric here grows with the modulus, so the tie order itself
        // ranks by that distance.
        let Some(base) = (0..n)
            .filter(|&i| part[i].is_none())
            .min_by(|&x, &y| tie_cmp(x, y))
        else {
            break;
        };

        let mut walk = vec![base];
        in_walk[base] = true;
        let attach_target = loop {
            let cur = *walk.last().expect("walk is nonempty");
            let k = walk.len() - 1;
            if k >= 1 && nn[cur].contains(&walk[k - 1]) {
                // Mutual nearest neighbors: the walk ends on a perfect pair.
                break None;
            }
            let fresh = nn[cur]
                .iter()
                .copied()
                .filter(|&j| part[j].is_none() && !in_walk[j])
                .min_by(|&x, &y| tie_cmp(x, y));
            if let Some(next) = fresh {
                walk.push(next);
                in_walk[next] = true;
                continue;
            }
            // No fresh neighbor and the previous point is not nearest, so
            // every nearest neighbor was assigned by an earlier walk: attach.
            // (A nearest neighbor inside this walk would force the previous
            // point into the nearest set too, because consecutive walk
            // distances never increase; that case broke out above.)
            let assigned = nn[cur]
                .iter()
                .copied()
                .filter(|&j| part[j].is_some())
                .min_by(|&x, &y| tie_cmp(x, y))
                .expect("nearest set resolves to previous, fresh, or assigned");
            break Some(assigned);
        };

        let last_pos = walk.len() - 1;
        match attach_target {
            None => {
                // Forward parity from the walk base.
                for (pos, &w) in walk.iter().enumerate() {
                    part[w] = Some(if pos % 2 == 0 { Part::A } else { Part::B });
                }
                target[walk[last_pos]] = Some(walk[last_pos - 1]);
            }
            Some(t) => {
                // The walk end pairs against the attach target, so parity
                // flows backward from the target's part.
                let t_part = part[t].expect("attach target is assigned");
                for (pos, &w) in walk.iter().enumerate() {
                    let flips = last_pos - pos + 1;
                    part[w] = Some(if flips % 2 == 1 { t_part.opposite() } else { t_part });
                }
                target[walk[last_pos]] = Some(t);
            }
        }
        for pos in 0..last_pos {
            target[walk[pos]] = Some(walk[pos + 1]);
        }
    }

    let part = part.into_iter().map(|p| p.expect("walks cover all points")).collect();
    let target = target
        .into_iter()
        .map(|t| t.expect("walks give every point a partner"))
        .collect();
    (part, target)
}

/// Write walk results (local parts and targets) into global membership and
/// map vectors.
fn apply_walk(
    indices: &[usize],
    parts: &[Part],
    targets: &[usize],
    membership: &mut [Part],
    phi: &mut [Option<usize>],
    psi: &mut [Option<usize>],
) {
    for (li, &gi) in indices.iter().enumerate() {
        membership[gi] = parts[li];
        let gt = indices[targets[li]];
        match parts[li] {
            Part::A => phi[gi] = Some(gt),
            Part::B => psi[gi] = Some(gt),
        }
    }
}

/// Split a sequence by nearest-neighbor walks under the chosen metric.
///
/// Every defined partner is an exact nearest neighbor of its source. A
/// one-point sequence becomes part A with a self-link recording the
/// degenerate pairing.
pub fn good_partition(s: &PointSequence, metric: Metric) -> Partition {
    let n = s.len();
    let mut membership = vec![Part::A; n];
    let mut phi: Vec<Option<usize>> = vec![None; n];
    let mut psi: Vec<Option<usize>> = vec![None; n];
    if n == 1 {
        phi[0] = Some(0);
    } else {
        let indices: Vec<usize> = (0..n).collect();
        let (parts, targets) = nearest_neighbor_walks(s, &indices, metric);
        apply_walk(&indices, &parts, &targets, &mut membership, &mut phi, &mut psi);
    }
    Partition {
        kind: PartitionKind::Good,
        metric: Some(metric),
        gamma: None,
        membership,
        phi,
        psi,
    }
}

/// Split a sequence by half-disc and band, pairing points by an alternating
/// scan in order of increasing argument (then modulus).
///
/// Inside each cell the scan assigns a0, b0, a1, b1, ...; each a_j maps to
/// the b_j that follows it, so defined partners never decrease the argument.
/// An odd point left at the end of a cell stays in A without a partner.
pub fn hoffman_partition(s: &PointSequence, gamma: f64) -> Result<Partition, Error> {
    let bands = s.annulus_indices(gamma)?;
    let mut cells: BTreeMap<(u8, u32), Vec<usize>> = BTreeMap::new();
    for i in 0..s.len() {
        let half = if s.argument(i) < PI { 0u8 } else { 1u8 };
        cells.entry((half, bands[i])).or_default().push(i);
    }

    let mut membership = vec![Part::A; s.len()];
    let mut phi: Vec<Option<usize>> = vec![None; s.len()];
    let mut psi: Vec<Option<usize>> = vec![None; s.len()];
    for cell in cells.values_mut() {
        cell.sort_by(|&x, &y| {
            s.argument(x)
                .total_cmp(&s.argument(y))
                .then(s.modulus(x).total_cmp(&s.modulus(y)))
                .then(x.cmp(&y))
        });
        for pair in cell.chunks(2) {
            match *pair {
                [a, b] => {
                    membership[a] = Part::A;
                    membership[b] = Part::B;
                    phi[a] = Some(b);
                    psi[b] = Some(a);
                }
                [a] => membership[a] = Part::A,
                _ => unreachable!("chunks(2) yields one- or two-element slices"),
            }
        }
    }
    Ok(Partition {
        kind: PartitionKind::Hoffman,
        metric: None,
        gamma: Some(gamma),
        membership,
        phi,
        psi,
    })
}

/// Run the nearest-neighbor walk construction independently inside each
/// band, under the hyperbolic metric.
///
/// Points alone in their band land in part A without a partner; partners
/// always share a band, so their boundary depths differ by a factor inside
/// (gamma, 1/gamma).
pub fn restricted_good_partition(s: &PointSequence, gamma: f64) -> Result<Partition, Error> {
    let bands = s.annulus_indices(gamma)?;
    let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &b) in bands.iter().enumerate() {
        groups.entry(b).or_default().push(i);
    }

    let mut membership = vec![Part::A; s.len()];
    let mut phi: Vec<Option<usize>> = vec![None; s.len()];
    let mut psi: Vec<Option<usize>> = vec![None; s.len()];
    for group in groups.values() {
        if group.len() < 2 {
            continue; // the lone point keeps its part-A default, unpartnered
        }
        let (parts, targets) = nearest_neighbor_walks(s, group, Metric::Hyperbolic);
        apply_walk(group, &parts, &targets, &mut membership, &mut phi, &mut psi);
    }
    Ok(Partition {
        kind: PartitionKind::RestrictedGood,
        metric: Some(Metric::Hyperbolic),
        gamma: Some(gamma),
        membership,
        phi,
        psi,
    })
}

/// Split the part-A points inside a window by whether their partner also
/// lies in the window.
///
/// A missing, out-of-range, or self partner counts as "not in the window",
/// which routes the point to `e_w`.
pub fn classify_window_points(
    s: &PointSequence,
    p: &Partition,
    w: &CarlesonWindow,
) -> Result<WindowClassification, Error> {
    if p.len() != s.len() {
        return Err(Error::PartitionMismatch {
            partition_len: p.len(),
            sequence_len: s.len(),
        });
    }
    let pts = s.points();
    let mut e_w = Vec::new();
    let mut f_w = Vec::new();
    for i in 0..s.len() {
        if p.membership[i] != Part::A || !w.contains(&pts[i]) {
            continue;
        }
        let partner_inside = match p.phi[i] {
            Some(t) if t != i && t < s.len() => w.contains(&pts[t]),
            _ => false,
        };
        if partner_inside {
            f_w.push(i);
        } else {
            e_w.push(i);
        }
    }
    Ok(WindowClassification { e_w, f_w })
}

/// Re-check every postcondition of the partition's construction against the
/// sequence; a clean partition yields an empty list.
pub fn verify_partition(s: &PointSequence, p: &Partition) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = s.len();
    if p.membership.len() != n || p.phi.len() != n || p.psi.len() != n {
        out.push(Violation::LengthMismatch {
            partition_len: p.membership.len(),
            sequence_len: n,
        });
        return out;
    }

    // A one-point walk partition records its degenerate pairing as a
    // self-link; every structural rule below exempts exactly that case.
    let singleton_walk = p.kind == PartitionKind::Good && n == 1;

    let mut check_structure = |index: usize, to: Option<usize>, source: Part| {
        let Some(t) = to else { return };
        if p.membership[index] != source {
            out.push(Violation::MapOnWrongPart { index });
        }
        if t >= n {
            out.push(Violation::TargetOutOfRange { from: index, to: t });
            return;
        }
        if t == index {
            if !singleton_walk {
                out.push(Violation::SelfMap { index });
            }
            return;
        }
        if p.membership[t] != source.opposite() {
            out.push(Violation::TargetOnSamePart { from: index, to: t });
        }
    };
    for i in 0..n {
        check_structure(i, p.phi[i], Part::A);
        check_structure(i, p.psi[i], Part::B);
    }

    // A map survives structural checks when it stays in range and is not a
    // (non-exempt) self-link; only those are measured below.
    let usable = |i: usize, t: usize| t < n && (t != i || singleton_walk);
    let partner = |i: usize| match p.membership[i] {
        Part::A => p.phi[i],
        Part::B => p.psi[i],
    };

    match p.kind {
        PartitionKind::Good => {
            let Some(metric) = p.metric else {
                out.push(Violation::MissingParameter { name: "metric" });
                return out;
            };
            let pts = s.points();
            for i in 0..n {
                match partner(i) {
                    None => {
                        if n >= 2 {
                            out.push(Violation::MissingPartner { index: i });
                        }
                    }
                    Some(t) if usable(i, t) && t != i => {
                        let dt = metric.distance(&pts[i], &pts[t]);
                        let best = (0..n)
                            .filter(|&c| c != i)
                            .map(|c| metric.distance(&pts[i], &pts[c]))
                            .fold(f64::INFINITY, f64::min);
                        if dt > best + NN_TOL {
                            out.push(Violation::NotNearestNeighbor {
                                from: i,
                                to: t,
                                distance: dt,
                                nearest_distance: best,
                            });
                        }
                    }
                    Some(_) => {}
                }
            }
        }
        PartitionKind::Hoffman => {
            let Some(gamma) = p.gamma else {
                out.push(Violation::MissingParameter { name: "gamma" });
                return out;
            };
            let Ok(bands) = s.annulus_indices(gamma) else {
                out.push(Violation::MissingParameter { name: "gamma" });
                return out;
            };
            let same_cell = |i: usize, t: usize| {
                (s.argument(i) < PI) == (s.argument(t) < PI) && bands[i] == bands[t]
            };
            for i in 0..n {
                if let Some(t) = p.phi[i] {
                    if usable(i, t) && t != i {
                        if !same_cell(i, t) {
                            out.push(Violation::CellMismatch { from: i, to: t });
                        }
                        if s.argument(t) < s.argument(i) {
                            out.push(Violation::ArgumentDecreases { from: i, to: t });
                        }
                    }
                }
                if let Some(t) = p.psi[i] {
                    if usable(i, t) && t != i && !same_cell(i, t) {
                        out.push(Violation::CellMismatch { from: i, to: t });
                    }
                }
            }
        }
        PartitionKind::RestrictedGood => {
            let Some(gamma) = p.gamma else {
                out.push(Violation::MissingParameter { name: "gamma" });
                return out;
            };
            let Ok(bands) = s.annulus_indices(gamma) else {
                out.push(Violation::MissingParameter { name: "gamma" });
                return out;
            };
            let metric = p.metric.unwrap_or(Metric::Hyperbolic);
            let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
            for (i, &b) in bands.iter().enumerate() {
                groups.entry(b).or_default().push(i);
            }
            let pts = s.points();
            for group in groups.values() {
                if group.len() == 1 {
                    let i = group[0];
                    if p.membership[i] != Part::A {
                        out.push(Violation::SingletonNotInA { index: i });
                    }
                    continue;
                }
                for &i in group {
                    match partner(i) {
                        None => out.push(Violation::MissingPartner { index: i }),
                        Some(t) if usable(i, t) && t != i => {
                            if bands[i] != bands[t] {
                                out.push(Violation::AnnulusMismatch { from: i, to: t });
                                continue;
                            }
                            // Nearest neighbor with competitors limited to
                            // the same band.
                            let dt = metric.distance(&pts[i], &pts[t]);
                            let best = group
                                .iter()
                                .copied()
                                .filter(|&c| c != i)
                                .map(|c| metric.distance(&pts[i], &pts[c]))
                                .fold(f64::INFINITY, f64::min);
                            if dt > best + NN_TOL {
                                out.push(Violation::NotNearestNeighbor {
                                    from: i,
                                    to: t,
                                    distance: dt,
                                    nearest_distance: best,
                                });
                            }
                            let ratio =
                                pts[i].dist_to_boundary() / pts[t].dist_to_boundary();
                            if ratio < gamma - RATIO_TOL || ratio > 1.0 / gamma + RATIO_TOL {
                                out.push(Violation::DepthRatioOutOfBounds {
                                    from: i,
                                    to: t,
                                    ratio,
                                });
                            }
                        }
                        Some(_) => {}
                    }
                }
            }
        }
    }
    out
}
