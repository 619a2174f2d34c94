//! End-to-end experiment harness: sequence generators, a staged pipeline
//! that measures separation, Carleson mass, partition quality, evidence
//! functions and window estimates, and a serializable report with one
//! pass/fail clause per claim.

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geometry::{BoundaryDirection, CarlesonWindow, DiscPoint, Metric};
use crate::partition::{
    classify_window_points, good_partition, hoffman_partition, restricted_good_partition,
    verify_partition, Partition, PartitionKind,
};
use crate::sequence::{
    blaschke_product_over, carleson_bound_from_annuli, carleson_condition_inf, carleson_norm,
    is_delta_separated, is_interpolating, max_separation_delta, points_per_annulus,
    separation_constant, AnnulusHistogram, CarlesonReport, PointSequence, SeparationReport,
};
use crate::tube::{
    build_partition_tubes, f_w_mass_bound_with_mesh, stability_radius, tubes_disjoint,
    ScalarFieldSamples, Tube,
};

/// Named numeric tolerances for the pipeline's checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Additive slack on the annulus-count Carleson bound.
    pub annulus_bound_tol: f64,
    /// A sequence whose measured norm exceeds this cap is not treated as
    /// Carleson.
    pub carleson_norm_cap: f64,
    /// Relative slack on the per-window unpartnered-mass bound.
    pub e_w_slack: f64,
    /// Relative slack on the per-window partnered-mass estimate.
    pub f_w_slack: f64,
    /// Condition-infimum level above which a sequence counts as
    /// interpolating.
    pub interpolating_threshold: f64,
    /// Minimum acceptable gradient crossing integral per tube.
    pub crossing_min: f64,
    /// Mesh resolution (cells per axis) for window integrals.
    pub mesh_cells: usize,
    /// Transverse offsets per tube for crossing integrals.
    pub transverse_samples: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            annulus_bound_tol: 1e-6,
            carleson_norm_cap: 10.0,
            e_w_slack: 0.05,
            f_w_slack: 0.05,
            interpolating_threshold: 1e-3,
            crossing_min: 0.99,
            mesh_cells: 128,
            transverse_samples: 8,
        }
    }
}

/// Everything an experiment run needs besides the sequence itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Annulus ratio for band decompositions.
    pub gamma: f64,
    /// Separation parameter to certify; `None` measures the best one.
    pub delta_hint: Option<f64>,
    /// Exponent relating the two evidence levels; must exceed 1.
    pub kappa: f64,
    /// Claimed lower level of the evidence function on the second part;
    /// `None` uses the measured level.
    pub eta: Option<f64>,
    /// Claimed upper level of the evidence function on the first part;
    /// `None` uses 0, which the exact product attains.
    pub tau: Option<f64>,
    /// Which partition construction the pipeline builds.
    pub partition_kind: PartitionKind,
    /// Number of dyadic window heights swept: `h = 2^-j` for `j = 1..=levels`.
    pub window_levels: usize,
    /// Numeric tolerances for every check.
    pub tolerances: Tolerances,
    /// Seed echoed into the report so runs are reproducible.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            gamma: 0.5,
            delta_hint: None,
            kappa: 2.0,
            eta: None,
            tau: None,
            partition_kind: PartitionKind::RestrictedGood,
            window_levels: 12,
            tolerances: Tolerances::default(),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// Checks the parameter ranges and the level ordering
    /// `tau < eta^kappa < eta < 1/2` whenever explicit levels are supplied.
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidGamma(self.gamma));
        }
        if !(self.kappa > 1.0) || !self.kappa.is_finite() {
            return Err(Error::InvalidThreshold {
                name: "kappa",
                value: self.kappa,
            });
        }
        if let Some(d) = self.delta_hint {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::InvalidDelta(d));
            }
        }
        if self.window_levels < 1 || self.window_levels > 40 {
            return Err(Error::InvalidCount(self.window_levels));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta < 0.5) {
                return Err(Error::InvalidThreshold {
                    name: "eta",
                    value: eta,
                });
            }
            let tau = self.tau.unwrap_or(0.0);
            if !(tau >= 0.0) || !(tau < eta.powf(self.kappa)) {
                return Err(Error::InvalidConfig(format!(
                    "tau = {tau} must satisfy 0 <= tau < eta^kappa = {}",
                    eta.powf(self.kappa)
                )));
            }
        } else if let Some(tau) = self.tau {
            if !(tau >= 0.0) || !tau.is_finite() {
                return Err(Error::InvalidThreshold {
                    name: "tau",
                    value: tau,
                });
            }
        }
        if self.tolerances.mesh_cells == 0 {
            return Err(Error::InvalidCount(0));
        }
        if self.tolerances.transverse_samples == 0 {
            return Err(Error::InvalidCount(0));
        }
        Ok(())
    }
}

/// Outcome of a single named check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClauseStatus {
    Pass,
    Fail,
    Skipped,
}

/// One pass/fail line of the verdict, with the numbers that decided it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseOutcome {
    pub name: String,
    pub status: ClauseStatus,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: String,
}

impl ClauseOutcome {
    fn pass(name: &str, lhs: f64, rhs: f64, tolerance: f64, detail: String) -> Self {
        ClauseOutcome {
            name: name.into(),
            status: ClauseStatus::Pass,
            lhs: Some(lhs),
            rhs: Some(rhs),
            tolerance: Some(tolerance),
            detail,
        }
    }

    fn fail(name: &str, lhs: f64, rhs: f64, tolerance: f64, detail: String) -> Self {
        ClauseOutcome {
            name: name.into(),
            status: ClauseStatus::Fail,
            lhs: Some(lhs),
            rhs: Some(rhs),
            tolerance: Some(tolerance),
            detail,
        }
    }

    fn decided(name: &str, ok: bool, lhs: f64, rhs: f64, tolerance: f64, detail: String) -> Self {
        if ok {
            Self::pass(name, lhs, rhs, tolerance, detail)
        } else {
            Self::fail(name, lhs, rhs, tolerance, detail)
        }
    }

    fn skipped(name: &str, reason: &str) -> Self {
        ClauseOutcome {
            name: name.into(),
            status: ClauseStatus::Skipped,
            lhs: None,
            rhs: None,
            tolerance: None,
            detail: reason.into(),
        }
    }
}

/// Per-window classification masses with their bounds and outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowCheck {
    pub direction_angle: f64,
    pub height: f64,
    pub e_w_count: usize,
    pub f_w_count: usize,
    pub e_w_mass: f64,
    pub e_w_bound: f64,
    pub e_w_pass: bool,
    pub f_w_lhs: f64,
    pub f_w_rhs: f64,
    /// `None` when the partnered-mass estimate was skipped for this window.
    pub f_w_pass: Option<bool>,
    /// Reason for a skip or failure detail; empty otherwise.
    pub note: String,
}

/// Counts describing the partition that the pipeline built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub kind: PartitionKind,
    pub size_a: usize,
    pub size_b: usize,
    pub phi_pairs: usize,
    pub psi_pairs: usize,
    pub violations: usize,
}

/// Band occupancy at one alternative ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSensitivity {
    pub gamma: f64,
    pub max_per_annulus: usize,
}

/// Plot-friendly view of one built tube (curve decimated to a few dozen
/// vertices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeSummary {
    pub from: usize,
    pub to: usize,
    pub width: f64,
    pub length: f64,
    pub curve: Vec<(f64, f64)>,
}

const TUBE_SUMMARY_VERTICES: usize = 33;

impl TubeSummary {
    fn of(from: usize, to: usize, tube: &Tube) -> Self {
        let n = tube.curve().len();
        let stride = n.div_ceil(TUBE_SUMMARY_VERTICES).max(1);
        let mut curve: Vec<(f64, f64)> = tube
            .curve()
            .iter()
            .step_by(stride)
            .map(|p| (p.re(), p.im()))
            .collect();
        let last = tube.end();
        if curve.last() != Some(&(last.re(), last.im())) {
            curve.push((last.re(), last.im()));
        }
        TubeSummary {
            from,
            to,
            width: tube.width(),
            length: tube.length(),
            curve,
        }
    }
}

/// Everything a pipeline run measured, decided, and used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub point_count: usize,
    pub separation: SeparationReport,
    /// Separation parameter the run certified (hint or measured).
    pub delta_used: f64,
    pub carleson: CarlesonReport,
    pub condition_c: f64,
    pub annuli: AnnulusHistogram,
    /// Annulus-count Carleson bound `m / (gamma (1 - gamma))`.
    pub annulus_bound: f64,
    pub gamma_sensitivity: Vec<GammaSensitivity>,
    pub partition: PartitionSummary,
    /// Measured evidence floor `min over the second part of |B_A|`; 1 when
    /// that part is empty.
    pub eta_hat: f64,
    /// Power applied to the evidence product to bring its floor below 1/2;
    /// 0 when no finite power can.
    pub eta_power: u32,
    /// `eta_hat` raised to that power.
    pub eta_effective: f64,
    /// Relative radius on which the evidence stays provably small around the
    /// first part.
    pub stability: f64,
    /// Strip width parameter used in the unpartnered-mass bound.
    pub strip_r: f64,
    /// Width parameter the tubes were built with.
    pub tube_width_param: f64,
    pub tubes: Vec<TubeSummary>,
    pub windows: Vec<WindowCheck>,
    pub clauses: Vec<ClauseOutcome>,
    pub interpolating: bool,
    /// True when no clause failed (skipped clauses carry their reason).
    pub all_pass: bool,
}

impl ExperimentReport {
    /// Deterministic pretty-printed JSON rendering.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// CSV of the per-window sweep, one row per window.
pub fn report_to_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(
        "direction_angle,height,e_w_count,f_w_count,e_w_mass,e_w_bound,f_w_lhs,f_w_rhs\n",
    );
    for w in &report.windows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            w.direction_angle,
            w.height,
            w.e_w_count,
            w.f_w_count,
            w.e_w_mass,
            w.e_w_bound,
            w.f_w_lhs,
            w.f_w_rhs
        ));
    }
    out
}

/// Radially stacked sequence `(1 - ratio^k, 0)` for `k = 1..=count`: one
/// point per band at `gamma = ratio`, the classical interpolating example.
pub fn gen_radial(ratio: f64, count: usize) -> Result<PointSequence, Error> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidThreshold {
            name: "ratio",
            value: ratio,
        });
    }
    if count < 1 {
        return Err(Error::InvalidCount(count));
    }
    let mut pts = Vec::with_capacity(count);
    for k in 1..=count {
        let p = DiscPoint::new(1.0 - ratio.powi(k as i32), 0.0)
            .map_err(|_| Error::CapacityExceeded("radial spacing underflowed the boundary resolution"))?;
        pts.push(p);
    }
    PointSequence::new(pts).map_err(|e| match e {
        Error::DuplicatePoint(..) => {
            Error::CapacityExceeded("radial spacing underflowed the boundary resolution")
        }
        other => other,
    })
}

/// Rejection-samples `count` points, uniform in hyperbolic area up to radius
/// 0.9, until they are pairwise `delta`-separated. Deterministic per seed.
pub fn gen_random_separated(count: usize, delta: f64, seed: u64) -> Result<PointSequence, Error> {
    if count < 1 {
        return Err(Error::InvalidCount(count));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidDelta(delta));
    }
    const RADIUS_CAP: f64 = 0.9;
    let area_cap = RADIUS_CAP * RADIUS_CAP / (1.0 - RADIUS_CAP * RADIUS_CAP);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts: Vec<DiscPoint> = Vec::with_capacity(count);
    let budget = 2000 * count + 20_000;
    let mut attempts = 0usize;
    while pts.len() < count {
        attempts += 1;
        if attempts > budget {
            return Err(Error::CapacityExceeded(
                "separated sampling rejected too many candidates",
            ));
        }
        // Invert the hyperbolic area profile t^2 / (1 - t^2) of centered
        // discs so the draw is uniform in that measure.
        let u: f64 = rng.gen();
        let t2 = (u * area_cap) / (1.0 + u * area_cap);
        let angle = rng.gen_range(0.0..TAU);
        let Ok(candidate) = DiscPoint::from_polar(t2.sqrt(), angle) else {
            continue;
        };
        let fits = pts.iter().all(|p| {
            let gap = (candidate.to_complex() - p.to_complex()).norm();
            gap > delta * (candidate.dist_to_boundary() + p.dist_to_boundary())
        });
        if fits && !pts.contains(&candidate) {
            pts.push(candidate);
        }
    }
    PointSequence::new(pts)
}

/// Negative control: `count` points stacked on one radius at heights
/// `1 - 1/k` for `k = 2..=count + 1`, whose window mass grows like
/// `log(count)` and therefore eventually fails any fixed Carleson cap.
pub fn gen_non_carleson(count: usize) -> Result<PointSequence, Error> {
    if count < 2 {
        return Err(Error::InvalidCount(count));
    }
    let pts = (2..=count + 1)
        .map(|k| DiscPoint::new(1.0 - 1.0 / k as f64, 0.0).expect("heights stay inside the disc"))
        .collect();
    PointSequence::new(pts)
}

fn build_partition(s: &PointSequence, cfg: &ExperimentConfig) -> Result<Partition, Error> {
    match cfg.partition_kind {
        PartitionKind::Good => Ok(good_partition(s, Metric::PseudoHyperbolic)),
        PartitionKind::Hoffman => hoffman_partition(s, cfg.gamma),
        PartitionKind::RestrictedGood => restricted_good_partition(s, cfg.gamma),
    }
}

/// Measured evidence floor and the interpolating verdict, side by side: the
/// floor is `min over b in the second part of |B_A(b)|` (1 when that part is
/// empty), and the verdict is the condition infimum against the configured
/// threshold.
pub fn check_corollary(s: &PointSequence, cfg: &ExperimentConfig) -> Result<(f64, bool), Error> {
    cfg.validate()?;
    let partition = build_partition(s, cfg).map_err(|e| e.in_stage("partition"))?;
    let part_a = partition.part_a();
    let part_b = partition.part_b();
    let mut eta_hat = 1.0f64;
    for &b in &part_b {
        let value = blaschke_product_over(s, &part_a, s.point(b)?)
            .map_err(|e| e.in_stage("evidence"))?
            .norm();
        eta_hat = eta_hat.min(value);
    }
    let interpolating = is_interpolating(s, cfg.tolerances.interpolating_threshold)?;
    Ok((eta_hat, interpolating))
}

/// Floor below which a measured evidence level counts as vanished.
const ETA_FLOOR: f64 = 1e-12;

/// Runs the full pipeline on one sequence.
///
/// Stages: (1) separation, Carleson norm, and the condition infimum; (2) the
/// configured partition with its postcondition audit; (3) the evidence
/// product `B_A` over the first part, its measured floor on the second part
/// (taken to a power until the floor drops below 1/2), the surrogate ramp
/// field between the two levels, and the stability radius; (4) tubes over
/// the matched partner pairs plus a dyadic window sweep with both mass
/// estimates; (5) a clause-by-clause verdict whose overall pass is the
/// conjunction of the parts, with skipped clauses carrying their reason.
pub fn run_experiment(
    s: &PointSequence,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport, Error> {
    cfg.validate()?;
    let gamma = cfg.gamma;
    let tol = cfg.tolerances.clone();

    // Stage 1: metrics of the raw sequence.
    let separation = separation_constant(s);
    let measured_delta = max_separation_delta(s);
    let delta_used = match cfg.delta_hint {
        Some(d) => d,
        None => (0.99 * measured_delta).clamp(1e-9, 0.999),
    };
    let separated_ok = is_delta_separated(s, delta_used).map_err(|e| e.in_stage("separation"))?;
    let carleson = carleson_norm(s);
    let condition_c = carleson_condition_inf(s);
    let annuli = points_per_annulus(s, gamma).map_err(|e| e.in_stage("separation"))?;
    let annulus_bound = carleson_bound_from_annuli(annuli.max_count, gamma)
        .map_err(|e| e.in_stage("separation"))?;
    let gamma_sensitivity: Vec<GammaSensitivity> = [0.3, 0.5, 0.7]
        .iter()
        .map(|&g| {
            points_per_annulus(s, g).map(|hist| GammaSensitivity {
                gamma: g,
                max_per_annulus: hist.max_count,
            })
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.in_stage("separation"))?;

    // Stage 2: partition and its audit.
    let partition = build_partition(s, cfg).map_err(|e| e.in_stage("partition"))?;
    let violations = verify_partition(s, &partition);
    let part_a = partition.part_a();
    let part_b = partition.part_b();
    let partition_summary = PartitionSummary {
        kind: partition.kind(),
        size_a: part_a.len(),
        size_b: part_b.len(),
        phi_pairs: partition.phi_pairs().len(),
        psi_pairs: partition.psi_pairs().len(),
        violations: violations.len(),
    };

    // Stage 3: evidence product, levels, surrogate field, stability radius.
    let mut eta_hat = 1.0f64;
    for &b in &part_b {
        let value = blaschke_product_over(s, &part_a, s.point(b)?)
            .map_err(|e| e.in_stage("evidence"))?
            .norm();
        eta_hat = eta_hat.min(value);
    }
    let (eta_power, eta_effective) = if eta_hat <= ETA_FLOOR {
        (1, eta_hat)
    } else if eta_hat < 0.5 {
        (1u32, eta_hat)
    } else {
        let mut p = (0.5f64.ln() / eta_hat.ln()).ceil();
        if !p.is_finite() || p > 1e6 {
            (0, eta_hat)
        } else {
            while eta_hat.powi(p as i32) >= 0.5 && p < 1e6 {
                p += 1.0;
            }
            if eta_hat.powi(p as i32) >= 0.5 {
                (0, eta_hat)
            } else {
                (p as u32, eta_hat.powi(p as i32))
            }
        }
    };
    let tau_used = cfg.tau.unwrap_or(0.0);
    let psi_available = eta_power >= 1 && eta_effective > ETA_FLOOR && !part_b.is_empty();
    let lower_level = eta_effective.powf(cfg.kappa);
    let evidence_magnitude = {
        let seq = s.clone();
        let zeros = part_a.clone();
        let p = eta_power.max(1) as i32;
        move |z: &DiscPoint| -> f64 {
            match blaschke_product_over(&seq, &zeros, z) {
                Ok(v) => v.norm().powi(p),
                Err(_) => f64::NAN,
            }
        }
    };
    let psi = if psi_available {
        Some(
            ScalarFieldSamples::ramp(evidence_magnitude.clone(), lower_level, eta_effective)
                .map_err(|e| e.in_stage("evidence"))?,
        )
    } else {
        None
    };
    let stability = if psi_available {
        let anchors: Vec<DiscPoint> = part_a.iter().map(|&i| s.points()[i]).collect();
        let tau_prime = (tau_used + lower_level) / 2.0;
        let field = evidence_magnitude.clone();
        stability_radius(&anchors, move |z| {
            let v = field(z);
            v.is_finite() && v <= tau_prime
        })
    } else {
        0.0
    };

    // Stage 4a: tubes over the matched partner pairs.
    let strip_r = delta_used / 4.0;
    let tube_width_param = if stability > 0.0 {
        (delta_used / 4.0).min(stability)
    } else {
        delta_used / 4.0
    }
    .max(1e-9);
    let (tubes, tube_error) = match build_partition_tubes(s, &partition, tube_width_param, delta_used)
    {
        Ok(t) => (t, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    let bare_tubes: Vec<Tube> = tubes.iter().map(|(_, _, t)| t.clone()).collect();
    let tube_summaries: Vec<TubeSummary> = tubes
        .iter()
        .map(|&(a, b, ref t)| TubeSummary::of(a, b, t))
        .collect();
    let collision = tubes_disjoint(&bare_tubes);

    // Stage 4b: dyadic window sweep over the directions of the points.
    let mut angles: Vec<f64> = s
        .points()
        .iter()
        .filter(|p| p.modulus() > 0.0)
        .map(|p| p.argument())
        .collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup();
    let e_w_rate = annulus_bound + 1.0 / (strip_r * gamma);
    let mut windows: Vec<WindowCheck> = Vec::new();
    for level in 1..=cfg.window_levels {
        let h = 0.5f64.powi(level as i32);
        if h <= 0.0 {
            break;
        }
        for &angle in &angles {
            let direction = BoundaryDirection::new(angle);
            let w = CarlesonWindow::new(direction, h).map_err(|e| e.in_stage("windows"))?;
            let class =
                classify_window_points(s, &partition, &w).map_err(|e| e.in_stage("windows"))?;
            let e_mass = class.e_w_mass(s);
            let e_bound = e_w_rate * h;
            let e_pass = e_mass <= e_bound * (1.0 + tol.e_w_slack);
            let f_lhs_raw: f64 = class
                .f_w
                .iter()
                .map(|&i| s.points()[i].dist_to_boundary())
                .sum();
            let (f_lhs, f_rhs, f_pass, note) = if class.f_w.is_empty() {
                (0.0, 0.0, Some(true), String::new())
            } else if let Some(psi) = psi.as_ref() {
                let h_prime = (FRAC_PI_2 * h).min(0.999_999);
                let w_prime = CarlesonWindow::new(direction, h_prime)
                    .map_err(|e| e.in_stage("windows"))?;
                let inside: Vec<Tube> = bare_tubes
                    .iter()
                    .filter(|t| {
                        let worst = t
                            .curve()
                            .iter()
                            .map(|v| w_prime.boundary_gap(v))
                            .fold(0.0, f64::max);
                        worst + t.width() / 2.0 < h_prime
                    })
                    .cloned()
                    .collect();
                if inside.is_empty() {
                    (
                        f_lhs_raw,
                        0.0,
                        None,
                        "no tube fits the enlarged window".to_string(),
                    )
                } else {
                    match f_w_mass_bound_with_mesh(
                        s,
                        &class.f_w,
                        &inside,
                        psi,
                        &w_prime,
                        tol.mesh_cells,
                    ) {
                        Ok((lhs, rhs)) => (
                            lhs,
                            rhs,
                            Some(lhs <= rhs * (1.0 + tol.f_w_slack)),
                            String::new(),
                        ),
                        Err(e) => (
                            f_lhs_raw,
                            0.0,
                            Some(false),
                            format!("estimate failed: {e}"),
                        ),
                    }
                }
            } else {
                (
                    f_lhs_raw,
                    0.0,
                    None,
                    "no usable evidence function".to_string(),
                )
            };
            windows.push(WindowCheck {
                direction_angle: angle,
                height: h,
                e_w_count: class.e_w.len(),
                f_w_count: class.f_w.len(),
                e_w_mass: e_mass,
                e_w_bound: e_bound,
                e_w_pass: e_pass,
                f_w_lhs: f_lhs,
                f_w_rhs: f_rhs,
                f_w_pass: f_pass,
                note,
            });
        }
    }

    // Stage 5: clause-by-clause verdict.
    let mut clauses: Vec<ClauseOutcome> = Vec::new();

    clauses.push(ClauseOutcome::decided(
        "separated",
        separated_ok,
        delta_used,
        measured_delta,
        0.0,
        match separation.witness_pair {
            Some((i, j)) => format!(
                "certifying delta = {delta_used}; tightest pair ({i}, {j}) at pseudo distance {}",
                separation.delta_p
            ),
            None => "single point is trivially separated".to_string(),
        },
    ));

    clauses.push(ClauseOutcome::decided(
        "carleson_bound",
        carleson.norm_estimate <= annulus_bound + tol.annulus_bound_tol,
        carleson.norm_estimate,
        annulus_bound,
        tol.annulus_bound_tol,
        format!(
            "band maximum m = {} at gamma = {gamma}",
            annuli.max_count
        ),
    ));

    clauses.push(ClauseOutcome::decided(
        "carleson_norm_cap",
        carleson.norm_estimate <= tol.carleson_norm_cap,
        carleson.norm_estimate,
        tol.carleson_norm_cap,
        0.0,
        match &carleson.witness_window {
            Some(w) => format!(
                "heaviest window: direction angle {}, height {}",
                w.direction().angle(),
                w.height()
            ),
            None => "no candidate window".to_string(),
        },
    ));

    clauses.push(ClauseOutcome::decided(
        "partition_postconditions",
        violations.is_empty(),
        violations.len() as f64,
        0.0,
        0.0,
        match violations.first() {
            Some(v) => format!("first violation: {v}"),
            None => "audit clean".to_string(),
        },
    ));

    if part_b.is_empty() {
        clauses.push(ClauseOutcome::skipped(
            "ultra_separation_witness",
            "second part is empty, nothing to certify a level on",
        ));
    } else if eta_hat <= ETA_FLOOR {
        clauses.push(ClauseOutcome::fail(
            "ultra_separation_witness",
            eta_hat,
            ETA_FLOOR,
            0.0,
            "evidence product vanishes at a partner point to working precision".to_string(),
        ));
    } else if eta_power == 0 {
        clauses.push(ClauseOutcome::skipped(
            "ultra_separation_witness",
            "no finite power brings the evidence level below 1/2",
        ));
    } else {
        let eta_used = cfg.eta.unwrap_or(eta_effective);
        let level_gap = eta_used.powf(cfg.kappa);
        let ok = eta_effective >= eta_used && tau_used < level_gap && eta_used < 0.5;
        clauses.push(ClauseOutcome::decided(
            "ultra_separation_witness",
            ok,
            tau_used,
            level_gap,
            0.0,
            format!(
                "levels tau = {tau_used} < eta^kappa = {level_gap} with eta = {eta_used} (measured floor {eta_hat}, power {eta_power})"
            ),
        ));
    }

    let worst_e_w = windows
        .iter()
        .map(|w| w.e_w_mass / w.height)
        .fold(0.0, f64::max);
    clauses.push(ClauseOutcome::decided(
        "window_e_w_bound",
        windows.iter().all(|w| w.e_w_pass),
        worst_e_w,
        e_w_rate,
        tol.e_w_slack,
        format!(
            "{} windows swept; bound rate m/(gamma(1-gamma)) + 1/(r gamma) with r = {strip_r}",
            windows.len()
        ),
    ));

    let f_w_failed = windows
        .iter()
        .filter(|w| w.f_w_pass == Some(false))
        .count();
    let f_w_skipped = windows.iter().filter(|w| w.f_w_pass.is_none()).count();
    let f_w_checked = windows.len() - f_w_skipped;
    if psi.is_none() && windows.iter().any(|w| w.f_w_count > 0) {
        clauses.push(ClauseOutcome::skipped(
            "window_f_w_bound",
            "no usable evidence function for the surrogate field",
        ));
    } else {
        clauses.push(ClauseOutcome::decided(
            "window_f_w_bound",
            f_w_failed == 0,
            f_w_failed as f64,
            0.0,
            tol.f_w_slack,
            format!("{f_w_checked} windows checked, {f_w_skipped} skipped"),
        ));
    }

    match (&tube_error, collision) {
        (Some(msg), _) => clauses.push(ClauseOutcome::fail(
            "tubes_disjoint",
            f64::NAN,
            0.0,
            0.0,
            format!("tube construction failed: {msg}"),
        )),
        (None, Some((i, j))) => clauses.push(ClauseOutcome::fail(
            "tubes_disjoint",
            1.0,
            0.0,
            0.0,
            format!("tubes {i} and {j} overlap"),
        )),
        (None, None) => clauses.push(ClauseOutcome::pass(
            "tubes_disjoint",
            0.0,
            0.0,
            0.0,
            format!("{} tubes pairwise disjoint", tubes.len()),
        )),
    }

    let interpolating = is_interpolating(s, tol.interpolating_threshold)?;
    let ultra_pass = clauses
        .iter()
        .find(|c| c.name == "ultra_separation_witness")
        .map(|c| c.status != ClauseStatus::Fail)
        .unwrap_or(true);
    let carleson_pass = carleson.norm_estimate <= tol.carleson_norm_cap;
    let antecedent = separated_ok && carleson_pass && ultra_pass;
    let consequent = condition_c > 0.0;
    clauses.push(ClauseOutcome::decided(
        "corollary_implication",
        !antecedent || consequent,
        condition_c,
        0.0,
        tol.interpolating_threshold,
        format!(
            "separated + Carleson + evidence {} condition infimum {condition_c} (interpolating at threshold: {interpolating})",
            if antecedent { "=>" } else { "not all present; vacuously consistent with" }
        ),
    ));

    let all_pass = clauses.iter().all(|c| c.status != ClauseStatus::Fail);

    Ok(ExperimentReport {
        config: cfg.clone(),
        point_count: s.len(),
        separation,
        delta_used,
        carleson,
        condition_c,
        annuli,
        annulus_bound,
        gamma_sensitivity,
        partition: partition_summary,
        eta_hat,
        eta_power,
        eta_effective,
        stability,
        strip_r,
        tube_width_param,
        tubes: tube_summaries,
        windows,
        clauses,
        interpolating,
        all_pass,
    })
}
