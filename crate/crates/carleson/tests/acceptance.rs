//! Release gate: one test per numbered acceptance check, each printing a
//! single pass/fail line with the numbers that decided it and enforcing its
//! runtime budget. Run with `-- --nocapture` to see the lines for passing
//! checks too.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use carleson::harness::{gen_non_carleson, gen_radial, gen_random_separated};
use carleson::partition::{good_partition, hoffman_partition, restricted_good_partition};
use carleson::sequence::{
    blaschke_product_over, carleson_condition_inf, carleson_norm, dual_bound_witness,
    max_separation_delta, points_per_annulus, PointSequence,
};
use carleson::tube::{build_partition_tubes, gradient_crossing_integral, ScalarFieldSamples};
use carleson::{
    classify_window_points, disc_automorphism, pseudo_hyperbolic_distance, run_experiment,
    verify_partition, BoundaryDirection, CarlesonWindow, ClauseStatus, DiscPoint,
    ExperimentConfig, Metric, PartitionKind,
};

/// Runs one numbered check, prints its verdict line, and fails the test on
/// either a violated property or a blown runtime budget.
fn acceptance(number: u8, name: &str, budget: Duration, run: impl FnOnce() -> Result<String, String>) {
    let start = Instant::now();
    let mut outcome = run();
    let elapsed = start.elapsed();
    if outcome.is_ok() && elapsed > budget {
        outcome = Err(format!(
            "runtime {elapsed:.2?} exceeded the {budget:?} budget"
        ));
    }
    match outcome {
        Ok(detail) => println!("acceptance {number} {name}: PASS ({detail}) [{elapsed:.2?}]"),
        Err(detail) => {
            println!("acceptance {number} {name}: FAIL ({detail}) [{elapsed:.2?}]");
            panic!("acceptance {number} {name}: {detail}");
        }
    }
}

/// The 200-sequence corpus for the norm-constant check: a spread of random
/// separated sequences plus radial and stacked families.
fn norm_constant_corpus() -> Vec<PointSequence> {
    let mut corpus = Vec::with_capacity(200);
    for i in 0..150u64 {
        let count = 5 + (i as usize * 7) % 36;
        let delta = if i % 2 == 0 { 0.15 } else { 0.25 };
        corpus.push(gen_random_separated(count, delta, i).expect("sampling fits"));
    }
    for j in 0..25 {
        let ratio = 0.30 + 0.02 * j as f64;
        corpus.push(gen_radial(ratio, 5 + j % 16).expect("valid radial family"));
    }
    for j in 0..25 {
        corpus.push(gen_non_carleson(2 + 4 * j).expect("valid stacked family"));
    }
    corpus
}

#[test]
fn acceptance_1_norm_within_annulus_constant() {
    acceptance(1, "norm within annulus constant", Duration::from_secs(10), || {
        let gamma = 0.5;
        let corpus = norm_constant_corpus();
        let mut worst = 0.0f64;
        for (idx, s) in corpus.iter().enumerate() {
            let m = points_per_annulus(s, gamma).map_err(|e| e.to_string())?.max_count;
            let bound = m as f64 / (gamma * (1.0 - gamma));
            let norm = carleson_norm(s).norm_estimate;
            if norm > bound + 1e-6 {
                return Err(format!(
                    "sequence {idx}: norm {norm} exceeds bound {bound} (m = {m})"
                ));
            }
            worst = worst.max(norm / bound);
        }
        Ok(format!(
            "{} sequences, worst norm/bound ratio {worst:.3}",
            corpus.len()
        ))
    });
}

/// Sup of window mass over height for a fan of boundary directions, exact in
/// the height variable: per direction the ratio is maximized just above each
/// point's window distance, so sorted prefix sums give the supremum.
fn dense_direction_oracle(s: &PointSequence, directions: usize) -> f64 {
    let mut oracle = 0.0f64;
    for d in 0..directions {
        let zeta = Complex64::from_polar(1.0, TAU * d as f64 / directions as f64);
        let mut profile: Vec<(f64, f64)> = s
            .points()
            .iter()
            .map(|z| {
                (
                    (Complex64::new(1.0, 0.0) - zeta.conj() * z.to_complex()).norm(),
                    z.dist_to_boundary(),
                )
            })
            .collect();
        profile.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut mass = 0.0;
        for &(u, depth) in &profile {
            mass += depth;
            if u > 0.0 && u < 1.0 {
                oracle = oracle.max(mass / u);
            }
        }
    }
    oracle
}

#[test]
fn acceptance_2_norm_against_dense_oracle() {
    acceptance(2, "norm against dense oracle", Duration::from_secs(60), || {
        let mut worst_ratio = 1.0f64;
        for i in 0..50u64 {
            let count = 6 + (i as usize % 25);
            let s = gen_random_separated(count, 0.2, 5000 + i).map_err(|e| e.to_string())?;
            let norm = carleson_norm(&s).norm_estimate;
            let oracle = dense_direction_oracle(&s, 720);
            if !(norm <= 2.0 * oracle && oracle <= 2.0 * norm) {
                return Err(format!(
                    "sequence {i}: norm {norm} vs oracle {oracle} outside factor 2"
                ));
            }
            worst_ratio = worst_ratio.max((norm / oracle).max(oracle / norm));
        }
        Ok(format!("50 sequences, worst norm/oracle factor {worst_ratio:.4}"))
    });
}

#[test]
fn acceptance_3_metric_invariance_and_triangle() {
    acceptance(3, "metric invariance and triangle", Duration::from_secs(5), || {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draw = |rng: &mut ChaCha8Rng| {
            let r = 0.99 * rng.gen::<f64>().sqrt();
            let th = rng.gen_range(0.0..TAU);
            DiscPoint::from_polar(r, th).expect("radius below one")
        };
        let mut worst_inv = 0.0f64;
        let mut worst_tri = 0.0f64;
        for _ in 0..100_000 {
            let a = draw(&mut rng);
            let b = draw(&mut rng);
            let c = draw(&mut rng);
            let dab = pseudo_hyperbolic_distance(&a, &b);
            let moved = pseudo_hyperbolic_distance(
                &disc_automorphism(&c, &a),
                &disc_automorphism(&c, &b),
            );
            worst_inv = worst_inv.max((moved - dab).abs());
            let dbc = pseudo_hyperbolic_distance(&b, &c);
            let dac = pseudo_hyperbolic_distance(&a, &c);
            let strong = (dab + dbc) / (1.0 + dab * dbc);
            worst_tri = worst_tri.max(dac - strong);
        }
        if worst_inv > 1e-12 {
            return Err(format!("invariance drift {worst_inv:e} above 1e-12"));
        }
        if worst_tri > 1e-12 {
            return Err(format!("triangle excess {worst_tri:e} above 1e-12"));
        }
        Ok(format!(
            "100000 triples, invariance drift {worst_inv:.2e}, triangle excess {worst_tri:.2e}"
        ))
    });
}

#[test]
fn acceptance_4_partition_postconditions() {
    acceptance(4, "partition postconditions", Duration::from_secs(10), || {
        let gamma = 0.5;
        for seed in 0..100u64 {
            let s = gen_random_separated(50, 0.25, seed).map_err(|e| e.to_string())?;

            let good = good_partition(&s, Metric::PseudoHyperbolic);
            let audit = verify_partition(&s, &good);
            if let Some(v) = audit.first() {
                return Err(format!("seed {seed}: paired-partition audit: {v}"));
            }
            // Independent nearest-neighbor oracle for every matched pair.
            let dist = |i: usize, j: usize| {
                pseudo_hyperbolic_distance(&s.points()[i], &s.points()[j])
            };
            for (&(a, b), pool) in good
                .phi_pairs()
                .iter()
                .zip(std::iter::repeat(good.part_b()))
                .chain(good.psi_pairs().iter().zip(std::iter::repeat(good.part_a())))
            {
                let best = pool
                    .iter()
                    .map(|&t| dist(a, t))
                    .fold(f64::INFINITY, f64::min);
                if dist(a, b) > best + 1e-12 {
                    return Err(format!(
                        "seed {seed}: point {a} partnered at distance {} but {} available",
                        dist(a, b),
                        best
                    ));
                }
            }

            let hoffman = hoffman_partition(&s, gamma).map_err(|e| e.to_string())?;
            let audit = verify_partition(&s, &hoffman);
            if let Some(v) = audit.first() {
                return Err(format!("seed {seed}: sweep-partition audit: {v}"));
            }

            let restricted = restricted_good_partition(&s, gamma).map_err(|e| e.to_string())?;
            let audit = verify_partition(&s, &restricted);
            if let Some(v) = audit.first() {
                return Err(format!("seed {seed}: banded-partition audit: {v}"));
            }
            for (a, b) in restricted.phi_pairs() {
                let ratio = s.points()[a].dist_to_boundary() / s.points()[b].dist_to_boundary();
                if !(gamma <= ratio && ratio <= 1.0 / gamma) {
                    return Err(format!(
                        "seed {seed}: pair ({a}, {b}) depth ratio {ratio} outside [{gamma}, {}]",
                        1.0 / gamma
                    ));
                }
            }
        }
        Ok("100 sequences x 3 constructions, zero violations".to_string())
    });
}

#[test]
fn acceptance_5_tubes_clean_on_banded_partitions() {
    acceptance(5, "tubes clean on banded partitions", Duration::from_secs(30), || {
        let delta = 0.25;
        let width_param = f64::min(delta, delta / 2.0) / 2.0;
        let mut total = 0usize;
        for seed in 100..200u64 {
            let s = gen_random_separated(30, delta, seed).map_err(|e| e.to_string())?;
            let p = restricted_good_partition(&s, 0.5).map_err(|e| e.to_string())?;
            let tubes =
                build_partition_tubes(&s, &p, width_param, delta).map_err(|e| e.to_string())?;
            for &(a, b, ref tube) in &tubes {
                for (k, z) in s.points().iter().enumerate() {
                    if k != a && k != b && tube.contains(z) {
                        return Err(format!(
                            "seed {seed}: tube ({a}, {b}) swallows point {k}"
                        ));
                    }
                }
                let chord = (s.points()[a].to_complex() - s.points()[b].to_complex()).norm();
                if tube.length() > FRAC_PI_2 * chord + 1e-9 {
                    return Err(format!(
                        "seed {seed}: tube ({a}, {b}) length {} over budget {}",
                        tube.length(),
                        FRAC_PI_2 * chord
                    ));
                }
            }
            let bare: Vec<_> = tubes.iter().map(|(_, _, t)| t.clone()).collect();
            if let Some((i, j)) = carleson::tubes_disjoint(&bare) {
                return Err(format!("seed {seed}: tubes {i} and {j} overlap"));
            }
            total += tubes.len();
        }
        Ok(format!("100 trials, {total} tubes, zero violations"))
    });
}

#[test]
fn acceptance_6_crossing_integrals_refine_upward() {
    acceptance(6, "crossing integrals refine upward", Duration::from_secs(30), || {
        let s = gen_radial(0.5, 12).map_err(|e| e.to_string())?;
        let partition = good_partition(&s, Metric::PseudoHyperbolic);
        let part_a = partition.part_a();
        let mut eta_hat = 1.0f64;
        for &b in &partition.part_b() {
            let v = blaschke_product_over(&s, &part_a, s.point(b).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?
                .norm();
            eta_hat = eta_hat.min(v);
        }
        if !(eta_hat > 0.0) {
            return Err(format!("evidence floor {eta_hat} not positive"));
        }
        let mut p = 1i32;
        while eta_hat.powi(p) >= 0.5 {
            p += 1;
        }
        let eta_eff = eta_hat.powi(p);
        let seq = s.clone();
        let zeros = part_a.clone();
        let psi = ScalarFieldSamples::ramp(
            move |z| {
                blaschke_product_over(&seq, &zeros, z)
                    .map(|v| v.norm().powi(p))
                    .unwrap_or(f64::NAN)
            },
            eta_eff * eta_eff,
            eta_eff,
        )
        .map_err(|e| e.to_string())?;
        let delta = (0.99 * max_separation_delta(&s)).clamp(1e-9, 0.999);
        let tubes = build_partition_tubes(&s, &partition, delta / 4.0, delta)
            .map_err(|e| e.to_string())?;
        if tubes.is_empty() {
            return Err("no tubes built".to_string());
        }
        let mut min_base = f64::INFINITY;
        let mut worst_dip = 0.0f64;
        for &(a, b, ref tube) in &tubes {
            let i0 = gradient_crossing_integral(&psi, tube, 8).map_err(|e| e.to_string())?;
            let fine = tube.refined(2);
            let i1 = gradient_crossing_integral(&psi, &fine, 8).map_err(|e| e.to_string())?;
            let i2 = gradient_crossing_integral(&psi, &fine.refined(2), 8)
                .map_err(|e| e.to_string())?;
            if i0 < 1.0 - 1e-2 {
                return Err(format!("tube ({a}, {b}): base integral {i0} below 0.99"));
            }
            if i1 < i0 - 1e-3 || i2 < i1 - 1e-3 {
                return Err(format!(
                    "tube ({a}, {b}): refinement not monotone ({i0}, {i1}, {i2})"
                ));
            }
            min_base = min_base.min(i0);
            worst_dip = worst_dip.max((i0 - i1).max(i1 - i2));
        }
        Ok(format!(
            "{} tubes, min base integral {min_base:.6}, worst refinement dip {worst_dip:.2e}",
            tubes.len()
        ))
    });
}

#[test]
fn acceptance_7_unpartnered_mass_rate() {
    acceptance(7, "unpartnered mass rate", Duration::from_secs(30), || {
        let gamma = 0.5;
        let mut windows = 0usize;
        let mut worst = 0.0f64;
        for seed in 2000..2050u64 {
            let s = gen_random_separated(30, 0.25, seed).map_err(|e| e.to_string())?;
            let p = restricted_good_partition(&s, gamma).map_err(|e| e.to_string())?;
            let m = points_per_annulus(&s, gamma).map_err(|e| e.to_string())?.max_count;
            let delta = (0.99 * max_separation_delta(&s)).clamp(1e-9, 0.999);
            let r = delta / 4.0;
            let rate = m as f64 / (gamma * (1.0 - gamma)) + 1.0 / (r * gamma);
            let mut angles: Vec<f64> = s.points().iter().map(|z| z.argument()).collect();
            angles.sort_by(f64::total_cmp);
            angles.dedup();
            for level in 1..=12 {
                let h = 0.5f64.powi(level);
                for &angle in &angles {
                    let w = CarlesonWindow::new(BoundaryDirection::new(angle), h)
                        .map_err(|e| e.to_string())?;
                    let class =
                        classify_window_points(&s, &p, &w).map_err(|e| e.to_string())?;
                    let ratio = class.e_w_mass(&s) / h;
                    if ratio > rate * 1.05 {
                        return Err(format!(
                            "seed {seed}: window (angle {angle}, h {h}) mass rate {ratio} over {rate} + 5%"
                        ));
                    }
                    worst = worst.max(ratio / rate);
                    windows += 1;
                }
            }
        }
        Ok(format!(
            "50 sequences, {windows} windows, worst mass-rate fraction {worst:.3}"
        ))
    });
}

#[test]
fn acceptance_8_experiment_verdicts() {
    acceptance(8, "experiment verdicts", Duration::from_secs(10), || {
        let radial = gen_radial(0.5, 12).map_err(|e| e.to_string())?;
        let report = run_experiment(&radial, &ExperimentConfig::default())
            .map_err(|e| e.to_string())?;
        if report.config.partition_kind != PartitionKind::RestrictedGood {
            return Err("default partition kind changed".to_string());
        }
        if !(report.eta_hat > 0.0) {
            return Err(format!("radial evidence floor {} not positive", report.eta_hat));
        }
        if !(report.condition_c > 0.0) {
            return Err(format!("radial condition {} not positive", report.condition_c));
        }
        if !report.interpolating {
            return Err("radial sequence not judged interpolating".to_string());
        }
        if !report.all_pass {
            let failed: Vec<&str> = report
                .clauses
                .iter()
                .filter(|c| c.status == ClauseStatus::Fail)
                .map(|c| c.name.as_str())
                .collect();
            return Err(format!("radial run failed clauses {failed:?}"));
        }

        let control = gen_non_carleson(200).map_err(|e| e.to_string())?;
        let report = run_experiment(&control, &ExperimentConfig::default())
            .map_err(|e| e.to_string())?;
        let cap = report
            .clauses
            .iter()
            .find(|c| c.name == "carleson_norm_cap")
            .ok_or("cap clause missing")?;
        if cap.status != ClauseStatus::Fail {
            return Err("stacked control did not fail the mass cap".to_string());
        }
        if !(report.condition_c < 0.1) {
            return Err(format!("control condition {} not small", report.condition_c));
        }
        if report.interpolating {
            return Err("stacked control judged interpolating".to_string());
        }
        if report.all_pass {
            return Err("stacked control passed overall".to_string());
        }
        Ok(format!(
            "radial run all-pass (condition {:.4}); control fails mass cap (norm {:.1}, condition {:.1e})",
            carleson_condition_inf(&radial),
            report.carleson.norm_estimate,
            report.condition_c
        ))
    });
}

#[test]
fn acceptance_9_dual_witnesses_bounded() {
    acceptance(9, "dual witnesses bounded", Duration::from_secs(10), || {
        let s = gen_radial(0.5, 10).map_err(|e| e.to_string())?;
        let condition = carleson_condition_inf(&s);
        let mut worst_delta = 0.0f64;
        for a in 0..s.len() {
            for b in 0..s.len() {
                let rho = dual_bound_witness(&s, a, s.point(b).map_err(|e| e.to_string())?)
                    .map_err(|e| e.to_string())?;
                let target = if a == b { 1.0 } else { 0.0 };
                worst_delta = worst_delta.max((rho - target).norm());
            }
        }
        if worst_delta > 1e-10 {
            return Err(format!(
                "witness values off the indicator by {worst_delta:e}"
            ));
        }
        let cap = 1.0 / condition + 1e-6;
        let mut sup = 0.0f64;
        for a in 0..s.len() {
            for i in 0..80 {
                for j in 0..80 {
                    let radius = 0.9875 * (i as f64 + 0.5) / 80.0;
                    let angle = TAU * j as f64 / 80.0;
                    let z = DiscPoint::from_polar(radius, angle).map_err(|e| e.to_string())?;
                    let v = dual_bound_witness(&s, a, &z)
                        .map_err(|e| e.to_string())?
                        .norm();
                    if v > cap {
                        return Err(format!(
                            "witness {a} reaches {v} at mesh point ({radius}, {angle}), cap {cap}"
                        ));
                    }
                    sup = sup.max(v);
                }
            }
        }
        Ok(format!(
            "indicator error {worst_delta:.1e}, mesh sup {sup:.2} within cap {cap:.2}"
        ))
    });
}
