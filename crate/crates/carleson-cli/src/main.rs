//! Command-line front end: `analyze` runs the full experiment pipeline on a
//! sequence file, `generate` emits sequence files for the built-in families,
//! and `sweep` runs the window sweep only.
//!
//! Exit codes: 0 every check passed, 1 a mathematical check failed (the
//! failing clause is named), 2 bad input or configuration.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use carleson::harness::{
    gen_non_carleson, gen_radial, gen_random_separated, report_to_csv, run_experiment,
    ExperimentConfig,
};
use carleson::partition::{
    classify_window_points, good_partition, hoffman_partition, restricted_good_partition,
    Partition, PartitionKind,
};
use carleson::sequence::{max_separation_delta, points_per_annulus, PointSequence};
use carleson::{BoundaryDirection, CarlesonWindow, ClauseStatus, Metric};

#[derive(Parser)]
#[command(
    name = "carleson",
    version,
    about = "Separated-sequence toolkit for the unit disc"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline on a sequence file and report every check.
    Analyze {
        /// JSON sequence file, as emitted by `generate`.
        sequence_file: PathBuf,
        /// Annulus ratio for band decompositions.
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        /// Partition construction to verify.
        #[arg(long, value_enum, default_value_t = PartitionArg::Restricted)]
        partition: PartitionArg,
        /// Exponent relating the two evidence levels.
        #[arg(long, default_value_t = 2.0)]
        kappa: f64,
        /// Separation parameter to certify instead of the measured one.
        #[arg(long)]
        delta: Option<f64>,
        /// Claimed evidence level on the second part.
        #[arg(long)]
        eta: Option<f64>,
        /// Claimed evidence level on the first part.
        #[arg(long)]
        tau: Option<f64>,
        /// Number of dyadic window heights to sweep.
        #[arg(long, default_value_t = 12)]
        levels: usize,
        /// Write the full JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the per-window CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Emit a sequence file for one of the built-in families.
    Generate {
        #[command(subcommand)]
        family: Family,
    },
    /// Run the window sweep only and emit its per-window CSV.
    Sweep {
        /// JSON sequence file, as emitted by `generate`.
        sequence_file: PathBuf,
        /// Annulus ratio for band decompositions.
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        /// Partition construction that classifies the window points.
        #[arg(long, value_enum, default_value_t = PartitionArg::Restricted)]
        partition: PartitionArg,
        /// Number of dyadic window heights to sweep.
        #[arg(long, default_value_t = 12)]
        levels: usize,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Family {
    /// Radially stacked points `(1 - ratio^k, 0)`, one per band.
    Radial {
        #[arg(long, default_value_t = 0.5)]
        ratio: f64,
        #[arg(long)]
        count: usize,
        /// Write the sequence here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random points, uniform in hyperbolic area, pairwise delta-separated.
    Random {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0.25)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the sequence here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stacked heights `1 - 1/k` whose window mass grows without bound.
    #[command(alias = "nonquarleson")]
    Noncarleson {
        #[arg(long)]
        count: usize,
        /// Write the sequence here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PartitionArg {
    Good,
    Hoffman,
    Restricted,
}

impl From<PartitionArg> for PartitionKind {
    fn from(p: PartitionArg) -> PartitionKind {
        match p {
            PartitionArg::Good => PartitionKind::Good,
            PartitionArg::Hoffman => PartitionKind::Hoffman,
            PartitionArg::Restricted => PartitionKind::RestrictedGood,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Analyze {
            sequence_file,
            gamma,
            partition,
            kappa,
            delta,
            eta,
            tau,
            levels,
            report,
            csv,
        } => {
            let s = read_sequence(&sequence_file)?;
            let cfg = ExperimentConfig {
                gamma,
                delta_hint: delta,
                kappa,
                eta,
                tau,
                partition_kind: partition.into(),
                window_levels: levels,
                ..ExperimentConfig::default()
            };
            let result = run_experiment(&s, &cfg).context("experiment failed")?;
            print_summary(&result);
            if let Some(path) = report {
                fs::write(&path, result.to_json_string())
                    .with_context(|| format!("cannot write report to {}", path.display()))?;
            }
            if let Some(path) = csv {
                fs::write(&path, report_to_csv(&result))
                    .with_context(|| format!("cannot write CSV to {}", path.display()))?;
            }
            if result.all_pass {
                Ok(ExitCode::SUCCESS)
            } else {
                let failing: Vec<&str> = result
                    .clauses
                    .iter()
                    .filter(|c| c.status == ClauseStatus::Fail)
                    .map(|c| c.name.as_str())
                    .collect();
                eprintln!("failed: {}", failing.join(", "));
                Ok(ExitCode::from(1))
            }
        }
        Command::Generate { family } => {
            let (sequence, out) = match family {
                Family::Radial { ratio, count, out } => {
                    (gen_radial(ratio, count).context("radial family")?, out)
                }
                Family::Random {
                    count,
                    delta,
                    seed,
                    out,
                } => (
                    gen_random_separated(count, delta, seed).context("random family")?,
                    out,
                ),
                Family::Noncarleson { count, out } => {
                    (gen_non_carleson(count).context("stacked family")?, out)
                }
            };
            let json = sequence.to_json_string();
            match out {
                Some(path) => fs::write(&path, json)
                    .with_context(|| format!("cannot write sequence to {}", path.display()))?,
                None => println!("{json}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            sequence_file,
            gamma,
            partition,
            levels,
            csv,
        } => {
            let s = read_sequence(&sequence_file)?;
            sweep(&s, gamma, partition.into(), levels, csv)
        }
    }
}

fn read_sequence(path: &PathBuf) -> Result<PointSequence> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    PointSequence::from_json_str(&text)
        .with_context(|| format!("{} is not a valid sequence file", path.display()))
}

fn build_partition(s: &PointSequence, kind: PartitionKind, gamma: f64) -> Result<Partition> {
    Ok(match kind {
        PartitionKind::Good => good_partition(s, Metric::PseudoHyperbolic),
        PartitionKind::Hoffman => hoffman_partition(s, gamma).context("partition failed")?,
        PartitionKind::RestrictedGood => {
            restricted_good_partition(s, gamma).context("partition failed")?
        }
    })
}

/// Window sweep without the evidence machinery: classify each window, check
/// the unpartnered mass rate, and emit one CSV row per window.
fn sweep(
    s: &PointSequence,
    gamma: f64,
    kind: PartitionKind,
    levels: usize,
    csv: Option<PathBuf>,
) -> Result<ExitCode> {
    if !(gamma > 0.0 && gamma < 1.0) {
        anyhow::bail!("gamma must lie strictly between 0 and 1, got {gamma}");
    }
    if levels < 1 || levels > 40 {
        anyhow::bail!("levels must lie between 1 and 40, got {levels}");
    }
    let partition = build_partition(s, kind, gamma)?;
    let m = points_per_annulus(s, gamma)
        .context("band count failed")?
        .max_count;
    let delta = (0.99 * max_separation_delta(s)).clamp(1e-9, 0.999);
    let strip_r = delta / 4.0;
    let rate = m as f64 / (gamma * (1.0 - gamma)) + 1.0 / (strip_r * gamma);
    let mut angles: Vec<f64> = s
        .points()
        .iter()
        .filter(|p| p.modulus() > 0.0)
        .map(|p| p.argument())
        .collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup();

    let mut out =
        String::from("direction_angle,height,e_w_count,f_w_count,e_w_mass,e_w_bound,f_w_mass\n");
    let mut worst: Option<(f64, f64, f64)> = None;
    for level in 1..=levels {
        let h = 0.5f64.powi(level as i32);
        for &angle in &angles {
            let w = CarlesonWindow::new(BoundaryDirection::new(angle), h)
                .context("window construction failed")?;
            let class = classify_window_points(s, &partition, &w)
                .context("window classification failed")?;
            let e_mass = class.e_w_mass(s);
            let f_mass = class.f_w_mass(s);
            let bound = rate * h;
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                angle,
                h,
                class.e_w.len(),
                class.f_w.len(),
                e_mass,
                bound,
                f_mass
            ));
            if e_mass > bound * 1.05 && worst.map_or(true, |(_, _, excess)| e_mass / bound > excess)
            {
                worst = Some((angle, h, e_mass / bound));
            }
        }
    }
    match csv {
        Some(path) => fs::write(&path, out)
            .with_context(|| format!("cannot write CSV to {}", path.display()))?,
        None => print!("{out}"),
    }
    if let Some((angle, h, excess)) = worst {
        eprintln!(
            "failed: window_e_w_bound (direction angle {angle}, height {h}, {excess:.3}x the rate)"
        );
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn print_summary(report: &carleson::ExperimentReport) {
    println!("points: {}", report.point_count);
    println!(
        "separation: tightest pseudo distance {:.6}, certified delta {:.6}",
        report.separation.delta_p, report.delta_used
    );
    println!(
        "carleson norm: {:.6} (band bound {:.3}, cap {:.1})",
        report.carleson.norm_estimate,
        report.annulus_bound,
        report.config.tolerances.carleson_norm_cap
    );
    println!(
        "condition: {:.6e}  interpolating: {}",
        report.condition_c,
        if report.interpolating { "yes" } else { "no" }
    );
    println!(
        "partition: {:?}  |A| = {}  |B| = {}  violations = {}",
        report.partition.kind,
        report.partition.size_a,
        report.partition.size_b,
        report.partition.violations
    );
    println!(
        "evidence: floor {:.6}, power {}, effective {:.6}, stability {:.6}",
        report.eta_hat, report.eta_power, report.eta_effective, report.stability
    );
    println!(
        "tubes: {}  windows: {}",
        report.tubes.len(),
        report.windows.len()
    );
    println!("clauses:");
    for c in &report.clauses {
        let status = match c.status {
            ClauseStatus::Pass => "PASS",
            ClauseStatus::Fail => "FAIL",
            ClauseStatus::Skipped => "SKIP",
        };
        let numbers = match (c.lhs, c.rhs) {
            (Some(l), Some(r)) => format!(" [lhs {l:.6}, rhs {r:.6}]"),
            _ => String::new(),
        };
        println!("  {status} {}{numbers} — {}", c.name, c.detail);
    }
    println!("verdict: {}", if report.all_pass { "PASS" } else { "FAIL" });
}
