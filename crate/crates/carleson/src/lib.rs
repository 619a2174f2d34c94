//! Numerical toolkit for separated point sequences in the unit disc:
//! disc metrics and Carleson windows, sequence-level separation and
//! Carleson-measure estimates, Blaschke products, bipartite partition
//! constructions, tube/strip geometry, and an end-to-end experiment harness.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod partition;
pub mod sequence;
pub mod tube;

pub use error::Error;
pub use harness::{
    check_corollary, gen_non_carleson, gen_radial, gen_random_separated, report_to_csv,
    run_experiment, ClauseOutcome, ClauseStatus, ExperimentConfig, ExperimentReport,
    GammaSensitivity, PartitionSummary, Tolerances, TubeSummary, WindowCheck,
};
pub use geometry::{
    annulus_index, cayley_to_halfplane, disc_automorphism, hyperbolic_distance,
    pseudo_hyperbolic_distance, AnnulusIndex, BoundaryDirection, CarlesonWindow, DiscPoint, Metric,
};
pub use partition::{
    classify_window_points, good_partition, hoffman_partition, restricted_good_partition,
    verify_partition, Part, Partition, PartitionKind, Violation, WindowClassification,
};
pub use sequence::{
    blaschke_product, blaschke_product_over, carleson_bound_from_annuli, carleson_condition_inf,
    carleson_norm, dual_bound_witness, is_delta_separated, is_interpolating, max_separation_delta,
    points_per_annulus, separation_constant, AnnulusHistogram, CarlesonReport, PointSequence,
    SeparationReport,
};
pub use tube::{
    border_strip, build_partition_tubes, build_tube, build_tube_between, count_points_in_strip,
    e_w_mass, f_w_mass_bound, f_w_mass_bound_with_mesh, gradient_crossing_integral,
    stability_radius, tubes_disjoint, BorderStrip, ScalarFieldSamples, Tube, WindowSide,
};
