//! Hybrid systems with memory: time domains, arcs, graphical distances, and
//! trajectory tools.

pub mod analysis;
pub mod cloud;
pub mod domain;
pub mod error;
pub mod hull;
pub mod json;
pub mod metrics;
pub mod relations;
pub mod solver;
pub mod system;
pub mod systems;

pub use analysis::{
    check_kl, dist_to_set, locally_eventually_bounded, robustness_experiment,
    wellposedness_experiment, ConvergenceReport, KLBound, KLCheckReport, RobustnessReport, Target,
};
pub use cloud::{GraphCloud, PointCloud};
pub use domain::{ClassCertificate, HybridArc, HybridTimeDomain, MemoryArc, Segment, TAU_EQ};
pub use error::{Error, Result};
pub use hull::{hull_contains, hull_distance, hull_projection, HullProjection};
pub use json::{arc_from_json, arc_to_json, memory_arc_from_json, memory_arc_to_json};
pub use metrics::{
    arc_distance, arc_distance_capped, integrated_distance, tau_eps_closeness, uniform_distance,
    DistanceReport, QuadratureSpec,
};
pub use relations::{
    closeness_triangle_check, relation_check, set_lemma_check, RelationReport, SetLemmaReport,
    TriangleReport,
};
pub use solver::{
    euler_approximation, refine_study, residual_check, solve, Integrator, JumpRecord, Priority,
    RefineReport, ResidualReport, Selector, SolveOptions, SolveStatus, Solution,
};
pub use system::{
    extend_linear, regularity_probe, viability_probe, PerturbedSystem, RegularityReport, RhoFn,
    SystemData,
};
pub use systems::{example, Example, SystemSpec};
