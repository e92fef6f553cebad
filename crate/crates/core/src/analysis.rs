//! Convergence experiments over perturbation scales and decay-envelope
//! checks for solver output.

use std::sync::Arc;

use serde::Serialize;

use crate::cloud::PointCloud;
use crate::domain::{MemoryArc, TAU_EQ};
use crate::error::{Error, Result};
use crate::metrics::{arc_distance_capped, QuadratureSpec};
use crate::solver::{residual_check, solve, ResidualReport, Solution, SolveOptions, SolveStatus};
use crate::system::{RhoFn, SystemData};

/// Allowed uphill wiggle when testing that experiment distances trend down.
const TREND_SLACK: f64 = 1e-3;

/// Cloud size cap for experiment distances; keeps an eight-scale sweep cheap
/// while leaving the subsampled graphs dense enough for stable trends.
const EXPERIMENT_CLOUD_CAP: usize = 240;

/// Fractions of the reference endpoint time at which memory views of every
/// perturbed run are compared against the nominal view.
const PROBE_FRACTIONS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

/// A tail may grow this factor over the head before a solution sequence is
/// declared unbounded.
const BOUND_GROWTH_FACTOR: f64 = 2.0;

/// Decay envelope template `beta(r, s) = c * r * exp(-mu * s)` with a
/// practical offset added on top.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KLBound {
    pub c: f64,
    pub mu: f64,
    /// Practical offset added to every envelope evaluation.
    pub eps: f64,
}

impl KLBound {
    pub fn new(c: f64, mu: f64, eps: f64) -> Result<Self> {
        if !(c >= 1.0 && c.is_finite()) {
            return Err(Error::InvalidParam {
                name: "c".into(),
                reason: format!("envelope gain must be a finite value >= 1, got {c}"),
            });
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParam {
                name: "mu".into(),
                reason: format!("decay rate must be positive, got {mu}"),
            });
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParam {
                name: "eps".into(),
                reason: format!("offset must be nonnegative, got {eps}"),
            });
        }
        Ok(Self { c, mu, eps })
    }

    /// Envelope value before the practical offset.
    pub fn beta(&self, r: f64, s: f64) -> f64 {
        self.c * r * (-self.mu * s).exp()
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.c, self.mu, eps)
    }
}

/// Set the decay envelope measures distance to: a finite point set or an
/// axis-aligned box.
#[derive(Debug, Clone)]
pub enum Target {
    Points(PointCloud),
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Target {
    /// Box target pinning every component to zero.
    pub fn origin(n: usize) -> Self {
        Target::Box { lo: vec![0.0; n], hi: vec![0.0; n] }
    }
}

/// Euclidean distance from a point to the target set, exact for both forms.
pub fn dist_to_set(x: &[f64], w: &Target) -> Result<f64> {
    match w {
        Target::Points(cloud) => {
            if cloud.is_empty() {
                return Err(Error::EmptyTarget);
            }
            cloud.dist_to(x)
        }
        Target::Box { lo, hi } => {
            if lo.is_empty() {
                return Err(Error::EmptyTarget);
            }
            if lo.len() != hi.len() || lo.len() != x.len() {
                return Err(Error::DomainMismatch(format!(
                    "box dimension {} against point dimension {}",
                    lo.len(),
                    x.len()
                )));
            }
            for (a, b) in lo.iter().zip(hi) {
                if !(a.is_finite() && b.is_finite() && a <= b) {
                    return Err(Error::InvalidParam {
                        name: "box".into(),
                        reason: format!("need finite lo <= hi, got [{a}, {b}]"),
                    });
                }
            }
            let mut acc = 0.0;
            for ((&c, &a), &b) in x.iter().zip(lo).zip(hi) {
                let gap = (a - c).max(c - b).max(0.0);
                acc += gap * gap;
            }
            Ok(acc.sqrt())
        }
    }
}

/// Outcome of checking one solution against a decay envelope.
#[derive(Debug, Clone, Serialize)]
pub struct KLCheckReport {
    pub pass: bool,
    /// Smallest value of `beta + eps - dist` seen over the forward samples.
    pub worst_margin: f64,
    /// First `(t, j)` where the envelope was violated, if any.
    pub first_violation: Option<(f64, i64)>,
    /// Sup of the target distance over the initial memory samples.
    pub initial_norm: f64,
    pub samples_checked: usize,
}

/// Verifies `dist(x(t,j), W) <= beta(r0, t+j) + eps` at every forward sample,
/// where `r0` is the sup of the target distance over the initial memory.
pub fn check_kl(sol: &Solution, w: &Target, beta: &KLBound) -> Result<KLCheckReport> {
    let mut initial_norm = 0.0f64;
    for seg in sol.arc.segments() {
        if seg.j() > 0 {
            continue;
        }
        for i in 0..seg.len() {
            let (t, v) = seg.sample(i);
            if t <= TAU_EQ {
                initial_norm = initial_norm.max(dist_to_set(v, w)?);
            }
        }
    }

    let mut worst_margin = f64::INFINITY;
    let mut first_violation = None;
    let mut samples_checked = 0usize;
    for seg in sol.arc.segments() {
        if seg.j() < 0 {
            continue;
        }
        for i in 0..seg.len() {
            let (t, v) = seg.sample(i);
            if t < -TAU_EQ {
                continue;
            }
            let envelope = beta.beta(initial_norm, t + seg.j() as f64) + beta.eps;
            let margin = envelope - dist_to_set(v, w)?;
            samples_checked += 1;
            if margin < worst_margin {
                worst_margin = margin;
            }
            if margin < -TAU_EQ && first_violation.is_none() {
                first_violation = Some((t, seg.j()));
            }
        }
    }
    Ok(KLCheckReport {
        pass: first_violation.is_none(),
        worst_margin,
        first_violation,
        initial_norm,
        samples_checked,
    })
}

/// True when some tail of the sequence stays uniformly bounded over the
/// window `t + j < m`.
///
/// The finite search compares quarter blocks of the per-run sup norms: the
/// final quarter may exceed the first by at most a fixed growth factor.
pub fn locally_eventually_bounded(seq: &[Solution], m: f64) -> Result<bool> {
    if seq.is_empty() {
        return Err(Error::InvalidParam {
            name: "seq".into(),
            reason: "need at least one solution".into(),
        });
    }
    if !(m > 0.0) {
        return Err(Error::InvalidParam {
            name: "m".into(),
            reason: format!("window must be positive, got {m}"),
        });
    }
    let sups: Vec<f64> = seq
        .iter()
        .map(|sol| {
            let mut sup = 0.0f64;
            for seg in sol.arc.segments() {
                for i in 0..seg.len() {
                    let (t, v) = seg.sample(i);
                    if t + (seg.j() as f64) < m {
                        sup = sup.max(v.iter().map(|c| c * c).sum::<f64>().sqrt());
                    }
                }
            }
            sup
        })
        .collect();
    let quarter = sups.len().div_ceil(4);
    let head = sups[..quarter].iter().cloned().fold(0.0f64, f64::max);
    let tail = sups[sups.len() - quarter..].iter().cloned().fold(0.0f64, f64::max);
    Ok(tail <= BOUND_GROWTH_FACTOR * head + TAU_EQ * (1.0 + head))
}

/// One perturbed run inside a convergence experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentRun {
    pub delta: f64,
    pub status: Option<SolveStatus>,
    /// Graphical distance of the run to the nominal solution.
    pub distance: Option<f64>,
    /// Worst memory-view distance to the nominal view over the probe times.
    pub view_gap: Option<f64>,
    pub error: Option<String>,
}

/// Report of a perturbation-scale sweep against the nominal solution.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub runs: Vec<ExperimentRun>,
    /// Distances are nonincreasing within the trend slack.
    pub monotone: bool,
    pub bounded: bool,
    pub trend_slack: f64,
    /// Residuals of the smallest-scale run measured against the nominal
    /// system, with the slack the comparison was declared at.
    pub limit_residual: Option<ResidualReport>,
    pub limit_flow_slack: f64,
    pub limit_jump_slack: f64,
    pub limit_pass: Option<bool>,
}

fn view_gap_to_nominal(
    nominal: &Solution,
    run: &Solution,
    delta: f64,
    quad: &QuadratureSpec,
) -> Result<Option<f64>> {
    let (t_end, _) = nominal.endpoint();
    if t_end <= TAU_EQ {
        return Ok(None);
    }
    let mut worst: Option<f64> = None;
    for f in PROBE_FRACTIONS {
        let t = f * t_end;
        let Ok((j_n, _)) = nominal.arc.eval_latest(t) else { continue };
        let Ok((j_r, _)) = run.arc.eval_latest(t) else { continue };
        let view_n = nominal.arc.memory_view(t, j_n, delta)?;
        let view_r = run.arc.memory_view(t, j_r, delta)?;
        let d = arc_distance_capped(view_n.arc(), view_r.arc(), EXPERIMENT_CLOUD_CAP, quad)?.d;
        worst = Some(worst.map_or(d, |w: f64| w.max(d)));
    }
    Ok(worst)
}

/// Solves the system at each perturbation scale with matched seeds and
/// reports graphical distances to the nominal solution.
///
/// Scales must be nonincreasing and inside `[0, 1)`; a zero scale reproduces
/// the nominal run bit for bit and reports distance zero.
pub fn wellposedness_experiment(
    sys: &SystemData,
    rho: &RhoFn,
    delta_list: &[f64],
    phi0: &MemoryArc,
    opt: &SolveOptions,
    seed: u64,
) -> Result<ConvergenceReport> {
    if delta_list.is_empty() {
        return Err(Error::InvalidParam {
            name: "delta_list".into(),
            reason: "need at least one scale".into(),
        });
    }
    for pair in delta_list.windows(2) {
        if pair[1] > pair[0] {
            return Err(Error::InvalidParam {
                name: "delta_list".into(),
                reason: format!("scales must be nonincreasing, got {} then {}", pair[0], pair[1]),
            });
        }
    }
    for &d in delta_list {
        if !(0.0..1.0).contains(&d) {
            return Err(Error::InvalidParam {
                name: "delta_list".into(),
                reason: format!("scales must lie in [0, 1), got {d}"),
            });
        }
    }

    let quad = QuadratureSpec::default();
    let nominal = solve(sys, phi0, opt)?;
    let mut runs = Vec::with_capacity(delta_list.len());
    let mut solutions: Vec<Option<Solution>> = Vec::with_capacity(delta_list.len());
    for &delta in delta_list {
        let perturbed = sys.perturb(Arc::clone(rho), delta, seed)?.system();
        match solve(&perturbed, phi0, opt) {
            Ok(sol) => {
                let distance =
                    arc_distance_capped(&nominal.arc, &sol.arc, EXPERIMENT_CLOUD_CAP, &quad)?.d;
                let view_gap = view_gap_to_nominal(&nominal, &sol, sys.delta, &quad)?;
                runs.push(ExperimentRun {
                    delta,
                    status: Some(sol.status),
                    distance: Some(distance),
                    view_gap,
                    error: None,
                });
                solutions.push(Some(sol));
            }
            Err(e) => {
                runs.push(ExperimentRun {
                    delta,
                    status: None,
                    distance: None,
                    view_gap: None,
                    error: Some(e.to_string()),
                });
                solutions.push(None);
            }
        }
    }

    let mut monotone = true;
    let mut prev: Option<f64> = None;
    for run in &runs {
        let Some(d) = run.distance else { continue };
        if let Some(p) = prev {
            if d > p + TREND_SLACK {
                monotone = false;
            }
        }
        prev = Some(d);
    }

    let succeeded: Vec<Solution> = solutions.iter().flatten().cloned().collect();
    let window = opt.horizon_t + opt.horizon_j.max(0) as f64 + 1.0;
    let bounded =
        if succeeded.is_empty() { false } else { locally_eventually_bounded(&succeeded, window)? };

    let rho_ref = rho(&nominal.arc.memory_view(0.0, 0, sys.delta)?);
    let delta_last = *delta_list.last().unwrap();
    let limit_flow_slack = 5.0 * (opt.h + delta_last * sys.flow_gain.abs() * (1.0 + rho_ref));
    let limit_jump_slack = delta_last * sys.jump_gain.abs() * (1.0 + rho_ref) + TAU_EQ;
    let limit_residual = match solutions.iter().rev().flatten().next() {
        Some(sol) => Some(residual_check(sys, sol)?),
        None => None,
    };
    let limit_pass = limit_residual.as_ref().map(|r| {
        r.domain_valid
            && r.max_flow_residual <= limit_flow_slack
            && r.max_jump_gap <= limit_jump_slack
    });

    Ok(ConvergenceReport {
        runs,
        monotone,
        bounded,
        trend_slack: TREND_SLACK,
        limit_residual,
        limit_flow_slack,
        limit_jump_slack,
        limit_pass,
    })
}

/// Envelope verdicts over a grid of perturbation scales.
#[derive(Debug, Clone, Serialize)]
pub struct RobustnessReport {
    pub deltas: Vec<f64>,
    /// Per-scale verdict: every history passed the envelope check.
    pub passes: Vec<bool>,
    /// Per-scale worst margin across histories.
    pub worst_margins: Vec<f64>,
    pub nominal_pass: bool,
    /// Largest scale at which every history passed, if any.
    pub passing_delta: Option<f64>,
    pub eps: f64,
}

/// Solves the perturbed system for each scale and history and reports the
/// largest scale at which the decay envelope still holds everywhere.
pub fn robustness_experiment(
    sys: &SystemData,
    w: &Target,
    beta: &KLBound,
    rho: &RhoFn,
    delta_list: &[f64],
    histories: &[MemoryArc],
    opt: &SolveOptions,
    seed: u64,
) -> Result<RobustnessReport> {
    if histories.is_empty() {
        return Err(Error::InvalidParam {
            name: "histories".into(),
            reason: "need at least one initial memory arc".into(),
        });
    }

    let mut nominal_pass = true;
    for phi0 in histories {
        let sol = solve(sys, phi0, opt)?;
        if !check_kl(&sol, w, beta)?.pass {
            nominal_pass = false;
        }
    }

    let mut passes = Vec::with_capacity(delta_list.len());
    let mut worst_margins = Vec::with_capacity(delta_list.len());
    for &delta in delta_list {
        let perturbed = sys.perturb(Arc::clone(rho), delta, seed)?.system();
        let mut all_pass = true;
        let mut worst = f64::INFINITY;
        for phi0 in histories {
            let sol = solve(&perturbed, phi0, opt)?;
            let report = check_kl(&sol, w, beta)?;
            all_pass &= report.pass;
            worst = worst.min(report.worst_margin);
        }
        passes.push(all_pass);
        worst_margins.push(worst);
    }

    let passing_delta = delta_list
        .iter()
        .zip(&passes)
        .filter(|(_, &p)| p)
        .map(|(&d, _)| d)
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))));

    Ok(RobustnessReport {
        deltas: delta_list.to_vec(),
        passes,
        worst_margins,
        nominal_pass,
        passing_delta,
        eps: beta.eps,
    })
}
