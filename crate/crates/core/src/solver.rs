//! Trajectory construction for hybrid systems with memory.
//!
//! The solver extends an initial history forward by fixed-step integration
//! of the flow map and discrete application of the jump map. At each step
//! it evaluates both margins on the trimmed memory view of the current
//! endpoint; jumps take priority when both moves are available unless
//! configured otherwise. Margin sign changes inside a flow step are located
//! by bisection along the committed chord, so jumps land on the margin
//! boundary up to the event tolerance instead of a grid point.
//!
//! Alongside the fixed-step solver there is a viability-driven polygonal
//! construction that picks each step from the flow-map vertices through
//! [`viability_probe`], a refinement study across step sizes, a residual
//! check that certifies a computed solution against the system it claims to
//! solve, and a continuity check for the memory views of a finished arc.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::domain::{norm, HybridArc, MemoryArc, TAU_EQ};
use crate::error::{Error, Result};
use crate::hull::hull_distance;
use crate::metrics::{arc_distance_capped, QuadratureSpec};
use crate::system::{viability_probe, SystemData};

// Cloud size used for the graphical gaps inside studies.
const STUDY_CLOUD_CAP: usize = 160;
// Grid used for uniform gaps between solutions; offset to dodge the jump
// instants themselves.
const STUDY_GRID: usize = 512;

/// Which move wins when a state sits in both the flow and the jump set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Priority {
    JumpFirst,
    FlowFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Integrator {
    Euler,
    Rk4,
}

/// How a vertex is chosen when a map returns more than one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Selector {
    First,
    Seeded(u64),
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveOptions {
    pub h: f64,
    pub horizon_t: f64,
    /// Largest jump index the run may reach.
    pub horizon_j: i64,
    pub priority: Priority,
    pub integrator: Integrator,
    /// State norm beyond which the run stops as escaping.
    pub blowup_threshold: f64,
    /// Width to which margin sign changes are located inside a step.
    pub event_tol: f64,
    pub selector: Selector,
}

impl SolveOptions {
    pub fn new(h: f64, horizon_t: f64, horizon_j: i64) -> Self {
        Self {
            h,
            horizon_t,
            horizon_j,
            priority: Priority::JumpFirst,
            integrator: Integrator::Euler,
            blowup_threshold: 1e8,
            event_tol: 1e-9,
            selector: Selector::First,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |name: &str, reason: String| Err(Error::InvalidParam { name: name.into(), reason });
        if !(self.h > 0.0) || !self.h.is_finite() {
            return bad("h", format!("step {}; needs a positive finite value", self.h));
        }
        if !(self.horizon_t >= 0.0) || !self.horizon_t.is_finite() {
            return bad("horizon_t", format!("horizon {}", self.horizon_t));
        }
        if self.horizon_j < 0 {
            return bad("horizon_j", format!("jump cap {}", self.horizon_j));
        }
        if !(self.blowup_threshold > 0.0) {
            return bad("blowup_threshold", format!("threshold {}", self.blowup_threshold));
        }
        if !(self.event_tol > 0.0) || self.event_tol >= self.h {
            return bad(
                "event_tol",
                format!("tolerance {} against step {}", self.event_tol, self.h),
            );
        }
        Ok(())
    }
}

/// How a run ended, with the endpoint it reached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolveStatus {
    Complete { t: f64, j: i64 },
    BlowUp { t: f64, j: i64 },
    /// Neither flowing nor jumping was possible.
    StuckOutsideCd { t: f64, j: i64 },
    JumpCapReached { t: f64, j: i64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct JumpRecord {
    /// Flow time of the jump.
    pub t: f64,
    /// Jump index before the jump.
    pub j: i64,
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub arc: HybridArc,
    pub status: SolveStatus,
    pub jump_log: Vec<JumpRecord>,
}

impl Solution {
    pub fn endpoint(&self) -> (f64, i64) {
        match self.status {
            SolveStatus::Complete { t, j }
            | SolveStatus::BlowUp { t, j }
            | SolveStatus::StuckOutsideCd { t, j }
            | SolveStatus::JumpCapReached { t, j } => (t, j),
        }
    }
}

fn pick(selector: &mut Option<ChaCha8Rng>, len: usize) -> usize {
    match selector {
        None => 0,
        Some(rng) => rng.random_range(0..len),
    }
}

/// Evaluates both margins at `(t, j)` after temporarily appending the chord
/// sample `row` to the last segment.
fn margins_with_sample(
    sys: &SystemData,
    arc: &mut HybridArc,
    t: f64,
    j: i64,
    row: &[f64],
) -> Result<(f64, f64)> {
    arc.push_sample(t, row);
    let out = (|| {
        let view = arc.memory_view(t, j, sys.delta)?;
        Ok(((sys.flow_margin)(&view)?, (sys.jump_margin)(&view)?))
    })();
    arc.pop_sample();
    out
}

fn rk4_step(
    sys: &SystemData,
    arc: &mut HybridArc,
    t: f64,
    j: i64,
    x: &[f64],
    sigma: f64,
    idx: usize,
) -> Result<Vec<f64>> {
    let stage = |arc: &mut HybridArc, tt: f64, xx: &[f64]| -> Result<Vec<f64>> {
        arc.push_sample(tt, xx);
        let out = (|| {
            let view = arc.memory_view(tt, j, sys.delta)?;
            let vs = sys.flow_vertices(&view)?;
            Ok(vs[idx % vs.len()].clone())
        })();
        arc.pop_sample();
        out
    };
    let view = arc.memory_view(t, j, sys.delta)?;
    let vs = sys.flow_vertices(&view)?;
    let k1 = vs[idx % vs.len()].clone();
    let half = sigma / 2.0;
    let at = |k: &[f64], w: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + w * b).collect() };
    let k2 = stage(arc, t + half, &at(&k1, half))?;
    let k3 = stage(arc, t + half, &at(&k2, half))?;
    let k4 = stage(arc, t + sigma, &at(&k3, sigma))?;
    Ok(x.iter()
        .enumerate()
        .map(|(c, a)| a + sigma / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]))
        .collect())
}

/// Integrates the system forward from the history `phi0` until a horizon,
/// a blow-up, or a dead end.
pub fn solve(sys: &SystemData, phi0: &MemoryArc, opt: &SolveOptions) -> Result<Solution> {
    opt.validate()?;
    if phi0.n() != sys.n {
        return Err(Error::DomainMismatch(format!(
            "history of dimension {} against system dimension {}",
            phi0.n(),
            sys.n
        )));
    }
    let mut arc = phi0.arc().clone();
    let mut t = 0.0f64;
    let mut j = arc.j_max();
    let mut jump_count: i64 = 0;
    let mut jump_log = Vec::new();
    let mut selector = match opt.selector {
        Selector::First => None,
        Selector::Seeded(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
    };
    {
        let view = arc.memory_view(t, j, sys.delta)?;
        let m_c = (sys.flow_margin)(&view)?;
        let m_d = (sys.jump_margin)(&view)?;
        if m_c > TAU_EQ && m_d > TAU_EQ {
            return Err(Error::InitialDataNotInCd { flow_margin: m_c, jump_margin: m_d });
        }
    }
    let iter_cap = (((opt.horizon_t / opt.h).ceil() as usize) + opt.horizon_j.max(0) as usize + 64) * 8;
    let mut stagnation = 0usize;
    let status = 'run: {
        for _ in 0..iter_cap {
            let view = arc.memory_view(t, j, sys.delta)?;
            let m_c = (sys.flow_margin)(&view)?;
            let m_d = (sys.jump_margin)(&view)?;
            let can_flow = m_c <= TAU_EQ;
            let at_horizon = t >= opt.horizon_t - TAU_EQ;
            let want_jump = m_d <= TAU_EQ
                && (matches!(opt.priority, Priority::JumpFirst) || !can_flow);
            if want_jump && jump_count >= opt.horizon_j {
                if at_horizon {
                    break 'run SolveStatus::Complete { t, j };
                }
                if !can_flow {
                    break 'run SolveStatus::JumpCapReached { t, j };
                }
                // Cap reached with flowing still available: keep flowing.
            } else if want_jump {
                let vs = sys.jump_vertices(&view)?;
                let g = vs[pick(&mut selector, vs.len())].clone();
                jump_log.push(JumpRecord { t, j, pre: view.head(), post: g.clone() });
                arc.start_segment(t, &g);
                j += 1;
                jump_count += 1;
                continue;
            }
            if at_horizon {
                break 'run SolveStatus::Complete { t, j };
            }
            if !can_flow {
                break 'run SolveStatus::StuckOutsideCd { t, j };
            }

            let sigma = opt.h.min(opt.horizon_t - t);
            let x = view.head();
            let idx = pick(&mut selector, 16);
            let x_new = match opt.integrator {
                Integrator::Euler => {
                    let vs = sys.flow_vertices(&view)?;
                    let v = &vs[idx % vs.len()];
                    x.iter().zip(v).map(|(a, b)| a + sigma * b).collect::<Vec<f64>>()
                }
                Integrator::Rk4 => rk4_step(sys, &mut arc, t, j, &x, sigma, idx)?,
            };
            if x_new.iter().any(|c| !c.is_finite()) {
                break 'run SolveStatus::BlowUp { t, j };
            }
            if norm(&x_new) > opt.blowup_threshold {
                arc.push_sample(t + sigma, &x_new);
                break 'run SolveStatus::BlowUp { t: t + sigma, j };
            }
            let (mc_end, md_end) = margins_with_sample(sys, &mut arc, t + sigma, j, &x_new)?;
            let chord = |s: f64| -> Vec<f64> {
                x.iter()
                    .zip(&x_new)
                    .map(|(a, b)| a + (s / sigma) * (b - a))
                    .collect()
            };
            if m_d > TAU_EQ && md_end < -TAU_EQ {
                // The jump set was entered strictly inside the step: locate
                // the crossing and stop there.
                let mut lo = 0.0f64;
                let mut hi = sigma;
                while hi - lo > opt.event_tol {
                    let mid = 0.5 * (lo + hi);
                    let (_, md_mid) = margins_with_sample(sys, &mut arc, t + mid, j, &chord(mid))?;
                    if md_mid <= TAU_EQ {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                arc.push_sample(t + hi, &chord(hi));
                t += hi;
                stagnation = 0;
            } else if mc_end > TAU_EQ && md_end > TAU_EQ {
                // The step left the flow set with no jump available: stop on
                // the flow-set boundary.
                let mut lo = 0.0f64;
                let mut hi = sigma;
                while hi - lo > opt.event_tol {
                    let mid = 0.5 * (lo + hi);
                    let (mc_mid, _) = margins_with_sample(sys, &mut arc, t + mid, j, &chord(mid))?;
                    if mc_mid <= TAU_EQ {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                if lo <= opt.event_tol {
                    stagnation += 1;
                    if stagnation >= 2 {
                        break 'run SolveStatus::StuckOutsideCd { t, j };
                    }
                } else {
                    arc.push_sample(t + lo, &chord(lo));
                    t += lo;
                    stagnation = 0;
                }
            } else {
                arc.push_sample(t + sigma, &x_new);
                t += sigma;
                stagnation = 0;
            }
        }
        // Iteration budget spent without reaching any horizon.
        return Err(Error::PreconditionViolated(format!(
            "solver spent its iteration budget of {iter_cap} before t = {} or {} jumps",
            opt.horizon_t, opt.horizon_j
        )));
    };
    Ok(Solution { arc, status, jump_log })
}

/// Certification of a computed solution against a system: difference
/// quotients against the flow hull, logged jumps against the jump hull,
/// and structural validity of the produced domain.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub max_flow_residual: f64,
    pub max_jump_gap: f64,
    pub domain_valid: bool,
    pub flow_pairs: usize,
}

pub fn residual_check(sys: &SystemData, sol: &Solution) -> Result<ResidualReport> {
    let arc = &sol.arc;
    let domain_valid = HybridArc::new(arc.n(), arc.segments().to_vec()).is_ok();
    let mut max_flow_residual = 0.0f64;
    let mut flow_pairs = 0usize;
    for seg in arc.segments() {
        if seg.j() < 0 {
            continue;
        }
        for i in 0..seg.len().saturating_sub(1) {
            let (t0, x0) = seg.sample(i);
            let (t1, x1) = seg.sample(i + 1);
            if t0 < 0.0 {
                continue;
            }
            let dt = t1 - t0;
            if dt <= 0.0 {
                continue;
            }
            let q: Vec<f64> = x0.iter().zip(x1).map(|(a, b)| (b - a) / dt).collect();
            let view = arc.memory_view(t0, seg.j(), sys.delta)?;
            let hull = sys.flow_vertices(&view)?;
            max_flow_residual = max_flow_residual.max(hull_distance(&q, &hull)?);
            flow_pairs += 1;
        }
    }
    let mut max_jump_gap = 0.0f64;
    for rec in &sol.jump_log {
        let view = arc.memory_view(rec.t, rec.j, sys.delta)?;
        let hull = sys.jump_vertices(&view)?;
        max_jump_gap = max_jump_gap.max(hull_distance(&rec.post, &hull)?);
    }
    Ok(ResidualReport { max_flow_residual, max_jump_gap, domain_valid, flow_pairs })
}

/// Why a viability-driven construction stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopReason {
    HorizonReached,
    BudgetExhausted,
    ViabilityExhausted,
}

#[derive(Debug, Clone)]
pub struct EulerApprox {
    pub arc: HybridArc,
    /// Flow time reached.
    pub reached: f64,
    pub stop: StopReason,
    /// Guaranteed-progress window derived from the slope envelope.
    pub budget: f64,
    /// Slope envelope actually observed.
    pub lambda: f64,
}

/// Polygonal construction driven by [`viability_probe`]: each step takes
/// the probe's certified vertex and step length, so the result is a
/// Lipschitz arc whose difference quotients sit within `eps` of the flow
/// hull throughout.
pub fn euler_approximation(
    sys: &SystemData,
    phi0: &MemoryArc,
    eps: f64,
    t_max: f64,
) -> Result<EulerApprox> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParam {
            name: "eps".into(),
            reason: format!("tolerance {eps}; needs a value strictly between 0 and 1"),
        });
    }
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidParam {
            name: "t_max".into(),
            reason: format!("horizon {t_max}"),
        });
    }
    let b = phi0.arc().sup_norm();
    let a = 1.0 + b;
    let mut lambda = (sys.lambda_of_b)(b).max(1.0);
    let mut budget = a / (lambda + (1.0 + lambda) * eps);
    let mut arc = phi0.arc().clone();
    let mut t = 0.0f64;
    let stop;
    loop {
        if t >= t_max - TAU_EQ {
            stop = StopReason::HorizonReached;
            break;
        }
        if t >= budget - TAU_EQ {
            stop = StopReason::BudgetExhausted;
            break;
        }
        let view = arc.memory_view(t, 0, sys.delta)?;
        let probe = match viability_probe(sys, &view, eps) {
            Ok(p) => p,
            Err(Error::NotInFlowSet { .. }) => None,
            Err(e) => return Err(e),
        };
        let Some((v, h)) = probe else {
            stop = StopReason::ViabilityExhausted;
            break;
        };
        let x = view.head();
        let tip: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        arc.push_sample(t + h, &tip);
        t += h;
        lambda = lambda.max(1.0 + norm(&v));
        budget = a / (lambda + (1.0 + lambda) * eps);
    }
    Ok(EulerApprox { arc, reached: t, stop, budget, lambda })
}

#[derive(Debug, Clone, Serialize)]
pub struct RefineEntry {
    /// Coarser step of the compared pair.
    pub h: f64,
    /// Largest state gap over an offset grid of shared flow times.
    pub uniform_gap: f64,
    /// Graphical distance between the two solutions.
    pub graph_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefineReport {
    pub entries: Vec<RefineEntry>,
    /// Convergence order fitted from consecutive uniform gaps.
    pub order: Option<f64>,
}

/// Largest pointwise gap between two solutions over an offset time grid,
/// reading the latest jump index at each time.
fn uniform_gap(a: &HybridArc, b: &HybridArc, t_end: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for k in 0..STUDY_GRID {
        let t = t_end * (k as f64 + 0.5) / STUDY_GRID as f64;
        let (_, xa) = a.eval_latest(t)?;
        let (_, xb) = b.eval_latest(t)?;
        let gap = xa
            .iter()
            .zip(&xb)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(gap);
    }
    Ok(worst)
}

/// Solves the same initial-value problem across decreasing steps and
/// reports the gaps between consecutive solutions.
pub fn refine_study(
    sys: &SystemData,
    phi0: &MemoryArc,
    steps: &[f64],
    base: &SolveOptions,
) -> Result<RefineReport> {
    if steps.len() < 2 {
        return Err(Error::InvalidParam {
            name: "steps".into(),
            reason: format!("{} steps; needs at least two", steps.len()),
        });
    }
    for pair in steps.windows(2) {
        if !(pair[1] < pair[0]) {
            return Err(Error::InvalidParam {
                name: "steps".into(),
                reason: "steps are not strictly decreasing".into(),
            });
        }
    }
    let solutions: Vec<Solution> = steps
        .iter()
        .map(|&h| {
            let mut opt = base.clone();
            opt.h = h;
            solve(sys, phi0, &opt)
        })
        .collect::<Result<_>>()?;
    let quad = QuadratureSpec::default();
    let mut entries = Vec::new();
    for (i, pair) in solutions.windows(2).enumerate() {
        let t_end = pair[0].endpoint().0.min(pair[1].endpoint().0);
        entries.push(RefineEntry {
            h: steps[i],
            uniform_gap: uniform_gap(&pair[0].arc, &pair[1].arc, t_end)?,
            graph_gap: arc_distance_capped(&pair[0].arc, &pair[1].arc, STUDY_CLOUD_CAP, &quad)?.d,
        });
    }
    let mut fits = Vec::new();
    for (i, pair) in entries.windows(2).enumerate() {
        if pair[0].uniform_gap > 1e-14 && pair[1].uniform_gap > 1e-14 {
            let r = (pair[0].uniform_gap / pair[1].uniform_gap).ln()
                / (steps[i] / steps[i + 1]).ln();
            fits.push(r);
        }
    }
    let order = if fits.is_empty() {
        None
    } else {
        Some(fits.iter().sum::<f64>() / fits.len() as f64)
    };
    Ok(RefineReport { entries, order })
}

/// Shrinkage of memory-view increments along one flow interval.
#[derive(Debug, Clone, Serialize)]
pub struct ContinuityReport {
    /// Pairs of time increment and the largest view distance observed.
    pub increments: Vec<(f64, f64)>,
    pub shrinking: bool,
    /// Times excluded because the trim window crosses a breakpoint there.
    pub excluded: Vec<f64>,
}

/// Checks that memory views at nearby times of the interval `j` stay close,
/// away from the times where the trim window boundary crosses a domain
/// breakpoint.
pub fn continuity_check(
    arc: &HybridArc,
    j: i64,
    delta: f64,
    grid: usize,
    scales: usize,
) -> Result<ContinuityReport> {
    let (lo, hi) = arc.interval(j).ok_or(Error::OutOfDomain { t: 0.0, j })?;
    let lo = lo.max(0.0);
    if hi - lo < 1e-6 {
        return Err(Error::EmptyInterior);
    }
    let mut excluded = Vec::new();
    for seg in arc.segments() {
        if seg.j() > j {
            continue;
        }
        for u in [seg.t0(), seg.t1()] {
            let theta = u + delta + 1.0 + (seg.j() - j) as f64;
            if theta > lo && theta < hi {
                excluded.push(theta);
            }
        }
    }
    let pad = 1e-6;
    let quad = QuadratureSpec::default();
    let grid = grid.max(4);
    let base_dt = (hi - lo) / 8.0;
    let mut increments = Vec::new();
    for m in 0..scales.max(1) {
        let dt = base_dt * (0.5f64).powi(m as i32);
        let mut worst = 0.0f64;
        for g in 0..grid {
            let t = lo + (hi - lo) * (g as f64 + 0.5) / grid as f64;
            if t + dt > hi {
                continue;
            }
            if excluded
                .iter()
                .any(|&th| (t - th).abs() < pad || (t + dt - th).abs() < pad || (t < th && th < t + dt))
            {
                continue;
            }
            let va = arc.memory_view(t, j, delta)?;
            let vb = arc.memory_view(t + dt, j, delta)?;
            let d = arc_distance_capped(va.arc(), vb.arc(), STUDY_CLOUD_CAP, &quad)?.d;
            worst = worst.max(d);
        }
        increments.push((dt, worst));
    }
    let first = increments.first().map(|&(_, d)| d).unwrap_or(0.0);
    let last = increments.last().map(|&(_, d)| d).unwrap_or(0.0);
    let shrinking = last <= 0.75 * first + 1e-9;
    Ok(ContinuityReport { increments, shrinking, excluded })
}
