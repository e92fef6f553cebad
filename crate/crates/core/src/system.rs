//! Hybrid systems with memory: flow and jump sets given by margin
//! functionals, set-valued flow and jump maps given by vertex lists, and
//! inflation of all four pieces into a perturbed system.
//!
//! A margin functional maps a memory arc to a signed number; the arc belongs
//! to the corresponding set when the margin is at most zero. Maps return a
//! list of vertices whose convex hull is the value set. Perturbation by a
//! weight `rho` and a scale in [0, 1] inflates margins by the scaled weight
//! and replaces each map by a sampled hull built from perturbed copies of
//! the argument arc plus sampled ball directions. Scale zero reproduces the
//! nominal system exactly.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::domain::{dist, norm, MemoryArc, TAU_EQ};
use crate::error::{Error, Result};
use crate::hull::hull_distance;

pub type MarginFn = Arc<dyn Fn(&MemoryArc) -> Result<f64> + Send + Sync>;
pub type MapFn = Arc<dyn Fn(&MemoryArc) -> Result<Vec<Vec<f64>>> + Send + Sync>;
pub type RhoFn = Arc<dyn Fn(&MemoryArc) -> f64 + Send + Sync>;
pub type LambdaFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

// Sampled-hull resolution for perturbed maps.
const PERTURB_COPIES: usize = 16;
const PERTURB_DIRECTIONS: usize = 8;
// Values beyond this are treated as escaping in boundedness reports.
const BOUNDEDNESS_CAP: f64 = 1e8;
// Halving depth for the viability step search.
const VIABILITY_HALVINGS: u32 = 20;

/// A hybrid system with memory of depth `delta` on states of dimension `n`.
#[derive(Clone)]
pub struct SystemData {
    pub name: String,
    pub delta: f64,
    pub n: usize,
    pub flow_margin: MarginFn,
    pub jump_margin: MarginFn,
    pub flow_map: MapFn,
    pub jump_map: MapFn,
    /// Envelope slope bound as a function of the state bound.
    pub lambda_of_b: LambdaFn,
    /// Margin inflation gain for the flow set under perturbation.
    pub flow_gain: f64,
    /// Margin inflation gain for the jump set under perturbation.
    pub jump_gain: f64,
}

impl SystemData {
    pub fn in_flow(&self, phi: &MemoryArc) -> Result<bool> {
        Ok((self.flow_margin)(phi)? <= TAU_EQ)
    }

    pub fn in_jump(&self, phi: &MemoryArc) -> Result<bool> {
        Ok((self.jump_margin)(phi)? <= TAU_EQ)
    }

    pub fn flow_vertices(&self, phi: &MemoryArc) -> Result<Vec<Vec<f64>>> {
        let v = (self.flow_map)(phi)?;
        check_vertices(&v, self.n, "flow map")?;
        Ok(v)
    }

    pub fn jump_vertices(&self, phi: &MemoryArc) -> Result<Vec<Vec<f64>>> {
        let v = (self.jump_map)(phi)?;
        check_vertices(&v, self.n, "jump map")?;
        Ok(v)
    }

    /// Inflates the system by `scale * rho`. Scale zero is the identity.
    pub fn perturb(&self, rho: RhoFn, scale: f64, seed: u64) -> Result<PerturbedSystem> {
        if !(0.0..=1.0).contains(&scale) || !scale.is_finite() {
            return Err(Error::InvalidScale { delta: scale });
        }
        Ok(PerturbedSystem { base: self.clone(), rho, scale, seed })
    }
}

fn check_vertices(v: &[Vec<f64>], n: usize, what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::PreconditionViolated(format!("{what} returned no vertices")));
    }
    for row in v {
        if row.len() != n {
            return Err(Error::PreconditionViolated(format!(
                "{what} vertex has dimension {} against state dimension {n}",
                row.len()
            )));
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::PreconditionViolated(format!("{what} vertex is not finite")));
        }
    }
    Ok(())
}

/// A system inflated by a weight function and a scale in [0, 1].
#[derive(Clone)]
pub struct PerturbedSystem {
    base: SystemData,
    rho: RhoFn,
    scale: f64,
    seed: u64,
}

/// Raw draws shared by every map evaluation of one perturbed system, so the
/// sampling pattern is identical across scales for matched-seed studies.
struct PerturbDraws {
    shifts: Vec<f64>,
    offsets: Vec<Vec<f64>>,
    directions: Vec<Vec<f64>>,
}

fn unit_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let len = norm(&v);
        if len > 1e-6 {
            return v.iter().map(|x| x / len).collect();
        }
    }
}

fn perturb_draws(seed: u64, n: usize) -> PerturbDraws {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shifts = Vec::with_capacity(PERTURB_COPIES);
    let mut offsets = Vec::with_capacity(PERTURB_COPIES);
    for _ in 0..PERTURB_COPIES {
        shifts.push(rng.random_range(-0.5..0.5));
        let dir = unit_direction(&mut rng, n);
        let r: f64 = rng.random_range(0.0..0.5);
        offsets.push(dir.iter().map(|x| x * r).collect());
    }
    let directions = (0..PERTURB_DIRECTIONS)
        .map(|_| unit_direction(&mut rng, n))
        .collect();
    PerturbDraws { shifts, offsets, directions }
}

/// Builds a copy of `phi` whose graph sits within `eps` of the original:
/// sample values are re-read at a time shifted by at most `eps / 2` and
/// offset by a vector of length at most `eps / 2`, on the unchanged grid.
fn perturbed_copy(phi: &MemoryArc, shift: f64, offset: &[f64], eps: f64) -> Result<MemoryArc> {
    let arc = phi.arc();
    let n = arc.n();
    let mut segments = Vec::with_capacity(arc.segments().len());
    for seg in arc.segments() {
        let (lo, hi) = (seg.t0(), seg.t1());
        let times = seg.times().to_vec();
        let mut values = Vec::with_capacity(times.len() * n);
        for &s in &times {
            let shifted = (s + shift * eps).clamp(lo, hi);
            let mut row = arc.eval(shifted, seg.j())?;
            for (x, o) in row.iter_mut().zip(offset) {
                *x += o * eps;
            }
            values.extend_from_slice(&row);
        }
        segments.push(crate::domain::Segment::new(seg.j(), times, values)?);
    }
    MemoryArc::from_arc(crate::domain::HybridArc::new(n, segments)?, phi.delta())
}

impl PerturbedSystem {
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Materializes the inflated system behind the plain system interface.
    pub fn system(&self) -> SystemData {
        let base = self.base.clone();
        let rho = self.rho.clone();
        let scale = self.scale;
        let seed = self.seed;

        let flow_margin: MarginFn = {
            let inner = base.flow_margin.clone();
            let rho = rho.clone();
            let gain = base.flow_gain;
            Arc::new(move |phi| Ok(inner(phi)? - gain * scale * weight(&rho, phi)?))
        };
        let jump_margin: MarginFn = {
            let inner = base.jump_margin.clone();
            let rho = rho.clone();
            let gain = base.jump_gain;
            Arc::new(move |phi| Ok(inner(phi)? - gain * scale * weight(&rho, phi)?))
        };
        let flow_map: MapFn = {
            let sys = base.clone();
            let rho = rho.clone();
            Arc::new(move |phi| sampled_hull(&sys, &rho, scale, seed, phi, false))
        };
        let jump_map: MapFn = {
            let sys = base.clone();
            let rho = rho.clone();
            Arc::new(move |phi| sampled_hull(&sys, &rho, scale, seed, phi, true))
        };
        SystemData {
            name: format!("{}+{}", base.name, scale),
            delta: base.delta,
            n: base.n,
            flow_margin,
            jump_margin,
            flow_map,
            jump_map,
            lambda_of_b: base.lambda_of_b.clone(),
            flow_gain: base.flow_gain,
            jump_gain: base.jump_gain,
        }
    }
}

fn weight(rho: &RhoFn, phi: &MemoryArc) -> Result<f64> {
    let w = rho(phi);
    if !w.is_finite() || w < 0.0 {
        return Err(Error::InvalidParam {
            name: "rho".into(),
            reason: format!("weight {w} at a memory arc; needs a finite nonnegative value"),
        });
    }
    Ok(w)
}

/// Vertex set of the inflated map at `phi`: the nominal vertices, the
/// nominal map over perturbed copies of `phi`, and sampled ball offsets.
/// The jump map offsets are sized by the weight of the appended post-jump
/// arc rather than the weight of `phi`.
fn sampled_hull(
    sys: &SystemData,
    rho: &RhoFn,
    scale: f64,
    seed: u64,
    phi: &MemoryArc,
    jump: bool,
) -> Result<Vec<Vec<f64>>> {
    let base_vertices = if jump { sys.jump_vertices(phi)? } else { sys.flow_vertices(phi)? };
    let eps = scale * weight(rho, phi)?;
    if eps == 0.0 {
        return Ok(base_vertices);
    }
    let draws = perturb_draws(seed, sys.n);
    let mut out = base_vertices.clone();
    for (shift, offset) in draws.shifts.iter().zip(&draws.offsets) {
        let copy = perturbed_copy(phi, *shift, offset, eps)?;
        let vs = if jump { sys.jump_vertices(&copy)? } else { sys.flow_vertices(&copy)? };
        out.extend(vs);
    }
    for v in &base_vertices {
        let radius = if jump {
            let appended = phi.append_jump(v)?.retrim()?;
            scale * weight(rho, &appended)?
        } else {
            eps
        };
        for dir in &draws.directions {
            out.push(v.iter().zip(dir).map(|(x, d)| x + radius * d).collect());
        }
    }
    out.dedup_by(|a, b| a == b);
    Ok(out)
}

/// Extends `phi` forward by one linear piece of slope `v` over `[0, h]` and
/// returns the trimmed memory arc at the new endpoint.
pub fn extend_linear(phi: &MemoryArc, v: &[f64], h: f64) -> Result<MemoryArc> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParam {
            name: "h".into(),
            reason: format!("step {h}; needs a positive finite value"),
        });
    }
    if v.len() != phi.n() {
        return Err(Error::InvalidParam {
            name: "v".into(),
            reason: format!("direction of dimension {} against state dimension {}", v.len(), phi.n()),
        });
    }
    let head = phi.head();
    let mut arc = phi.arc().clone();
    let tip: Vec<f64> = head.iter().zip(v).map(|(x, s)| x + h * s).collect();
    arc.push_sample(h, &tip);
    arc.memory_view(h, 0, phi.delta())
}

/// Searches the flow-map vertices and halved steps `eps * 2^-i` for a pair
/// `(v, h)` whose linear extension stays in the flow set and whose
/// difference quotient lies within `eps` of `v`. Returns the first hit.
pub fn viability_probe(
    sys: &SystemData,
    phi: &MemoryArc,
    eps: f64,
) -> Result<Option<(Vec<f64>, f64)>> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParam {
            name: "eps".into(),
            reason: format!("tolerance {eps}; needs a positive finite value"),
        });
    }
    let margin = (sys.flow_margin)(phi)?;
    if margin > TAU_EQ {
        return Err(Error::NotInFlowSet { margin });
    }
    let head = phi.head();
    for v in sys.flow_vertices(phi)? {
        for i in 0..=VIABILITY_HALVINGS {
            let h = eps * (0.5f64).powi(i as i32);
            let psi = extend_linear(phi, &v, h)?;
            if (sys.flow_margin)(&psi)? > TAU_EQ {
                continue;
            }
            let quotient: Vec<f64> = psi
                .head()
                .iter()
                .zip(&head)
                .map(|(a, b)| (a - b) / h)
                .collect();
            if dist(&quotient, &v) <= eps {
                return Ok(Some((v, h)));
            }
        }
    }
    Ok(None)
}

/// Consistency of map values along a convergent sequence of memory arcs.
#[derive(Debug, Clone)]
pub struct RegularityReport {
    /// Distance from each supplied value to the hull at the last arc.
    pub dists: Vec<f64>,
    pub max_value_norm: f64,
    pub bounded: bool,
    /// Whether the last quarter of the distances stays within tolerance.
    pub tail_pass: bool,
    pub tol: f64,
}

/// Checks flow-map values `y_i` taken along arcs `phi_i` against the hull
/// at the final arc of the sequence.
pub fn regularity_probe(
    sys: &SystemData,
    seq: &[(MemoryArc, Vec<f64>)],
    tol: f64,
) -> Result<RegularityReport> {
    if seq.is_empty() {
        return Err(Error::InvalidParam {
            name: "seq".into(),
            reason: "empty sequence".into(),
        });
    }
    let limit_hull = sys.flow_vertices(&seq.last().unwrap().0)?;
    let mut dists = Vec::with_capacity(seq.len());
    let mut max_value_norm = 0.0f64;
    for (phi, y) in seq {
        dists.push(hull_distance(y, &limit_hull)?);
        max_value_norm = max_value_norm.max(norm(y));
        for v in sys.flow_vertices(phi)? {
            max_value_norm = max_value_norm.max(norm(&v));
        }
    }
    let tail = seq.len().div_ceil(4);
    let tail_pass = dists[seq.len() - tail..].iter().all(|&d| d <= tol);
    Ok(RegularityReport {
        dists,
        max_value_norm,
        bounded: max_value_norm <= BOUNDEDNESS_CAP,
        tail_pass,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::HybridArc;
    use approx::assert_abs_diff_eq;

    fn constant_history(n: usize, value: f64, depth: f64) -> MemoryArc {
        let times = vec![-depth, 0.0];
        let mut values = Vec::new();
        for _ in 0..2 {
            values.extend(std::iter::repeat(value).take(n));
        }
        let arc = HybridArc::from_grid(n, times, values).unwrap();
        MemoryArc::from_arc(arc, depth - 0.5).unwrap()
    }

    fn toy_system() -> SystemData {
        // Scalar system with flow x' = -x, jump x -> x / 2, flow set
        // x >= 0.25, jump set x <= 0.25.
        SystemData {
            name: "toy".into(),
            delta: 1.0,
            n: 1,
            flow_margin: Arc::new(|phi| Ok(0.25 - phi.head()[0])),
            jump_margin: Arc::new(|phi| Ok(phi.head()[0] - 0.25)),
            flow_map: Arc::new(|phi| Ok(vec![vec![-phi.head()[0]]])),
            jump_map: Arc::new(|phi| Ok(vec![vec![phi.head()[0] / 2.0]])),
            lambda_of_b: Arc::new(|b| 1.0 + b),
            flow_gain: 1.0,
            jump_gain: 1.0,
        }
    }

    #[test]
    fn membership_follows_margin_sign() {
        let sys = toy_system();
        let inside = constant_history(1, 1.0, 1.5);
        let outside = constant_history(1, 0.1, 1.5);
        assert!(sys.in_flow(&inside).unwrap());
        assert!(!sys.in_flow(&outside).unwrap());
        assert!(sys.in_jump(&outside).unwrap());
    }

    #[test]
    fn zero_scale_perturbation_is_identity() {
        let sys = toy_system();
        let phi = constant_history(1, 1.0, 1.5);
        let rho: RhoFn = Arc::new(|_| 1.0);
        let p = sys.perturb(rho, 0.0, 7).unwrap().system();
        assert_eq!(p.flow_vertices(&phi).unwrap(), sys.flow_vertices(&phi).unwrap());
        assert_eq!(p.jump_vertices(&phi).unwrap(), sys.jump_vertices(&phi).unwrap());
        assert_abs_diff_eq!(
            (p.flow_margin)(&phi).unwrap(),
            (sys.flow_margin)(&phi).unwrap(),
            epsilon = 0.0
        );
    }

    #[test]
    fn perturbed_hull_contains_nominal_value_and_grows_with_scale() {
        let sys = toy_system();
        let phi = constant_history(1, 1.0, 1.5);
        let rho: RhoFn = Arc::new(|_| 1.0);
        let small = sys.perturb(rho.clone(), 0.1, 7).unwrap().system();
        let large = sys.perturb(rho, 0.5, 7).unwrap().system();
        let nominal = sys.flow_vertices(&phi).unwrap();
        let vs_small = small.flow_vertices(&phi).unwrap();
        let vs_large = large.flow_vertices(&phi).unwrap();
        assert_abs_diff_eq!(
            hull_distance(&nominal[0], &vs_small).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        let spread = |vs: &[Vec<f64>]| {
            let lo = vs.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
            let hi = vs.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        };
        assert!(spread(&vs_large) > spread(&vs_small));
        // Inflated margins only widen membership.
        assert!(small.in_flow(&phi).unwrap());
    }

    #[test]
    fn out_of_range_scale_is_rejected() {
        let sys = toy_system();
        let rho: RhoFn = Arc::new(|_| 1.0);
        assert!(matches!(
            sys.perturb(rho.clone(), -0.1, 0),
            Err(Error::InvalidScale { .. })
        ));
        assert!(matches!(sys.perturb(rho, 1.5, 0), Err(Error::InvalidScale { .. })));
    }

    #[test]
    fn viability_probe_finds_linear_extension() {
        let sys = toy_system();
        let phi = constant_history(1, 1.0, 1.5);
        let (v, h) = viability_probe(&sys, &phi, 0.05).unwrap().unwrap();
        assert_abs_diff_eq!(v[0], -1.0, epsilon = 1e-12);
        assert!(h > 0.0 && h <= 0.05);
        let psi = extend_linear(&phi, &v, h).unwrap();
        assert_abs_diff_eq!(psi.head()[0], 1.0 - h, epsilon = 1e-12);
    }

    #[test]
    fn viability_probe_rejects_arcs_outside_flow_set() {
        let sys = toy_system();
        let phi = constant_history(1, 0.1, 1.5);
        assert!(matches!(
            viability_probe(&sys, &phi, 0.05),
            Err(Error::NotInFlowSet { .. })
        ));
    }

    #[test]
    fn regularity_probe_flags_inconsistent_tail_values() {
        let sys = toy_system();
        let seq: Vec<(MemoryArc, Vec<f64>)> = (0..8)
            .map(|i| {
                let phi = constant_history(1, 1.0 + 0.1 / (1.0 + i as f64), 1.5);
                let y = sys.flow_vertices(&phi).unwrap()[0].clone();
                (phi, y)
            })
            .collect();
        let ok = regularity_probe(&sys, &seq, 0.05).unwrap();
        assert!(ok.tail_pass && ok.bounded);

        let mut bad = seq;
        let len = bad.len();
        bad[len - 1].1 = vec![3.0];
        let report = regularity_probe(&sys, &bad, 0.05).unwrap();
        assert!(!report.tail_pass);
    }
}
