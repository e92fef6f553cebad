//! Built-in example systems and the declarative family they compile from.
//!
//! A system spec lists margin functionals and vertex maps in a small affine
//! language: each map vertex is a bias plus matrix products of delayed state
//! lookups, and each margin is either a timer threshold on one component or
//! a norm comparison of two affine expressions. Specs serialize as JSON and
//! compile to closures behind [`SystemData`].
//!
//! Delayed lookups resolve at the highest index available at the requested
//! time unless the term pins an explicit index. Pinned lookups fail once
//! the requested point leaves the trimmed memory window, and that failure
//! surfaces as a map evaluation error rather than being patched over.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{norm, HybridArc, MemoryArc};
use crate::error::{Error, Result};
use crate::system::{LambdaFn, MapFn, MarginFn, SystemData};

/// One delayed matrix product inside an affine expression.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AffineTerm {
    /// Lookup time, at most zero, relative to the end of the memory arc.
    pub delay: f64,
    /// Matrix applied to the looked-up state, `n` rows of length `n`.
    pub matrix: Vec<Vec<f64>>,
    /// Explicit memory index for the lookup; highest available otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at_index: Option<i64>,
}

/// Bias plus a sum of delayed matrix products.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AffineExpr {
    pub terms: Vec<AffineTerm>,
    pub bias: Vec<f64>,
}

impl AffineExpr {
    pub fn eval(&self, phi: &MemoryArc) -> Result<Vec<f64>> {
        let mut out = self.bias.clone();
        for term in &self.terms {
            let looked = match term.at_index {
                Some(k) => phi.eval(term.delay, k),
                None => phi.eval_latest(term.delay).map(|(_, v)| v),
            };
            let w = looked.map_err(|e| Error::MapEvaluation {
                t: term.delay,
                j: term.at_index.unwrap_or(0),
                source: Box::new(e),
            })?;
            for (r, row) in term.matrix.iter().enumerate() {
                out[r] += row.iter().zip(&w).map(|(m, x)| m * x).sum::<f64>();
            }
        }
        Ok(out)
    }
}

/// Which side of a threshold a margin accepts.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    /// Accept while the monitored quantity is at most the threshold.
    AtMost,
    /// Accept once the monitored quantity is at least the threshold.
    AtLeast,
}

/// Margin functional over a memory arc.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginSpec {
    /// Compares one component of the current state against a threshold.
    Timer { component: usize, threshold: f64, sense: Sense },
    /// Compares `|error|` against `gain * |reference|`.
    Trigger { error: AffineExpr, reference: AffineExpr, gain: f64, sense: Sense },
    /// Margin fixed at minus one.
    Always,
}

impl MarginSpec {
    fn eval(&self, phi: &MemoryArc) -> Result<f64> {
        match self {
            MarginSpec::Timer { component, threshold, sense } => {
                let value = phi.head()[*component];
                Ok(match sense {
                    Sense::AtMost => value - threshold,
                    Sense::AtLeast => threshold - value,
                })
            }
            MarginSpec::Trigger { error, reference, gain, sense } => {
                let q = norm(&error.eval(phi)?) - gain * norm(&reference.eval(phi)?);
                Ok(match sense {
                    Sense::AtMost => q,
                    Sense::AtLeast => -q,
                })
            }
            MarginSpec::Always => Ok(-1.0),
        }
    }
}

/// Declarative system description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SystemSpec {
    pub name: String,
    pub delta: f64,
    pub n: usize,
    pub flow_margin: MarginSpec,
    pub jump_margin: MarginSpec,
    pub flow_map: Vec<AffineExpr>,
    pub jump_map: Vec<AffineExpr>,
    #[serde(default = "one")]
    pub lambda_c0: f64,
    #[serde(default = "one")]
    pub lambda_c1: f64,
    #[serde(default = "one")]
    pub flow_gain: f64,
    #[serde(default = "one")]
    pub jump_gain: f64,
}

fn one() -> f64 {
    1.0
}

fn invalid(name: &str, reason: String) -> Error {
    Error::InvalidParam { name: name.into(), reason }
}

fn check_expr(expr: &AffineExpr, n: usize, what: &str) -> Result<()> {
    if expr.bias.len() != n {
        return Err(invalid(what, format!("bias of length {}, state dimension {n}", expr.bias.len())));
    }
    for term in &expr.terms {
        if !(term.delay <= 0.0) || !term.delay.is_finite() {
            return Err(invalid(what, format!("delay {}; needs a finite value at most zero", term.delay)));
        }
        if term.matrix.len() != n || term.matrix.iter().any(|row| row.len() != n) {
            return Err(invalid(what, format!("matrix is not {n} by {n}")));
        }
    }
    Ok(())
}

fn check_margin(margin: &MarginSpec, n: usize, what: &str) -> Result<()> {
    match margin {
        MarginSpec::Timer { component, threshold, .. } => {
            if *component >= n {
                return Err(invalid(what, format!("component {component} out of range for dimension {n}")));
            }
            if !threshold.is_finite() {
                return Err(invalid(what, format!("threshold {threshold}")));
            }
            Ok(())
        }
        MarginSpec::Trigger { error, reference, gain, .. } => {
            check_expr(error, n, what)?;
            check_expr(reference, n, what)?;
            if !gain.is_finite() || *gain < 0.0 {
                return Err(invalid(what, format!("gain {gain}; needs a finite nonnegative value")));
            }
            Ok(())
        }
        MarginSpec::Always => Ok(()),
    }
}

/// Compiles a spec into a runnable system.
pub fn compile(spec: &SystemSpec) -> Result<SystemData> {
    if !(spec.delta > 0.0) || !spec.delta.is_finite() {
        return Err(invalid("delta", format!("memory size {}; needs a positive finite value", spec.delta)));
    }
    if spec.n == 0 {
        return Err(invalid("n", "state dimension zero".into()));
    }
    check_margin(&spec.flow_margin, spec.n, "flow_margin")?;
    check_margin(&spec.jump_margin, spec.n, "jump_margin")?;
    if spec.flow_map.is_empty() || spec.jump_map.is_empty() {
        return Err(invalid("map", "empty vertex list".into()));
    }
    for expr in spec.flow_map.iter().chain(&spec.jump_map) {
        check_expr(expr, spec.n, "map")?;
    }
    let spec = Arc::new(spec.clone());
    let flow_margin: MarginFn = {
        let spec = spec.clone();
        Arc::new(move |phi| spec.flow_margin.eval(phi))
    };
    let jump_margin: MarginFn = {
        let spec = spec.clone();
        Arc::new(move |phi| spec.jump_margin.eval(phi))
    };
    let flow_map: MapFn = {
        let spec = spec.clone();
        Arc::new(move |phi| spec.flow_map.iter().map(|e| e.eval(phi)).collect())
    };
    let jump_map: MapFn = {
        let spec = spec.clone();
        Arc::new(move |phi| spec.jump_map.iter().map(|e| e.eval(phi)).collect())
    };
    let lambda_of_b: LambdaFn = {
        let (c0, c1) = (spec.lambda_c0, spec.lambda_c1);
        Arc::new(move |b| c0 + c1 * b)
    };
    Ok(SystemData {
        name: spec.name.clone(),
        delta: spec.delta,
        n: spec.n,
        flow_margin,
        jump_margin,
        flow_map,
        jump_map,
        lambda_of_b,
        flow_gain: spec.flow_gain,
        jump_gain: spec.jump_gain,
    })
}

pub fn spec_to_json(spec: &SystemSpec) -> Result<String> {
    serde_json::to_string_pretty(spec).map_err(|e| invalid("spec", e.to_string()))
}

pub fn spec_from_json(text: &str) -> Result<SystemSpec> {
    serde_json::from_str(text).map_err(|e| invalid("spec", e.to_string()))
}

/// How the delayed-doubling jump rule reads its argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdeJumpRule {
    /// Double the current value.
    Prose,
    /// Double the value two time units back at memory index zero. Fails
    /// once a jump has trimmed that point out of the window.
    Literal,
}

fn scalar_term(delay: f64, coeff: f64, at_index: Option<i64>) -> AffineTerm {
    AffineTerm { delay, matrix: vec![vec![coeff, 0.0], vec![0.0, 0.0]], at_index }
}

/// Delay differential system with a timer-driven doubling impulse:
/// `x' = x(t - 2)`, timer rate one, jump doubles `x` and resets the timer
/// once it reaches `delta_timer`. Memory size three.
pub fn impulsive_dde_spec(delta_timer: f64, rule: DdeJumpRule) -> SystemSpec {
    let jump_term = match rule {
        DdeJumpRule::Prose => scalar_term(0.0, 2.0, None),
        DdeJumpRule::Literal => scalar_term(-2.0, 2.0, Some(0)),
    };
    SystemSpec {
        name: "dde".into(),
        delta: 3.0,
        n: 2,
        flow_margin: MarginSpec::Timer { component: 1, threshold: delta_timer, sense: Sense::AtMost },
        jump_margin: MarginSpec::Timer { component: 1, threshold: delta_timer, sense: Sense::AtLeast },
        flow_map: vec![AffineExpr {
            terms: vec![scalar_term(-2.0, 1.0, None)],
            bias: vec![0.0, 1.0],
        }],
        jump_map: vec![AffineExpr { terms: vec![jump_term], bias: vec![0.0, 0.0] }],
        lambda_c0: 1.0,
        lambda_c1: 1.0,
        flow_gain: 1.0,
        jump_gain: 1.0,
    }
}

/// Event-triggered control loop: plant `x' = x + u` with the input sampled
/// `hu` back, jumps refresh `u` to `-2 x` sampled `hs` back, and the
/// trigger compares the input mismatch against a quarter of `|x|`.
pub fn event_triggered_spec(hs: f64, hu: f64) -> Result<SystemSpec> {
    if !(hs > 0.0) || !hs.is_finite() || !(hu > 0.0) || !hu.is_finite() {
        return Err(invalid("hs/hu", format!("delays {hs}, {hu}; need positive finite values")));
    }
    let error = AffineExpr {
        terms: vec![
            AffineTerm { delay: 0.0, matrix: vec![vec![0.0, 1.0], vec![0.0, 0.0]], at_index: None },
            AffineTerm { delay: -hs, matrix: vec![vec![2.0, 0.0], vec![0.0, 0.0]], at_index: None },
        ],
        bias: vec![0.0, 0.0],
    };
    let reference = AffineExpr {
        terms: vec![AffineTerm {
            delay: 0.0,
            matrix: vec![vec![1.0, 0.0], vec![0.0, 0.0]],
            at_index: None,
        }],
        bias: vec![0.0, 0.0],
    };
    Ok(SystemSpec {
        name: "etc".into(),
        delta: hs + hu + 1.0,
        n: 2,
        flow_margin: MarginSpec::Trigger {
            error: error.clone(),
            reference: reference.clone(),
            gain: 0.25,
            sense: Sense::AtMost,
        },
        jump_margin: MarginSpec::Trigger { error, reference, gain: 0.25, sense: Sense::AtLeast },
        flow_map: vec![AffineExpr {
            terms: vec![
                AffineTerm { delay: 0.0, matrix: vec![vec![1.0, 0.0], vec![0.0, 0.0]], at_index: None },
                AffineTerm { delay: -hu, matrix: vec![vec![0.0, 1.0], vec![0.0, 0.0]], at_index: None },
            ],
            bias: vec![0.0, 0.0],
        }],
        jump_map: vec![AffineExpr {
            terms: vec![
                AffineTerm { delay: 0.0, matrix: vec![vec![1.0, 0.0], vec![0.0, 0.0]], at_index: None },
                AffineTerm { delay: -hs, matrix: vec![vec![0.0, 0.0], vec![-2.0, 0.0]], at_index: None },
            ],
            bias: vec![0.0, 0.0],
        }],
        lambda_c0: 1.0,
        lambda_c1: 1.0,
        flow_gain: 1.0,
        jump_gain: 1.0,
    })
}

/// Exponential decay with unit-period halving jumps: `x' = -a x`, jump
/// `x -> lj * x` every unit of the timer. Closed form
/// `x(t, j) = x0 * exp(-a t) * lj^j`.
pub fn decay_spec(a: f64, lj: f64) -> Result<SystemSpec> {
    if !a.is_finite() || !lj.is_finite() {
        return Err(invalid("a/lj", format!("coefficients {a}, {lj}")));
    }
    Ok(SystemSpec {
        name: "decay".into(),
        delta: 1.0,
        n: 2,
        flow_margin: MarginSpec::Timer { component: 1, threshold: 1.0, sense: Sense::AtMost },
        jump_margin: MarginSpec::Timer { component: 1, threshold: 1.0, sense: Sense::AtLeast },
        flow_map: vec![AffineExpr {
            terms: vec![AffineTerm {
                delay: 0.0,
                matrix: vec![vec![-a, 0.0], vec![0.0, 0.0]],
                at_index: None,
            }],
            bias: vec![0.0, 1.0],
        }],
        jump_map: vec![AffineExpr {
            terms: vec![AffineTerm {
                delay: 0.0,
                matrix: vec![vec![lj, 0.0], vec![0.0, 0.0]],
                at_index: None,
            }],
            bias: vec![0.0, 0.0],
        }],
        lambda_c0: 1.0,
        lambda_c1: 1.0,
        flow_gain: 1.0,
        jump_gain: 1.0,
    })
}

/// A compiled builtin together with its canonical initial history.
pub struct Example {
    pub system: SystemData,
    pub history: MemoryArc,
}

/// History with constant state rows over `[-depth, 0]` except that the
/// timer component, when given, ramps as `s` so it reads zero at the end.
fn ramp_history(n: usize, depth: f64, delta: f64, base: &[f64], timer: Option<usize>) -> Result<MemoryArc> {
    let times = vec![-depth, 0.0];
    let mut values = Vec::with_capacity(2 * n);
    for &t in &times {
        for (i, &b) in base.iter().enumerate() {
            values.push(if timer == Some(i) { t } else { b });
        }
    }
    MemoryArc::from_arc(HybridArc::from_grid(n, times, values)?, delta)
}

fn parse_params(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    if text.is_empty() {
        return Ok(out);
    }
    for piece in text.split(',') {
        let (k, v) = piece
            .split_once('=')
            .ok_or_else(|| invalid("system", format!("parameter {piece:?} is not key=value")))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| invalid(key, format!("value {value:?} is not a number")))
}

/// Parses a builtin descriptor like `dde`, `dde:delta_timer=1,rule=literal`,
/// `etc:hs=0.05,hu=0.05`, or `decay:a=1,lj=0.5` into a compiled system and
/// its canonical history.
pub fn example(text: &str) -> Result<Example> {
    let (name, params) = match text.split_once(':') {
        Some((n, p)) => (n.trim(), parse_params(p)?),
        None => (text.trim(), Vec::new()),
    };
    match name {
        "dde" => {
            let mut delta_timer = 1.0;
            let mut rule = DdeJumpRule::Prose;
            for (k, v) in params {
                match k.as_str() {
                    "delta_timer" => delta_timer = parse_f64(&k, &v)?,
                    "rule" => {
                        rule = match v.as_str() {
                            "prose" => DdeJumpRule::Prose,
                            "literal" => DdeJumpRule::Literal,
                            other => {
                                return Err(invalid("rule", format!("unknown jump rule {other:?}")))
                            }
                        }
                    }
                    other => return Err(invalid("system", format!("unknown dde parameter {other:?}"))),
                }
            }
            if !(delta_timer > 0.0) || !delta_timer.is_finite() {
                return Err(invalid("delta_timer", format!("period {delta_timer}")));
            }
            let system = compile(&impulsive_dde_spec(delta_timer, rule))?;
            let history = ramp_history(2, 3.0, 3.0, &[1.0, 0.0], Some(1))?;
            Ok(Example { system, history })
        }
        "etc" => {
            let mut hs = 0.05;
            let mut hu = 0.05;
            for (k, v) in params {
                match k.as_str() {
                    "hs" => hs = parse_f64(&k, &v)?,
                    "hu" => hu = parse_f64(&k, &v)?,
                    other => return Err(invalid("system", format!("unknown etc parameter {other:?}"))),
                }
            }
            let spec = event_triggered_spec(hs, hu)?;
            let delta = spec.delta;
            let system = compile(&spec)?;
            let history = ramp_history(2, delta + 0.1, delta, &[1.0, -2.0], None)?;
            Ok(Example { system, history })
        }
        "decay" => {
            let mut a = 1.0;
            let mut lj = 0.5;
            for (k, v) in params {
                match k.as_str() {
                    "a" => a = parse_f64(&k, &v)?,
                    "lj" => lj = parse_f64(&k, &v)?,
                    other => {
                        return Err(invalid("system", format!("unknown decay parameter {other:?}")))
                    }
                }
            }
            let system = compile(&decay_spec(a, lj)?)?;
            let history = ramp_history(2, 1.5, 1.0, &[1.0, 0.0], Some(1))?;
            Ok(Example { system, history })
        }
        other => Err(invalid("system", format!("unknown system {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dde_history_sits_in_flow_set_with_unit_rate() {
        let ex = example("dde").unwrap();
        assert!(ex.system.in_flow(&ex.history).unwrap());
        assert!(!ex.system.in_jump(&ex.history).unwrap());
        let v = ex.system.flow_vertices(&ex.history).unwrap();
        assert_eq!(v.len(), 1);
        assert_abs_diff_eq!(v[0][0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[0][1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dde_jump_rules_agree_on_the_constant_history() {
        let prose = compile(&impulsive_dde_spec(1.0, DdeJumpRule::Prose)).unwrap();
        let literal = compile(&impulsive_dde_spec(1.0, DdeJumpRule::Literal)).unwrap();
        let history = example("dde").unwrap().history;
        let a = prose.jump_vertices(&history).unwrap();
        let b = literal.jump_vertices(&history).unwrap();
        assert_abs_diff_eq!(a[0][0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b[0][0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn etc_history_margins_have_expected_values() {
        let ex = example("etc").unwrap();
        let m_flow = (ex.system.flow_margin)(&ex.history).unwrap();
        let m_jump = (ex.system.jump_margin)(&ex.history).unwrap();
        assert_abs_diff_eq!(m_flow, -0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(m_jump, 0.25, epsilon = 1e-12);
        let v = ex.system.flow_vertices(&ex.history).unwrap();
        assert_abs_diff_eq!(v[0][0], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn decay_parameters_reach_the_vertex_lists() {
        let ex = example("decay:a=2,lj=0.25").unwrap();
        let f = ex.system.flow_vertices(&ex.history).unwrap();
        let g = ex.system.jump_vertices(&ex.history).unwrap();
        assert_abs_diff_eq!(f[0][0], -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f[0][1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[0][0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(g[0][1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn unknown_names_and_parameters_are_rejected() {
        assert!(example("pendulum").is_err());
        assert!(example("dde:period=1").is_err());
        assert!(example("decay:a=oops").is_err());
        assert!(example("dde:rule=sometimes").is_err());
    }

    #[test]
    fn spec_json_round_trips() {
        let spec = impulsive_dde_spec(1.0, DdeJumpRule::Literal);
        let text = spec_to_json(&spec).unwrap();
        let back = spec_from_json(&text).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn compile_rejects_bad_shapes() {
        let mut spec = impulsive_dde_spec(1.0, DdeJumpRule::Prose);
        spec.flow_map[0].bias = vec![0.0];
        assert!(compile(&spec).is_err());
        let mut spec2 = impulsive_dde_spec(1.0, DdeJumpRule::Prose);
        spec2.delta = -1.0;
        assert!(compile(&spec2).is_err());
    }
}
