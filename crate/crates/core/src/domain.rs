//! Hybrid time domains with memory, sampled hybrid arcs, and the memory view
//! operator.
//!
//! A hybrid time domain splits into a forward part, a union of intervals
//! `[t_j, t_{j+1}] x {j}` over nondecreasing breakpoints `0 = t_0 <= ... <= t_J`,
//! and a memory part, a union of intervals `[s_k, s_{k-1}] x {-k+1}` over
//! nonincreasing breakpoints `0 = s_0 >= ... >= s_K`. An arc assigns a state
//! vector to each point of its domain and is continuous in `t` at fixed jump
//! index, so per jump index `j` the arc is stored as one strictly increasing
//! sample grid over the merged interval `I^j` with linear interpolation in
//! between. The memory interval of index 0 and the forward interval of index 0
//! share the grid, since the arc must be continuous across `t = 0` there.
//!
//! A memory arc is an arc whose domain lies in the past (`t <= 0`, `j <= 0`).
//! With memory size `delta >= 0` it belongs to the class `M^delta` when every
//! domain point satisfies `s + k >= -delta - 1` and some point satisfies
//! `s' + k' <= -delta`. The memory view operator extracts, at a forward base
//! point `(t, j)`, the shifted arc `(s, k) -> x(t+s, j+k)` truncated at depth
//! `delta_inf`, the smallest realizable depth `>= delta`; the result is again
//! in `M^delta` with `delta <= delta_inf < delta + 1`.

use crate::error::{Error, Result};

/// Absolute tolerance for comparing hybrid times. Two breakpoints closer than
/// this are treated as the same instant throughout the crate.
pub const TAU_EQ: f64 = 1e-9;

/// Euclidean norm of a state row.
pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean distance between two state rows of equal length.
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn check_finite(slice: &[f64], what: &str) -> Result<()> {
    if let Some(bad) = slice.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidArc(format!("{what} contains non-finite value {bad}")));
    }
    Ok(())
}

/// Validated pair of breakpoint sequences describing a hybrid time domain.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridTimeDomain {
    forward: Vec<f64>,
    memory: Vec<f64>,
}

impl HybridTimeDomain {
    /// Builds a domain from forward breakpoints `0 = t_0 <= ... <= t_J` and
    /// memory breakpoints `0 = s_0 >= ... >= s_K`. Length-one sequences denote
    /// the degenerate part `{(0, 0)}`.
    pub fn new(forward_times: Vec<f64>, memory_times: Vec<f64>) -> Result<Self> {
        for (seq, sign) in [(&forward_times, 1.0), (&memory_times, -1.0)] {
            let first = *seq.first().ok_or(Error::MissingOrigin { got: f64::NAN })?;
            check_finite(seq, "breakpoints")?;
            if first.abs() > TAU_EQ {
                return Err(Error::MissingOrigin { got: first });
            }
            for i in 1..seq.len() {
                if sign * (seq[i] - seq[i - 1]) < -TAU_EQ {
                    return Err(Error::NonMonotoneBreakpoints {
                        index: i,
                        prev: seq[i - 1],
                        next: seq[i],
                    });
                }
            }
        }
        Ok(Self { forward: forward_times, memory: memory_times })
    }

    pub fn forward_times(&self) -> &[f64] {
        &self.forward
    }

    pub fn memory_times(&self) -> &[f64] {
        &self.memory
    }

    /// Number of forward intervals `[t_j, t_{j+1}] x {j}`.
    pub fn forward_segment_count(&self) -> usize {
        self.forward.len() - 1
    }

    /// Number of memory intervals `[s_k, s_{k-1}] x {-k+1}`.
    pub fn memory_segment_count(&self) -> usize {
        self.memory.len() - 1
    }

    /// Forward intervals as `(j, t_j, t_{j+1})` triples.
    pub fn forward_segments(&self) -> Vec<(i64, f64, f64)> {
        (0..self.forward_segment_count())
            .map(|j| (j as i64, self.forward[j], self.forward[j + 1]))
            .collect()
    }

    /// Memory intervals as `(-k+1, s_k, s_{k-1})` triples.
    pub fn memory_segments(&self) -> Vec<(i64, f64, f64)> {
        (1..=self.memory_segment_count())
            .map(|k| (-(k as i64) + 1, self.memory[k], self.memory[k - 1]))
            .collect()
    }

    /// Largest jump index present.
    pub fn j_max(&self) -> i64 {
        (self.forward.len() as i64 - 2).max(0)
    }

    /// Smallest (most negative) jump index present.
    pub fn j_min(&self) -> i64 {
        -(self.memory.len() as i64 - 2).max(0)
    }

    /// Merged interval `I^j` covered at jump index `j`, if the index is present.
    pub fn interval(&self, j: i64) -> Option<(f64, f64)> {
        if j == 0 {
            let lo = if self.memory.len() >= 2 { self.memory[1] } else { 0.0 };
            let hi = if self.forward.len() >= 2 { self.forward[1] } else { 0.0 };
            Some((lo, hi))
        } else if j > 0 {
            let j = j as usize;
            if j + 1 < self.forward.len() {
                Some((self.forward[j], self.forward[j + 1]))
            } else {
                None
            }
        } else {
            let k = (1 - j) as usize;
            if k < self.memory.len() {
                Some((self.memory[k], self.memory[k - 1]))
            } else {
                None
            }
        }
    }

    /// Whether `(t, j)` lies in the domain, up to the time tolerance.
    pub fn contains(&self, t: f64, j: i64) -> bool {
        match self.interval(j) {
            Some((lo, hi)) => t >= lo - TAU_EQ && t <= hi + TAU_EQ,
            None => false,
        }
    }
}

/// Sample grid of one jump index: strictly increasing times and row-major
/// state values. A degenerate interval carries exactly one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    j: i64,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl Segment {
    pub fn new(j: i64, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidArc(format!("segment {j} has no samples")));
        }
        check_finite(&times, "segment times")?;
        check_finite(&values, "segment values")?;
        if times.is_empty() || values.len() % times.len() != 0 {
            return Err(Error::InvalidArc(format!(
                "segment {j}: {} values do not divide into {} samples",
                values.len(),
                times.len()
            )));
        }
        for i in 1..times.len() {
            if times[i] <= times[i - 1] {
                return Err(Error::InvalidArc(format!(
                    "segment {j}: sample times not strictly increasing at {}: {} then {}",
                    i,
                    times[i - 1],
                    times[i]
                )));
            }
        }
        Ok(Self { j, times, values })
    }

    pub fn j(&self) -> i64 {
        self.j
    }

    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn t1(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn n(&self) -> usize {
        self.values.len() / self.times.len()
    }

    pub fn sample(&self, i: usize) -> (f64, &[f64]) {
        let n = self.n();
        (self.times[i], &self.values[i * n..(i + 1) * n])
    }

    /// Interpolated value at `t`, clamped into the covered interval when
    /// within the time tolerance of its ends.
    fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let n = self.n();
        if t < self.t0() - TAU_EQ || t > self.t1() + TAU_EQ {
            return Err(Error::OutOfDomain { t, j: self.j });
        }
        let t = t.clamp(self.t0(), self.t1());
        let hi = self.times.partition_point(|&u| u <= t);
        if hi == 0 {
            out.copy_from_slice(&self.values[0..n]);
            return Ok(());
        }
        let i = hi - 1;
        if hi == self.times.len() {
            out.copy_from_slice(&self.values[i * n..(i + 1) * n]);
            return Ok(());
        }
        let (ta, tb) = (self.times[i], self.times[hi]);
        let w = (t - ta) / (tb - ta);
        let a = &self.values[i * n..(i + 1) * n];
        let b = &self.values[hi * n..(hi + 1) * n];
        for c in 0..n {
            out[c] = a[c] + w * (b[c] - a[c]);
        }
        Ok(())
    }
}

/// Hybrid arc: one sample grid per jump index over a contiguous index range
/// containing 0, with adjacent grids meeting at shared breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridArc {
    n: usize,
    j_min: i64,
    segments: Vec<Segment>,
}

impl HybridArc {
    pub fn new(n: usize, mut segments: Vec<Segment>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArc("state dimension must be positive".into()));
        }
        if segments.is_empty() {
            return Err(Error::InvalidArc("arc has no segments".into()));
        }
        segments.sort_by_key(|s| s.j);
        let j_min = segments[0].j;
        for (i, seg) in segments.iter().enumerate() {
            if seg.j != j_min + i as i64 {
                return Err(Error::InvalidArc(format!(
                    "jump indices not contiguous: expected {} found {}",
                    j_min + i as i64,
                    seg.j
                )));
            }
            if seg.values.len() != seg.times.len() * n {
                return Err(Error::InvalidArc(format!(
                    "segment {}: expected dimension {n}",
                    seg.j
                )));
            }
        }
        let j_max = segments.last().unwrap().j;
        if j_min > 0 || j_max < 0 {
            return Err(Error::InvalidArc(format!(
                "jump index range [{j_min}, {j_max}] does not contain 0"
            )));
        }
        for pair in segments.windows(2) {
            if (pair[0].t1() - pair[1].t0()).abs() > TAU_EQ {
                return Err(Error::InvalidArc(format!(
                    "segments {} and {} do not meet: {} vs {}",
                    pair[0].j,
                    pair[1].j,
                    pair[0].t1(),
                    pair[1].t0()
                )));
            }
        }
        let zero = &segments[(-j_min) as usize];
        if zero.t0() > TAU_EQ || zero.t1() < -TAU_EQ {
            return Err(Error::InvalidArc(format!(
                "interval of jump index 0 is [{}, {}], which misses t = 0",
                zero.t0(),
                zero.t1()
            )));
        }
        Ok(Self { n, j_min, segments })
    }

    /// Single-index arc from one sample grid, convenient for histories.
    pub fn from_grid(n: usize, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(n, vec![Segment::new(0, times, values)?])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn j_min(&self) -> i64 {
        self.j_min
    }

    pub fn j_max(&self) -> i64 {
        self.j_min + self.segments.len() as i64 - 1
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, j: i64) -> Option<&Segment> {
        if j < self.j_min || j > self.j_max() {
            None
        } else {
            Some(&self.segments[(j - self.j_min) as usize])
        }
    }

    /// Interval `I^j`, if the index is present.
    pub fn interval(&self, j: i64) -> Option<(f64, f64)> {
        self.segment(j).map(|s| (s.t0(), s.t1()))
    }

    /// Breakpoint representation of the arc's domain.
    pub fn domain(&self) -> HybridTimeDomain {
        let zero = self.segment(0).unwrap();
        let mut forward = vec![0.0];
        if self.j_max() > 0 || zero.t1() > TAU_EQ {
            forward.push(zero.t1());
            for j in 1..=self.j_max() {
                forward.push(self.segment(j).unwrap().t1());
            }
        }
        let mut memory = vec![0.0];
        if self.j_min < 0 || zero.t0() < -TAU_EQ {
            memory.push(zero.t0());
            for j in (self.j_min..=-1).rev() {
                memory.push(self.segment(j).unwrap().t0());
            }
        }
        HybridTimeDomain::new(forward, memory).expect("arc domain is always valid")
    }

    pub fn contains(&self, t: f64, j: i64) -> bool {
        match self.interval(j) {
            Some((lo, hi)) => t >= lo - TAU_EQ && t <= hi + TAU_EQ,
            None => false,
        }
    }

    pub(crate) fn eval_into(&self, t: f64, j: i64, out: &mut [f64]) -> Result<()> {
        let seg = self.segment(j).ok_or(Error::OutOfDomain { t, j })?;
        seg.eval_into(t, out)
    }

    /// Linear interpolation of the sample grid of jump index `j` at time `t`.
    pub fn eval(&self, t: f64, j: i64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n];
        self.eval_into(t, j, &mut out)?;
        Ok(out)
    }

    /// Value at time `t` taken on the largest jump index whose interval
    /// contains `t`. This is the convention used by delayed evaluations.
    pub fn eval_latest(&self, t: f64) -> Result<(i64, Vec<f64>)> {
        for j in (self.j_min..=self.j_max()).rev() {
            if self.contains(t, j) {
                return Ok((j, self.eval(t, j)?));
            }
        }
        Err(Error::OutOfDomain { t, j: self.j_max() })
    }

    /// Largest Euclidean norm over all stored samples.
    pub fn sup_norm(&self) -> f64 {
        let mut m: f64 = 0.0;
        for seg in &self.segments {
            for i in 0..seg.len() {
                m = m.max(norm(seg.sample(i).1));
            }
        }
        m
    }

    /// Largest slope norm between consecutive samples of any segment.
    pub fn lipschitz(&self) -> f64 {
        let mut m: f64 = 0.0;
        for seg in &self.segments {
            for i in 1..seg.len() {
                let (ta, va) = seg.sample(i - 1);
                let (tb, vb) = seg.sample(i);
                m = m.max(dist(va, vb) / (tb - ta));
            }
        }
        m
    }

    /// Class certificate against the bound `b` and slope `lambda`.
    pub fn classify(&self, b: f64, lambda: f64) -> ClassCertificate {
        let sup_norm = self.sup_norm();
        let lipschitz = self.lipschitz();
        let in_m_b = sup_norm <= b + TAU_EQ;
        ClassCertificate {
            sup_norm,
            lipschitz,
            in_m_b,
            in_m_b_lambda: in_m_b && lipschitz <= lambda + TAU_EQ,
        }
    }

    /// Smallest realizable truncation depth `>= delta` as seen from `(t, j)`:
    /// the infimum of `-(s + k)` over shifted domain points with `s <= 0`,
    /// `k <= 0` and `s + k <= -delta`. `None` if the memory is too short.
    fn delta_inf_at(&self, t: f64, j: i64, delta: f64) -> Option<f64> {
        let mut best: Option<f64> = None;
        for jj in (self.j_min..=j).rev() {
            let Some((a, b)) = self.interval(jj) else { continue };
            let hi_u = b.min(t);
            if hi_u < a - TAU_EQ {
                continue;
            }
            let k = (jj - j) as f64;
            let d_lo = t - hi_u - k;
            let d_hi = t - a - k;
            if d_hi >= delta - TAU_EQ {
                let cand = d_lo.max(delta);
                best = Some(best.map_or(cand, |x: f64| x.min(cand)));
            }
        }
        best
    }

    /// Deepest value of `-(s + k)` reachable from `(t, j)`; used for error
    /// reporting when the memory is too short.
    fn max_depth_at(&self, t: f64, j: i64) -> f64 {
        let mut m = f64::NEG_INFINITY;
        for jj in self.j_min..=j {
            if let Some((a, b)) = self.interval(jj) {
                if b.min(t) >= a - TAU_EQ {
                    m = m.max(t - a - (jj - j) as f64);
                }
            }
        }
        m
    }

    /// Memory view at the forward base point `(t, j)`: the arc
    /// `(s, k) -> x(t+s, j+k)` over shifted times `s <= 0`, truncated at depth
    /// `delta_inf`. The result is a memory arc of size `delta`.
    pub fn memory_view(&self, t: f64, j: i64, delta: f64) -> Result<MemoryArc> {
        if j < 0 || t < -TAU_EQ {
            return Err(Error::NotInForwardDomain { t, j });
        }
        let Some((a0, b0)) = self.interval(j) else {
            return Err(Error::NotInForwardDomain { t, j });
        };
        if t < a0 - TAU_EQ || t > b0 + TAU_EQ {
            return Err(Error::NotInForwardDomain { t, j });
        }
        let t = t.clamp(a0, b0);
        let delta_inf = self.delta_inf_at(t, j, delta).ok_or(Error::MemoryTooShort {
            max_depth: self.max_depth_at(t, j),
            required: delta,
        })?;

        let mut segments = Vec::new();
        for jj in (self.j_min..=j).rev() {
            let k = jj - j;
            let (a, b) = self.interval(jj).unwrap();
            let hi_u = b.min(t);
            let lo_u = (t - delta_inf - k as f64).max(a);
            if lo_u > hi_u + TAU_EQ {
                break;
            }
            let seg = self.segment(jj).unwrap();
            let mut times = Vec::new();
            let mut values = Vec::new();
            let mut buf = vec![0.0; self.n];
            if hi_u - lo_u < TAU_EQ {
                seg.eval_into(lo_u.min(seg.t1()).max(seg.t0()), &mut buf)?;
                times.push(lo_u - t);
                values.extend_from_slice(&buf);
            } else {
                seg.eval_into(lo_u, &mut buf)?;
                times.push(lo_u - t);
                values.extend_from_slice(&buf);
                for i in 0..seg.len() {
                    let (u, v) = seg.sample(i);
                    if u > lo_u + TAU_EQ && u < hi_u - TAU_EQ {
                        times.push(u - t);
                        values.extend_from_slice(v);
                    }
                }
                seg.eval_into(hi_u, &mut buf)?;
                times.push(hi_u - t);
                values.extend_from_slice(&buf);
            }
            segments.push(Segment::new(k, times, values)?);
        }
        let arc = HybridArc::new(self.n, segments)?;
        MemoryArc::from_arc(arc, delta)
    }

    /// Appends a flow sample to the newest segment. Solver-internal.
    pub(crate) fn push_sample(&mut self, t: f64, value: &[f64]) {
        let n = self.n;
        let seg = self.segments.last_mut().unwrap();
        debug_assert!(t > seg.t1());
        debug_assert_eq!(value.len(), n);
        seg.times.push(t);
        seg.values.extend_from_slice(value);
    }

    /// Removes the most recently pushed sample. Solver-internal.
    pub(crate) fn pop_sample(&mut self) {
        let n = self.n;
        let seg = self.segments.last_mut().unwrap();
        debug_assert!(seg.times.len() > 1);
        seg.times.pop();
        seg.values.truncate(seg.values.len() - n);
    }

    /// Opens a new segment at jump index `j_max + 1` starting from `(t, value)`.
    /// Solver-internal.
    pub(crate) fn start_segment(&mut self, t: f64, value: &[f64]) {
        let j = self.j_max() + 1;
        self.segments
            .push(Segment { j, times: vec![t], values: value.to_vec() });
    }
}

/// Membership report for the bounded and bounded-Lipschitz arc classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassCertificate {
    pub sup_norm: f64,
    pub lipschitz: f64,
    pub in_m_b: bool,
    pub in_m_b_lambda: bool,
}

/// Hybrid arc whose domain lies in the past, tagged with its memory size.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryArc {
    arc: HybridArc,
    delta: f64,
    delta_inf: f64,
}

impl MemoryArc {
    /// Validates that `arc` is a memory-side arc in the class `M^delta`:
    /// domain in the past, every point at depth `-(s+k) <= delta + 1`, and
    /// some point at depth `>= delta`.
    pub fn from_arc(arc: HybridArc, delta: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParam {
                name: "delta".into(),
                reason: format!("memory size must be finite and nonnegative, got {delta}"),
            });
        }
        if arc.j_max() != 0 {
            return Err(Error::InvalidArc(format!(
                "memory arc has forward jump index {}",
                arc.j_max()
            )));
        }
        let (_, hi) = arc.interval(0).unwrap();
        if hi.abs() > TAU_EQ {
            return Err(Error::InvalidArc(format!(
                "memory arc interval of index 0 ends at {hi}, expected 0"
            )));
        }
        let deepest = arc.max_depth_at(hi, 0);
        if deepest > delta + 1.0 + TAU_EQ {
            return Err(Error::InvalidArc(format!(
                "memory reaches depth {deepest}, beyond the allowed {}",
                delta + 1.0
            )));
        }
        let delta_inf = arc.delta_inf_at(hi, 0, delta).ok_or(Error::MemoryTooShort {
            max_depth: deepest,
            required: delta,
        })?;
        Ok(Self { arc, delta, delta_inf })
    }

    /// Exact shift-and-extend: every point `(s, k)` moves to `(s, k-1)` and the
    /// new sample `(0, 0) -> g` is added on top. The result's domain may reach
    /// one deeper than the class window until retrimmed.
    pub fn append_jump(&self, g: &[f64]) -> Result<MemoryArc> {
        if g.len() != self.arc.n {
            return Err(Error::InvalidParam {
                name: "g".into(),
                reason: format!("expected dimension {}, got {}", self.arc.n, g.len()),
            });
        }
        check_finite(g, "jump value")?;
        let mut segments: Vec<Segment> = self
            .arc
            .segments
            .iter()
            .map(|s| Segment { j: s.j - 1, times: s.times.clone(), values: s.values.clone() })
            .collect();
        segments.push(Segment { j: 0, times: vec![0.0], values: g.to_vec() });
        let arc = HybridArc::new(self.arc.n, segments)?;
        let delta_inf = arc
            .delta_inf_at(0.0, 0, self.delta)
            .expect("shifted arc keeps a point at depth >= delta");
        Ok(MemoryArc { arc, delta: self.delta, delta_inf })
    }

    /// Re-applies the depth truncation at the origin, restoring class
    /// membership after [`MemoryArc::append_jump`].
    pub fn retrim(&self) -> Result<MemoryArc> {
        self.arc.memory_view(0.0, 0, self.delta)
    }

    /// Whether both class conditions hold for the stored memory size.
    pub fn in_class(&self) -> bool {
        let deepest = self.arc.max_depth_at(0.0, 0);
        deepest <= self.delta + 1.0 + TAU_EQ && deepest >= self.delta - TAU_EQ
    }

    pub fn arc(&self) -> &HybridArc {
        &self.arc
    }

    pub fn into_arc(self) -> HybridArc {
        self.arc
    }

    pub fn n(&self) -> usize {
        self.arc.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Truncation depth realized by this arc; lies in `[delta, delta + 1)` for
    /// views produced by the memory operator.
    pub fn delta_inf(&self) -> f64 {
        self.delta_inf
    }

    pub fn eval(&self, s: f64, k: i64) -> Result<Vec<f64>> {
        self.arc.eval(s, k)
    }

    /// Delayed evaluation at time `s` on the largest jump index covering it.
    pub fn eval_latest(&self, s: f64) -> Result<(i64, Vec<f64>)> {
        self.arc.eval_latest(s)
    }

    /// State at the current instant `(0, 0)`.
    pub fn head(&self) -> Vec<f64> {
        self.arc.eval(0.0, 0).expect("memory arc contains (0, 0)")
    }

    pub fn classify(&self, b: f64, lambda: f64) -> ClassCertificate {
        self.arc.classify(b, lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(j: i64, pts: &[(f64, &[f64])]) -> Segment {
        let times = pts.iter().map(|p| p.0).collect();
        let values = pts.iter().flat_map(|p| p.1.iter().copied()).collect();
        Segment::new(j, times, values).unwrap()
    }

    #[test]
    fn domain_of_impulsive_run_enumerates_both_unions() {
        let d = HybridTimeDomain::new(vec![0.0, 1.0, 2.0], vec![0.0, -2.0]).unwrap();
        assert_eq!(d.forward_segments(), vec![(0, 0.0, 1.0), (1, 1.0, 2.0)]);
        assert_eq!(d.memory_segments(), vec![(0, -2.0, 0.0)]);
        assert_eq!(d.interval(0), Some((-2.0, 1.0)));
        assert_eq!(d.interval(1), Some((1.0, 2.0)));
        assert_eq!(d.interval(2), None);
        assert!(d.contains(1.0, 0));
        assert!(d.contains(1.0, 1));
        assert!(!d.contains(2.5, 1));
    }

    #[test]
    fn singleton_domain_is_the_origin() {
        let d = HybridTimeDomain::new(vec![0.0], vec![0.0]).unwrap();
        assert_eq!(d.interval(0), Some((0.0, 0.0)));
        assert!(d.contains(0.0, 0));
        assert!(!d.contains(0.1, 0));
        assert_eq!(d.j_max(), 0);
        assert_eq!(d.j_min(), 0);
    }

    #[test]
    fn domain_rejects_bad_breakpoints() {
        assert!(matches!(
            HybridTimeDomain::new(vec![0.0, 2.0, 1.0], vec![0.0]),
            Err(Error::NonMonotoneBreakpoints { index: 2, .. })
        ));
        assert!(matches!(
            HybridTimeDomain::new(vec![0.5, 1.0], vec![0.0]),
            Err(Error::MissingOrigin { .. })
        ));
        assert!(matches!(
            HybridTimeDomain::new(vec![0.0, 1.0], vec![0.0, 0.5]),
            Err(Error::NonMonotoneBreakpoints { .. })
        ));
    }

    #[test]
    fn eval_interpolates_between_samples() {
        let arc = HybridArc::from_grid(1, vec![0.0, 1.0], vec![1.0, 3.0]).unwrap();
        assert_eq!(arc.eval(0.5, 0).unwrap(), vec![2.0]);
        assert_eq!(arc.eval(0.0, 0).unwrap(), vec![1.0]);
        assert_eq!(arc.eval(1.0, 0).unwrap(), vec![3.0]);
        assert!(matches!(arc.eval(1.5, 0), Err(Error::OutOfDomain { .. })));
        assert!(matches!(arc.eval(0.5, 1), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn eval_latest_prefers_highest_jump_index() {
        let arc = HybridArc::new(
            1,
            vec![
                seg(0, &[(0.0, &[1.0]), (1.0, &[2.0])]),
                seg(1, &[(1.0, &[5.0]), (2.0, &[6.0])]),
            ],
        )
        .unwrap();
        let (j, v) = arc.eval_latest(1.0).unwrap();
        assert_eq!((j, v), (1, vec![5.0]));
        let (j, v) = arc.eval_latest(0.5).unwrap();
        assert_eq!((j, v), (0, vec![1.5]));
    }

    #[test]
    fn arc_domain_round_trips_breakpoints() {
        let arc = HybridArc::new(
            1,
            vec![
                seg(-1, &[(-2.0, &[0.0]), (-1.0, &[0.5])]),
                seg(0, &[(-1.0, &[0.5]), (1.0, &[1.0])]),
                seg(1, &[(1.0, &[2.0]), (2.0, &[2.5])]),
            ],
        )
        .unwrap();
        let d = arc.domain();
        assert_eq!(d.forward_times(), &[0.0, 1.0, 2.0]);
        assert_eq!(d.memory_times(), &[0.0, -1.0, -2.0]);
    }

    #[test]
    fn memory_view_at_origin_is_identity_on_history() {
        let hist = HybridArc::from_grid(1, vec![-3.0, 0.0], vec![1.0, 1.0]).unwrap();
        let view = hist.memory_view(0.0, 0, 3.0).unwrap();
        assert_eq!(view.delta_inf(), 3.0);
        assert_eq!(view.arc().interval(0), Some((-3.0, 0.0)));
        assert_eq!(view.eval(-2.0, 0).unwrap(), vec![1.0]);
        assert_eq!(view.head(), vec![1.0]);
    }

    #[test]
    fn memory_view_shifts_and_trims_at_depth() {
        // History 1 on [-3, 0] continued by the flow x(t) = 1 + t on [0, 1].
        let arc = HybridArc::from_grid(
            1,
            vec![-3.0, 0.0, 1.0],
            vec![1.0, 1.0, 2.0],
        )
        .unwrap();
        let view = arc.memory_view(1.0, 0, 3.0).unwrap();
        assert_eq!(view.delta_inf(), 3.0);
        assert_eq!(view.arc().interval(0), Some((-3.0, 0.0)));
        assert_eq!(view.eval(-3.0, 0).unwrap(), vec![1.0]);
        assert_eq!(view.eval(-2.0, 0).unwrap(), vec![1.0]);
        assert_eq!(view.eval(-0.5, 0).unwrap(), vec![1.5]);
        assert_eq!(view.head(), vec![2.0]);
    }

    #[test]
    fn memory_view_reports_short_memory() {
        let hist = HybridArc::from_grid(1, vec![-2.0, 0.0], vec![1.0, 1.0]).unwrap();
        let err = hist.memory_view(0.0, 0, 3.0).unwrap_err();
        match err {
            Error::MemoryTooShort { max_depth, required } => {
                assert_eq!(max_depth, 2.0);
                assert_eq!(required, 3.0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn memory_view_requires_forward_base_point() {
        let hist = HybridArc::from_grid(1, vec![-3.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            hist.memory_view(-1.0, 0, 1.0),
            Err(Error::NotInForwardDomain { .. })
        ));
        assert!(matches!(
            hist.memory_view(0.5, 0, 1.0),
            Err(Error::NotInForwardDomain { .. })
        ));
    }

    #[test]
    fn memory_view_crosses_jumps_with_shifted_indices() {
        // History on [-2, 0], flow to t = 1, jump, flow to t = 2.
        let arc = HybridArc::new(
            1,
            vec![
                seg(0, &[(-2.0, &[1.0]), (0.0, &[1.0]), (1.0, &[2.0])]),
                seg(1, &[(1.0, &[4.0]), (2.0, &[5.0])]),
            ],
        )
        .unwrap();
        let view = arc.memory_view(1.5, 1, 3.0).unwrap();
        // delta_inf: deepest candidates from segment 0: depth range
        // [1.5 - 1 + 1, 1.5 + 2 + 1] = [1.5, 4.5] so delta_inf = 3.
        assert_eq!(view.delta_inf(), 3.0);
        assert_eq!(view.arc().j_min(), -1);
        assert_eq!(view.arc().interval(0), Some((-0.5, 0.0)));
        // Deep cut at s = -delta_inf - k: the k = -1 segment starts where
        // s + k = -3 exactly.
        assert_eq!(view.arc().interval(-1), Some((-2.0, -0.5)));
        assert_eq!(view.eval(0.0, 0).unwrap(), vec![4.5]);
        assert_eq!(view.eval(-0.5, 0).unwrap(), vec![4.0]);
        assert_eq!(view.eval(-0.5, -1).unwrap(), vec![2.0]);
        assert_eq!(view.eval(-2.0, -1).unwrap(), vec![1.0]);
        assert!(view.eval(-2.5, -1).is_err());
    }

    #[test]
    fn append_jump_shifts_indices_and_adds_head() {
        let point = HybridArc::from_grid(1, vec![0.0], vec![5.0]).unwrap();
        let phi = MemoryArc::from_arc(point, 0.0).unwrap();
        let psi = phi.append_jump(&[7.0]).unwrap();
        assert_eq!(psi.eval(0.0, 0).unwrap(), vec![7.0]);
        assert_eq!(psi.eval(0.0, -1).unwrap(), vec![5.0]);

        let twice = {
            let a = phi.append_jump(&[2.0]).unwrap();
            a.append_jump(&[4.0]).unwrap()
        };
        assert_eq!(twice.head(), vec![4.0]);
        assert_eq!(twice.eval(0.0, -1).unwrap(), vec![2.0]);
        assert_eq!(twice.eval(0.0, -2).unwrap(), vec![5.0]);
        // Depth 2 exceeds the delta = 0 window until retrimmed.
        assert!(!twice.in_class());
        let trimmed = twice.retrim().unwrap();
        assert!(trimmed.in_class());
        assert_eq!(trimmed.arc().j_min(), 0);
    }

    #[test]
    fn append_jump_preserves_graph_up_to_shift() {
        let hist = HybridArc::from_grid(1, vec![-1.0, 0.0], vec![0.25, 0.75]).unwrap();
        let phi = MemoryArc::from_arc(hist, 1.0).unwrap();
        let psi = phi.append_jump(&[9.0]).unwrap();
        for seg in phi.arc().segments() {
            let shifted = psi.arc().segment(seg.j() - 1).unwrap();
            assert_eq!(seg.times(), shifted.times());
            assert_eq!(seg.values(), shifted.values());
        }
        assert_eq!(psi.arc().segment(0).unwrap().sample(0), (0.0, &[9.0][..]));
    }

    #[test]
    fn classify_reports_sup_norm_and_slope() {
        // Unit history followed by x(t) = 1 + t up to t = 1.
        let arc = HybridArc::from_grid(
            1,
            vec![-3.0, 0.0, 1.0],
            vec![1.0, 1.0, 2.0],
        )
        .unwrap();
        let cert = arc.classify(2.0, 1.0);
        assert_eq!(cert.sup_norm, 2.0);
        assert_eq!(cert.lipschitz, 1.0);
        assert!(cert.in_m_b);
        assert!(cert.in_m_b_lambda);
        let tight = arc.classify(1.5, 1.0);
        assert!(!tight.in_m_b);
        assert!(!tight.in_m_b_lambda);
    }

    #[test]
    fn class_window_bounds_delta_inf() {
        let hist = HybridArc::from_grid(1, vec![-3.5, 0.0], vec![1.0, 1.0]).unwrap();
        let phi = MemoryArc::from_arc(hist, 3.0).unwrap();
        assert!(phi.delta_inf() >= 3.0 && phi.delta_inf() < 4.0);
    }

    #[test]
    fn degenerate_last_step_keeps_single_sample_segment() {
        // Two jumps at the same instant produce a single-point interval.
        let arc = HybridArc::new(
            1,
            vec![
                seg(0, &[(-1.0, &[1.0]), (1.0, &[2.0])]),
                seg(1, &[(1.0, &[4.0])]),
                seg(2, &[(1.0, &[8.0]), (1.5, &[8.5])]),
            ],
        )
        .unwrap();
        assert_eq!(arc.interval(1), Some((1.0, 1.0)));
        assert_eq!(arc.eval(1.0, 1).unwrap(), vec![4.0]);
        let view = arc.memory_view(1.5, 2, 1.0).unwrap();
        assert_eq!(view.arc().interval(-1), Some((-0.5, -0.5)));
        assert_eq!(view.eval(-0.5, -1).unwrap(), vec![4.0]);
    }
}
