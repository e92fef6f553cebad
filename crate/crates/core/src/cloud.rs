//! Finite point clouds and graph clouds of arcs.
//!
//! The graph of an arc is the set of triples `(t, j, x)` viewed as points of
//! R^{n+2}. Distances between arcs are computed on finite clouds sampled from
//! these graphs: every stored sample contributes a point, optionally refined
//! by interpolated points between consecutive samples.

use crate::domain::{norm, HybridArc, MemoryArc};
use crate::error::{Error, Result};

/// Finite set of points in a fixed dimension, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    pts: Vec<f64>,
}

impl PointCloud {
    /// May be empty; operations that need points report `EmptyCloud`.
    pub fn new(dim: usize, pts: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParam {
                name: "dim".into(),
                reason: "cloud dimension must be positive".into(),
            });
        }
        if pts.len() % dim != 0 {
            return Err(Error::InvalidParam {
                name: "pts".into(),
                reason: format!("{} coordinates do not divide into dimension {dim}", pts.len()),
            });
        }
        if let Some(bad) = pts.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidParam {
                name: "pts".into(),
                reason: format!("non-finite coordinate {bad}"),
            });
        }
        Ok(Self { dim, pts })
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut pts = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::InvalidParam {
                    name: "rows".into(),
                    reason: format!("row of length {} in dimension {dim}", row.len()),
                });
            }
            pts.extend_from_slice(row);
        }
        Self::new(dim, pts)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.pts.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.pts[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.pts.chunks_exact(self.dim)
    }

    pub fn max_norm(&self) -> f64 {
        self.rows().map(norm).fold(0.0, f64::max)
    }

    /// Exact minimum Euclidean distance from `z` to the cloud.
    pub fn dist_to(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.dim {
            return Err(Error::DomainMismatch(format!(
                "point of dimension {} against cloud of dimension {}",
                z.len(),
                self.dim
            )));
        }
        if self.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut best = f64::INFINITY;
        for row in self.rows() {
            let mut sq = 0.0;
            for (a, b) in row.iter().zip(z) {
                sq += (a - b) * (a - b);
            }
            if sq < best {
                best = sq;
            }
        }
        Ok(best.sqrt())
    }

    pub fn translate(&self, v: &[f64]) -> Result<Self> {
        if v.len() != self.dim {
            return Err(Error::DomainMismatch(format!(
                "translation of dimension {} against cloud of dimension {}",
                v.len(),
                self.dim
            )));
        }
        let pts = self
            .pts
            .chunks_exact(self.dim)
            .flat_map(|row| row.iter().zip(v).map(|(a, b)| a + b))
            .collect();
        Self::new(self.dim, pts)
    }

    /// Concatenation of clouds of equal dimension.
    pub fn union(parts: &[&PointCloud]) -> Result<Self> {
        let dim = parts
            .first()
            .map(|c| c.dim)
            .ok_or_else(|| Error::InvalidParam {
                name: "parts".into(),
                reason: "union of no clouds".into(),
            })?;
        let mut pts = Vec::new();
        for part in parts {
            if part.dim != dim {
                return Err(Error::DomainMismatch(format!(
                    "union of dimensions {} and {dim}",
                    part.dim
                )));
            }
            pts.extend_from_slice(&part.pts);
        }
        Self::new(dim, pts)
    }
}

/// Sampled graph of an arc: points `(t, j, x_0, ..., x_{n-1})` in R^{n+2}.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphCloud {
    n: usize,
    cloud: PointCloud,
}

impl GraphCloud {
    /// Collects every stored sample, plus `refine` interpolated points per
    /// consecutive sample gap.
    pub fn from_arc(arc: &HybridArc, refine: usize) -> Self {
        let n = arc.n();
        let dim = n + 2;
        let mut pts = Vec::new();
        for seg in arc.segments() {
            let jf = seg.j() as f64;
            for i in 0..seg.len() {
                let (t, x) = seg.sample(i);
                pts.push(t);
                pts.push(jf);
                pts.extend_from_slice(x);
                if refine > 0 && i + 1 < seg.len() {
                    let (t2, x2) = seg.sample(i + 1);
                    for r in 1..=refine {
                        let w = r as f64 / (refine + 1) as f64;
                        pts.push(t + w * (t2 - t));
                        pts.push(jf);
                        for c in 0..n {
                            pts.push(x[c] + w * (x2[c] - x[c]));
                        }
                    }
                }
            }
        }
        Self {
            n,
            cloud: PointCloud::new(dim, pts).expect("graph points are finite"),
        }
    }

    pub fn from_memory_arc(phi: &MemoryArc, refine: usize) -> Self {
        Self::from_arc(phi.arc(), refine)
    }

    /// Collects every `stride`-th sample per segment, always keeping both
    /// segment endpoints. Two arcs thinned with the same stride stay
    /// aligned, so identical arcs still produce identical clouds.
    pub fn from_arc_strided(arc: &HybridArc, stride: usize) -> Self {
        let stride = stride.max(1);
        let n = arc.n();
        let dim = n + 2;
        let mut pts = Vec::new();
        for seg in arc.segments() {
            let jf = seg.j() as f64;
            let last = seg.len() - 1;
            let mut i = 0;
            loop {
                let (t, x) = seg.sample(i);
                pts.push(t);
                pts.push(jf);
                pts.extend_from_slice(x);
                if i == last {
                    break;
                }
                i = (i + stride).min(last);
            }
        }
        Self {
            n,
            cloud: PointCloud::new(dim, pts).expect("graph points are finite"),
        }
    }

    /// Total stored sample count across all segments.
    pub fn sample_count(arc: &HybridArc) -> usize {
        arc.segments().iter().map(|s| s.len()).sum()
    }

    pub fn from_points(n: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let cloud = PointCloud::from_rows(n + 2, rows)?;
        if cloud.is_empty() {
            return Err(Error::EmptyCloud);
        }
        Ok(Self { n, cloud })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n + 2
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    pub fn points(&self) -> &PointCloud {
        &self.cloud
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_cloud_lists_samples_as_triples() {
        let arc = HybridArc::from_grid(1, vec![-1.0, 0.0], vec![2.0, 3.0]).unwrap();
        let g = GraphCloud::from_arc(&arc, 0);
        assert_eq!(g.dim(), 3);
        assert_eq!(g.len(), 2);
        assert_eq!(g.points().row(0), &[-1.0, 0.0, 2.0]);
        assert_eq!(g.points().row(1), &[0.0, 0.0, 3.0]);
    }

    #[test]
    fn refinement_adds_interpolated_points() {
        let arc = HybridArc::from_grid(1, vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
        let g = GraphCloud::from_arc(&arc, 1);
        assert_eq!(g.len(), 3);
        assert_eq!(g.points().row(1), &[0.5, 0.0, 1.0]);
    }

    #[test]
    fn dist_to_is_exact_minimum() {
        let cloud = PointCloud::from_rows(3, &[vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 5.0]]).unwrap();
        assert_eq!(cloud.dist_to(&[1.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cloud.dist_to(&[0.0, 0.0, 5.0]).unwrap(), 0.0);
        let empty = PointCloud::new(3, vec![]).unwrap();
        assert!(matches!(empty.dist_to(&[0.0; 3]), Err(Error::EmptyCloud)));
    }

    #[test]
    fn union_and_translate_compose() {
        let a = PointCloud::from_rows(2, &[vec![0.0, 0.0]]).unwrap();
        let b = PointCloud::from_rows(2, &[vec![1.0, 1.0]]).unwrap();
        let u = PointCloud::union(&[&a, &b]).unwrap();
        assert_eq!(u.len(), 2);
        let t = u.translate(&[1.0, -1.0]).unwrap();
        assert_eq!(t.row(0), &[1.0, -1.0]);
        assert_eq!(t.row(1), &[2.0, 0.0]);
    }
}
