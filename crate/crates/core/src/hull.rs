//! Distance to the convex hull of finitely many vertices.
//!
//! Flow and jump maps are represented by vertex lists whose convex hull is
//! the value set. Residual checks and perturbation experiments need the
//! distance from a point to such a hull, computed here by the min-norm-point
//! algorithm on the shifted vertex set: maintain an affinely independent
//! corral, move to the affine minimizer while it stays inside the simplex,
//! and add the vertex most aligned with the current point otherwise. The
//! vertex counts involved are small, so the inner affine solves use plain
//! Gaussian elimination.

use crate::error::{Error, Result};

/// Outcome of projecting a point onto a vertex hull.
#[derive(Debug, Clone)]
pub struct HullProjection {
    /// Distance from the query point to the hull.
    pub dist: f64,
    /// Nearest hull point.
    pub point: Vec<f64>,
    /// Convex coefficients over the input vertices.
    pub coeffs: Vec<f64>,
}

const MAX_OUTER: usize = 512;
const ALIGN_TOL: f64 = 1e-13;

/// Solves the symmetric system for the affine minimizer of `|sum a_i w_i|^2`
/// subject to `sum a_i = 1`, over the corral `rows`.
fn affine_coefficients(gram: &[Vec<f64>], idx: &[usize]) -> Option<Vec<f64>> {
    let k = idx.len();
    let m = k + 1;
    let mut a = vec![vec![0.0; m + 1]; m];
    a[0][0] = 0.0;
    for c in 0..k {
        a[0][c + 1] = 1.0;
        a[c + 1][0] = 1.0;
    }
    a[0][m] = 1.0;
    for r in 0..k {
        for c in 0..k {
            a[r + 1][c + 1] = gram[idx[r]][idx[c]];
        }
    }
    for col in 0..m {
        let pivot = (col..m).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        for r in 0..m {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=m {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Some((0..k).map(|i| a[i + 1][m] / a[i + 1][i + 1]).collect())
}

/// Projects `target` onto the convex hull of `vertices`.
pub fn hull_projection(target: &[f64], vertices: &[Vec<f64>]) -> Result<HullProjection> {
    if vertices.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let dim = target.len();
    for v in vertices {
        if v.len() != dim {
            return Err(Error::DomainMismatch(format!(
                "vertex of dimension {} against point of dimension {dim}",
                v.len()
            )));
        }
    }
    let m = vertices.len();
    let shifted: Vec<Vec<f64>> = vertices
        .iter()
        .map(|v| v.iter().zip(target).map(|(a, b)| a - b).collect())
        .collect();
    if m == 1 {
        let d = shifted[0].iter().map(|x| x * x).sum::<f64>().sqrt();
        return Ok(HullProjection { dist: d, point: vertices[0].clone(), coeffs: vec![1.0] });
    }
    let mut gram = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..=i {
            let g: f64 = shifted[i].iter().zip(&shifted[j]).map(|(a, b)| a * b).sum();
            gram[i][j] = g;
            gram[j][i] = g;
        }
    }
    let start = (0..m)
        .min_by(|&i, &j| gram[i][i].total_cmp(&gram[j][j]))
        .unwrap();
    let mut corral = vec![start];
    let mut lambda = vec![1.0f64];
    let x = |corral: &[usize], lambda: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (&i, &l) in corral.iter().zip(lambda) {
            for c in 0..dim {
                out[c] += l * shifted[i][c];
            }
        }
        out
    };
    for _ in 0..MAX_OUTER {
        let cur = x(&corral, &lambda);
        let cur_sq: f64 = cur.iter().map(|c| c * c).sum();
        // Most aligned vertex: smallest <x, w_j>.
        let mut best = 0usize;
        let mut best_dot = f64::INFINITY;
        for j in 0..m {
            let dot: f64 = cur.iter().zip(&shifted[j]).map(|(a, b)| a * b).sum();
            if dot < best_dot {
                best_dot = dot;
                best = j;
            }
        }
        let scale = 1.0 + cur_sq.abs();
        if best_dot >= cur_sq - ALIGN_TOL * scale || corral.contains(&best) {
            let mut coeffs = vec![0.0; m];
            for (&i, &l) in corral.iter().zip(&lambda) {
                coeffs[i] += l;
            }
            let mut point = vec![0.0; dim];
            for c in 0..dim {
                point[c] = target[c] + cur[c];
            }
            return Ok(HullProjection { dist: cur_sq.max(0.0).sqrt(), point, coeffs });
        }
        corral.push(best);
        lambda.push(0.0);
        // Pull the iterate toward the affine minimizer, dropping vertices
        // whose coefficient hits zero.
        loop {
            let Some(alpha) = affine_coefficients(&gram, &corral) else {
                // Degenerate corral: drop the newest vertex and settle.
                corral.pop();
                lambda.pop();
                break;
            };
            if alpha.iter().all(|&a| a > 1e-12) {
                lambda = alpha;
                break;
            }
            let mut theta = 1.0f64;
            let mut drop = None;
            for (i, (&l, &a)) in lambda.iter().zip(&alpha).enumerate() {
                if a < 1e-12 && l > a {
                    let step = l / (l - a);
                    if step < theta {
                        theta = step;
                        drop = Some(i);
                    }
                }
            }
            for (l, &a) in lambda.iter_mut().zip(&alpha) {
                *l += theta * (a - *l);
            }
            match drop {
                Some(i) => {
                    corral.remove(i);
                    lambda.remove(i);
                }
                None => break,
            }
        }
    }
    let cur = x(&corral, &lambda);
    let mut coeffs = vec![0.0; m];
    for (&i, &l) in corral.iter().zip(&lambda) {
        coeffs[i] += l;
    }
    let mut point = vec![0.0; dim];
    for c in 0..dim {
        point[c] = target[c] + cur[c];
    }
    Ok(HullProjection {
        dist: cur.iter().map(|c| c * c).sum::<f64>().sqrt(),
        point,
        coeffs,
    })
}

/// Distance from `target` to the convex hull of `vertices`.
pub fn hull_distance(target: &[f64], vertices: &[Vec<f64>]) -> Result<f64> {
    Ok(hull_projection(target, vertices)?.dist)
}

pub fn hull_contains(target: &[f64], vertices: &[Vec<f64>], tol: f64) -> Result<bool> {
    Ok(hull_distance(target, vertices)? <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn singleton_hull_distance_is_plain_distance() {
        let p = hull_projection(&[1.0, 2.0], &[vec![4.0, 6.0]]).unwrap();
        assert_abs_diff_eq!(p.dist, 5.0, epsilon = 1e-12);
        assert_eq!(p.coeffs, vec![1.0]);
    }

    #[test]
    fn interior_point_has_zero_distance() {
        let verts = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 2.0]];
        let d = hull_distance(&[0.5, 0.5], &verts).unwrap();
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-9);
        assert!(hull_contains(&[0.5, 0.5], &verts, 1e-8).unwrap());
    }

    #[test]
    fn projection_onto_segment_matches_geometry() {
        let verts = vec![vec![0.0, 0.0], vec![2.0, 0.0]];
        let p = hull_projection(&[1.0, 1.0], &verts).unwrap();
        assert_abs_diff_eq!(p.dist, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(p.point[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(p.point[1], 0.0, epsilon = 1e-10);
        let sum: f64 = p.coeffs.iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn vertex_is_nearest_when_outside_facet_cone() {
        let verts = vec![vec![1.0, 0.0], vec![2.0, 1.0], vec![2.0, -1.0]];
        let p = hull_projection(&[0.0, 0.0], &verts).unwrap();
        assert_abs_diff_eq!(p.dist, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(p.point[0], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn duplicate_vertices_are_tolerated() {
        let verts = vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![3.0, 1.0]];
        let d = hull_distance(&[2.0, 0.0], &verts).unwrap();
        assert_abs_diff_eq!(d, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn high_dimensional_simplex_projection() {
        let mut verts = Vec::new();
        for i in 0..6 {
            let mut v = vec![0.0; 6];
            v[i] = 1.0;
            verts.push(v);
        }
        // Barycenter of the standard simplex is the nearest point to the
        // origin, at distance 1/sqrt(6).
        let d = hull_distance(&[0.0; 6], &verts).unwrap();
        assert_abs_diff_eq!(d, (1.0f64 / 6.0).sqrt(), epsilon = 1e-9);
    }
}
