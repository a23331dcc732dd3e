// SPDX-License-Identifier: MIT OR Apache-2.0

//! Two-component PCA of signature vectors for plotting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ChannelSignature;

const DIM: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    pub points: BTreeMap<String, (f64, f64)>,
    /// Variance along each component (covariance eigenvalues), descending.
    pub explained_variance: [f64; 2],
    /// Share of total variance captured by each component.
    pub explained_variance_ratio: [f64; 2],
    /// Unit principal axes, one row per component.
    pub components: [[f64; DIM]; 2],
    pub center: [f64; DIM],
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns
/// eigenvalues and eigenvectors (as columns), unsorted.
pub fn symmetric_eigen(mut a: [[f64; DIM]; DIM]) -> ([f64; DIM], [[f64; DIM]; DIM]) {
    let mut v = [[0.0; DIM]; DIM];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..DIM)
            .flat_map(|i| (0..DIM).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..DIM).map(|i| a[i][i] * a[i][i]).sum::<f64>() + off;
        if off <= f64::EPSILON * f64::EPSILON * scale || off == 0.0 {
            break;
        }
        for p in 0..DIM {
            for q in p + 1..DIM {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..DIM {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..DIM {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = std::array::from_fn(|i| a[i][i]);
    (values, v)
}

/// Flips `axis` so its largest-magnitude coordinate is positive (first wins ties).
pub fn orient(axis: &mut [f64; DIM]) {
    let mut lead = 0;
    for i in 1..DIM {
        if axis[i].abs() > axis[lead].abs() {
            lead = i;
        }
    }
    if axis[lead] < 0.0 {
        for x in axis.iter_mut() {
            *x = -*x;
        }
    }
}

pub fn pca_project(signatures: &[(String, ChannelSignature)]) -> Result<Projection2D> {
    let n = signatures.len();
    if n < 3 {
        return Err(Error::invalid(format!("PCA needs at least 3 signatures, got {n}")));
    }
    let rows: Vec<[f64; DIM]> = signatures.iter().map(|(_, s)| s.to_array()).collect();
    let mut center = [0.0; DIM];
    for r in &rows {
        for j in 0..DIM {
            center[j] += r[j];
        }
    }
    center = center.map(|c| c / n as f64);

    let mut cov = [[0.0; DIM]; DIM];
    for r in &rows {
        for i in 0..DIM {
            for j in 0..DIM {
                cov[i][j] += (r[i] - center[i]) * (r[j] - center[j]);
            }
        }
    }
    for row in cov.iter_mut() {
        for x in row.iter_mut() {
            *x /= (n - 1) as f64;
        }
    }
    let total: f64 = (0..DIM).map(|i| cov[i][i]).sum();
    if total <= 0.0 {
        return Err(Error::invalid("no variance to project"));
    }

    let (values, vectors) = symmetric_eigen(cov);
    let mut order: Vec<usize> = (0..DIM).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut components = [[0.0; DIM]; 2];
    for (c, &idx) in components.iter_mut().zip(&order) {
        *c = std::array::from_fn(|k| vectors[k][idx]);
        orient(c);
    }
    let explained_variance = [values[order[0]].max(0.0), values[order[1]].max(0.0)];

    let points = signatures
        .iter()
        .zip(&rows)
        .map(|((id, _), r)| {
            let proj = |axis: &[f64; DIM]| (0..DIM).map(|j| (r[j] - center[j]) * axis[j]).sum::<f64>();
            (id.clone(), (proj(&components[0]), proj(&components[1])))
        })
        .collect();

    Ok(Projection2D {
        points,
        explained_variance,
        explained_variance_ratio: explained_variance.map(|v| v / total),
        components,
        center,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn named(points: &[[f64; 4]]) -> Vec<(String, ChannelSignature)> {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| (format!("p{i}"), ChannelSignature::from_array(*p)))
            .collect()
    }

    #[test]
    fn two_varying_coordinates_explain_everything() {
        let pts = [
            [1.0, 0.0, 2.0, 3.0],
            [1.0, 1.0, 2.0, 5.0],
            [1.0, -2.0, 2.0, 4.0],
            [1.0, 0.5, 2.0, 1.0],
        ];
        let p = pca_project(&named(&pts)).unwrap();
        let captured: f64 = p.explained_variance_ratio.iter().sum();
        assert!((captured - 1.0).abs() < 1e-12);
        assert!(p.explained_variance[0] >= p.explained_variance[1]);
    }

    #[test]
    fn components_are_orthonormal_and_oriented() {
        let pts = [
            [0.3, 1.0, -2.0, 0.1],
            [0.1, 0.4, 1.0, 2.0],
            [-1.0, 0.2, 0.5, -0.3],
            [0.7, -0.9, 0.0, 1.1],
            [0.2, 0.2, 0.2, 0.2],
        ];
        let p = pca_project(&named(&pts)).unwrap();
        let dot = |a: &[f64; 4], b: &[f64; 4]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        assert!((dot(&p.components[0], &p.components[0]) - 1.0).abs() < 1e-12);
        assert!((dot(&p.components[1], &p.components[1]) - 1.0).abs() < 1e-12);
        assert!(dot(&p.components[0], &p.components[1]).abs() < 1e-12);
        for c in &p.components {
            let lead = c
                .iter()
                .copied()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(lead > 0.0);
        }
    }

    #[test]
    fn duplicates_project_identically() {
        let pts = [
            [1.0, 2.0, 0.0, 0.0],
            [1.0, 2.0, 0.0, 0.0],
            [0.0, 1.0, 3.0, 1.0],
            [2.0, 0.0, 1.0, 1.0],
        ];
        let p = pca_project(&named(&pts)).unwrap();
        assert_eq!(p.points["p0"], p.points["p1"]);
    }

    #[test]
    fn rank_zero_and_small_inputs_fail() {
        let same = [[1.0, 2.0, 3.0, 4.0]; 5];
        assert!(pca_project(&named(&same))
            .unwrap_err()
            .to_string()
            .contains("no variance"));
        assert!(pca_project(&named(&same[..2])).is_err());
    }
}
