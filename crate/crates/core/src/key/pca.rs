//! Principal component analysis over 12-dimensional chroma vectors.

use nalgebra::{SMatrix, SymmetricEigen};

use super::KeyError;
use crate::chroma::PITCH_CLASSES;

type Matrix12 = SMatrix<f64, PITCH_CLASSES, PITCH_CLASSES>;

pub const DEFAULT_COMPONENTS: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: [f64; PITCH_CLASSES],
    /// Orthonormal rows, ordered by descending explained variance.
    pub components: Vec<[f64; PITCH_CLASSES]>,
    pub explained_variance: Vec<f64>,
}

/// Fits the top `n_components` principal axes of `data`.
///
/// The sign of each axis is fixed so its largest-magnitude entry is positive.
pub fn fit_pca(data: &[[f64; PITCH_CLASSES]], n_components: usize) -> Result<PcaModel, KeyError> {
    if n_components == 0 || n_components > PITCH_CLASSES {
        return Err(KeyError::InvalidArgument(format!(
            "n_components must be in 1..=12, got {n_components}"
        )));
    }
    if data.len() <= n_components {
        return Err(KeyError::InvalidArgument(format!(
            "need more than {n_components} samples, got {}",
            data.len()
        )));
    }

    let n = data.len() as f64;
    let mut mean = [0.0; PITCH_CLASSES];
    for row in data {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }

    let mut cov = Matrix12::zeros();
    for row in data {
        let centered: [f64; PITCH_CLASSES] = std::array::from_fn(|i| row[i] - mean[i]);
        for i in 0..PITCH_CLASSES {
            for j in i..PITCH_CLASSES {
                cov[(i, j)] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..PITCH_CLASSES {
        for j in i..PITCH_CLASSES {
            let v = cov[(i, j)] / (n - 1.0);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let eigen = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..PITCH_CLASSES).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]).then(a.cmp(&b)));
    if eigen.eigenvalues[order[0]] <= 1e-15 {
        return Err(KeyError::DegenerateData);
    }

    let mut components = Vec::with_capacity(n_components);
    let mut explained_variance = Vec::with_capacity(n_components);
    for &k in order.iter().take(n_components) {
        let column = eigen.eigenvectors.column(k);
        let mut axis: [f64; PITCH_CLASSES] = std::array::from_fn(|i| column[i]);
        let norm = axis.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut pivot = 0;
        for i in 1..PITCH_CLASSES {
            if axis[i].abs() > axis[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if axis[pivot] < 0.0 { -1.0 } else { 1.0 };
        for v in &mut axis {
            *v *= sign / norm;
        }
        components.push(axis);
        explained_variance.push(eigen.eigenvalues[k].max(0.0));
    }
    Ok(PcaModel { mean, components, explained_variance })
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn transform(&self, x: &[f64; PITCH_CLASSES]) -> Vec<f64> {
        self.components
            .iter()
            .map(|axis| axis.iter().zip(x).zip(&self.mean).map(|((a, v), m)| a * (v - m)).sum())
            .collect()
    }

    pub fn inverse_transform(&self, z: &[f64]) -> [f64; PITCH_CLASSES] {
        let mut out = self.mean;
        for (axis, &coef) in self.components.iter().zip(z) {
            for (o, a) in out.iter_mut().zip(axis) {
                *o += coef * a;
            }
        }
        out
    }
}

pub fn pca_transform(model: &PcaModel, x: &[f64; PITCH_CLASSES]) -> Vec<f64> {
    model.transform(x)
}
