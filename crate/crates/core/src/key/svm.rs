//! One-vs-rest soft-margin classifier with an RBF kernel, trained by
//! sequential minimal optimization on the dual.
//!
//! Each binary machine solves
//!
//! ```text
//! min_a  1/2 a'Qa - 1'a   s.t.  0 <= a_i <= C_i,  y'a = 0,   Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! picking the maximal violating pair at every step and stopping once the
//! pair's KKT gap drops below the tolerance.

use super::KeyError;

pub const KEY_CLASSES: usize = 12;

/// Above this many samples kernel rows are computed on demand instead of
/// materializing the full Gram matrix.
const DENSE_KERNEL_LIMIT: usize = 4096;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassWeight {
    Uniform,
    /// `n_samples / (2 * class_count)` per side of each binary problem.
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: f64,
    /// Kept for the record; an RBF kernel has no degree.
    pub degree: u32,
    pub class_weight: ClassWeight,
    pub tolerance: f64,
    /// Iteration cap, in multiples of the sample count.
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 0.5,
            gamma: 1.0,
            degree: 1,
            class_weight: ClassWeight::Balanced,
            tolerance: 1e-3,
            max_passes: 10_000,
        }
    }
}

pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMachine {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub coefficients: Vec<f64>,
    pub bias: f64,
}

impl BinaryMachine {
    pub fn decision(&self, x: &[f64], gamma: f64) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coefficients)
            .map(|(sv, &coef)| coef * rbf_kernel(sv, x, gamma))
            .sum::<f64>()
            + self.bias
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelClassifier {
    pub params: SvmParams,
    pub dim: usize,
    /// One machine per major key; `None` for keys absent from training.
    pub machines: Vec<Option<BinaryMachine>>,
}

impl KernelClassifier {
    pub fn decision_values(&self, x: &[f64]) -> [f64; KEY_CLASSES] {
        std::array::from_fn(|k| match &self.machines[k] {
            Some(m) => m.decision(x, self.params.gamma),
            None => f64::NEG_INFINITY,
        })
    }

    /// Argmax over the per-key decision values, lowest key on ties.
    pub fn predict(&self, x: &[f64]) -> u8 {
        let values = self.decision_values(x);
        let mut best = 0;
        for k in 1..KEY_CLASSES {
            if values[k] > values[best] {
                best = k;
            }
        }
        best as u8
    }
}

enum Gram<'a> {
    Dense { n: usize, values: Vec<f64> },
    OnDemand { x: &'a [Vec<f64>], gamma: f64 },
}

impl Gram<'_> {
    fn new(x: &[Vec<f64>], gamma: f64) -> Gram<'_> {
        let n = x.len();
        if n > DENSE_KERNEL_LIMIT {
            return Gram::OnDemand { x, gamma };
        }
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
            for j in (i + 1)..n {
                let k = rbf_kernel(&x[i], &x[j], gamma);
                values[i * n + j] = k;
                values[j * n + i] = k;
            }
        }
        Gram::Dense { n, values }
    }

    fn row_into(&self, i: usize, out: &mut [f64]) {
        match self {
            Gram::Dense { n, values } => out.copy_from_slice(&values[i * n..(i + 1) * n]),
            Gram::OnDemand { x, gamma } => {
                for (o, xj) in out.iter_mut().zip(x.iter()) {
                    *o = rbf_kernel(&x[i], xj, *gamma);
                }
            }
        }
    }
}

struct DualSolution {
    alpha: Vec<f64>,
    rho: f64,
}

fn solve_dual(gram: &Gram<'_>, y: &[f64], upper: &[f64], tolerance: f64, max_iter: usize) -> DualSolution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    // Gradient of the dual objective; starts at -1 with alpha = 0.
    let mut grad = vec![-1.0; n];
    let mut row_i = vec![0.0; n];
    let mut row_j = vec![0.0; n];

    let at_upper = |a: f64, c: f64| a >= c;
    let at_lower = |a: f64| a <= 0.0;

    for _ in 0..max_iter {
        let mut g_max = f64::NEG_INFINITY;
        let mut g_min = f64::INFINITY;
        let mut sel_i = usize::MAX;
        let mut sel_j = usize::MAX;
        for t in 0..n {
            let score = -y[t] * grad[t];
            let in_up = if y[t] > 0.0 { !at_upper(alpha[t], upper[t]) } else { !at_lower(alpha[t]) };
            let in_low = if y[t] > 0.0 { !at_lower(alpha[t]) } else { !at_upper(alpha[t], upper[t]) };
            if in_up && score > g_max {
                g_max = score;
                sel_i = t;
            }
            if in_low && score < g_min {
                g_min = score;
                sel_j = t;
            }
        }
        if sel_i == usize::MAX || sel_j == usize::MAX || g_max - g_min < tolerance {
            break;
        }
        let (i, j) = (sel_i, sel_j);
        gram.row_into(i, &mut row_i);
        gram.row_into(j, &mut row_j);
        let (ci, cj) = (upper[i], upper[j]);
        let old_i = alpha[i];
        let old_j = alpha[j];
        // Curvature along the feasible direction, the same for both sign cases.
        let quad = (row_i[i] + row_j[j] - 2.0 * row_i[j]).max(TAU);

        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let d_i = alpha[i] - old_i;
        let d_j = alpha[j] - old_j;
        for t in 0..n {
            grad[t] += y[t] * (y[i] * row_i[t] * d_i + y[j] * row_j[t] * d_j);
        }
    }

    // Offset from the free vectors, or the middle of the feasible interval.
    let mut upper_bound = f64::INFINITY;
    let mut lower_bound = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..n {
        let yg = y[t] * grad[t];
        if at_upper(alpha[t], upper[t]) {
            if y[t] < 0.0 {
                upper_bound = upper_bound.min(yg);
            } else {
                lower_bound = lower_bound.max(yg);
            }
        } else if at_lower(alpha[t]) {
            if y[t] > 0.0 {
                upper_bound = upper_bound.min(yg);
            } else {
                lower_bound = lower_bound.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 { free_sum / free as f64 } else { (upper_bound + lower_bound) / 2.0 };
    DualSolution { alpha, rho }
}

/// Trains one binary machine per major key present in `y`.
pub fn train_kernel_classifier(
    x: &[Vec<f64>],
    y: &[u8],
    params: &SvmParams,
) -> Result<KernelClassifier, KeyError> {
    if x.len() != y.len() {
        return Err(KeyError::InvalidArgument(format!("{} samples but {} labels", x.len(), y.len())));
    }
    if let Some(&bad) = y.iter().find(|&&label| usize::from(label) >= KEY_CLASSES) {
        return Err(KeyError::InvalidArgument(format!("label {bad} out of range")));
    }
    let mut counts = [0usize; KEY_CLASSES];
    for &label in y {
        counts[usize::from(label)] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(KeyError::InsufficientClasses);
    }
    let dim = x[0].len();
    if x.iter().any(|row| row.len() != dim) {
        return Err(KeyError::InvalidArgument("ragged feature rows".into()));
    }

    let n = x.len();
    let gram = Gram::new(x, params.gamma);
    let max_iter = params.max_passes.saturating_mul(n.max(1));
    let mut machines = Vec::with_capacity(KEY_CLASSES);
    for (class, &positives) in counts.iter().enumerate() {
        if positives == 0 {
            machines.push(None);
            continue;
        }
        let signs: Vec<f64> = y.iter().map(|&l| if usize::from(l) == class { 1.0 } else { -1.0 }).collect();
        let negatives = n - positives;
        let (w_pos, w_neg) = match params.class_weight {
            ClassWeight::Uniform => (1.0, 1.0),
            ClassWeight::Balanced => (n as f64 / (2.0 * positives as f64), n as f64 / (2.0 * negatives as f64)),
        };
        let upper: Vec<f64> =
            signs.iter().map(|&s| params.c * if s > 0.0 { w_pos } else { w_neg }).collect();
        let solution = solve_dual(&gram, &signs, &upper, params.tolerance, max_iter);

        let mut support_vectors = Vec::new();
        let mut coefficients = Vec::new();
        for t in 0..n {
            if solution.alpha[t] > 0.0 {
                support_vectors.push(x[t].clone());
                coefficients.push(solution.alpha[t] * signs[t]);
            }
        }
        machines.push(Some(BinaryMachine { support_vectors, coefficients, bias: -solution.rho }));
    }
    Ok(KernelClassifier { params: *params, dim, machines })
}
