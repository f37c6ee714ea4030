//! Forward pass, MSLE loss and backpropagation through time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::{LayerLayout, GATES};
use super::{LstmModel, ModelConfig, ModelError};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Dot product with four independent accumulators.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`.
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// One context window, `seq_len` rows of `input_dim` features.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub rows: Vec<Vec<f64>>,
}

impl ModelInput {
    pub fn seq_len(&self) -> usize {
        self.rows.len()
    }
}

/// Inverted-dropout multipliers, one `seq_len x hidden` block per layer;
/// each entry is 0 or `1 / (1 - rate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub layers: Vec<Vec<Vec<f64>>>,
}

pub fn dropout_masks(config: &ModelConfig, seed: u64) -> DropoutMasks {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep = 1.0 - config.dropout_rate;
    let scale = 1.0 / keep;
    let layers = (0..config.num_layers)
        .map(|_| {
            (0..config.seq_len)
                .map(|_| (0..config.hidden_dim).map(|_| if rng.gen::<f64>() < keep { scale } else { 0.0 }).collect())
                .collect()
        })
        .collect();
    DropoutMasks { layers }
}

#[derive(Debug, Clone)]
struct LayerCache {
    inputs: Vec<Vec<f64>>,
    /// Activated gates per step: `[i | f | g | o]`, each of width H.
    gates: Vec<Vec<f64>>,
    cells: Vec<Vec<f64>>,
    cell_tanh: Vec<Vec<f64>>,
    /// Hidden state before dropout; this is what recurs.
    hidden: Vec<Vec<f64>>,
}

/// Activations kept for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    masks: Option<DropoutMasks>,
    top: Vec<f64>,
    pub prediction: Vec<f64>,
}

/// Runs the network. With `training` set, dropout masks are drawn from `seed`.
pub fn forward(model: &LstmModel, x: &ModelInput, training: bool, seed: u64) -> Result<(Vec<f64>, ForwardCache), ModelError> {
    let masks = (training && model.config.dropout_rate > 0.0).then(|| dropout_masks(&model.config, seed));
    forward_with_masks(model, x, masks)
}

pub fn forward_with_masks(model: &LstmModel, x: &ModelInput, masks: Option<DropoutMasks>) -> Result<(Vec<f64>, ForwardCache), ModelError> {
    let config = &model.config;
    if x.rows.len() != config.seq_len || x.rows.iter().any(|r| r.len() != config.input_dim) {
        return Err(ModelError::ShapeMismatch(format!(
            "expected {}x{} input, got {} rows",
            config.seq_len,
            config.input_dim,
            x.rows.len()
        )));
    }
    if let Some(m) = &masks {
        let ok = m.layers.len() == config.num_layers
            && m.layers.iter().all(|l| l.len() == config.seq_len && l.iter().all(|r| r.len() == config.hidden_dim));
        if !ok {
            return Err(ModelError::ShapeMismatch("dropout mask shape".into()));
        }
    }

    let params = model.params();
    let layout = model.layout();
    let h = config.hidden_dim;
    let mut inputs = x.rows.clone();
    let mut caches = Vec::with_capacity(config.num_layers);

    for (l, layer) in layout.layers.iter().enumerate() {
        let w = layer.view(params);
        let mut cache = LayerCache {
            inputs: Vec::with_capacity(config.seq_len),
            gates: Vec::with_capacity(config.seq_len),
            cells: Vec::with_capacity(config.seq_len),
            cell_tanh: Vec::with_capacity(config.seq_len),
            hidden: Vec::with_capacity(config.seq_len),
        };
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        let mut outputs = Vec::with_capacity(config.seq_len);
        for (t, x_t) in inputs.iter().enumerate() {
            let mut gates = w.bias.to_vec();
            let rows = w.w_input.chunks_exact(w.input_dim).zip(w.w_hidden.chunks_exact(h));
            for (z, (wi, wh)) in gates.iter_mut().zip(rows) {
                *z += dot(wi, x_t) + dot(wh, &h_prev);
            }
            for (k, z) in gates.iter_mut().enumerate() {
                *z = if (2 * h..3 * h).contains(&k) { z.tanh() } else { sigmoid(*z) };
            }
            let mut c = vec![0.0; h];
            let mut tc = vec![0.0; h];
            let mut hh = vec![0.0; h];
            for u in 0..h {
                c[u] = gates[h + u] * c_prev[u] + gates[u] * gates[2 * h + u];
                tc[u] = c[u].tanh();
                hh[u] = gates[3 * h + u] * tc[u];
            }
            let out = match &masks {
                Some(m) => hh.iter().zip(&m.layers[l][t]).map(|(a, b)| a * b).collect(),
                None => hh.clone(),
            };
            outputs.push(out);
            cache.inputs.push(x_t.clone());
            cache.gates.push(gates);
            cache.cells.push(c.clone());
            cache.cell_tanh.push(tc);
            cache.hidden.push(hh.clone());
            h_prev = hh;
            c_prev = c;
        }
        caches.push(cache);
        inputs = outputs;
    }

    let top = inputs.pop().expect("seq_len >= 1");
    let head = layout.head(params);
    let prediction: Vec<f64> = (0..config.output_dim)
        .map(|k| {
            sigmoid(head.bias[k] + dot(&head.weights[k * h..(k + 1) * h], &top))
        })
        .collect();
    if prediction.iter().any(|p| !p.is_finite()) {
        return Err(ModelError::NonFiniteActivation);
    }
    Ok((prediction.clone(), ForwardCache { layers: caches, masks, top, prediction }))
}

/// Mean over bins of `(ln(1 + pred) - ln(1 + target))^2`.
pub fn loss_msle(pred: &[f64], target: &[f64]) -> Result<f64, ModelError> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(ModelError::ShapeMismatch(format!("{} predictions vs {} targets", pred.len(), target.len())));
    }
    if pred.iter().chain(target).any(|&v| v.is_nan() || v < 0.0) {
        return Err(ModelError::NegativeInput);
    }
    let sum: f64 = pred.iter().zip(target).map(|(p, t)| (p.ln_1p() - t.ln_1p()).powi(2)).sum();
    Ok(sum / pred.len() as f64)
}

/// Gradient of [`loss_msle`] with respect to every parameter, laid out like
/// [`LstmModel::params`].
pub fn backward(model: &LstmModel, cache: &ForwardCache, target: &[f64]) -> Result<Vec<f64>, ModelError> {
    let mut grads = vec![0.0; model.parameter_count()];
    accumulate_gradients(model, cache, target, &mut grads)?;
    Ok(grads)
}

pub(crate) fn accumulate_gradients(model: &LstmModel, cache: &ForwardCache, target: &[f64], grads: &mut [f64]) -> Result<(), ModelError> {
    let config = &model.config;
    if target.len() != config.output_dim {
        return Err(ModelError::ShapeMismatch(format!("target has {} bins", target.len())));
    }
    let params = model.params();
    let layout = model.layout();
    let h = config.hidden_dim;
    let n_out = config.output_dim as f64;

    // Head: d loss / d logit for each output bin.
    let mut d_top = vec![0.0; h];
    for (k, (&p, &t)) in cache.prediction.iter().zip(target).enumerate() {
        let d_pred = 2.0 * (p.ln_1p() - t.ln_1p()) / ((1.0 + p) * n_out);
        let d_logit = d_pred * p * (1.0 - p);
        grads[layout.head_bias + k] += d_logit;
        let w_row = layout.head_weights + k * h;
        axpy(d_logit, &cache.top, &mut grads[w_row..w_row + h]);
        axpy(d_logit, &params[w_row..w_row + h], &mut d_top);
    }

    // Gradient with respect to each layer's (post-dropout) outputs.
    let mut d_outputs = vec![vec![0.0; h]; config.seq_len];
    d_outputs[config.seq_len - 1] = d_top;

    for l in (0..layout.layers.len()).rev() {
        let layer = &layout.layers[l];
        let mask = cache.masks.as_ref().map(|m| &m.layers[l]);
        d_outputs = layer_backward(layer, params, &cache.layers[l], mask, &d_outputs, grads);
    }
    Ok(())
}

fn layer_backward(
    layer: &LayerLayout,
    params: &[f64],
    cache: &LayerCache,
    mask: Option<&Vec<Vec<f64>>>,
    d_outputs: &[Vec<f64>],
    grads: &mut [f64],
) -> Vec<Vec<f64>> {
    let h = layer.hidden_dim;
    let in_dim = layer.input_dim;
    let w = layer.view(params);
    let steps = cache.inputs.len();
    let mut d_inputs = vec![vec![0.0; in_dim]; steps];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let zeros = vec![0.0; h];
    let mut dz = vec![0.0; GATES * h];

    for t in (0..steps).rev() {
        let gates = &cache.gates[t];
        let c_prev = if t > 0 { &cache.cells[t - 1] } else { &zeros };
        let h_prev = if t > 0 { &cache.hidden[t - 1] } else { &zeros };
        for u in 0..h {
            let m = mask.map_or(1.0, |m| m[t][u]);
            let dh = d_outputs[t][u] * m + dh_next[u];
            let (i, f, g, o) = (gates[u], gates[h + u], gates[2 * h + u], gates[3 * h + u]);
            let tc = cache.cell_tanh[t][u];
            let dc = dh * o * (1.0 - tc * tc) + dc_next[u];
            dz[u] = dc * g * i * (1.0 - i);
            dz[h + u] = dc * c_prev[u] * f * (1.0 - f);
            dz[2 * h + u] = dc * i * (1.0 - g * g);
            dz[3 * h + u] = dh * tc * o * (1.0 - o);
            dc_next[u] = dc * f;
        }
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        let x_t = &cache.inputs[t];
        for (r, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            grads[layer.bias + r] += d;
            let wi = layer.w_input + r * in_dim;
            axpy(d, x_t, &mut grads[wi..wi + in_dim]);
            axpy(d, &w.w_input[r * in_dim..(r + 1) * in_dim], &mut d_inputs[t]);
            let wh = layer.w_hidden + r * h;
            axpy(d, h_prev, &mut grads[wh..wh + h]);
            axpy(d, &w.w_hidden[r * h..(r + 1) * h], &mut dh_next);
        }
    }
    d_inputs
}
