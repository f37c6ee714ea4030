//! Flat parameter storage with named views.
//!
//! Every tensor lives in one `Vec<f64>` so the optimizer, gradient buffers
//! and checkpoints can treat the model as a single vector. Gate blocks are
//! stacked in the order input, forget, cell candidate, output.

use super::ModelConfig;

pub const GATES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct LayerLayout {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_input: usize,
    pub w_hidden: usize,
    pub bias: usize,
}

impl LayerLayout {
    pub fn w_input_len(&self) -> usize {
        GATES * self.hidden_dim * self.input_dim
    }

    pub fn w_hidden_len(&self) -> usize {
        GATES * self.hidden_dim * self.hidden_dim
    }

    pub fn bias_len(&self) -> usize {
        GATES * self.hidden_dim
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ParamLayout {
    pub layers: Vec<LayerLayout>,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub head_weights: usize,
    pub head_bias: usize,
    pub total: usize,
}

impl ParamLayout {
    pub fn new(config: &ModelConfig) -> Self {
        let mut offset = 0;
        let mut layers = Vec::with_capacity(config.num_layers);
        for l in 0..config.num_layers {
            let input_dim = if l == 0 { config.input_dim } else { config.hidden_dim };
            let mut layer = LayerLayout { input_dim, hidden_dim: config.hidden_dim, w_input: offset, w_hidden: 0, bias: 0 };
            offset += layer.w_input_len();
            layer.w_hidden = offset;
            offset += layer.w_hidden_len();
            layer.bias = offset;
            offset += layer.bias_len();
            layers.push(layer);
        }
        let head_weights = offset;
        offset += config.output_dim * config.hidden_dim;
        let head_bias = offset;
        offset += config.output_dim;
        ParamLayout { layers, hidden_dim: config.hidden_dim, output_dim: config.output_dim, head_weights, head_bias, total: offset }
    }

    /// `(shape, offset)` for every tensor in storage order.
    pub fn tensors(&self) -> Vec<(Vec<usize>, usize)> {
        let mut out = Vec::with_capacity(self.layers.len() * 3 + 2);
        for layer in &self.layers {
            out.push((vec![GATES * layer.hidden_dim, layer.input_dim], layer.w_input));
            out.push((vec![GATES * layer.hidden_dim, layer.hidden_dim], layer.w_hidden));
            out.push((vec![GATES * layer.hidden_dim], layer.bias));
        }
        out.push((vec![self.output_dim, self.hidden_dim], self.head_weights));
        out.push((vec![self.output_dim], self.head_bias));
        out
    }
}

/// Borrowed weights of one LSTM layer.
#[derive(Debug, Clone, Copy)]
pub struct LstmLayerWeights<'a> {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `4H x input_dim`, row-major.
    pub w_input: &'a [f64],
    /// `4H x H`, row-major.
    pub w_hidden: &'a [f64],
    pub bias: &'a [f64],
}

/// Borrowed dense output head.
#[derive(Debug, Clone, Copy)]
pub struct DenseHead<'a> {
    /// `output_dim x H`, row-major.
    pub weights: &'a [f64],
    pub bias: &'a [f64],
}

impl LayerLayout {
    pub fn view<'a>(&self, params: &'a [f64]) -> LstmLayerWeights<'a> {
        LstmLayerWeights {
            input_dim: self.input_dim,
            hidden_dim: self.hidden_dim,
            w_input: &params[self.w_input..self.w_input + self.w_input_len()],
            w_hidden: &params[self.w_hidden..self.w_hidden + self.w_hidden_len()],
            bias: &params[self.bias..self.bias + self.bias_len()],
        }
    }
}

impl ParamLayout {
    pub fn head<'a>(&self, params: &'a [f64]) -> DenseHead<'a> {
        DenseHead {
            weights: &params[self.head_weights..self.head_bias],
            bias: &params[self.head_bias..self.total],
        }
    }
}
