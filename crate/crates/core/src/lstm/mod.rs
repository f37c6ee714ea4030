//! Stacked-LSTM chord regressor.
//!
//! Input is a `seq_len x 13` window: column 0 carries the melody pitch class
//! as `pc / 11`, columns 1..13 the chord histogram of the previous note.
//! Three LSTM layers with inverted dropout on their outputs feed a dense
//! sigmoid head that predicts the 12-bin chord for the current note.
//!
//! Arithmetic is double precision. Parameters are kept on the f32 grid
//! (initialization samples f32 values and training rounds after every
//! optimizer step) so single-precision checkpoints reload bit-identically.

mod adam;
mod checkpoint;
mod network;
mod params;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use network::{backward, dropout_masks, forward, forward_with_masks, loss_msle, DropoutMasks, ForwardCache, ModelInput};
pub use params::{DenseHead, LstmLayerWeights};
pub use train::{build_windows, context_input, predict_next, train, train_epochs, TrainingWindow};

use params::ParamLayout;

/// Features per timestep: melody scalar plus a 12-bin chord.
pub const INPUT_FEATURES: usize = 13;
pub const OUTPUT_FEATURES: usize = 12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite activation in forward pass")]
    NonFiniteActivation,
    #[error("loss inputs must be non-negative")]
    NegativeInput,
    #[error("dataset needs at least one song longer than {0} examples")]
    DatasetTooSmall(usize),
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub seq_len: usize,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub dropout_rate: f64,
    pub output_dim: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            seq_len: 8,
            input_dim: INPUT_FEATURES,
            hidden_dim: 64,
            num_layers: 3,
            dropout_rate: 0.5,
            output_dim: OUTPUT_FEATURES,
            learning_rate: 1e-4,
            batch_size: 64,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidConfig(msg.to_string()));
        if self.seq_len == 0 {
            return bad("seq_len must be at least 1");
        }
        if self.input_dim != INPUT_FEATURES || self.output_dim != OUTPUT_FEATURES {
            return bad("input_dim must be 13 and output_dim 12");
        }
        if self.hidden_dim == 0 || self.num_layers == 0 || self.batch_size == 0 {
            return bad("hidden_dim, num_layers and batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must be in [0, 1)");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub config: ModelConfig,
    layout: ParamLayout,
    params: Vec<f64>,
    pub trained_epochs: u32,
}

impl LstmModel {
    /// Uniform `±1/sqrt(fan_in)` initialization with forget-gate biases at 1,
    /// seeded by `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self, ModelError> {
        let mut model = LstmModel::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut sample = |bound: f64| f64::from(rng.gen_range(-bound..bound) as f32);
        let hidden = config.hidden_dim;
        let layout = model.layout.clone();
        for layer in &layout.layers {
            let in_bound = 1.0 / (layer.input_dim as f64).sqrt();
            let h_bound = 1.0 / (hidden as f64).sqrt();
            for p in &mut model.params[layer.w_input..layer.w_input + layer.w_input_len()] {
                *p = sample(in_bound);
            }
            for p in &mut model.params[layer.w_hidden..layer.w_hidden + layer.w_hidden_len()] {
                *p = sample(h_bound);
            }
            for (k, p) in model.params[layer.bias..layer.bias + layer.bias_len()].iter_mut().enumerate() {
                *p = if (hidden..2 * hidden).contains(&k) { 1.0 } else { sample(h_bound) };
            }
        }
        let h_bound = 1.0 / (hidden as f64).sqrt();
        for p in &mut model.params[layout.head_weights..layout.total] {
            *p = sample(h_bound);
        }
        Ok(model)
    }

    /// All parameters zero.
    pub fn zeros(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        let params = vec![0.0; layout.total];
        Ok(LstmModel { config, layout, params, trained_epochs: 0 })
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn layer(&self, index: usize) -> LstmLayerWeights<'_> {
        self.layout.layers[index].view(&self.params)
    }

    pub fn head(&self) -> DenseHead<'_> {
        self.layout.head(&self.params)
    }

    pub(crate) fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    /// Rounds every parameter to the nearest f32.
    pub fn round_to_f32(&mut self) {
        for p in &mut self.params {
            *p = f64::from(*p as f32);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}
