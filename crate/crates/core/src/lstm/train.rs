//! Context windows, the mini-batch training loop and single-step prediction.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::adam::{adam_step, AdamState};
use super::network::{accumulate_gradients, forward, loss_msle, ModelInput};
use super::{LstmModel, ModelConfig, ModelError};
use crate::chroma::{ChromaHistogram, PitchClass, NORMALIZATION_EPS, PITCH_CLASSES};
use crate::dataset::Dataset;

/// Model input for the current note. `melody` ends with the current note;
/// `chords` holds the chords of the notes before it. Each is right-aligned
/// into the window and padded on the left with zeros.
pub fn context_input(melody: &[PitchClass], chords: &[ChromaHistogram], seq_len: usize) -> ModelInput {
    let mut rows = vec![vec![0.0; 1 + PITCH_CLASSES]; seq_len];
    for (row, pc) in rows.iter_mut().rev().zip(melody.iter().rev()) {
        row[0] = f64::from(pc.value()) / 11.0;
    }
    for (row, chord) in rows.iter_mut().rev().zip(chords.iter().rev()) {
        row[1..].copy_from_slice(chord.values());
    }
    ModelInput { rows }
}

/// One training pair: the context for note `position` of the song starting at
/// dataset index `song_offset`, and that note's chord.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingWindow {
    pub song_offset: usize,
    pub position: usize,
    pub input: ModelInput,
    pub target: [f64; PITCH_CLASSES],
}

/// A window for every note of every song, never reaching across songs.
pub fn build_windows(dataset: &Dataset, seq_len: usize) -> Vec<TrainingWindow> {
    let mut windows = Vec::with_capacity(dataset.len());
    let mut offset = 0;
    for song in dataset.songs() {
        let melody: Vec<PitchClass> = song.iter().map(|e| e.melody_pc).collect();
        let chords: Vec<ChromaHistogram> = song.iter().map(|e| e.chord).collect();
        for n in 0..song.len() {
            let lo_m = (n + 1).saturating_sub(seq_len);
            let lo_c = n.saturating_sub(seq_len);
            windows.push(TrainingWindow {
                song_offset: offset,
                position: n,
                input: context_input(&melody[lo_m..=n], &chords[lo_c..n], seq_len),
                target: *chords[n].values(),
            });
        }
        offset += song.len();
    }
    windows
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    // SplitMix64 finalizer over the combined words.
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED69);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fresh model from `config.seed`, trained for `epochs`. Returns the mean
/// training MSLE of each epoch.
pub fn train(dataset: &Dataset, config: &ModelConfig, epochs: u32) -> Result<(LstmModel, Vec<f64>), ModelError> {
    let mut model = LstmModel::new(*config)?;
    if !dataset.songs().any(|s| s.len() > config.seq_len) {
        return Err(ModelError::DatasetTooSmall(config.seq_len));
    }
    let windows = build_windows(dataset, config.seq_len);
    let mut adam = AdamState::new(model.parameter_count());
    let history = train_epochs(&mut model, &mut adam, &windows, epochs)?;
    Ok((model, history))
}

/// Continues training. Epoch numbering, and with it the shuffle order and
/// dropout masks, follows `model.trained_epochs`.
pub fn train_epochs(model: &mut LstmModel, adam: &mut AdamState, windows: &[TrainingWindow], epochs: u32) -> Result<Vec<f64>, ModelError> {
    if windows.is_empty() {
        return Err(ModelError::DatasetTooSmall(model.config.seq_len));
    }
    let config = model.config;
    let mut history = Vec::with_capacity(epochs as usize);
    for _ in 0..epochs {
        let epoch = u64::from(model.trained_epochs);
        let mut order: Vec<usize> = (0..windows.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(config.seed, epoch, u64::MAX)));

        let mut total_loss = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let base = (b * config.batch_size) as u64;
            let current: &LstmModel = model;
            let results: Vec<Result<(Vec<f64>, f64), ModelError>> = batch
                .par_iter()
                .enumerate()
                .map(|(i, &w)| {
                    let window = &windows[w];
                    let (pred, cache) = forward(current, &window.input, true, mix(config.seed, epoch, base + i as u64))?;
                    let loss = loss_msle(&pred, &window.target)?;
                    let mut grads = vec![0.0; current.parameter_count()];
                    accumulate_gradients(current, &cache, &window.target, &mut grads)?;
                    Ok((grads, loss))
                })
                .collect();

            let mut sum = vec![0.0; model.parameter_count()];
            for result in results {
                let (grads, loss) = result?;
                total_loss += loss;
                sum.iter_mut().zip(&grads).for_each(|(s, g)| *s += g);
            }
            let scale = 1.0 / batch.len() as f64;
            sum.iter_mut().for_each(|g| *g *= scale);
            adam_step(model.params_mut(), &sum, adam, config.learning_rate);
            model.round_to_f32();
            if !model.is_finite() {
                return Err(ModelError::NonFiniteActivation);
            }
        }
        model.trained_epochs += 1;
        history.push(total_loss / windows.len() as f64);
    }
    Ok(history)
}

/// Inference for the current note; the sigmoid outputs are L1-normalized.
pub fn predict_next(model: &LstmModel, melody: &[PitchClass], chords: &[ChromaHistogram]) -> Result<ChromaHistogram, ModelError> {
    let input = context_input(melody, chords, model.config.seq_len);
    let (raw, _) = forward(model, &input, false, 0)?;
    let total: f64 = raw.iter().sum();
    if total < NORMALIZATION_EPS {
        return Ok(ChromaHistogram::zero());
    }
    let mut bins = [0.0; PITCH_CLASSES];
    bins.copy_from_slice(&raw);
    ChromaHistogram::normalized(bins).map_err(|_| ModelError::NonFiniteActivation)
}
