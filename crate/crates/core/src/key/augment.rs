//! Balancing and augmentation of the key-classification set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{KeyError, KeyExample};
use crate::chroma::{ChromaHistogram, PITCH_CLASSES};
use crate::midi::{relative_major, Mode};

/// Noisy copies added for each minor-key example.
pub const MINOR_DUPLICATES: usize = 6;
/// Upper end of the per-bin uniform noise added to the copies.
pub const NOISE_AMPLITUDE: f64 = 0.02;

fn add_noise(h: &ChromaHistogram, rng: &mut ChaCha8Rng) -> ChromaHistogram {
    let raw: [f64; PITCH_CLASSES] =
        std::array::from_fn(|i| (h.values()[i] + rng.gen_range(0.0..=NOISE_AMPLITUDE)).max(0.0));
    ChromaHistogram::normalized(raw).expect("noisy bins stay finite and non-negative")
}

/// Expands minor examples with noisy duplicates, rotates every example by an
/// independent random 0..12 semitones, and relabels everything with the
/// tonic of its major key.
///
/// Output order follows the input: each example, then its noisy copies.
pub fn augment_keyset(examples: &[KeyExample], seed: u64) -> Result<Vec<(ChromaHistogram, u8)>, KeyError> {
    if examples.is_empty() {
        return Err(KeyError::EmptyInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let minors = examples.iter().filter(|e| e.mode == Mode::Minor).count();
    let mut out = Vec::with_capacity(examples.len() + minors * MINOR_DUPLICATES);

    for example in examples {
        let mut variants = vec![example.histogram];
        if example.mode == Mode::Minor {
            for _ in 0..MINOR_DUPLICATES {
                variants.push(add_noise(&example.histogram, &mut rng));
            }
        }
        for histogram in variants {
            let shift: u8 = rng.gen_range(0..12);
            let tonic = (example.tonic_pc + shift) % 12;
            let label = match example.mode {
                Mode::Major => tonic,
                Mode::Minor => relative_major(tonic),
            };
            out.push((histogram.transpose(i32::from(shift)), label));
        }
    }
    Ok(out)
}
