//! Major-key recognition from whole-file chroma histograms.
//!
//! Training runs augmentation, then PCA, then a one-vs-rest RBF classifier
//! over the 12 major keys. Minor keys are folded into their relative major
//! before training, so the classifier never sees a minor label.

mod augment;
mod format;
mod pca;
mod svm;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chroma::{ChromaHistogram, PitchClass, PITCH_CLASSES};
use crate::midi::{extract_key_meta, MidiSong, Mode};

pub use augment::{augment_keyset, MINOR_DUPLICATES, NOISE_AMPLITUDE};
pub use format::{load_key_model, read_key_model, save_key_model, write_key_model, KEY_MODEL_VERSION};
pub use pca::{fit_pca, pca_transform, PcaModel, DEFAULT_COMPONENTS};
pub use svm::{
    rbf_kernel, train_kernel_classifier, BinaryMachine, ClassWeight, KernelClassifier, SvmParams, KEY_CLASSES,
};

#[derive(Debug, Error)]
pub enum KeyError {
    #[error("no examples to train on")]
    EmptyInput,
    #[error("training data needs at least two distinct keys")]
    InsufficientClasses,
    #[error("data has no variance to fit")]
    DegenerateData,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("key model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Whole-file histogram with its labelled key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyExample {
    pub histogram: ChromaHistogram,
    pub tonic_pc: u8,
    pub mode: Mode,
}

impl KeyExample {
    /// Tonic of the major key this example is classified as.
    pub fn major_tonic(&self) -> u8 {
        match self.mode {
            Mode::Major => self.tonic_pc,
            Mode::Minor => crate::midi::relative_major(self.tonic_pc),
        }
    }

    /// Labels a song by its first key-signature event, skipping files whose
    /// metadata is missing or is the C-major-at-tick-0 default.
    pub fn from_song(song: &MidiSong) -> Option<KeyExample> {
        extract_key_meta(song)?;
        let key = song.key_events.first()?;
        let histogram = file_histogram(song);
        if histogram.is_zero() {
            return None;
        }
        Some(KeyExample { histogram, tonic_pc: key.tonic_pc, mode: key.mode })
    }
}

/// Duration-weighted chroma of every pitched (non-drum) note in the song.
pub fn file_histogram(song: &MidiSong) -> ChromaHistogram {
    let mut raw = [0.0; PITCH_CLASSES];
    for track in song.tracks.iter().filter(|t| !t.is_drum) {
        for note in &track.notes {
            raw[usize::from(note.pitch % 12)] += note.duration as f64;
        }
    }
    ChromaHistogram::normalized(raw).expect("durations are non-negative")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyTrainConfig {
    pub n_components: usize,
    pub svm: SvmParams,
    pub seed: u64,
}

impl Default for KeyTrainConfig {
    fn default() -> Self {
        KeyTrainConfig { n_components: DEFAULT_COMPONENTS, svm: SvmParams::default(), seed: 0 }
    }
}

/// PCA projection followed by the kernel classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyModel {
    pub pca: PcaModel,
    pub classifier: KernelClassifier,
}

impl KeyModel {
    pub fn predict(&self, h: &ChromaHistogram) -> PitchClass {
        predict_key(&self.classifier, &self.pca, h)
    }

    /// Fraction of examples whose major tonic is predicted correctly.
    pub fn accuracy(&self, examples: &[KeyExample]) -> f64 {
        if examples.is_empty() {
            return 0.0;
        }
        let hits = examples.iter().filter(|e| self.predict(&e.histogram).value() == e.major_tonic()).count();
        hits as f64 / examples.len() as f64
    }
}

pub fn predict_key(classifier: &KernelClassifier, pca: &PcaModel, h: &ChromaHistogram) -> PitchClass {
    let z = pca.transform(h.values());
    PitchClass::new(classifier.predict(&z)).expect("classifier labels are pitch classes")
}

/// Augments, fits PCA on the augmented set, and trains the classifier.
pub fn train_key_model(examples: &[KeyExample], config: &KeyTrainConfig) -> Result<KeyModel, KeyError> {
    let augmented = augment_keyset(examples, config.seed)?;
    let rows: Vec<[f64; PITCH_CLASSES]> = augmented.iter().map(|(h, _)| *h.values()).collect();
    let labels: Vec<u8> = augmented.iter().map(|&(_, label)| label).collect();
    let pca = fit_pca(&rows, config.n_components)?;
    let projected: Vec<Vec<f64>> = rows.iter().map(|r| pca.transform(r)).collect();
    let classifier = train_kernel_classifier(&projected, &labels, &config.svm)?;
    Ok(KeyModel { pca, classifier })
}

/// Seeded shuffle followed by a split; returns `(train, held_out)`.
pub fn split_holdout(examples: &[KeyExample], held_out_fraction: f64, seed: u64) -> (Vec<KeyExample>, Vec<KeyExample>) {
    let mut shuffled = examples.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let held_out = ((examples.len() as f64) * held_out_fraction.clamp(0.0, 1.0)).round() as usize;
    let train = shuffled.split_off(held_out);
    (train, shuffled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::midi::{KeySignature, Note, Track};

    #[test]
    fn file_histogram_weights_by_duration_and_skips_drums() {
        let mut song = MidiSong::default();
        let mut lead = Track::new("lead", 0, 0);
        lead.notes.push(Note { pitch: 60, onset: 0, duration: 300, velocity: 90, track_index: 0 });
        lead.notes.push(Note { pitch: 67, onset: 300, duration: 100, velocity: 90, track_index: 0 });
        song.push_track(lead);
        let mut drums = Track::new("drums", 0, 9);
        drums.notes.push(Note { pitch: 38, onset: 0, duration: 1000, velocity: 90, track_index: 0 });
        song.push_track(drums);
        let h = file_histogram(&song);
        assert_eq!(h.values()[0], 0.75);
        assert_eq!(h.values()[7], 0.25);
        assert_eq!(h.values()[2], 0.0);
    }

    #[test]
    fn examples_from_songs_respect_the_default_key_rule() {
        let mut song = MidiSong::default();
        let mut t = Track::new("x", 0, 0);
        t.notes.push(Note { pitch: 64, onset: 0, duration: 10, velocity: 90, track_index: 0 });
        song.push_track(t);
        assert!(KeyExample::from_song(&song).is_none());
        song.key_events.push(KeySignature { tonic_pc: 0, mode: Mode::Major, tick: 0 });
        assert!(KeyExample::from_song(&song).is_none());
        song.key_events[0] = KeySignature { tonic_pc: 4, mode: Mode::Minor, tick: 0 };
        let ex = KeyExample::from_song(&song).unwrap();
        assert_eq!((ex.tonic_pc, ex.mode, ex.major_tonic()), (4, Mode::Minor, 7));
    }

    #[test]
    fn holdout_split_partitions_deterministically() {
        let examples: Vec<_> = (0..50u8)
            .map(|i| KeyExample { histogram: ChromaHistogram::from_pitch_classes(&[i % 12]), tonic_pc: i % 12, mode: Mode::Major })
            .collect();
        let (train, test) = split_holdout(&examples, 0.2, 3);
        assert_eq!((train.len(), test.len()), (40, 10));
        assert_eq!(split_holdout(&examples, 0.2, 3), (train, test));
    }
}
