//! Pitch classes, chroma histograms and the note-overlap metric.

use std::fmt;

use thiserror::Error;

use crate::midi::Note;

pub const PITCH_CLASSES: usize = 12;

const NAMES: [&str; PITCH_CLASSES] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

/// Tolerance for "sums to one" and for bin-wise equality of histograms.
pub const NORMALIZATION_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChromaError {
    #[error("negative weight {weight} for pitch class {pc}")]
    NegativeWeight { pc: u8, weight: f64 },
    #[error("non-finite chroma value")]
    NonFinite,
}

/// Octave-equivalent pitch category, 0 = C through 11 = B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PitchClass(u8);

impl PitchClass {
    pub const C: PitchClass = PitchClass(0);

    pub fn new(value: u8) -> Option<Self> {
        (value < 12).then_some(PitchClass(value))
    }

    pub fn from_midi(pitch: u8) -> Self {
        PitchClass(pitch % 12)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        usize::from(self.0)
    }

    pub fn transpose(self, semitones: i32) -> Self {
        PitchClass((i32::from(self.0) + semitones).rem_euclid(12) as u8)
    }

    /// Parses a note name such as `C`, `f#` or `Bb`.
    pub fn from_name(name: &str) -> Option<Self> {
        let lower = name.trim().to_ascii_lowercase();
        let mut chars = lower.chars();
        let base: i32 = match chars.next()? {
            'c' => 0,
            'd' => 2,
            'e' => 4,
            'f' => 5,
            'g' => 7,
            'a' => 9,
            'b' => 11,
            _ => return None,
        };
        let shift = match chars.as_str() {
            "" => 0,
            "#" | "sharp" => 1,
            "b" | "flat" => -1,
            _ => return None,
        };
        Some(PitchClass(0).transpose(base + shift))
    }

    pub fn name(self) -> &'static str {
        NAMES[self.index()]
    }
}

impl fmt::Display for PitchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn pitch_class(midi_pitch: u8) -> PitchClass {
    debug_assert!(midi_pitch <= 127);
    PitchClass::from_midi(midi_pitch)
}

/// Twelve-bin note-mass distribution over pitch classes. Either all zero
/// (nothing sounding) or L1-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChromaHistogram([f64; PITCH_CLASSES]);

impl ChromaHistogram {
    pub fn zero() -> Self {
        ChromaHistogram([0.0; PITCH_CLASSES])
    }

    /// L1-normalizes raw non-negative bin masses. An all-zero input stays zero.
    pub fn normalized(raw: [f64; PITCH_CLASSES]) -> Result<Self, ChromaError> {
        for (pc, &v) in raw.iter().enumerate() {
            if !v.is_finite() {
                return Err(ChromaError::NonFinite);
            }
            if v < 0.0 {
                return Err(ChromaError::NegativeWeight { pc: pc as u8, weight: v });
            }
        }
        let total: f64 = raw.iter().sum();
        if total == 0.0 {
            return Ok(ChromaHistogram::zero());
        }
        Ok(ChromaHistogram(raw.map(|v| v / total)))
    }

    /// Histogram with equal mass on each listed pitch class.
    pub fn from_pitch_classes(pcs: &[u8]) -> Self {
        let mut raw = [0.0; PITCH_CLASSES];
        for &pc in pcs {
            raw[usize::from(pc % 12)] += 1.0;
        }
        ChromaHistogram::normalized(raw).expect("counts are non-negative")
    }

    pub fn values(&self) -> &[f64; PITCH_CLASSES] {
        &self.0
    }

    pub fn get(&self, pc: PitchClass) -> f64 {
        self.0[pc.index()]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    /// Bin with the most mass; ties go to the lowest pitch class.
    pub fn argmax(&self) -> PitchClass {
        let mut best = 0;
        for i in 1..PITCH_CLASSES {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        PitchClass(best as u8)
    }

    /// All bins equal within [`NORMALIZATION_EPS`].
    pub fn approx_eq(&self, other: &ChromaHistogram) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| (a - b).abs() <= NORMALIZATION_EPS)
    }

    pub fn transpose(&self, semitones: i32) -> Self {
        let mut out = [0.0; PITCH_CLASSES];
        for (i, &v) in self.0.iter().enumerate() {
            out[(i as i32 + semitones).rem_euclid(12) as usize] = v;
        }
        ChromaHistogram(out)
    }

    /// Rotates so that `tonic` lands on C.
    pub fn align_to_c(&self, tonic: PitchClass) -> Self {
        self.transpose(-i32::from(tonic.value()))
    }
}

/// Sums weights per pitch class and L1-normalizes.
pub fn histogram_from_weighted_notes(pairs: &[(PitchClass, f64)]) -> Result<ChromaHistogram, ChromaError> {
    let mut raw = [0.0; PITCH_CLASSES];
    for &(pc, weight) in pairs {
        if weight.is_nan() || weight < 0.0 {
            return Err(ChromaError::NegativeWeight { pc: pc.value(), weight });
        }
        raw[pc.index()] += weight;
    }
    ChromaHistogram::normalized(raw)
}

pub fn transpose_histogram(h: &ChromaHistogram, semitones: i32) -> ChromaHistogram {
    h.transpose(semitones)
}

pub fn align_to_c(h: &ChromaHistogram, tonic: PitchClass) -> ChromaHistogram {
    h.align_to_c(tonic)
}

/// Share of sounding time during which two or more notes overlap:
/// `T_multi / T_any`, both measured in ticks with a sweep over note
/// boundaries. Returns 0 for an empty note list.
pub fn overlap_proportion(notes: &[Note]) -> f64 {
    let mut boundaries: Vec<(u64, i32)> = Vec::with_capacity(notes.len() * 2);
    for note in notes {
        boundaries.push((note.onset, 1));
        boundaries.push((note.end(), -1));
    }
    boundaries.sort_unstable();

    let mut any = 0u64;
    let mut multi = 0u64;
    let mut active = 0i32;
    let mut last = 0u64;
    for (tick, delta) in boundaries {
        let span = tick - last;
        if active >= 1 {
            any += span;
        }
        if active >= 2 {
            multi += span;
        }
        active += delta;
        last = tick;
    }
    if any == 0 {
        0.0
    } else {
        multi as f64 / any as f64
    }
}
