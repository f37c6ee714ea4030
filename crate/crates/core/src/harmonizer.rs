//! Chord voicing and melody harmonization.

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chroma::{ChromaHistogram, PitchClass, PITCH_CLASSES};
use crate::dataset::{select_melody_track, DEFAULT_OVERLAP_THRESHOLD};
use crate::lstm::{predict_next, LstmModel, ModelError};
use crate::midi::{MidiSong, Note, Track, DRUM_CHANNEL};

pub const DEFAULT_VOICING_THRESHOLD: f64 = 0.14;
pub const ACCOMPANIMENT_VELOCITY: u8 = 80;
pub const ACCOMPANIMENT_PROGRAM: u8 = 0;
/// Lowest voiced pitch (C2) and the base of the upper octave (C3).
pub const BASS_OCTAVE: u8 = 36;
pub const CHORD_OCTAVE: u8 = 48;
pub const LATENCY_WARMUP: usize = 5;
pub const MIN_LATENCY_TRIALS: usize = 30;

#[derive(Debug, Error)]
pub enum HarmonizerError {
    #[error("no melody track could be selected")]
    NoMelodyTrack,
    #[error("invalid generation setting: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Pitches for one melody note, sorted ascending. `root_pc` is the sounding
/// root after the shift to the supplied tonic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoicedChord {
    pub pitches: Vec<u8>,
    pub root_pc: PitchClass,
    pub onset: u64,
    pub duration: u64,
}

/// Keeps bins at or above `threshold`, puts the strongest in two octaves
/// from C2 and the rest in the C3 octave, then shifts everything up by
/// `tonic`. Returns `None` when no bin qualifies. Onset and duration are
/// left at zero for the caller to fill in.
pub fn voice_chord(h: &ChromaHistogram, tonic: PitchClass, threshold: f64) -> Option<VoicedChord> {
    let values = h.values();
    let mut root: Option<usize> = None;
    for pc in 0..PITCH_CLASSES {
        if values[pc] >= threshold && root.is_none_or(|r| values[pc] > values[r]) {
            root = Some(pc);
        }
    }
    let root = root?;
    let shift = tonic.value();
    let mut pitches = vec![BASS_OCTAVE + root as u8 + shift];
    for pc in (0..PITCH_CLASSES).filter(|&pc| values[pc] >= threshold) {
        pitches.push(CHORD_OCTAVE + pc as u8 + shift);
    }
    pitches.sort_unstable();
    Some(VoicedChord { pitches, root_pc: PitchClass::from_midi(root as u8 + shift), onset: 0, duration: 0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationConfig {
    pub tonic: PitchClass,
    pub voicing_threshold: f64,
    /// Passed to melody selection for multi-track input.
    pub overlap_threshold: f64,
}

impl GenerationConfig {
    pub fn new(tonic: PitchClass) -> Self {
        GenerationConfig { tonic, voicing_threshold: DEFAULT_VOICING_THRESHOLD, overlap_threshold: DEFAULT_OVERLAP_THRESHOLD }
    }
}

#[derive(Debug, Clone)]
pub struct Generation {
    /// The melody track followed by the accompaniment track.
    pub song: MidiSong,
    /// C-aligned prediction for every melody note.
    pub predictions: Vec<ChromaHistogram>,
    /// Voicing per melody note; `None` where nothing met the threshold.
    pub chords: Vec<Option<VoicedChord>>,
    pub latencies_ms: Vec<f64>,
}

fn melody_track(song: &MidiSong, config: &GenerationConfig) -> Result<Track, HarmonizerError> {
    match song.tracks.len() {
        0 => Ok(Track::new("Melody", 0, 0)),
        1 => Ok(song.tracks[0].clone()),
        _ => select_melody_track(song, config.overlap_threshold)
            .map(|i| song.tracks[i].clone())
            .ok_or(HarmonizerError::NoMelodyTrack),
    }
}

/// Harmonizes the melody note by note, feeding each prediction back in as
/// chord context for the next.
pub fn generate(song: &MidiSong, config: &GenerationConfig, model: &LstmModel) -> Result<Generation, HarmonizerError> {
    if !(config.voicing_threshold > 0.0 && config.voicing_threshold < 1.0) {
        return Err(HarmonizerError::InvalidConfig(format!("voicing threshold {} outside (0, 1)", config.voicing_threshold)));
    }
    let melody = melody_track(song, config)?;
    let seq_len = model.config.seq_len;
    let tonic = i32::from(config.tonic.value());

    let mut melody_pcs: Vec<PitchClass> = Vec::with_capacity(melody.notes.len());
    let mut predictions: Vec<ChromaHistogram> = Vec::with_capacity(melody.notes.len());
    let mut chords = Vec::with_capacity(melody.notes.len());
    let mut latencies_ms = Vec::with_capacity(melody.notes.len());
    for note in &melody.notes {
        melody_pcs.push(PitchClass::from_midi(note.pitch).transpose(-tonic));
        let m_lo = melody_pcs.len().saturating_sub(seq_len);
        let c_lo = predictions.len().saturating_sub(seq_len);
        let start = Instant::now();
        let h = predict_next(model, &melody_pcs[m_lo..], &predictions[c_lo..])?;
        latencies_ms.push(start.elapsed().as_secs_f64() * 1e3);
        let chord = voice_chord(&h, config.tonic, config.voicing_threshold)
            .map(|c| VoicedChord { onset: note.onset, duration: note.duration, ..c });
        predictions.push(h);
        chords.push(chord);
    }

    let channel = (0..16u8).find(|&c| c != melody.channel && c != DRUM_CHANNEL).expect("free channel");
    let mut accompaniment = Track::new("Accompaniment", ACCOMPANIMENT_PROGRAM, channel);
    for chord in chords.iter().flatten() {
        for &pitch in &chord.pitches {
            accompaniment.notes.push(Note { pitch, onset: chord.onset, duration: chord.duration, velocity: ACCOMPANIMENT_VELOCITY, track_index: 0 });
        }
    }

    let mut out = MidiSong::new(song.ticks_per_quarter);
    out.tempo_us_per_quarter = song.tempo_us_per_quarter;
    out.key_events = song.key_events.clone();
    out.push_track(melody);
    out.push_track(accompaniment);
    Ok(Generation { song: out, predictions, chords, latencies_ms })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyReport {
    pub trials: usize,
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

impl fmt::Display for LatencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "trials={}", self.trials)?;
        writeln!(f, "mean_ms={:.6}", self.mean_ms)?;
        writeln!(f, "p95_ms={:.6}", self.p95_ms)?;
        write!(f, "max_ms={:.6}", self.max_ms)
    }
}

fn random_context(rng: &mut ChaCha8Rng, seq_len: usize) -> (Vec<PitchClass>, Vec<ChromaHistogram>) {
    let melody = (0..seq_len).map(|_| PitchClass::new(rng.gen_range(0..12)).expect("in range")).collect();
    let chords = (0..seq_len)
        .map(|_| {
            let pcs: Vec<u8> = (0..rng.gen_range(1..=4)).map(|_| rng.gen_range(0..12)).collect();
            ChromaHistogram::from_pitch_classes(&pcs)
        })
        .collect();
    (melody, chords)
}

/// Times `predict_next` on random full-length contexts after a few warmup calls.
pub fn measure_latency(model: &LstmModel, trials: usize, seed: u64) -> Result<LatencyReport, HarmonizerError> {
    if trials < MIN_LATENCY_TRIALS {
        return Err(HarmonizerError::InvalidConfig(format!("at least {MIN_LATENCY_TRIALS} trials required, got {trials}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seq_len = model.config.seq_len;
    for _ in 0..LATENCY_WARMUP {
        let (m, c) = random_context(&mut rng, seq_len);
        predict_next(model, &m, &c)?;
    }
    let mut times = Vec::with_capacity(trials);
    for _ in 0..trials {
        let (m, c) = random_context(&mut rng, seq_len);
        let start = Instant::now();
        predict_next(model, &m, &c)?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let mean_ms = times.iter().sum::<f64>() / trials as f64;
    times.sort_by(f64::total_cmp);
    let p95_ms = times[(trials * 95).div_ceil(100) - 1];
    let max_ms = times[trials - 1];
    Ok(LatencyReport { trials, mean_ms, p95_ms, max_ms })
}
