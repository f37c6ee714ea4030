//! Seeded synthetic material: labelled key corpora, the I-IV-V-I training
//! progression, and random songs for round-trip and invariance checks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chroma::{ChromaHistogram, PitchClass};
use crate::dataset::{Dataset, TrainingExample};
use crate::key::{file_histogram, KeyExample};
use crate::midi::{KeySignature, MidiSong, Mode, Note, Track, DRUM_CHANNEL};

const MAJOR_SCALE: [u8; 7] = [0, 2, 4, 5, 7, 9, 11];
/// Relative sampling weight of each scale degree; the tonic is emphasised.
const DEGREE_WEIGHTS: [u32; 7] = [4, 1, 2, 1, 2, 1, 1];

fn note(pitch: u8, onset: u64, duration: u64, velocity: u8) -> Note {
    Note { pitch, onset, duration, velocity, track_index: 0 }
}

/// A single-track song of diatonic notes in the major key on `tonic`.
pub fn diatonic_song(tonic: PitchClass, notes: usize, rng: &mut impl Rng) -> MidiSong {
    let total: u32 = DEGREE_WEIGHTS.iter().sum();
    let mut track = Track::new("Piano", 0, 0);
    let mut onset = 0;
    for _ in 0..notes {
        let mut pick = rng.gen_range(0..total);
        let mut degree = 0;
        while pick >= DEGREE_WEIGHTS[degree] {
            pick -= DEGREE_WEIGHTS[degree];
            degree += 1;
        }
        let octave = rng.gen_range(4..7u8);
        let pitch = 12 * octave + (tonic.value() + MAJOR_SCALE[degree]) % 12;
        let duration = 120 * rng.gen_range(1..5u64);
        track.notes.push(note(pitch, onset, duration, 90));
        onset += duration;
    }
    let mut song = MidiSong::default();
    song.key_events.push(KeySignature { tonic_pc: tonic.value(), mode: Mode::Major, tick: 0 });
    song.push_track(track);
    song
}

/// `per_key` labelled major-key examples for each of the 12 tonics.
pub fn synthetic_key_examples(per_key: usize, seed: u64) -> Vec<KeyExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(12 * per_key);
    for tonic in 0..12u8 {
        for _ in 0..per_key {
            let notes = rng.gen_range(24..64);
            let song = diatonic_song(PitchClass::new(tonic).expect("in range"), notes, &mut rng);
            out.push(KeyExample { histogram: file_histogram(&song), tonic_pc: tonic, mode: Mode::Major });
        }
    }
    out
}

/// Melody of the training progression, two notes per chord, in C.
pub const PROGRESSION_MELODY: [u8; 8] = [60, 64, 65, 69, 67, 74, 64, 60];
/// Triad pitch classes (C-relative) under each melody note: I, IV, V, I.
pub const PROGRESSION_CHORDS: [[u8; 3]; 8] = [[0, 4, 7], [0, 4, 7], [5, 9, 0], [5, 9, 0], [7, 11, 2], [7, 11, 2], [0, 4, 7], [0, 4, 7]];
/// Root of each chord in [`PROGRESSION_CHORDS`].
pub const PROGRESSION_ROOTS: [u8; 8] = [0, 0, 5, 5, 7, 7, 0, 0];

/// Target histogram for a progression step: the triad with its root doubled
/// in the bass, so the root carries half the mass.
pub fn progression_chord(step: usize) -> ChromaHistogram {
    let [a, b, c] = PROGRESSION_CHORDS[step % 8];
    ChromaHistogram::from_pitch_classes(&[PROGRESSION_ROOTS[step % 8], a, b, c])
}

/// `copies` repetitions of the progression as one continuous song.
pub fn progression_dataset(copies: usize) -> Dataset {
    let mut song = Vec::with_capacity(copies * 8);
    for _ in 0..copies {
        for (step, &m) in PROGRESSION_MELODY.iter().enumerate() {
            song.push(TrainingExample { melody_pc: PitchClass::from_midi(m), chord: progression_chord(step), song_start: false });
        }
    }
    let mut dataset = Dataset::default();
    dataset.push_song(song);
    dataset
}

/// The progression as MIDI, transposed to `tonic`: a "Melody" track and a
/// block-chord "Piano" track with the root doubled an octave lower. The key
/// signature sits at tick 1 so a C-major file is not mistaken for the default.
pub fn progression_song(copies: usize, tonic: PitchClass, with_chords: bool) -> MidiSong {
    let beat = 480;
    let shift = tonic.value();
    let mut melody = Track::new("Melody", 0, 0);
    let mut chords = Track::new("Piano", 0, 1);
    for copy in 0..copies {
        for (i, (&m, chord)) in PROGRESSION_MELODY.iter().zip(&PROGRESSION_CHORDS).enumerate() {
            let onset = (copy * 8 + i) as u64 * beat;
            melody.notes.push(note(m + shift, onset, beat, 100));
            if with_chords && i % 2 == 0 {
                chords.notes.push(note(36 + PROGRESSION_ROOTS[i] + shift, onset, 2 * beat, 80));
                for &pc in chord {
                    chords.notes.push(note(48 + pc + shift, onset, 2 * beat, 80));
                }
            }
        }
    }
    let mut song = MidiSong::default();
    song.key_events.push(KeySignature { tonic_pc: shift, mode: Mode::Major, tick: 1 });
    song.push_track(melody);
    if with_chords {
        song.push_track(chords);
    }
    song
}

/// A random multi-track song. Same-pitch notes on one channel never overlap,
/// so a write/parse round trip reproduces every note exactly.
pub fn random_song(rng: &mut impl Rng) -> MidiSong {
    let mut song = MidiSong::new(rng.gen_range(24..=960));
    song.tempo_us_per_quarter = rng.gen_range(250_000..1_500_000);
    if rng.gen_bool(0.8) {
        let mode = if rng.gen_bool(0.5) { Mode::Major } else { Mode::Minor };
        song.key_events.push(KeySignature { tonic_pc: rng.gen_range(0..12), mode, tick: rng.gen_range(0..4) });
    }
    let mut channels: Vec<u8> = (0..16).collect();
    channels.shuffle(rng);
    let n_tracks = rng.gen_range(1..=4);
    for &channel in channels.iter().take(n_tracks) {
        let mut track = Track::new(format!("Track {channel}"), rng.gen_range(0..128), channel);
        if channel == DRUM_CHANNEL {
            track.name = "Drums".into();
        }
        let lo = rng.gen_range(36..72u8);
        let mut busy_until = [0u64; 128];
        let mut onset = 0u64;
        for _ in 0..rng.gen_range(0..40) {
            onset += rng.gen_range(0..240);
            let pitch = lo + rng.gen_range(0..24);
            let start = onset.max(busy_until[usize::from(pitch)]);
            let duration = rng.gen_range(1..600);
            busy_until[usize::from(pitch)] = start + duration;
            track.notes.push(note(pitch, start, duration, rng.gen_range(1..=127)));
        }
        song.push_track(track);
    }
    song
}

/// A random song with a keyed melody line above a polyphonic accompaniment,
/// built so melody selection and extraction have work to do.
pub fn random_keyed_song(rng: &mut impl Rng) -> MidiSong {
    let beat = 240;
    let tonic = rng.gen_range(0..12u8);
    let mut song = MidiSong::default();
    song.key_events.push(KeySignature { tonic_pc: tonic, mode: Mode::Major, tick: 1 });
    let mut melody = Track::new(if rng.gen_bool(0.5) { "Lead Vocal" } else { "Flute" }, 73, 0);
    let n = rng.gen_range(8..32);
    for i in 0..n {
        let pitch = 64 + tonic + MAJOR_SCALE[rng.gen_range(0..7usize)];
        melody.notes.push(note(pitch, i * beat, beat * rng.gen_range(1..3) / 2, 100));
    }
    let mut pad = Track::new("Strings", 48, 1);
    let mut onset = 0;
    while onset < n * beat {
        let len = beat * rng.gen_range(1..5);
        for _ in 0..rng.gen_range(1..4) {
            let pitch = 40 + tonic + MAJOR_SCALE[rng.gen_range(0..7usize)] + 12 * rng.gen_range(0..2u8);
            if !pad.notes.iter().any(|p| p.pitch == pitch && p.onset == onset) {
                pad.notes.push(note(pitch, onset, len, 70));
            }
        }
        onset += len;
    }
    let mut drums = Track::new("Drums", 0, DRUM_CHANNEL);
    for i in 0..n {
        drums.notes.push(note(36 + (i % 3) as u8, i * beat, beat / 2, 100));
    }
    song.push_track(melody);
    song.push_track(pad);
    song.push_track(drums);
    song
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::select_melody_track;
    use crate::midi::extract_key_meta;

    #[test]
    fn key_examples_are_diatonic_and_labelled() {
        let examples = synthetic_key_examples(3, 1);
        assert_eq!(examples.len(), 36);
        for e in &examples {
            let off_scale: f64 = (0..12u8)
                .filter(|d| !MAJOR_SCALE.contains(&((d + 12 - e.tonic_pc) % 12)))
                .map(|d| e.histogram.values()[usize::from(d)])
                .sum();
            assert_eq!(off_scale, 0.0);
        }
        assert_eq!(examples, synthetic_key_examples(3, 1));
    }

    #[test]
    fn progression_dataset_shape() {
        let d = progression_dataset(50);
        assert_eq!(d.len(), 400);
        assert_eq!(d.song_count(), 1);
        assert_eq!(d.examples()[2].chord.argmax(), PitchClass::new(5).unwrap());
        assert_eq!(d.examples()[4].chord.argmax(), PitchClass::new(7).unwrap());
        assert_eq!(d.examples()[9].chord.values()[0], 0.5);
    }

    #[test]
    fn progression_song_keeps_its_key_and_melody() {
        let song = progression_song(2, PitchClass::C, true);
        assert_eq!(extract_key_meta(&song), Some(0));
        assert_eq!(select_melody_track(&song, 0.2), Some(0));
        assert_eq!(song.tracks[1].notes.len(), 2 * 4 * 4);
    }

    #[test]
    fn random_songs_respect_the_round_trip_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let song = random_song(&mut rng);
            song.validate().unwrap();
            for t in &song.tracks {
                for (i, a) in t.notes.iter().enumerate() {
                    for b in &t.notes[i + 1..] {
                        assert!(a.pitch != b.pitch || a.end() <= b.onset || b.end() <= a.onset);
                    }
                }
            }
        }
    }
}
