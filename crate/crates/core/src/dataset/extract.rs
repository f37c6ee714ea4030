use super::{DatasetError, TrainingExample};
use crate::chroma::{ChromaHistogram, PitchClass, PITCH_CLASSES};
use crate::midi::{MidiSong, Note};

/// One example per melody note, in onset order. The chord is the
/// overlap-duration-weighted chroma of every note in the other pitched
/// tracks that sounds during the melody note, rotated so the tonic is C.
pub fn extract_examples(song: &MidiSong, tonic: PitchClass, melody_track: usize) -> Result<Vec<TrainingExample>, DatasetError> {
    let melody = song
        .tracks
        .get(melody_track)
        .ok_or_else(|| DatasetError::InvalidTrack(format!("track {melody_track} does not exist")))?;
    if melody.is_drum {
        return Err(DatasetError::InvalidTrack(format!("track {melody_track} is a drum track")));
    }

    let mut accompaniment: Vec<&Note> = song
        .tracks
        .iter()
        .enumerate()
        .filter(|&(i, t)| i != melody_track && !t.is_drum)
        .flat_map(|(_, t)| t.notes.iter())
        .collect();
    accompaniment.sort_by_key(|n| (n.onset, n.pitch, n.track_index));
    let longest = accompaniment.iter().map(|n| n.duration).max().unwrap_or(0);

    let shift = -i32::from(tonic.value());
    let mut examples = Vec::with_capacity(melody.notes.len());
    for (i, note) in melody.notes.iter().enumerate() {
        let (start, end) = (note.onset, note.end());
        // Nothing starting before `start - longest` can still be sounding.
        let first = accompaniment.partition_point(|n| n.onset + longest <= start);
        let last = accompaniment.partition_point(|n| n.onset < end);
        // Integer tick sums keep the histogram exact and order-independent.
        let mut ticks = [0u64; PITCH_CLASSES];
        for other in &accompaniment[first..last.max(first)] {
            let overlap = other.end().min(end).saturating_sub(other.onset.max(start));
            if overlap > 0 {
                ticks[usize::from(other.pitch % 12)] += overlap;
            }
        }
        let chord = ChromaHistogram::normalized(ticks.map(|t| t as f64)).expect("tick counts are non-negative");
        examples.push(TrainingExample {
            melody_pc: PitchClass::from_midi(note.pitch).transpose(shift),
            chord: chord.transpose(shift),
            song_start: i == 0,
        });
    }
    Ok(examples)
}
