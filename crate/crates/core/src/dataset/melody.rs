use crate::chroma::overlap_proportion;
use crate::midi::MidiSong;

/// Track-name fragments that mark a melody part.
pub const MELODY_KEYWORDS: [&str; 5] = ["voice", "vocal", "vox", "sing", "melody"];
pub const DEFAULT_OVERLAP_THRESHOLD: f64 = 0.2;
/// Overlap-based candidates need at least this many notes.
pub const MIN_CANDIDATE_NOTES: usize = 8;

/// Picks the melody track: keyword-named tracks first, otherwise tracks
/// that are nearly monophonic (`overlap_proportion < overlap_threshold`).
/// The candidate with the highest mean pitch wins, lowest index on ties.
pub fn select_melody_track(song: &MidiSong, overlap_threshold: f64) -> Option<usize> {
    let pitched = || song.tracks.iter().enumerate().filter(|(_, t)| !t.is_drum && !t.notes.is_empty());

    let mut candidates: Vec<usize> = pitched()
        .filter(|(_, t)| {
            let name = t.name.to_lowercase();
            MELODY_KEYWORDS.iter().any(|k| name.contains(k))
        })
        .map(|(i, _)| i)
        .collect();
    if candidates.is_empty() {
        candidates = pitched()
            .filter(|(_, t)| t.notes.len() >= MIN_CANDIDATE_NOTES && overlap_proportion(&t.notes) < overlap_threshold)
            .map(|(i, _)| i)
            .collect();
    }

    let mut best: Option<(usize, f64)> = None;
    for i in candidates {
        let mean = song.tracks[i].mean_pitch().expect("candidates have notes");
        if best.is_none_or(|(_, m)| mean > m) {
            best = Some((i, mean));
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::midi::{Note, Track};

    fn line(name: &str, channel: u8, pitches: &[u8], step: u64, len: u64) -> Track {
        let mut t = Track::new(name, 0, channel);
        for (i, &p) in pitches.iter().enumerate() {
            t.notes.push(Note { pitch: p, onset: i as u64 * step, duration: len, velocity: 90, track_index: 0 });
        }
        t
    }

    #[test]
    fn keyword_track_wins() {
        let mut song = MidiSong::default();
        song.push_track(line("Piano", 0, &[80; 10], 100, 100));
        song.push_track(line("Lead Vocal", 1, &[60; 10], 100, 100));
        song.push_track(line("Bass", 2, &[40; 10], 100, 100));
        assert_eq!(select_melody_track(&song, 0.2), Some(1));
    }

    #[test]
    fn keyword_matching_ignores_case_and_drums() {
        let mut song = MidiSong::default();
        let mut drums = line("MELODY drums", 9, &[38; 10], 100, 100);
        drums.is_drum = true;
        song.push_track(drums);
        song.push_track(line("Synth", 0, &[70; 10], 100, 100));
        song.push_track(line("VOX", 1, &[50; 3], 100, 100));
        assert_eq!(select_melody_track(&song, 0.2), Some(2));
    }

    #[test]
    fn highest_mean_pitch_among_monophonic_tracks() {
        let mut song = MidiSong::default();
        song.push_track(line("Bass", 0, &[45; 12], 100, 100));
        song.push_track(line("Lead", 1, &[70; 12], 100, 100));
        assert_eq!(select_melody_track(&song, 0.2), Some(1));
    }

    #[test]
    fn polyphonic_and_short_tracks_are_not_candidates() {
        let mut song = MidiSong::default();
        // Every note overlaps its neighbour by half.
        song.push_track(line("Pad", 0, &[72; 12], 100, 200));
        song.push_track(line("Fill", 1, &[84; 5], 100, 100));
        assert_eq!(select_melody_track(&song, 0.2), None);
        assert_eq!(select_melody_track(&song, 1.1), Some(0));
    }
}
