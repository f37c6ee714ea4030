use super::TrainingExample;
use crate::chroma::ChromaHistogram;

/// Two non-zero bins count as matching when they differ by at most this.
pub const SIMILAR_BIN_TOLERANCE: f64 = 0.1;
/// Matching non-zero bins needed for two chords to count as similar.
pub const SIMILAR_BIN_COUNT: usize = 4;

/// Identical, or at least [`SIMILAR_BIN_COUNT`] bins non-zero in both and
/// within [`SIMILAR_BIN_TOLERANCE`] of each other.
pub fn chords_similar(a: &ChromaHistogram, b: &ChromaHistogram) -> bool {
    if a.approx_eq(b) {
        return true;
    }
    let matching = a
        .values()
        .iter()
        .zip(b.values())
        .filter(|&(&x, &y)| x > 0.0 && y > 0.0 && (x - y).abs() <= SIMILAR_BIN_TOLERANCE)
        .count();
    matching >= SIMILAR_BIN_COUNT
}

/// Drops each example whose chord is similar to the most recently kept
/// chord of the same song. The first example of every song is always kept.
pub fn remove_similar_adjacent(examples: &[TrainingExample]) -> Vec<TrainingExample> {
    let mut kept: Vec<TrainingExample> = Vec::with_capacity(examples.len());
    let mut last_kept: Option<ChromaHistogram> = None;
    for example in examples {
        if example.song_start {
            last_kept = None;
        }
        match last_kept {
            Some(previous) if chords_similar(&previous, &example.chord) => {}
            _ => {
                last_kept = Some(example.chord);
                kept.push(*example);
            }
        }
    }
    kept
}
