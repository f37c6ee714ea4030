//! Corpus-to-dataset conversion: melody selection, per-note chord
//! histograms aligned to C, similar-chord pruning and the `CHRD` file format.

mod build;
mod extract;
mod format;
mod melody;
mod prune;

use std::path::PathBuf;

use thiserror::Error;

use crate::chroma::{ChromaHistogram, PitchClass};

pub use build::{build_dataset, collect_midi_files, process_song, BuildConfig, CorpusStats};
pub use extract::extract_examples;
pub use format::{load_dataset, read_dataset, save_dataset, write_dataset, DATASET_VERSION};
pub use melody::{select_melody_track, DEFAULT_OVERLAP_THRESHOLD, MELODY_KEYWORDS, MIN_CANDIDATE_NOTES};
pub use prune::{chords_similar, remove_similar_adjacent, SIMILAR_BIN_COUNT, SIMILAR_BIN_TOLERANCE};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid melody track: {0}")]
    InvalidTrack(String),
    #[error("no MIDI files found under {}", .0.display())]
    EmptyCorpus(PathBuf),
    #[error("dataset file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A melody note (as a C-relative pitch class) and the chord sounding with it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingExample {
    pub melody_pc: PitchClass,
    pub chord: ChromaHistogram,
    /// First example of its source song.
    pub song_start: bool,
}

/// Songs stored back to back, each a contiguous run starting with a
/// `song_start` example.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    examples: Vec<TrainingExample>,
}

impl Dataset {
    /// Appends one song; `song_start` flags are rewritten. Empty songs are ignored.
    pub fn push_song(&mut self, mut song: Vec<TrainingExample>) {
        for (i, example) in song.iter_mut().enumerate() {
            example.song_start = i == 0;
        }
        self.examples.append(&mut song);
    }

    pub fn examples(&self) -> &[TrainingExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn songs(&self) -> impl Iterator<Item = &[TrainingExample]> {
        let mut starts: Vec<usize> = self.examples.iter().enumerate().filter(|(_, e)| e.song_start).map(|(i, _)| i).collect();
        if starts.first() != Some(&0) && !self.examples.is_empty() {
            starts.insert(0, 0);
        }
        starts.push(self.examples.len());
        let bounds: Vec<(usize, usize)> = starts.windows(2).map(|w| (w[0], w[1])).collect();
        bounds.into_iter().map(move |(a, b)| &self.examples[a..b])
    }

    pub fn song_count(&self) -> usize {
        self.songs().count()
    }
}
