use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use walkdir::WalkDir;

use super::{extract_examples, remove_similar_adjacent, select_melody_track, Dataset, DatasetError, TrainingExample, DEFAULT_OVERLAP_THRESHOLD};
use crate::chroma::PitchClass;
use crate::key::{file_histogram, KeyModel};
use crate::midi::{extract_key_meta, parse_midi, MidiSong};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildConfig {
    pub overlap_threshold: f64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig { overlap_threshold: DEFAULT_OVERLAP_THRESHOLD }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub files_seen: usize,
    pub files_skipped_unreadable: usize,
    pub files_skipped_no_key: usize,
    pub files_skipped_no_melody: usize,
    pub songs: usize,
    pub examples_before_prune: usize,
    pub examples_after_prune: usize,
}

impl CorpusStats {
    pub fn merge(&mut self, other: &CorpusStats) {
        self.files_seen += other.files_seen;
        self.files_skipped_unreadable += other.files_skipped_unreadable;
        self.files_skipped_no_key += other.files_skipped_no_key;
        self.files_skipped_no_melody += other.files_skipped_no_melody;
        self.songs += other.songs;
        self.examples_before_prune += other.examples_before_prune;
        self.examples_after_prune += other.examples_after_prune;
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "files_seen={}", self.files_seen)?;
        writeln!(f, "files_skipped_unreadable={}", self.files_skipped_unreadable)?;
        writeln!(f, "files_skipped_no_key={}", self.files_skipped_no_key)?;
        writeln!(f, "files_skipped_no_melody={}", self.files_skipped_no_melody)?;
        writeln!(f, "songs={}", self.songs)?;
        writeln!(f, "examples_before_prune={}", self.examples_before_prune)?;
        write!(f, "examples_after_prune={}", self.examples_after_prune)
    }
}

/// Every `.mid`/`.midi` file under `dir`, sorted by path.
pub fn collect_midi_files(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    if !dir.is_dir() {
        return Err(DatasetError::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("corpus directory {} not found", dir.display()),
        )));
    }
    let mut files = Vec::new();
    for entry in WalkDir::new(dir).follow_links(true) {
        let entry = entry.map_err(|e| DatasetError::Io(e.into()))?;
        let is_midi = entry
            .path()
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("mid") || e.eq_ignore_ascii_case("midi"));
        if entry.file_type().is_file() && is_midi {
            files.push(entry.into_path());
        }
    }
    files.sort();
    Ok(files)
}

/// Key, melody selection, extraction and pruning for one song.
pub fn process_song(
    song: &MidiSong,
    classifier: Option<&KeyModel>,
    config: &BuildConfig,
) -> (Option<Vec<TrainingExample>>, CorpusStats) {
    let mut stats = CorpusStats { files_seen: 1, ..Default::default() };
    let tonic = extract_key_meta(song).and_then(PitchClass::new).or_else(|| {
        let histogram = file_histogram(song);
        classifier.filter(|_| !histogram.is_zero()).map(|model| model.predict(&histogram))
    });
    let Some(tonic) = tonic else {
        stats.files_skipped_no_key = 1;
        return (None, stats);
    };
    let Some(melody) = select_melody_track(song, config.overlap_threshold) else {
        stats.files_skipped_no_melody = 1;
        return (None, stats);
    };
    let examples = extract_examples(song, tonic, melody).expect("selected melody track is valid");
    let pruned = remove_similar_adjacent(&examples);
    stats.songs = 1;
    stats.examples_before_prune = examples.len();
    stats.examples_after_prune = pruned.len();
    (Some(pruned), stats)
}

fn process_file(path: &Path, classifier: Option<&KeyModel>, config: &BuildConfig) -> Result<(Option<Vec<TrainingExample>>, CorpusStats), DatasetError> {
    let bytes = fs::read(path)?;
    match parse_midi(&bytes) {
        Ok(song) => Ok(process_song(&song, classifier, config)),
        Err(_) => Ok((None, CorpusStats { files_seen: 1, files_skipped_unreadable: 1, ..Default::default() })),
    }
}

/// Runs the whole corpus. Files are processed in parallel; song blocks are
/// appended in path order, so the output does not depend on scheduling.
pub fn build_dataset(
    corpus_dir: &Path,
    classifier: Option<&KeyModel>,
    config: &BuildConfig,
) -> Result<(Dataset, CorpusStats), DatasetError> {
    let files = collect_midi_files(corpus_dir)?;
    if files.is_empty() {
        return Err(DatasetError::EmptyCorpus(corpus_dir.to_path_buf()));
    }
    let results: Vec<_> = files.par_iter().map(|path| process_file(path, classifier, config)).collect();

    let mut dataset = Dataset::default();
    let mut stats = CorpusStats::default();
    for result in results {
        let (song, file_stats) = result?;
        stats.merge(&file_stats);
        if let Some(song) = song {
            dataset.push_song(song);
        }
    }
    Ok((dataset, stats))
}
