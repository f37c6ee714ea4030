//! Melody harmonization with chroma-histogram chords.
//!
//! The pipeline turns a MIDI corpus into per-melody-note chord histograms
//! aligned to C (`dataset`), trains a stacked LSTM to predict the next
//! histogram from melody and chord context (`lstm`), and voices predicted
//! histograms into an accompaniment track for a new melody (`harmonizer`).
//! Files without key metadata can be labelled by a PCA + RBF classifier
//! (`key`).
//!
//! ```no_run
//! use chromachord::{harmonizer, lstm, midi};
//!
//! let model = lstm::load_checkpoint("model.ckpt".as_ref())?;
//! let melody = midi::parse_midi(&std::fs::read("melody.mid")?)?;
//! let config = harmonizer::GenerationConfig::new(chromachord::chroma::PitchClass::new(7).unwrap());
//! let output = harmonizer::generate(&melody, &config, &model)?;
//! std::fs::write("out.mid", midi::write_midi(&output.song)?)?;
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

mod binio;
pub mod chroma;
pub mod cli;
pub mod dataset;
pub mod harmonizer;
pub mod key;
pub mod lstm;
pub mod midi;
pub mod synth;

use std::io::{self, Write};
use std::path::Path;

/// Writes through a temporary file in the destination directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
