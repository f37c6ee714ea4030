//! `CHRD` dataset files.
//!
//! ```text
//! "CHRD" | version u16 | song blocks until end of file
//! block:  length u32 | length x (melody_pc u8 | chord f32[12])
//! ```
//!
//! Little-endian throughout. Chords are widened to f64 and re-normalized on
//! read, so loaded histograms sum to one at double precision.

use std::fs;
use std::path::Path;

use super::{Dataset, DatasetError, TrainingExample};
use crate::binio::{ByteReader, ByteWriter};
use crate::chroma::{ChromaHistogram, PitchClass, PITCH_CLASSES};

const MAGIC: &[u8; 4] = b"CHRD";
pub const DATASET_VERSION: u16 = 1;

pub fn write_dataset(dataset: &Dataset) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(MAGIC);
    w.u16(DATASET_VERSION);
    for song in dataset.songs() {
        w.u32(song.len() as u32);
        for example in song {
            w.u8(example.melody_pc.value());
            for &v in example.chord.values() {
                w.f32(v as f32);
            }
        }
    }
    w.buf
}

pub fn read_dataset(bytes: &[u8]) -> Result<Dataset, DatasetError> {
    let truncated = || DatasetError::Format("truncated dataset".into());
    let mut r = ByteReader::new(bytes);
    if r.take(4) != Some(MAGIC.as_slice()) {
        return Err(DatasetError::Format("missing CHRD magic".into()));
    }
    let version = r.u16().ok_or_else(truncated)?;
    if version != DATASET_VERSION {
        return Err(DatasetError::Format(format!("unsupported dataset version {version}")));
    }
    let mut dataset = Dataset::default();
    while r.remaining() > 0 {
        let len = r.u32().ok_or_else(truncated)? as usize;
        if len == 0 {
            return Err(DatasetError::Format("empty song block".into()));
        }
        let mut song = Vec::with_capacity(len.min(r.remaining() / 49 + 1));
        for i in 0..len {
            let pc = r.u8().ok_or_else(truncated)?;
            let melody_pc = PitchClass::new(pc).ok_or_else(|| DatasetError::Format(format!("pitch class {pc}")))?;
            let mut raw = [0.0; PITCH_CLASSES];
            for v in &mut raw {
                *v = f64::from(r.f32().ok_or_else(truncated)?);
            }
            let chord = ChromaHistogram::normalized(raw).map_err(|e| DatasetError::Format(e.to_string()))?;
            song.push(TrainingExample { melody_pc, chord, song_start: i == 0 });
        }
        dataset.push_song(song);
    }
    Ok(dataset)
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<(), DatasetError> {
    crate::write_atomic(path, &write_dataset(dataset))?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    read_dataset(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dataset {
        let mut d = Dataset::default();
        let chords = [
            ChromaHistogram::from_pitch_classes(&[0, 4, 7]),
            ChromaHistogram::normalized([0.1, 0.0, 0.2, 0.0, 0.0, 0.3, 0.0, 0.0, 0.0, 0.4, 0.0, 0.0]).unwrap(),
            ChromaHistogram::zero(),
        ];
        for len in [3usize, 1, 2] {
            d.push_song(
                (0..len)
                    .map(|i| TrainingExample { melody_pc: PitchClass::new(i as u8 * 5 % 12).unwrap(), chord: chords[i % 3], song_start: false })
                    .collect(),
            );
        }
        d
    }

    #[test]
    fn layout_matches_the_documented_format() {
        let bytes = write_dataset(&sample());
        assert_eq!(&bytes[..4], b"CHRD");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 3);
        assert_eq!(bytes.len(), 6 + 3 * 4 + 6 * 49);
    }

    #[test]
    fn round_trip_preserves_structure_within_f32_precision() {
        let original = sample();
        let loaded = read_dataset(&write_dataset(&original)).unwrap();
        assert_eq!(loaded.len(), original.len());
        assert_eq!(loaded.song_count(), 3);
        for (a, b) in original.examples().iter().zip(loaded.examples()) {
            assert_eq!(a.melody_pc, b.melody_pc);
            assert_eq!(a.song_start, b.song_start);
            for (x, y) in a.chord.values().iter().zip(b.chord.values()) {
                assert!((x - y).abs() < 1e-7);
            }
            assert!(b.chord.is_zero() || (b.chord.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = write_dataset(&sample());
        assert!(read_dataset(&bytes[..bytes.len() - 2]).is_err());
        assert!(read_dataset(b"CHRX\x01\x00").is_err());
        let mut bad_pc = bytes.clone();
        bad_pc[10] = 12;
        assert!(read_dataset(&bad_pc).is_err());
    }
}
