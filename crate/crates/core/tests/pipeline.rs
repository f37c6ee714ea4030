//! Library-level run from a MIDI corpus on disk to a harmonized file.

use std::fs;

use chromachord::chroma::PitchClass;
use chromachord::dataset::{build_dataset, load_dataset, save_dataset, BuildConfig};
use chromachord::harmonizer::{generate, GenerationConfig};
use chromachord::key::{train_key_model, KeyTrainConfig};
use chromachord::lstm::{load_checkpoint, save_checkpoint, train, ModelConfig};
use chromachord::midi::{parse_midi, write_midi, MidiSong};
use chromachord::synth::{progression_song, synthetic_key_examples, PROGRESSION_MELODY};

#[test]
fn corpus_to_harmonized_midi() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    fs::create_dir_all(corpus.join("nested")).unwrap();
    for tonic in [0, 2, 7] {
        let song = progression_song(4, PitchClass::new(tonic).unwrap(), true);
        fs::write(corpus.join(format!("prog{tonic}.mid")), write_midi(&song).unwrap()).unwrap();
    }
    // No key signature: only the classifier can place this one.
    let mut unkeyed = progression_song(4, PitchClass::new(5).unwrap(), true);
    unkeyed.key_events.clear();
    fs::write(corpus.join("nested/unkeyed.mid"), write_midi(&unkeyed).unwrap()).unwrap();
    fs::write(corpus.join("broken.mid"), b"MThd garbage").unwrap();
    fs::write(corpus.join("notes.txt"), b"not midi").unwrap();

    let config = BuildConfig::default();
    let (without, stats) = build_dataset(&corpus, None, &config).unwrap();
    assert_eq!(stats.files_seen, 5);
    assert_eq!(stats.files_skipped_unreadable, 1);
    assert_eq!(stats.files_skipped_no_key, 1);
    assert_eq!(without.song_count(), 3);

    let key_model = train_key_model(&synthetic_key_examples(30, 1), &KeyTrainConfig::default()).unwrap();
    let (dataset, stats) = build_dataset(&corpus, Some(&key_model), &config).unwrap();
    assert_eq!(stats.songs, 4);
    assert_eq!(stats.files_skipped_no_key, 0);
    // Every song is aligned to C, so all four blocks agree.
    let songs: Vec<_> = dataset.songs().collect();
    assert!(songs.windows(2).all(|w| w[0] == w[1]));
    assert!(stats.examples_after_prune < stats.examples_before_prune);

    let path = dir.path().join("data.chrd");
    save_dataset(&dataset, &path).unwrap();
    let dataset = load_dataset(&path).unwrap();

    let model_config = ModelConfig { hidden_dim: 16, seq_len: 4, ..Default::default() };
    let (model, history) = train(&dataset, &model_config, 3).unwrap();
    assert_eq!(history.len(), 3);
    let ckpt = dir.path().join("model.ckpt");
    save_checkpoint(&model, &ckpt).unwrap();
    let model = load_checkpoint(&ckpt).unwrap();
    assert_eq!(model.trained_epochs, 3);

    let tonic = PitchClass::new(7).unwrap();
    let melody = progression_song(2, tonic, false);
    let mut gen_config = GenerationConfig::new(tonic);
    gen_config.voicing_threshold = 0.05;
    let out = generate(&melody, &gen_config, &model).unwrap();
    let song: MidiSong = parse_midi(&write_midi(&out.song).unwrap()).unwrap();
    assert_eq!(song.tracks.len(), 2);
    let melody_pitches: Vec<u8> = song.tracks[0].notes.iter().map(|n| n.pitch).collect();
    let expected: Vec<u8> = PROGRESSION_MELODY.iter().cycle().take(16).map(|p| p + 7).collect();
    assert_eq!(melody_pitches, expected);
    assert_ne!(song.tracks[1].channel, song.tracks[0].channel);
    for note in &song.tracks[1].notes {
        assert!((36 + 7..=59 + 7).contains(&note.pitch), "pitch {}", note.pitch);
        assert_eq!(note.velocity, 80);
    }
    assert_eq!(out.predictions.len(), 16);
}
