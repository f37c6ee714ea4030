//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line with
//! the measured value next to its bound, then asserts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use chromachord::chroma::{overlap_proportion, ChromaHistogram, PitchClass};
use chromachord::dataset::{process_song, remove_similar_adjacent, BuildConfig, TrainingExample};
use chromachord::harmonizer::{generate, voice_chord, GenerationConfig};
use chromachord::key::{split_holdout, train_key_model, KeyTrainConfig};
use chromachord::lstm::{backward, dropout_masks, forward_with_masks, loss_msle, save_checkpoint, train, LstmModel, ModelConfig, ModelInput};
use chromachord::midi::{parse_midi, write_midi, MidiSong, Note};
use chromachord::synth::{progression_dataset, progression_song, random_keyed_song, random_song, synthetic_key_examples, PROGRESSION_ROOTS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, name: &str, pass: bool, detail: String) {
    println!("criterion {n}: {} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness

const FD_STEP: f64 = 1e-5;
const GRAD_REL_TOL: f64 = 1e-4;
/// Denominator floor for the relative error, so parameters whose gradient
/// is essentially zero are judged on absolute error instead.
const GRAD_REL_FLOOR: f64 = 1e-6;

#[test]
fn criterion_01_gradients_match_finite_differences() {
    let config = ModelConfig { hidden_dim: 8, seq_len: 4, seed: 17, ..Default::default() };
    let model = LstmModel::new(config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let rows = (0..4)
        .map(|t| {
            let mut row = vec![f64::from(rng.gen_range(0..12u8)) / 11.0];
            let pcs: Vec<u8> = (0..3).map(|_| rng.gen_range(0..12)).collect();
            row.extend_from_slice(ChromaHistogram::from_pitch_classes(&pcs).values());
            if t == 0 {
                row[1..].iter_mut().for_each(|v| *v = 0.0);
            }
            row
        })
        .collect();
    let x = ModelInput { rows };
    let target = *ChromaHistogram::from_pitch_classes(&[0, 0, 4, 7]).values();
    let masks = Some(dropout_masks(&config, 31));

    let (_, cache) = forward_with_masks(&model, &x, masks.clone()).unwrap();
    let analytic = backward(&model, &cache, &target).unwrap();
    let loss_at = |m: &LstmModel| loss_msle(&forward_with_masks(m, &x, masks.clone()).unwrap().0, &target).unwrap();

    let mut worst = (0.0f64, 0usize);
    let mut probe = model.clone();
    for (i, &grad) in analytic.iter().enumerate() {
        let original = probe.params()[i];
        probe.params_mut()[i] = original + FD_STEP;
        let plus = loss_at(&probe);
        probe.params_mut()[i] = original - FD_STEP;
        let minus = loss_at(&probe);
        probe.params_mut()[i] = original;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let rel = (grad - numeric).abs() / grad.abs().max(numeric.abs()).max(GRAD_REL_FLOOR);
        if rel > worst.0 {
            worst = (rel, i);
        }
    }
    report(
        1,
        "gradient check",
        worst.0 <= GRAD_REL_TOL,
        format!("{} parameters, max relative error {:.3e} at #{} (bound {GRAD_REL_TOL:e})", model.parameter_count(), worst.0, worst.1),
    );
}

// ---------------------------------------------------------------------------
// 2. Overfit oracle

const OVERFIT_COPIES: usize = 50;
const OVERFIT_EPOCHS: u32 = 500;
const OVERFIT_LOSS_BOUND: f64 = 0.01;
const OVERFIT_ROOT_BOUND: f64 = 0.75;

#[test]
fn criterion_02_overfit_progression() {
    let dataset = progression_dataset(OVERFIT_COPIES);
    // Smaller batches and a larger step than the production defaults; see
    // the README section on the acceptance suite.
    let config = ModelConfig { hidden_dim: 32, learning_rate: 1e-3, batch_size: 4, seed: 0, ..Default::default() };
    let (model, history) = train(&dataset, &config, OVERFIT_EPOCHS).unwrap();
    let final_loss = *history.last().unwrap();

    let melody = progression_song(OVERFIT_COPIES, PitchClass::C, false);
    let out = generate(&melody, &GenerationConfig::new(PitchClass::C), &model).unwrap();
    let hits = out.predictions.iter().enumerate().filter(|(i, h)| h.argmax().value() == PROGRESSION_ROOTS[i % 8]).count();
    let rate = hits as f64 / out.predictions.len() as f64;
    report(
        2,
        "overfit I-IV-V-I",
        final_loss < OVERFIT_LOSS_BOUND && rate >= OVERFIT_ROOT_BOUND,
        format!(
            "final MSLE {final_loss:.3e} (bound < {OVERFIT_LOSS_BOUND}), root match {hits}/{} = {rate:.3} (bound >= {OVERFIT_ROOT_BOUND})",
            out.predictions.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// 3. Key classifier

const KEY_PER_CLASS: usize = 100;
const KEY_ACCURACY_BOUND: f64 = 0.80;

#[test]
fn criterion_03_key_classifier_held_out_accuracy() {
    let seed = 2024;
    let examples = synthetic_key_examples(KEY_PER_CLASS, seed);
    let (train_set, held_out) = split_holdout(&examples, 0.2, seed);
    let model = train_key_model(&train_set, &KeyTrainConfig { seed, ..Default::default() }).unwrap();
    let accuracy = model.accuracy(&held_out);
    report(
        3,
        "key classifier",
        accuracy >= KEY_ACCURACY_BOUND,
        format!("held-out accuracy {accuracy:.4} on {} files (bound >= {KEY_ACCURACY_BOUND})", held_out.len()),
    );
}

// ---------------------------------------------------------------------------
// 4. Latency

const LATENCY_BOUND_MS: f64 = 80.0;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chromachord"))
}

#[test]
fn criterion_04_bench_latency() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("desk.ckpt");
    save_checkpoint(&LstmModel::new(ModelConfig::default()).unwrap(), &ckpt).unwrap();
    let output = binary().args(["bench", "--model"]).arg(&ckpt).args(["--trials", "200"]).output().unwrap();
    let stdout = String::from_utf8_lossy(&output.stdout);
    let mean: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("mean_ms="))
        .and_then(|v| v.parse().ok())
        .unwrap_or(f64::INFINITY);
    report(
        4,
        "bench latency",
        output.status.code() == Some(0) && mean < LATENCY_BOUND_MS,
        format!("exit {:?}, mean {mean:.4} ms (bound < {LATENCY_BOUND_MS} ms)", output.status.code()),
    );
}

// ---------------------------------------------------------------------------
// 5. Transposition equivariance

#[test]
fn criterion_05_extraction_is_transposition_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let config = BuildConfig::default();
    let mut mismatches = 0;
    let mut extracted = 0;
    for _ in 0..100 {
        let song = random_keyed_song(&mut rng);
        let k = rng.gen_range(-12..=12);
        let shifted = song.transposed(k).expect("synthetic pitches leave headroom");
        let (a, _) = process_song(&song, None, &config);
        let (b, _) = process_song(&shifted, None, &config);
        extracted += usize::from(a.is_some());
        let same = match (&a, &b) {
            (Some(x), Some(y)) => {
                x.len() == y.len()
                    && x.iter().zip(y).all(|(p, q)| {
                        p.melody_pc == q.melody_pc
                            && p.song_start == q.song_start
                            && p.chord.values().iter().zip(q.chord.values()).all(|(u, v)| u.to_bits() == v.to_bits())
                    })
            }
            (None, None) => true,
            _ => false,
        };
        mismatches += usize::from(!same);
    }
    report(5, "transposition equivariance", mismatches == 0 && extracted > 0, format!("{mismatches} of 100 songs differ ({extracted} extracted), exact comparison"));
}

// ---------------------------------------------------------------------------
// 6. Pruning oracle

/// Straight reading of the rule: walk each song, compare with the last chord
/// kept in it, drop when identical (1e-9) or when four or more bins are
/// non-zero in both and no further apart than 0.1.
fn brute_force_prune(examples: &[TrainingExample]) -> Vec<TrainingExample> {
    let mut out: Vec<TrainingExample> = Vec::new();
    let mut previous: Option<ChromaHistogram> = None;
    for e in examples {
        if e.song_start {
            previous = None;
        }
        let drop = previous.is_some_and(|p| {
            let (a, b) = (p.values(), e.chord.values());
            let identical = (0..12).all(|i| (a[i] - b[i]).abs() <= 1e-9);
            let close = (0..12).filter(|&i| a[i] != 0.0 && b[i] != 0.0 && (a[i] - b[i]).abs() <= 0.1).count();
            identical || close >= 4
        });
        if !drop {
            previous = Some(e.chord);
            out.push(*e);
        }
    }
    out
}

fn random_sequence(rng: &mut ChaCha8Rng) -> Vec<TrainingExample> {
    let len = rng.gen_range(0..40);
    let mut seq: Vec<TrainingExample> = Vec::with_capacity(len);
    for i in 0..len {
        let chord = match (rng.gen_range(0..5), seq.last()) {
            (0, Some(prev)) => prev.chord,
            (1, Some(prev)) => {
                let mut raw = *prev.chord.values();
                raw.iter_mut().for_each(|v| {
                    if *v > 0.0 {
                        *v += rng.gen_range(0.0..0.15);
                    }
                });
                ChromaHistogram::normalized(raw).unwrap()
            }
            (2, _) => ChromaHistogram::zero(),
            _ => {
                let pcs: Vec<u8> = (0..rng.gen_range(1..7)).map(|_| rng.gen_range(0..12)).collect();
                ChromaHistogram::from_pitch_classes(&pcs)
            }
        };
        seq.push(TrainingExample {
            melody_pc: PitchClass::new(rng.gen_range(0..12)).unwrap(),
            chord,
            song_start: i == 0 || rng.gen_bool(0.1),
        });
    }
    seq
}

#[test]
fn criterion_06_pruning_matches_brute_force_and_is_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut mismatches = 0;
    let mut non_idempotent = 0;
    let mut removed = 0;
    for _ in 0..1000 {
        let seq = random_sequence(&mut rng);
        let fast = remove_similar_adjacent(&seq);
        mismatches += usize::from(fast != brute_force_prune(&seq));
        non_idempotent += usize::from(remove_similar_adjacent(&fast) != fast);
        removed += seq.len() - fast.len();
    }
    report(
        6,
        "pruning oracle",
        mismatches == 0 && non_idempotent == 0 && removed > 0,
        format!("{mismatches} mismatches, {non_idempotent} non-idempotent of 1000 sequences ({removed} examples removed), exact"),
    );
}

// ---------------------------------------------------------------------------
// 7. Overlap anchors

fn note(pitch: u8, onset: u64, duration: u64) -> Note {
    Note { pitch, onset, duration, velocity: 90, track_index: 0 }
}

#[test]
fn criterion_07_overlap_anchors() {
    let mono: Vec<Note> = (0..8).map(|i| note(60 + i as u8, i * 100, 100)).collect();
    let triads: Vec<Note> = (0..4).flat_map(|i| [0, 4, 7].map(|d| note(48 + d, i * 200, 150))).collect();
    let pair = [note(60, 0, 2), note(64, 1, 2)];
    let (m, t, p) = (overlap_proportion(&mono), overlap_proportion(&triads), overlap_proportion(&pair));
    report(7, "overlap anchors", m == 0.0 && t == 1.0 && p == 1.0 / 3.0, format!("monophonic {m}, block triads {t}, [0,2)+[1,3) {p} (expected 0, 1, 1/3 exactly)"));
}

// ---------------------------------------------------------------------------
// 8. Voicing

#[test]
fn criterion_08_voicing() {
    let mut raw = [0.0; 12];
    raw[0] = 0.5;
    raw[4] = 0.25;
    raw[7] = 0.25;
    let tonic_chord = voice_chord(&ChromaHistogram::normalized(raw).unwrap(), PitchClass::C, 0.14).map(|c| c.pitches);
    let uniform = voice_chord(&ChromaHistogram::normalized([1.0; 12]).unwrap(), PitchClass::C, 0.14);

    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut out_of_range = 0;
    for _ in 0..2000 {
        let mut raw = [0.0; 12];
        for _ in 0..rng.gen_range(1..6) {
            raw[rng.gen_range(0..12)] += rng.gen_range(0.0..1.0);
        }
        let tonic = rng.gen_range(0..12u8);
        if let Some(c) = voice_chord(&ChromaHistogram::normalized(raw).unwrap(), PitchClass::new(tonic).unwrap(), 0.14) {
            out_of_range += c.pitches.iter().filter(|&&p| !(36..=59 + tonic).contains(&p)).count();
        }
    }
    report(
        8,
        "voicing",
        tonic_chord.as_deref() == Some(&[36, 48, 52, 55][..]) && uniform.is_none() && out_of_range == 0,
        format!("tonic triad {tonic_chord:?} (expected [36, 48, 52, 55]), uniform {uniform:?}, {out_of_range} pitches out of range"),
    );
}

// ---------------------------------------------------------------------------
// 9. MIDI round trip

/// (channel, drum flag, notes as (pitch, onset, duration, velocity)) per track.
type TrackNotes = Vec<(u8, bool, Vec<(u8, u64, u64, u8)>)>;

fn notes_by_track(song: &MidiSong) -> TrackNotes {
    song.tracks
        .iter()
        .map(|t| (t.channel, t.is_drum, t.notes.iter().map(|n| (n.pitch, n.onset, n.duration, n.velocity)).collect()))
        .collect()
}

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

#[test]
fn criterion_09_midi_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut failures = Vec::new();
    for i in 0..200 {
        let song = random_song(&mut rng);
        let back = parse_midi(&write_midi(&song).unwrap()).unwrap();
        if notes_by_track(&back) != notes_by_track(&song) || back.key_events != song.key_events || back.ticks_per_quarter != song.ticks_per_quarter {
            failures.push(format!("random #{i}"));
        }
    }
    let mut fixtures = 0;
    for entry in fs::read_dir(fixtures_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "mid") {
            fixtures += 1;
            let song = parse_midi(&fs::read(&path).unwrap()).unwrap();
            let back = parse_midi(&write_midi(&song).unwrap()).unwrap();
            if notes_by_track(&back) != notes_by_track(&song) {
                failures.push(path.display().to_string());
            }
        }
    }
    report(9, "MIDI round trip", failures.is_empty() && fixtures >= 2, format!("200 random songs + {fixtures} fixtures, failures: {failures:?}"));
}

// ---------------------------------------------------------------------------
// 10. Determinism

fn run_ok(args: &[&std::ffi::OsStr]) -> Vec<u8> {
    let output = binary().args(args).output().unwrap();
    assert!(output.status.success(), "{:?} failed: {}", args, String::from_utf8_lossy(&output.stderr));
    output.stdout
}

fn pipeline(work: &Path, corpus: &Path, melody: &Path) -> Vec<(String, Vec<u8>)> {
    let os = |s: &str| std::ffi::OsString::from(s);
    let p = |name: &str| work.join(name).into_os_string();
    let mut artifacts = Vec::new();

    let stdout = run_ok(&[&os("build-dataset"), &os("--corpus"), corpus.as_os_str(), &os("--out"), &p("data.chrd")]);
    artifacts.push(("build-dataset stdout".into(), String::from_utf8_lossy(&stdout).replace(&*work.to_string_lossy(), "").into_bytes()));
    let stdout = run_ok(&[&os("train-key"), &os("--synthetic"), &os("--per-key"), &os("20"), &os("--seed"), &os("5"), &os("--out"), &p("key.keyc")]);
    artifacts.push(("train-key stdout".into(), String::from_utf8_lossy(&stdout).replace(&*work.to_string_lossy(), "").into_bytes()));
    run_ok(&[
        &os("train"),
        &os("--dataset"),
        &p("data.chrd"),
        &os("--epochs"),
        &os("3"),
        &os("--hidden-dim"),
        &os("16"),
        &os("--seed"),
        &os("9"),
        &os("--out"),
        &p("model.ckpt"),
    ]);
    run_ok(&[&os("generate"), &os("--melody"), melody.as_os_str(), &os("--tonic"), &os("G"), &os("--model"), &p("model.ckpt"), &os("--out"), &p("out.mid")]);
    for name in ["data.chrd", "key.keyc", "model.ckpt", "model.log", "out.mid"] {
        artifacts.push((name.to_string(), fs::read(work.join(name)).unwrap()));
    }
    artifacts
}

#[test]
fn criterion_10_cli_pipeline_is_reproducible() {
    let root = tempfile::tempdir().unwrap();
    let corpus = root.path().join("corpus");
    fs::create_dir(&corpus).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for i in 0..4 {
        let song = progression_song(3, PitchClass::new(7 * i % 12).unwrap(), true);
        fs::write(corpus.join(format!("prog{i}.mid")), write_midi(&song).unwrap()).unwrap();
        fs::write(corpus.join(format!("rand{i}.mid")), write_midi(&random_keyed_song(&mut rng)).unwrap()).unwrap();
    }
    let melody = root.path().join("melody.mid");
    fs::write(&melody, write_midi(&progression_song(2, PitchClass::new(7).unwrap(), false)).unwrap()).unwrap();

    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|name| {
            let work = root.path().join(name);
            fs::create_dir(&work).unwrap();
            pipeline(&work, &corpus, &melody)
        })
        .collect();
    let differing: Vec<&str> = runs[0].iter().zip(&runs[1]).filter(|(a, b)| a.1 != b.1).map(|(a, _)| a.0.as_str()).collect();
    let names: Vec<&str> = runs[0].iter().map(|a| a.0.as_str()).collect();
    report(10, "determinism", differing.is_empty(), format!("compared {names:?} across two runs, differing: {differing:?}"));
}
