//! `KEYC` container for trained key models.
//!
//! ```text
//! "KEYC" | version u16
//! pca:  input_dim u32 | n_components u32 | mean f64[input_dim]
//!       components f64[n_components * input_dim] | explained_variance f64[n_components]
//! svm:  c f64 | gamma f64 | degree u32 | balanced u8 | tolerance f64 | max_passes u32
//!       dim u32 | classes u32
//!       per class: present u8 [| n_sv u32 | bias f64 | coef f64[n_sv] | sv f64[n_sv * dim]]
//! ```
//!
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use super::{BinaryMachine, ClassWeight, KernelClassifier, KeyError, KeyModel, PcaModel, SvmParams, KEY_CLASSES};
use crate::binio::{ByteReader, ByteWriter};
use crate::chroma::PITCH_CLASSES;

const MAGIC: &[u8; 4] = b"KEYC";
pub const KEY_MODEL_VERSION: u16 = 1;

pub fn write_key_model(model: &KeyModel) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(MAGIC);
    w.u16(KEY_MODEL_VERSION);

    let pca = &model.pca;
    w.u32(PITCH_CLASSES as u32);
    w.u32(pca.components.len() as u32);
    w.f64s(&pca.mean);
    for axis in &pca.components {
        w.f64s(axis);
    }
    w.f64s(&pca.explained_variance);

    let clf = &model.classifier;
    let p = &clf.params;
    w.f64(p.c);
    w.f64(p.gamma);
    w.u32(p.degree);
    w.u8(u8::from(p.class_weight == ClassWeight::Balanced));
    w.f64(p.tolerance);
    w.u32(p.max_passes as u32);
    w.u32(clf.dim as u32);
    w.u32(clf.machines.len() as u32);
    for machine in &clf.machines {
        match machine {
            None => w.u8(0),
            Some(m) => {
                w.u8(1);
                w.u32(m.support_vectors.len() as u32);
                w.f64(m.bias);
                w.f64s(&m.coefficients);
                for sv in &m.support_vectors {
                    w.f64s(sv);
                }
            }
        }
    }
    w.buf
}

pub fn read_key_model(bytes: &[u8]) -> Result<KeyModel, KeyError> {
    let truncated = || KeyError::Format("truncated key model".into());
    let mut r = ByteReader::new(bytes);
    if r.take(4) != Some(MAGIC.as_slice()) {
        return Err(KeyError::Format("missing KEYC magic".into()));
    }
    let version = r.u16().ok_or_else(truncated)?;
    if version != KEY_MODEL_VERSION {
        return Err(KeyError::Format(format!("unsupported key model version {version}")));
    }

    let input_dim = r.u32().ok_or_else(truncated)? as usize;
    let n_components = r.u32().ok_or_else(truncated)? as usize;
    if input_dim != PITCH_CLASSES || n_components == 0 || n_components > PITCH_CLASSES {
        return Err(KeyError::Format(format!("bad PCA shape {n_components}x{input_dim}")));
    }
    let mean: [f64; PITCH_CLASSES] = r.f64s(PITCH_CLASSES).ok_or_else(truncated)?.try_into().expect("12 values");
    let mut components = Vec::with_capacity(n_components);
    for _ in 0..n_components {
        components.push(r.f64s(PITCH_CLASSES).ok_or_else(truncated)?.try_into().expect("12 values"));
    }
    let explained_variance = r.f64s(n_components).ok_or_else(truncated)?;
    let pca = PcaModel { mean, components, explained_variance };

    let params = SvmParams {
        c: r.f64().ok_or_else(truncated)?,
        gamma: r.f64().ok_or_else(truncated)?,
        degree: r.u32().ok_or_else(truncated)?,
        class_weight: if r.u8().ok_or_else(truncated)? == 1 { ClassWeight::Balanced } else { ClassWeight::Uniform },
        tolerance: r.f64().ok_or_else(truncated)?,
        max_passes: r.u32().ok_or_else(truncated)? as usize,
    };
    let dim = r.u32().ok_or_else(truncated)? as usize;
    let classes = r.u32().ok_or_else(truncated)? as usize;
    if dim != n_components || classes != KEY_CLASSES {
        return Err(KeyError::Format(format!("classifier shape {classes} classes x {dim} inconsistent with PCA")));
    }
    let mut machines = Vec::with_capacity(classes);
    for _ in 0..classes {
        match r.u8().ok_or_else(truncated)? {
            0 => machines.push(None),
            1 => {
                let n_sv = r.u32().ok_or_else(truncated)? as usize;
                let bias = r.f64().ok_or_else(truncated)?;
                let coefficients = r.f64s(n_sv).ok_or_else(truncated)?;
                let mut support_vectors = Vec::with_capacity(n_sv.min(r.remaining() / 8 + 1));
                for _ in 0..n_sv {
                    support_vectors.push(r.f64s(dim).ok_or_else(truncated)?);
                }
                machines.push(Some(BinaryMachine { support_vectors, coefficients, bias }));
            }
            other => return Err(KeyError::Format(format!("bad machine flag {other}"))),
        }
    }
    if r.remaining() != 0 {
        return Err(KeyError::Format(format!("{} trailing bytes", r.remaining())));
    }
    Ok(KeyModel { pca, classifier: KernelClassifier { params, dim, machines } })
}

pub fn save_key_model(model: &KeyModel, path: &Path) -> Result<(), KeyError> {
    crate::write_atomic(path, &write_key_model(model))?;
    Ok(())
}

pub fn load_key_model(path: &Path) -> Result<KeyModel, KeyError> {
    read_key_model(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chroma::ChromaHistogram;
    use crate::key::{train_key_model, KeyExample, KeyTrainConfig};
    use crate::midi::Mode;

    fn small_model() -> KeyModel {
        let scale = [0u8, 2, 4, 5, 7, 9, 11];
        let examples: Vec<_> = (0..24u8)
            .map(|i| {
                let t = i % 12;
                let mut pcs: Vec<u8> = scale.iter().map(|d| (d + t) % 12).collect();
                pcs.push(t);
                KeyExample { histogram: ChromaHistogram::from_pitch_classes(&pcs), tonic_pc: t, mode: Mode::Major }
            })
            .collect();
        train_key_model(&examples, &KeyTrainConfig { n_components: 5, ..Default::default() }).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let model = small_model();
        let bytes = write_key_model(&model);
        assert_eq!(&bytes[..4], b"KEYC");
        assert_eq!(read_key_model(&bytes).unwrap(), model);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = write_key_model(&small_model());
        assert!(read_key_model(&bytes[..bytes.len() - 1]).is_err());
        assert!(read_key_model(b"LSTM\x01\x00").is_err());
        let mut wrong_version = bytes.clone();
        wrong_version[4] = 9;
        assert!(matches!(read_key_model(&wrong_version), Err(KeyError::Format(_))));
    }
}
