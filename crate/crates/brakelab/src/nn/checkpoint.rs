//! Parameter checkpoints: a JSON shape manifest line followed by the flat
//! little-endian f64 parameter data.

use super::layers::ParamStore;
use super::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    params: Vec<ParamShape>,
}

#[derive(Serialize, Deserialize)]
struct ParamShape {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug)]
pub enum CheckpointError {
    Io(std::io::Error),
    Manifest { path: PathBuf, message: String },
    Version { path: PathBuf, found: u32 },
    SizeMismatch { path: PathBuf, expected_bytes: usize, found_bytes: usize },
    NonFinite { path: PathBuf, param: String },
}

impl std::fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CheckpointError::Io(e) => write!(f, "checkpoint io error: {e}"),
            CheckpointError::Manifest { path, message } => {
                write!(f, "{}: bad checkpoint manifest: {message}", path.display())
            }
            CheckpointError::Version { path, found } => {
                write!(f, "{}: unsupported checkpoint version {found}", path.display())
            }
            CheckpointError::SizeMismatch { path, expected_bytes, found_bytes } => write!(
                f,
                "{}: parameter data size mismatch: manifest expects {expected_bytes} bytes, file has {found_bytes}",
                path.display()
            ),
            CheckpointError::NonFinite { path, param } => {
                write!(f, "{}: non-finite value in parameter {param}", path.display())
            }
        }
    }
}

impl std::error::Error for CheckpointError {}

impl From<std::io::Error> for CheckpointError {
    fn from(e: std::io::Error) -> Self {
        CheckpointError::Io(e)
    }
}

/// Writes the store as manifest line + raw f64 data, atomically.
pub fn save_params(store: &ParamStore, path: &Path) -> Result<(), CheckpointError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let manifest = Manifest {
        format: "nn-checkpoint".to_string(),
        version: CHECKPOINT_VERSION,
        params: store
            .iter()
            .map(|(name, t)| ParamShape {
                name: name.to_string(),
                rows: t.rows(),
                cols: t.cols(),
            })
            .collect(),
    };
    let tmp = path.with_extension("ckpt.tmp");
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
        writeln!(f, "{}", serde_json::to_string(&manifest).unwrap())?;
        for (_, t) in store.iter() {
            for v in t.data() {
                f.write_all(&v.to_le_bytes())?;
            }
        }
        f.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads a checkpoint back into a fresh store, validating the manifest,
/// the exact data length, and value finiteness.
pub fn load_params(path: &Path) -> Result<ParamStore, CheckpointError> {
    let file = std::fs::File::open(path)?;
    read_params(BufReader::new(file), path)
}

/// Parses a checkpoint from any buffered reader; `path` labels errors.
pub fn read_params(mut reader: impl BufRead, path: &Path) -> Result<ParamStore, CheckpointError> {
    let mut manifest_line = String::new();
    reader.read_line(&mut manifest_line)?;
    let manifest: Manifest =
        serde_json::from_str(manifest_line.trim_end()).map_err(|e| CheckpointError::Manifest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    if manifest.format != "nn-checkpoint" {
        return Err(CheckpointError::Manifest {
            path: path.to_path_buf(),
            message: format!("unknown format {:?}", manifest.format),
        });
    }
    if manifest.version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version {
            path: path.to_path_buf(),
            found: manifest.version,
        });
    }
    let mut scalar_count = 0usize;
    for p in &manifest.params {
        let n = p.rows.checked_mul(p.cols).ok_or_else(|| CheckpointError::Manifest {
            path: path.to_path_buf(),
            message: format!("parameter {} shape overflows", p.name),
        })?;
        scalar_count = scalar_count.checked_add(n).ok_or_else(|| CheckpointError::Manifest {
            path: path.to_path_buf(),
            message: "total parameter count overflows".into(),
        })?;
    }
    let expected_bytes = scalar_count
        .checked_mul(8)
        .ok_or_else(|| CheckpointError::Manifest {
            path: path.to_path_buf(),
            message: "total byte count overflows".into(),
        })?;
    // Guard absurd manifests before allocating.
    const MAX_BYTES: usize = 1 << 31;
    if expected_bytes > MAX_BYTES {
        return Err(CheckpointError::Manifest {
            path: path.to_path_buf(),
            message: format!("manifest declares {expected_bytes} bytes, over the {MAX_BYTES} limit"),
        });
    }
    let mut raw = Vec::new();
    reader.read_to_end(&mut raw)?;
    if raw.len() != expected_bytes {
        return Err(CheckpointError::SizeMismatch {
            path: path.to_path_buf(),
            expected_bytes,
            found_bytes: raw.len(),
        });
    }
    let mut store = ParamStore::new();
    let mut offset = 0usize;
    for p in &manifest.params {
        let n = p.rows * p.cols;
        let mut data = Vec::with_capacity(n);
        for k in 0..n {
            let mut b = [0u8; 8];
            b.copy_from_slice(&raw[offset + k * 8..offset + k * 8 + 8]);
            data.push(f64::from_le_bytes(b));
        }
        offset += n * 8;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CheckpointError::NonFinite {
                path: path.to_path_buf(),
                param: p.name.clone(),
            });
        }
        store.add(&p.name, Tensor::from_vec(p.rows, p.cols, data));
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_store() -> ParamStore {
        let mut store = ParamStore::new();
        store.add("layer.w", Tensor::from_vec(2, 3, vec![1.5, -0.25, 3.75e-7, 0.0, 1e12, -1e-12]));
        store.add("layer.b", Tensor::row(&[0.125, -8.0]));
        store
    }

    #[test]
    fn roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.ckpt");
        let store = sample_store();
        save_params(&store, &path).unwrap();
        let back = load_params(&path).unwrap();
        assert_eq!(back.len(), store.len());
        for (a, b) in store.iter().zip(back.iter()) {
            assert_eq!(a.0, b.0);
            assert_eq!(a.1, b.1);
        }
    }

    #[test]
    fn size_mismatch_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.ckpt");
        save_params(&sample_store(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 8);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            load_params(&path),
            Err(CheckpointError::SizeMismatch { .. })
        ));
    }

    #[test]
    fn non_finite_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.ckpt");
        let mut store = ParamStore::new();
        store.add("p", Tensor::row(&[1.0, f64::NAN]));
        save_params(&store, &path).unwrap();
        match load_params(&path) {
            Err(CheckpointError::NonFinite { param, .. }) => assert_eq!(param, "p"),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn bad_manifest_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.ckpt");
        std::fs::write(&path, b"not json\n\x00\x00").unwrap();
        assert!(matches!(
            load_params(&path),
            Err(CheckpointError::Manifest { .. })
        ));
        std::fs::write(
            &path,
            b"{\"format\":\"nn-checkpoint\",\"version\":2,\"params\":[]}\n",
        )
        .unwrap();
        assert!(matches!(
            load_params(&path),
            Err(CheckpointError::Version { .. })
        ));
    }
}
