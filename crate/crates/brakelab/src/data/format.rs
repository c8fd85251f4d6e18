//! JSON Lines trajectory files and the dataset directory layout.
//!
//! Layout: `<root>/{train,val}/{policy}_{scenario}_{run}.jsonl`. Each file
//! holds one header line followed by one line per control step with fixed
//! key order `{"t": .., "obs": [18 floats], "act": [4 ints]}`. Writes are
//! atomic (write to a temporary file, then rename).

use super::{Dataset, StepRecord, Trajectory};
use crate::mdp::{JointAction, Observation, WheelAction, NUM_CHANNELS};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
    scenario: String,
    policy: String,
    seed: u64,
    onset_index: usize,
    n_steps: usize,
}

#[derive(Serialize, Deserialize)]
struct Line {
    t: f64,
    obs: Vec<f64>,
    act: Vec<u8>,
}

#[derive(Debug)]
pub enum DataError {
    Io(std::io::Error),
    /// Schema or version mismatch in the header line.
    Version { path: PathBuf, found: String },
    /// A malformed line, reported with its 1-based line number.
    Malformed { path: PathBuf, line: usize, message: String },
    /// Fewer records than the header announced.
    Truncated { path: PathBuf, expected: usize, found: usize },
}

impl std::fmt::Display for DataError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DataError::Io(e) => write!(f, "dataset io error: {e}"),
            DataError::Version { path, found } => {
                write!(f, "{}: unsupported schema/version ({found})", path.display())
            }
            DataError::Malformed { path, line, message } => {
                write!(f, "{}:{line}: malformed record: {message}", path.display())
            }
            DataError::Truncated { path, expected, found } => write!(
                f,
                "{}: truncated at record {found} of {expected}",
                path.display()
            ),
        }
    }
}

impl std::error::Error for DataError {}

impl From<std::io::Error> for DataError {
    fn from(e: std::io::Error) -> Self {
        DataError::Io(e)
    }
}

/// Writes one trajectory as a JSONL file, atomically.
pub fn save_trajectory(traj: &Trajectory, path: &Path) -> Result<(), DataError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("jsonl.tmp");
    {
        let mut f = std::io::BufWriter::new(fs::File::create(&tmp)?);
        let header = Header {
            schema: "trajectory".to_string(),
            version: SCHEMA_VERSION,
            scenario: traj.scenario.clone(),
            policy: traj.policy.clone(),
            seed: traj.seed,
            onset_index: traj.onset_index,
            n_steps: traj.records.len(),
        };
        writeln!(f, "{}", serde_json::to_string(&header).unwrap())?;
        for rec in &traj.records {
            let line = Line {
                t: rec.t_s,
                obs: rec.obs.to_array().to_vec(),
                act: rec.action.0.iter().map(|u| u.index() as u8).collect(),
            };
            writeln!(f, "{}", serde_json::to_string(&line).unwrap())?;
        }
        f.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Loads one trajectory, validating schema version and record shape.
pub fn load_trajectory(path: &Path) -> Result<Trajectory, DataError> {
    let file = fs::File::open(path)?;
    read_trajectory(BufReader::new(file), path)
}

/// Parses a trajectory from any buffered reader; `path` labels errors.
pub fn read_trajectory(reader: impl BufRead, path: &Path) -> Result<Trajectory, DataError> {
    let mut lines = reader.lines();
    let header_line = lines.next().ok_or_else(|| DataError::Version {
        path: path.to_path_buf(),
        found: "empty file".into(),
    })??;
    let header: Header =
        serde_json::from_str(&header_line).map_err(|e| DataError::Malformed {
            path: path.to_path_buf(),
            line: 1,
            message: format!("header: {e}"),
        })?;
    if header.schema != "trajectory" || header.version != SCHEMA_VERSION {
        return Err(DataError::Version {
            path: path.to_path_buf(),
            found: format!("schema={} version={}", header.schema, header.version),
        });
    }
    // The header's step count is untrusted; cap the pre-allocation.
    let mut records = Vec::with_capacity(header.n_steps.min(4096));
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&text).map_err(|e| DataError::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        if parsed.obs.len() != NUM_CHANNELS {
            return Err(DataError::Malformed {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("expected {NUM_CHANNELS} observation channels, got {}", parsed.obs.len()),
            });
        }
        if parsed.act.len() != 4 {
            return Err(DataError::Malformed {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("expected 4 wheel actions, got {}", parsed.act.len()),
            });
        }
        if parsed.obs.iter().any(|v| !v.is_finite()) {
            return Err(DataError::Malformed {
                path: path.to_path_buf(),
                line: line_no,
                message: "non-finite observation value".into(),
            });
        }
        let mut arr = [0.0; NUM_CHANNELS];
        arr.copy_from_slice(&parsed.obs);
        let mut wheels = [WheelAction::NoControl; 4];
        for (w, code) in wheels.iter_mut().zip(parsed.act.iter()) {
            *w = WheelAction::from_index(*code as usize).ok_or_else(|| DataError::Malformed {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("wheel action code {code} out of range"),
            })?;
        }
        records.push(StepRecord {
            t_s: parsed.t,
            obs: Observation::from_array(&arr),
            action: JointAction(wheels),
        });
    }
    if records.len() != header.n_steps {
        return Err(DataError::Truncated {
            path: path.to_path_buf(),
            expected: header.n_steps,
            found: records.len(),
        });
    }
    Ok(Trajectory {
        scenario: header.scenario,
        policy: header.policy,
        seed: header.seed,
        onset_index: header.onset_index,
        records,
    })
}

impl Dataset {
    /// Writes `<root>/{train,val}/{policy}_{scenario}_{run}.jsonl`.
    pub fn save(&self, root: &Path) -> Result<(), DataError> {
        let write_split = |split: &str, trajs: &[Trajectory]| -> Result<(), DataError> {
            let dir = root.join(split);
            fs::create_dir_all(&dir)?;
            let mut run_counter: std::collections::BTreeMap<(String, String), usize> =
                std::collections::BTreeMap::new();
            for traj in trajs {
                let key = (traj.policy.clone(), traj.scenario.clone());
                let run = *run_counter
                    .entry(key)
                    .and_modify(|r| *r += 1)
                    .or_insert(0);
                save_trajectory(traj, &dir.join(format!("{}.jsonl", traj.file_stem(run))))?;
            }
            Ok(())
        };
        write_split("train", &self.train)?;
        write_split("val", &self.val)
    }

    /// Loads the directory layout written by [`Dataset::save`], in sorted
    /// file order for determinism.
    pub fn load(root: &Path) -> Result<Dataset, DataError> {
        let read_split = |split: &str| -> Result<Vec<Trajectory>, DataError> {
            let dir = root.join(split);
            let mut paths: Vec<PathBuf> = Vec::new();
            if dir.is_dir() {
                for entry in fs::read_dir(&dir)? {
                    let p = entry?.path();
                    if p.extension().map(|e| e == "jsonl").unwrap_or(false) {
                        paths.push(p);
                    }
                }
            }
            paths.sort();
            paths.iter().map(|p| load_trajectory(p)).collect()
        };
        Ok(Dataset {
            train: read_split("train")?,
            val: read_split("val")?,
        })
    }
}
