//! Run-directory persistence: config snapshot, per-epoch progress CSVs,
//! parameter checkpoints, evaluation artifacts, and a manifest written last
//! so its presence marks a complete run. No command ever rewrites an existing
//! file in a prior run directory.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::batch2batch::PhaseRecord;
use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::policy::{GaussianPolicy, PolicyParams};
use crate::reinforce::Trajectory;

/// All tabular output uses 17 significant digits so reloading is exact.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub created_unix: u64,
    pub artifacts: Vec<String>,
    pub checkpoint_sha256: BTreeMap<String, String>,
}

pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    /// Creates a fresh run directory; refuses to reuse a non-empty one.
    pub fn create(root: &Path) -> Result<Self> {
        if root.exists() {
            let non_empty = fs::read_dir(root)?.next().is_some();
            if non_empty {
                return Err(Error::config(format!(
                    "output directory {} already contains files; pick a fresh --out",
                    root.display()
                )));
            }
        } else {
            fs::create_dir_all(root)?;
        }
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    /// Opens an existing, completed run (manifest present).
    pub fn open_complete(root: &Path) -> Result<Self> {
        if !root.join("manifest.json").exists() {
            return Err(Error::config(format!(
                "{} is not a completed run directory (manifest.json missing)",
                root.display()
            )));
        }
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write_config_snapshot(&self, toml_text: &str) -> Result<()> {
        fs::write(self.path("config.toml"), toml_text)?;
        Ok(())
    }

    pub fn checkpoint_path(&self, name: &str) -> PathBuf {
        self.path(&format!("checkpoints/{name}.txt"))
    }

    pub fn save_checkpoint(
        &self,
        name: &str,
        policy: &GaussianPolicy,
        params: &PolicyParams,
    ) -> Result<PathBuf> {
        let dir = self.path("checkpoints");
        fs::create_dir_all(&dir)?;
        let path = self.checkpoint_path(name);
        policy.save_checkpoint(params, &path)?;
        Ok(path)
    }

    pub fn progress_writer(&self, name: &str) -> Result<ProgressWriter> {
        ProgressWriter::create(self.path(name))
    }

    /// Persists one evaluation: per-episode returns, per-step trajectories,
    /// and the report, under `<dir>/`.
    pub fn write_eval(
        &self,
        dir: &str,
        report: &EvalReport,
        trajectories: &[Trajectory],
    ) -> Result<()> {
        let base = self.path(dir);
        fs::create_dir_all(&base)?;
        let mut returns = BufWriter::new(File::create(base.join("returns.csv"))?);
        writeln!(returns, "episode,return")?;
        for (ep, t) in trajectories.iter().enumerate() {
            writeln!(returns, "{ep},{}", fmt_f64(t.ret))?;
        }
        returns.flush()?;

        let n_states = trajectories.first().map(|t| t.states[0].len()).unwrap_or(0);
        let n_actions = trajectories
            .first()
            .and_then(|t| t.actions.first().map(|a| a.len()))
            .unwrap_or(0);
        let mut w = BufWriter::new(File::create(base.join("trajectories.csv"))?);
        let mut header = String::from("episode,t");
        for i in 0..n_states {
            header.push_str(&format!(",x{i}"));
        }
        for i in 0..n_actions {
            header.push_str(&format!(",u{i}"));
        }
        writeln!(w, "{header}")?;
        for (ep, traj) in trajectories.iter().enumerate() {
            for (t, state) in traj.states.iter().enumerate() {
                let mut row = format!("{ep},{t}");
                for x in state {
                    row.push(',');
                    row.push_str(&fmt_f64(*x));
                }
                if t < traj.actions.len() {
                    for u in &traj.actions[t] {
                        row.push(',');
                        row.push_str(&fmt_f64(*u));
                    }
                } else {
                    // Terminal row: no action occupies the last interval.
                    for _ in 0..n_actions {
                        row.push(',');
                    }
                }
                writeln!(w, "{row}")?;
            }
        }
        w.flush()?;

        let json = serde_json::to_string_pretty(report)?;
        fs::write(base.join("report.json"), json)?;
        Ok(())
    }

    pub fn write_summary(&self, summary: &serde_json::Value) -> Result<()> {
        fs::write(
            self.path("summary.json"),
            serde_json::to_string_pretty(summary)?,
        )?;
        Ok(())
    }

    /// Writes the manifest last: hashes every checkpoint and lists every file
    /// present in the run directory.
    pub fn finalize(&self, command: &str, run_id: &str) -> Result<()> {
        let mut artifacts = Vec::new();
        collect_files(&self.root, &self.root, &mut artifacts)?;
        artifacts.sort();
        let mut checkpoint_sha256 = BTreeMap::new();
        let ck_dir = self.path("checkpoints");
        if ck_dir.exists() {
            for entry in fs::read_dir(&ck_dir)? {
                let path = entry?.path();
                if path.is_file() {
                    let name = path.file_name().unwrap().to_string_lossy().into_owned();
                    checkpoint_sha256.insert(name, sha256_file(&path)?);
                }
            }
        }
        let manifest = RunManifest {
            run_id: run_id.to_string(),
            command: command.to_string(),
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            artifacts,
            checkpoint_sha256,
        };
        fs::write(
            self.path("manifest.json"),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        Ok(())
    }

    pub fn read_manifest(&self) -> Result<RunManifest> {
        let text = fs::read_to_string(self.path("manifest.json"))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else if let Ok(rel) = path.strip_prefix(root) {
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Streaming per-epoch CSV: epoch, mean/std of returns, baseline, gradient
/// norm, wall time.
pub struct ProgressWriter {
    w: BufWriter<File>,
}

impl ProgressWriter {
    fn create(path: PathBuf) -> Result<Self> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "epoch,mean_return,std_return,baseline,gradient_norm,wall_time_s")?;
        Ok(Self { w })
    }

    pub fn append(&mut self, r: &PhaseRecord) -> Result<()> {
        writeln!(
            self.w,
            "{},{},{},{},{},{}",
            r.epoch,
            fmt_f64(r.report.mean),
            fmt_f64(r.report.std),
            fmt_f64(r.baseline),
            fmt_f64(r.grad_norm),
            fmt_f64(r.wall_time_s),
        )?;
        self.w.flush()?;
        Ok(())
    }
}
