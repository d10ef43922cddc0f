//! Snapshot directories and JSON output helpers.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use dnad_core::grid::{read_gfb1, write_gfb1};
use dnad_core::solver::Snapshot;
use serde::{Deserialize, Serialize};

/// Version stamped into every JSON document the tool writes.
pub const SCHEMA_VERSION: u32 = 1;

pub const MANIFEST: &str = "snapshots.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub step: u64,
    pub t: f64,
    pub requested: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub snapshots: Vec<ManifestEntry>,
}

/// Writes each snapshot as `snap_NNNN.gfb1` plus a manifest carrying the
/// step and time of each file.
pub fn write_snapshots(dir: &Path, snaps: &[Snapshot]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut entries = Vec::with_capacity(snaps.len());
    for (k, s) in snaps.iter().enumerate() {
        let file = format!("snap_{k:04}.gfb1");
        let path = dir.join(&file);
        let w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        write_gfb1(w, &s.u)?;
        entries.push(ManifestEntry {
            file,
            step: s.step,
            t: s.t,
            requested: s.requested,
        });
    }
    write_json(
        &dir.join(MANIFEST),
        &Manifest {
            schema_version: SCHEMA_VERSION,
            snapshots: entries,
        },
    )
}

pub fn read_snapshots(dir: &Path) -> Result<Vec<Snapshot>> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let manifest: Manifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if manifest.schema_version != SCHEMA_VERSION {
        bail!("{}: schema_version {} is not {SCHEMA_VERSION}", path.display(), manifest.schema_version);
    }
    manifest
        .snapshots
        .into_iter()
        .map(|e| {
            let p = dir.join(&e.file);
            let r = BufReader::new(File::open(&p).with_context(|| format!("opening {}", p.display()))?);
            let u = read_gfb1(r).with_context(|| format!("reading {}", p.display()))?;
            Ok(Snapshot {
                step: e.step,
                t: e.t,
                requested: e.requested,
                u,
            })
        })
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Pretty JSON to `out`, or to standard output when `out` is `None`.
pub fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(p) => write_json(p, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dnad_core::{GridFunction, GridSpec};

    #[test]
    fn snapshot_directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = GridSpec::cube(2, 1.0, 8).unwrap();
        let snaps: Vec<Snapshot> = (0..3)
            .map(|k| Snapshot {
                step: 10 * k,
                t: 0.1 * k as f64,
                requested: 0.1 * k as f64,
                u: GridFunction::from_fn(spec.clone(), |x| x[0] * k as f64),
            })
            .collect();
        write_snapshots(dir.path(), &snaps).unwrap();
        let back = read_snapshots(dir.path()).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in snaps.iter().zip(&back) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.u.values(), b.u.values());
        }
    }
}
