//! CSV and JSON serialization of results, and the output manifest.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use qtraj_core::table::Table;

use crate::error::{validation, CliError, Result};
use crate::scenario::{RngBlock, Scenario};

/// One output file, held in memory until the run succeeds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// CSV with a `# units:` comment line followed by the column header.
pub fn table_csv(t: &Table) -> Result<Vec<u8>> {
    let mut out = format!("# units: {}\n", t.units.join(",")).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let write_err = |e: csv::Error| validation(format!("csv: {e}"));
        w.write_record(&t.columns).map_err(write_err)?;
        for row in &t.rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(write_err)?;
        }
        w.flush().map_err(|e| validation(format!("csv: {e}")))?;
    }
    Ok(out)
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| validation(format!("json: {e}")))?;
    v.push(b'\n');
    Ok(v)
}

/// SHA-256 of the git blob object `blob <len>\0<content>`.
pub fn git_blob_sha256(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

#[derive(Debug, Serialize)]
struct ManifestEntry<'a> {
    name: &'a str,
    bytes: usize,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    scenario: &'a Scenario,
    seed: u64,
    stream: u64,
    files: Vec<ManifestEntry<'a>>,
}

pub fn manifest(experiment: &str, scenario: &Scenario, rng: RngBlock, files: &[Artifact]) -> Result<Artifact> {
    let m = Manifest {
        experiment,
        scenario,
        seed: rng.seed,
        stream: rng.stream,
        files: files
            .iter()
            .map(|f| ManifestEntry { name: &f.name, bytes: f.bytes.len(), sha256: git_blob_sha256(&f.bytes) })
            .collect(),
    };
    Ok(Artifact { name: "manifest.json".into(), bytes: json_bytes(&m)? })
}

pub fn write_all(dir: &Path, files: &[Artifact]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    for f in files {
        let path = dir.join(&f.name);
        fs::write(&path, &f.bytes).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(())
}
