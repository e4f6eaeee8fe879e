//! File-based reference store: a directory holding one grid file per enrolled
//! patch and a `manifest.json` listing them with checksums.
//!
//! Enrollment writes the record and the new manifest to temporary files,
//! fsyncs them and renames them into place, the manifest last. A crash at any
//! point leaves the previous manifest intact. Concurrent enrollments are
//! serialized by an exclusive lock on `store.lock`.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use paperprint_core::matching::correlation;
use paperprint_core::reconstruct::FeatureKind;
use paperprint_core::Grid;

use crate::error::{CliError, Result};
use crate::gridfile::{sha256_hex, GridFile};

pub const STORE_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";
const LOCK: &str = "store.lock";
const RECORDS: &str = "records";

/// Environment variable naming the default store directory.
pub const STORE_ENV: &str = "PAPERPRINT_STORE";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub patch_id: String,
    pub feature_kind: String,
    pub subband_index: Option<usize>,
    /// Path relative to the store root.
    pub file: String,
    pub sha256: String,
    pub config_digest: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub version: u32,
    pub records: Vec<FeatureRecord>,
}

impl Default for StoreManifest {
    fn default() -> Self {
        Self {
            version: STORE_VERSION,
            records: Vec::new(),
        }
    }
}

/// Where enrollment stops when a fault is injected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaultPoint {
    /// Record and manifest temp files written, nothing renamed.
    AfterTempWrite,
    /// Record renamed into place, manifest not yet.
    AfterRecordRename,
}

impl FaultPoint {
    pub fn name(self) -> &'static str {
        match self {
            Self::AfterTempWrite => "after-temp-write",
            Self::AfterRecordRename => "after-record-rename",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "after-temp-write" => Some(Self::AfterTempWrite),
            "after-record-rename" => Some(Self::AfterRecordRename),
            _ => None,
        }
    }
}

/// What to do at a fault point: abort the process (a real crash) or return
/// [`CliError::Interrupted`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaultAction {
    Abort,
    Return,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Match {
    pub patch_id: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub best: Match,
    pub threshold: f64,
    pub accept: bool,
    /// Every compared record, best first.
    pub ranking: Vec<Match>,
}

pub struct Store {
    root: PathBuf,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !id.starts_with('.')
}

fn sync_dir(dir: &Path) -> Result<()> {
    // Directory fsync is how a rename is made durable on POSIX systems.
    #[cfg(unix)]
    File::open(dir)
        .and_then(|d| d.sync_all())
        .map_err(CliError::io(dir))?;
    #[cfg(not(unix))]
    let _ = dir;
    Ok(())
}

fn write_synced(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = File::create(path).map_err(CliError::io(path))?;
    f.write_all(bytes).map_err(CliError::io(path))?;
    f.sync_all().map_err(CliError::io(path))
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    /// `explicit`, else `$PAPERPRINT_STORE`.
    pub fn locate(explicit: Option<&Path>) -> Result<Self> {
        match explicit {
            Some(p) => Ok(Self::new(p)),
            None => std::env::var_os(STORE_ENV).map(Self::new).ok_or_else(|| {
                CliError::Invalid(format!("no store given; pass --store or set {STORE_ENV}"))
            }),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join(MANIFEST)
    }

    /// The manifest with every listed file checked against its checksum. A
    /// store that was never written to has an empty manifest.
    pub fn manifest(&self) -> Result<StoreManifest> {
        let path = self.manifest_path();
        let text = match fs::read(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Ok(StoreManifest::default())
            }
            Err(e) => return Err(CliError::io(&path)(e)),
        };
        let m: StoreManifest = serde_json::from_slice(&text)
            .map_err(|e| CliError::Integrity(format!("manifest is unreadable: {e}")))?;
        if m.version != STORE_VERSION {
            return Err(CliError::Invalid(format!(
                "unsupported store version {}",
                m.version
            )));
        }
        for r in &m.records {
            let p = self.root.join(&r.file);
            let bytes = fs::read(&p).map_err(|e| {
                CliError::Integrity(format!("record '{}' is missing: {e}", r.patch_id))
            })?;
            if sha256_hex(&bytes) != r.sha256 {
                return Err(CliError::Integrity(format!(
                    "record '{}' fails its checksum",
                    r.patch_id
                )));
            }
        }
        Ok(m)
    }

    fn lock(&self) -> Result<File> {
        let path = self.root.join(LOCK);
        let f = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(CliError::io(&path))?;
        f.lock().map_err(CliError::io(&path))?;
        Ok(f)
    }

    pub fn enroll(&self, patch_id: &str, feature: &GridFile) -> Result<FeatureRecord> {
        self.enroll_with_fault(patch_id, feature, None)
    }

    pub fn enroll_with_fault(
        &self,
        patch_id: &str,
        feature: &GridFile,
        fault: Option<(FaultPoint, FaultAction)>,
    ) -> Result<FeatureRecord> {
        if !valid_id(patch_id) {
            return Err(CliError::Invalid(format!(
                "patch id '{patch_id}' must be 1-128 characters of [A-Za-z0-9._-] not starting with '.'"
            )));
        }
        let kind: FeatureKind = feature.require("feature_kind")?;
        let records = self.root.join(RECORDS);
        fs::create_dir_all(&records).map_err(CliError::io(&records))?;
        let _guard = self.lock()?;

        let mut manifest = self.manifest()?;
        if manifest.records.iter().any(|r| r.patch_id == patch_id) {
            return Err(CliError::Invalid(format!(
                "patch id '{patch_id}' is already enrolled"
            )));
        }
        let bytes = feature.to_bytes()?;
        let rel = format!("{RECORDS}/{patch_id}.pgrd");
        let record = FeatureRecord {
            patch_id: patch_id.to_string(),
            feature_kind: kind.to_string(),
            subband_index: kind.subband_index(),
            file: rel.clone(),
            sha256: sha256_hex(&bytes),
            config_digest: feature.get("config_digest").unwrap_or("").to_string(),
        };
        manifest.records.push(record.clone());
        let manifest_bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");

        let final_record = self.root.join(&rel);
        let tmp_record = records.join(format!(".{patch_id}.pgrd.tmp"));
        let tmp_manifest = self.root.join(".manifest.json.tmp");
        write_synced(&tmp_record, &bytes)?;
        write_synced(&tmp_manifest, &manifest_bytes)?;
        inject(fault, FaultPoint::AfterTempWrite)?;
        fs::rename(&tmp_record, &final_record).map_err(CliError::io(&final_record))?;
        sync_dir(&records)?;
        inject(fault, FaultPoint::AfterRecordRename)?;
        let final_manifest = self.manifest_path();
        fs::rename(&tmp_manifest, &final_manifest).map_err(CliError::io(&final_manifest))?;
        sync_dir(&self.root)?;
        Ok(record)
    }

    pub fn load(&self, record: &FeatureRecord) -> Result<GridFile> {
        GridFile::read(&self.root.join(&record.file))
    }

    /// Scores `test` against one record (`patch_id` given) or all of them.
    pub fn verify(&self, test: &Grid, patch_id: Option<&str>, threshold: f64) -> Result<Verdict> {
        let manifest = self.manifest()?;
        if manifest.records.is_empty() {
            return Err(CliError::Invalid("store is empty".into()));
        }
        let candidates: Vec<&FeatureRecord> = match patch_id {
            Some(id) => vec![manifest
                .records
                .iter()
                .find(|r| r.patch_id == id)
                .ok_or_else(|| CliError::Invalid(format!("unknown patch id '{id}'")))?],
            None => manifest.records.iter().collect(),
        };
        let mut ranking = Vec::with_capacity(candidates.len());
        for r in candidates {
            let reference = self.load(r)?;
            if reference.grid.shape() != test.shape() {
                return Err(CliError::Invalid(format!(
                    "test feature is {:?} but record '{}' is {:?}",
                    test.shape(),
                    r.patch_id,
                    reference.grid.shape()
                )));
            }
            ranking.push(Match {
                patch_id: r.patch_id.clone(),
                score: correlation(&reference.grid, test)?,
            });
        }
        ranking.sort_by(|a, b| b.score.total_cmp(&a.score));
        let best = ranking[0].clone();
        Ok(Verdict {
            accept: best.score >= threshold,
            best,
            threshold,
            ranking,
        })
    }
}

fn inject(fault: Option<(FaultPoint, FaultAction)>, here: FaultPoint) -> Result<()> {
    match fault {
        Some((p, FaultAction::Abort)) if p == here => std::process::abort(),
        Some((p, FaultAction::Return)) if p == here => Err(CliError::Interrupted(p.name())),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_rules() {
        assert!(valid_id("patch-01.a_b"));
        assert!(!valid_id(""));
        assert!(!valid_id("../x"));
        assert!(!valid_id(".hidden"));
        assert!(!valid_id("a/b"));
    }
}
