//! On-disk catalog: an append-only `catalog.log` of accepted lines plus a
//! snapshot of the indexed store. `state.json` records how many log bytes
//! the snapshot covers; opening loads the snapshot and replays the rest.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use fashionrec::catalog::{CatalogError, CatalogStore, IngestReport};
use fashionrec::ScoringParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Default, Serialize, Deserialize)]
struct State {
    log_bytes: u64,
}

#[derive(Debug, Clone)]
pub struct DataDir {
    root: PathBuf,
}

impl DataDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn log_path(&self) -> PathBuf {
        self.root.join("catalog.log")
    }

    fn snapshot_dir(&self) -> PathBuf {
        self.root.join("snapshot")
    }

    fn state_path(&self) -> PathBuf {
        self.root.join("state.json")
    }

    fn read_state(&self) -> Result<State, CatalogError> {
        match fs::read(self.state_path()) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| CatalogError::CorruptStore {
                path: self.state_path().display().to_string(),
                reason: e.to_string(),
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(State::default()),
            Err(e) => Err(e.into()),
        }
    }

    /// Current store: the last checkpoint plus any log lines appended since.
    /// A missing directory is an empty store.
    pub fn open(&self) -> Result<CatalogStore, CatalogError> {
        let state = self.read_state()?;
        let (mut store, offset) = if self.snapshot_dir().join("manifest.json").exists() {
            (CatalogStore::load(self.snapshot_dir())?.0, state.log_bytes)
        } else {
            (CatalogStore::new(), 0)
        };
        match File::open(self.log_path()) {
            Ok(mut f) => {
                let len = f.metadata()?.len();
                if len < offset {
                    return Err(CatalogError::CorruptStore {
                        path: self.log_path().display().to_string(),
                        reason: "log is shorter than the checkpoint".into(),
                    });
                }
                f.seek(SeekFrom::Start(offset))?;
                store.ingest(BufReader::new(f))?;
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(e.into()),
        }
        Ok(store)
    }

    /// Ingests `source` into `store`, appending accepted lines to the log.
    pub fn ingest<R: BufRead>(&self, store: &mut CatalogStore, source: R) -> Result<IngestReport, CatalogError> {
        fs::create_dir_all(&self.root)?;
        let mut log = OpenOptions::new().create(true).append(true).open(self.log_path())?;
        let mut buf = Vec::new();
        let report = store.ingest_logged(source, &mut buf)?;
        log.write_all(&buf)?;
        log.sync_data()?;
        Ok(report)
    }

    /// Writes a snapshot of `store` covering the whole current log.
    pub fn checkpoint(&self, store: &CatalogStore, params: &ScoringParams) -> Result<(), CatalogError> {
        fs::create_dir_all(&self.root)?;
        let log_bytes = fs::metadata(self.log_path()).map(|m| m.len()).unwrap_or(0);
        store.save(self.snapshot_dir(), params)?;
        let state = serde_json::to_vec(&State { log_bytes }).map_err(std::io::Error::from)?;
        fs::write(self.state_path(), state)?;
        Ok(())
    }

    /// Replaces this directory's contents with `store`; the log is rewritten
    /// to the store's records so later replays agree with the snapshot.
    pub fn replace_with(&self, store: &CatalogStore, params: &ScoringParams) -> Result<(), CatalogError> {
        fs::create_dir_all(&self.root)?;
        let mut records: Vec<_> = store.records().collect();
        records.sort_by(|a, b| a.id.cmp(&b.id));
        let mut out = Vec::new();
        for r in records {
            serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
            out.push(b'\n');
        }
        fs::write(self.log_path(), out)?;
        self.checkpoint(store, params)
    }

    /// Log contents, for diagnostics and tests.
    pub fn read_log(&self) -> Result<String, CatalogError> {
        let mut s = String::new();
        File::open(self.log_path())?.read_to_string(&mut s)?;
        Ok(s)
    }
}
