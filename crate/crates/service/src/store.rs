//! Session registry with optional JSON-lines persistence.
//!
//! Each session owns one log file: a `create` line followed by one line per
//! classification. Opening a store replays every log it finds.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock as StdRwLock};

use anyhow::Context;
use netsearch_core::io::{parse_session_log, LogEntry, SessionSpec};
use netsearch_core::session::SearchSession;
use netsearch_core::{Error, Observation};
use tokio::sync::RwLock;

pub struct Entry {
    pub session: SearchSession,
    log: Option<PathBuf>,
}

impl Entry {
    /// Applies a classification, persisting it before the in-memory state
    /// changes. On any failure the session is left as it was.
    pub fn record(&mut self, obs: Observation) -> Result<(), Error> {
        let mut next = self.session.clone();
        let rec = next.record(obs)?.clone();
        if let Some(path) = &self.log {
            append_line(path, &LogEntry::Classification(rec))?;
        }
        self.session = next;
        Ok(())
    }
}

fn append_line(path: &Path, entry: &LogEntry) -> Result<(), Error> {
    let mut line = serde_json::to_string(entry)?;
    line.push('\n');
    let mut f = OpenOptions::new().append(true).create(true).open(path)?;
    f.write_all(line.as_bytes())?;
    f.sync_data()?;
    Ok(())
}

pub fn build_session(spec: &SessionSpec) -> Result<SearchSession, Error> {
    SearchSession::new(spec.network.build()?, spec.prior, spec.model, spec.policy)
}

#[derive(Default)]
pub struct Store {
    dir: Option<PathBuf>,
    sessions: StdRwLock<HashMap<String, Arc<RwLock<Entry>>>>,
}

impl Store {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens a persistent store, replaying every `*.jsonl` log in `dir`.
    pub fn open(dir: impl Into<PathBuf>) -> anyhow::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut sessions = HashMap::new();
        for item in fs::read_dir(&dir)? {
            let path = item?.path();
            if path.extension().is_none_or(|e| e != "jsonl") {
                continue;
            }
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .context("session log name is not valid UTF-8")?
                .to_string();
            let text = fs::read_to_string(&path)?;
            let (spec, records) = parse_session_log(&text).with_context(|| format!("reading {}", path.display()))?;
            let session = SearchSession::replay(spec.network.build()?, spec.prior, spec.model, spec.policy, &records)
                .with_context(|| format!("replaying {}", path.display()))?;
            sessions.insert(id, Arc::new(RwLock::new(Entry { session, log: Some(path) })));
        }
        Ok(Self { dir: Some(dir), sessions: StdRwLock::new(sessions) })
    }

    pub fn create(&self, spec: SessionSpec) -> Result<(String, Arc<RwLock<Entry>>), Error> {
        let session = build_session(&spec)?;
        let id = uuid::Uuid::new_v4().to_string();
        let log = match &self.dir {
            Some(dir) => {
                let path = dir.join(format!("{id}.jsonl"));
                File::create(&path)?;
                append_line(&path, &LogEntry::Create(spec))?;
                Some(path)
            }
            None => None,
        };
        let entry = Arc::new(RwLock::new(Entry { session, log }));
        self.sessions
            .write()
            .expect("session map lock poisoned")
            .insert(id.clone(), entry.clone());
        Ok((id, entry))
    }

    pub fn get(&self, id: &str) -> Option<Arc<RwLock<Entry>>> {
        self.sessions.read().expect("session map lock poisoned").get(id).cloned()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session map lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
