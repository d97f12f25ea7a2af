//! Append-only run transcript, optionally mirrored to a JSON-lines file.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Intent,
    Thought,
    ToolCall,
    Observation,
    ParseError,
    Blocked,
    Warning,
    ApprovalRequested,
    ApprovalResolved,
    FinalAnswer,
    UngroundedClaim,
    Summary,
    Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub seq: u64,
    pub at_ms: u64,
    pub kind: EntryKind,
    pub data: Value,
}

type Listener = Box<dyn Fn(usize) + Send + Sync>;

#[derive(Default)]
pub struct Transcript {
    entries: Mutex<Vec<TranscriptEntry>>,
    file: Mutex<Option<BufWriter<File>>>,
    listener: Option<Listener>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    /// Mirrors every entry to `path`, truncating any previous content.
    pub fn with_file(mut self, path: &Path) -> std::io::Result<Self> {
        self.file = Mutex::new(Some(BufWriter::new(File::create(path)?)));
        Ok(self)
    }

    /// Called with the new entry count after every append.
    pub fn with_listener(mut self, f: impl Fn(usize) + Send + Sync + 'static) -> Self {
        self.listener = Some(Box::new(f));
        self
    }

    pub fn append(&self, at_ms: u64, kind: EntryKind, data: Value) -> TranscriptEntry {
        let (entry, len) = {
            let mut entries = self.entries.lock().unwrap_or_else(|e| e.into_inner());
            let entry = TranscriptEntry {
                seq: entries.len() as u64,
                at_ms,
                kind,
                data,
            };
            entries.push(entry.clone());
            let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
            if let Some(w) = file.as_mut() {
                if let Ok(line) = serde_json::to_string(&entry) {
                    let _ = writeln!(w, "{line}").and_then(|_| w.flush());
                }
            }
            (entry, entries.len())
        };
        if let Some(listener) = &self.listener {
            listener(len);
        }
        entry
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> Vec<TranscriptEntry> {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn entries_from(&self, start: usize) -> Vec<TranscriptEntry> {
        let entries = self.entries.lock().unwrap_or_else(|e| e.into_inner());
        entries.get(start..).map(<[_]>::to_vec).unwrap_or_default()
    }

    pub fn to_jsonl(&self) -> String {
        self.entries()
            .iter()
            .filter_map(|e| serde_json::to_string(e).ok())
            .map(|l| l + "\n")
            .collect()
    }
}
