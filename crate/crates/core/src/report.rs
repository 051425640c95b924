//! Structured diagnostics: named values with margins, serialized to JSON
//! and CSV.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// One named check. `margin ≥ -tolerance` means the check passed; positive
/// margins are headroom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub name: String,
    pub value: f64,
    pub margin: f64,
    pub pass: bool,
}

impl Entry {
    pub fn check(name: impl Into<String>, value: f64, margin: f64, tolerance: f64) -> Self {
        Entry {
            name: name.into(),
            value,
            margin,
            pass: margin >= -tolerance,
        }
    }

    /// Informational entry: always passes, margin zero.
    pub fn info(name: impl Into<String>, value: f64) -> Self {
        Entry {
            name: name.into(),
            value,
            margin: 0.0,
            pass: true,
        }
    }

    /// Boolean condition recorded with margin `±1`.
    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Entry {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            margin: if ok { 1.0 } else { -1.0 },
            pass: ok,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub label: String,
    pub config_hash: String,
    pub seed: u64,
    pub timestamp: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub metadata: Metadata,
    pub entries: Vec<Entry>,
    pub artifacts: Vec<String>,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl Report {
    pub fn new(label: impl Into<String>) -> Self {
        Report {
            metadata: Metadata {
                label: label.into(),
                ..Default::default()
            },
            ..Default::default()
        }
    }

    pub fn push(&mut self, e: Entry) {
        self.entries.push(e);
    }

    /// Append another report's entries under `prefix/`.
    pub fn absorb(&mut self, prefix: &str, other: Report) {
        for mut e in other.entries {
            e.name = format!("{prefix}/{}", e.name);
            self.entries.push(e);
        }
        self.tables.extend(other.tables);
    }

    pub fn pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.get(name).map(|e| e.value)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Entry> {
        self.entries.iter().filter(|e| !e.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_json(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_json())
    }
}

/// Per-sample numeric artifact with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                // `{:?}` prints the shortest round-trip representation
                let _ = write!(s, "{v:?}");
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}
