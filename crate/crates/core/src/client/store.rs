use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use super::{ClientError, GenerationRecord};

/// Append-only JSON-lines store of generation records keyed by cache key.
///
/// Line fields, in order: `cache_key, backend_id, prompt, params,
/// candidates, latency_ms, created_at`. Existing lines are never rewritten;
/// when a key appears twice the first record wins.
pub struct GenerationStore {
    path: PathBuf,
    index: RwLock<HashMap<String, GenerationRecord>>,
    order: RwLock<Vec<String>>,
    writer: Mutex<File>,
}

impl GenerationStore {
    pub fn open(path: &Path) -> Result<Self, ClientError> {
        let err = |e: std::io::Error| ClientError::Store(format!("{}: {e}", path.display()));
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(err)?;
        }
        let mut index = HashMap::new();
        let mut order = Vec::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(err)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(err)?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: GenerationRecord = serde_json::from_str(&line).map_err(|e| {
                    ClientError::Store(format!("{}:{}: {e}", path.display(), i + 1))
                })?;
                if !index.contains_key(&rec.cache_key) {
                    order.push(rec.cache_key.clone());
                    index.insert(rec.cache_key.clone(), rec);
                }
            }
        }
        let writer = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(err)?;
        Ok(GenerationStore {
            path: path.to_path_buf(),
            index: RwLock::new(index),
            order: RwLock::new(order),
            writer: Mutex::new(writer),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, cache_key: &str) -> Option<GenerationRecord> {
        self.index
            .read()
            .expect("store index lock")
            .get(cache_key)
            .cloned()
    }

    pub fn len(&self) -> usize {
        self.order.read().expect("store order lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records in the order they were first written.
    pub fn records(&self) -> Vec<GenerationRecord> {
        let index = self.index.read().expect("store index lock");
        self.order
            .read()
            .expect("store order lock")
            .iter()
            .filter_map(|k| index.get(k).cloned())
            .collect()
    }

    /// Appends a record unless its key is already stored.
    pub fn append(&self, record: &GenerationRecord) -> Result<(), ClientError> {
        let mut writer = self.writer.lock().expect("store writer lock");
        if self
            .index
            .read()
            .expect("store index lock")
            .contains_key(&record.cache_key)
        {
            return Ok(());
        }
        let mut line =
            serde_json::to_string(record).map_err(|e| ClientError::Store(e.to_string()))?;
        line.push('\n');
        writer
            .write_all(line.as_bytes())
            .and_then(|_| writer.flush())
            .map_err(|e| ClientError::Store(format!("{}: {e}", self.path.display())))?;
        self.index
            .write()
            .expect("store index lock")
            .insert(record.cache_key.clone(), record.clone());
        self.order
            .write()
            .expect("store order lock")
            .push(record.cache_key.clone());
        Ok(())
    }
}
