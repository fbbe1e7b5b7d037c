use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize)]
struct CacheRecord {
    prompt_hash: String,
    params_hash: String,
    generation_text: String,
    timestamp: u64,
}

fn ends_mid_line(path: &Path) -> io::Result<bool> {
    let bytes = std::fs::read(path)?;
    Ok(bytes.last().is_some_and(|b| *b != b'\n'))
}

/// Generation cache keyed by (prompt hash, params hash), optionally backed by
/// an append-only JSON-lines file. Reads run concurrently; writes serialize.
#[derive(Debug, Default)]
pub struct GenerationCache {
    entries: RwLock<HashMap<(String, String), String>>,
    file: Option<Mutex<File>>,
}

impl GenerationCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) a cache file and loads its records. Unparseable
    /// lines, such as a torn final append, are skipped.
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref();
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheRecord>(&line) {
                    Ok(r) => {
                        entries.insert((r.prompt_hash, r.params_hash), r.generation_text);
                    }
                    Err(e) => log::warn!("{}:{}: skipping cache record: {e}", path.display(), n + 1),
                }
            }
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        if ends_mid_line(path)? {
            file.write_all(b"\n")?;
        }
        Ok(Self {
            entries: RwLock::new(entries),
            file: Some(Mutex::new(file)),
        })
    }

    pub fn get(&self, prompt_hash: &str, params_hash: &str) -> Option<String> {
        self.entries
            .read()
            .expect("cache lock poisoned")
            .get(&(prompt_hash.to_string(), params_hash.to_string()))
            .cloned()
    }

    pub fn insert(&self, prompt_hash: &str, params_hash: &str, text: &str) -> io::Result<()> {
        let key = (prompt_hash.to_string(), params_hash.to_string());
        let mut entries = self.entries.write().expect("cache lock poisoned");
        if let Some(file) = &self.file {
            let record = CacheRecord {
                prompt_hash: key.0.clone(),
                params_hash: key.1.clone(),
                generation_text: text.to_string(),
                timestamp: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
            };
            let mut line = serde_json::to_string(&record).expect("plain data");
            line.push('\n');
            let mut file = file.lock().expect("cache file lock poisoned");
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        entries.insert(key, text.to_string());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
