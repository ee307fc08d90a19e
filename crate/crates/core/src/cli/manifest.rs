use std::fmt::Display;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;
use std::time::Duration;

use anyhow::Context;
use sha2::{Digest, Sha256};

/// Ordered `key=value` record of one command run.
///
/// Keys without a dot are the resolved flags, so a manifest can be passed back
/// through `--config` to repeat the run. Dotted keys (`input.*`, `output.*`,
/// `time.*`, `result.*`) are provenance and are ignored when read as config.
#[derive(Debug, Default, Clone)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Self::default();
        m.set("command", command);
        m.set("version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn timing(&mut self, phase: &str, elapsed: Duration) {
        self.set(&format!("time.{phase}_seconds"), format!("{:.3}", elapsed.as_secs_f64()));
    }

    pub fn digest(&mut self, key: &str, path: &Path) -> anyhow::Result<()> {
        let hash = sha256_file(path).with_context(|| format!("hashing {}", path.display()))?;
        self.set(&format!("{key}.sha256"), hash);
        Ok(())
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let mut f = File::create(path).with_context(|| format!("creating manifest {}", path.display()))?;
        f.write_all(self.render().as_bytes())
            .with_context(|| format!("writing manifest {}", path.display()))
    }
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = reader.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}
