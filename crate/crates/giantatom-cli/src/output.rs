//! Deterministic CSV/JSON emission and the run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use giantatom::error::Result;

/// 12 significant digits, locale-free.
pub fn sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    format!("{x:.11e}")
}

pub struct CsvWriter {
    lines: Vec<String>,
}

impl CsvWriter {
    pub fn new(header: &[&str]) -> Self {
        let mut w = Self { lines: Vec::new() };
        w.lines.push(format!("# timestamp: {}", iso8601_now()));
        w.lines.push(header.join(","));
        w
    }

    pub fn row(&mut self, fields: &[String]) {
        self.lines.push(fields.join(","));
    }

    pub fn row_f64(&mut self, fields: &[f64]) {
        let mut line = String::new();
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            let _ = write!(line, "{}", sig(*f));
        }
        self.lines.push(line);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.lines.join("\n") + "\n")?;
        Ok(())
    }

    /// Data rows already present in a previous output, keyed by the first
    /// `key_cols` columns; used by --resume to skip completed points.
    pub fn load_existing(path: &Path, key_cols: usize) -> std::collections::BTreeMap<String, String> {
        let mut map = std::collections::BTreeMap::new();
        let Ok(text) = std::fs::read_to_string(path) else {
            return map;
        };
        for line in text.lines().skip(1) {
            if line.starts_with('#') || line.is_empty() {
                continue;
            }
            let key: Vec<&str> = line.split(',').take(key_cols).collect();
            if key.len() == key_cols {
                map.insert(key.join(","), line.to_string());
            }
        }
        // drop the header row if it slipped in
        map.retain(|_, v| v.split(',').skip(1).all(|f| f.parse::<f64>().is_ok() || f.is_empty()));
        map
    }
}

/// ISO-8601 UTC timestamp from the system clock, no external crates.
pub fn iso8601_now() -> String {
    let secs = SystemTime::now()
        .duration_since(SystemTime::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let days = secs / 86400;
    let (h, m, s) = ((secs % 86400) / 3600, (secs % 3600) / 60, secs % 60);
    // civil date from days since 1970-01-01
    let z = days as i64 + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let mo = if mp < 10 { mp + 3 } else { mp - 9 };
    let y = if mo <= 2 { y + 1 } else { y };
    format!("{y:04}-{mo:02}-{d:02}T{h:02}:{m:02}:{s:02}Z")
}

/// FNV-1a 64-bit, hex; non-cryptographic content fingerprint.
pub fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Written next to the outputs before a successful exit.
#[derive(serde::Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
    pub layout_hash: Option<String>,
    pub started: String,
    pub wall_seconds: f64,
    pub files: Vec<String>,
    pub config: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, config: &impl serde::Serialize) -> Self {
        let value = serde_json::to_value(config).unwrap_or(serde_json::Value::Null);
        let canonical = serde_json::to_string(&value).unwrap_or_default();
        Self {
            tool: "giantatom",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_hash: fnv1a_hex(canonical.as_bytes()),
            layout_hash: None,
            started: iso8601_now(),
            wall_seconds: 0.0,
            files: Vec::new(),
        config: value,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("run_manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}
