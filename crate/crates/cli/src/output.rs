//! CSV and histogram files with a reconstructible metadata block.
//!
//! Every file starts with `#` comment lines naming the artifact version,
//! the command, the configuration hash and the seed, followed by one
//! timestamp line; everything but that last line is a pure function of the
//! configuration. Numbers are written with Rust's locale-independent
//! shortest round-trip formatting.

use serde::Serialize;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Prefix of the one metadata line that varies between identical runs.
pub const TIMESTAMP_PREFIX: &str = "# generated_unix_s: ";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Metadata {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Metadata {
    pub fn comment_block(&self) -> String {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        format!(
            "# isbft {VERSION}\n# command: {}\n# config_sha256: {}\n# seed: {}\n{TIMESTAMP_PREFIX}{now}\n",
            self.command, self.config_hash, self.seed
        )
    }
}

/// `x` with full precision and a `.` decimal separator.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Optional number; empty when absent.
pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Writes `rows` under `header` to `dir/name`, creating `dir` if needed.
pub fn write_csv(
    dir: &Path,
    name: &str,
    meta: &Metadata,
    header: &[&str],
    rows: &[Vec<String>],
) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut file = io::BufWriter::new(fs::File::create(&path)?);
    file.write_all(meta.comment_block().as_bytes())?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(path)
}

/// Writes `value` as pretty JSON preceded by the comment block.
pub fn write_json<T: Serialize>(dir: &Path, name: &str, meta: &Metadata, value: &T) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut text = meta.comment_block();
    text.push_str(&serde_json::to_string_pretty(value).map_err(io::Error::other)?);
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

/// `text` without its timestamp line, for byte comparison of replays.
pub fn strip_timestamp(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with(TIMESTAMP_PREFIX)).fold(String::new(), |mut s, l| {
        s.push_str(l);
        s.push('\n');
        s
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip_without_locale() {
        for x in [0.1, 1e-9, 978.4, 2.0f64.powi(-5), 123456789.123] {
            let s = num(x);
            assert!(!s.contains(','));
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(opt_num(None), "");
    }

    #[test]
    fn csv_carries_metadata_then_header() {
        let dir = std::env::temp_dir().join(format!("isbft-output-{}", std::process::id()));
        let meta = Metadata { command: "test".into(), config_hash: "ab".into(), seed: 4 };
        let path = write_csv(&dir, "x.csv", &meta, &["a", "b"], &[vec!["1".into(), "2".into()]]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let body = strip_timestamp(&text);
        assert!(body.starts_with("# isbft "));
        assert!(body.contains("# config_sha256: ab\n# seed: 4\na,b\n1,2\n"));
        assert!(text.contains(TIMESTAMP_PREFIX));
        fs::remove_dir_all(&dir).unwrap();
    }
}
