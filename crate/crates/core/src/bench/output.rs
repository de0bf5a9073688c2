//! File writers that stamp every output with a reproducibility header.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;

/// Command name, master seed and config snapshot.
#[derive(Debug, Clone)]
pub struct Header {
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
}

impl Header {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        Self { command: command.into(), seed, config }
    }

    pub fn lines(&self) -> Vec<String> {
        vec![
            format!("codesign-lab {} {}", self.command, env!("CARGO_PKG_VERSION")),
            format!("seed: {}", self.seed),
            format!("config: {}", self.config),
        ]
    }

    pub fn json(&self) -> serde_json::Value {
        serde_json::json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": self.seed,
            "config": self.config,
        })
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// `#` header lines, a column row, then the rows.
pub fn write_csv<I>(path: &Path, header: &Header, columns: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut out = create(path)?;
    for l in header.lines() {
        writeln!(out, "# {l}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with the header under `"header"`.
pub fn write_json(path: &Path, header: &Header, body: serde_json::Value) -> Result<()> {
    let doc = match body {
        serde_json::Value::Object(mut m) => {
            m.insert("header".into(), header.json());
            serde_json::Value::Object(m)
        }
        other => serde_json::json!({ "header": header.json(), "data": other }),
    };
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut out = create(path)?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

/// Data rows of a CSV written by [`write_csv`], keyed by column name.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let cols = r.headers()?.iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.map(|r| r.iter().map(String::from).collect())).collect::<std::result::Result<_, _>>()?;
    Ok((cols, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.csv");
        let h = Header::new("optimize", 7, serde_json::json!({"task": "Loc84"}));
        write_csv(&p, &h, &["x", "y"], vec![vec!["1".into(), "0.5".into()]]).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("# codesign-lab optimize"));
        assert!(text.contains("# seed: 7"));
        let (cols, rows) = read_csv(&p).unwrap();
        assert_eq!(cols, vec!["x", "y"]);
        assert_eq!(rows, vec![vec!["1", "0.5"]]);
    }

    #[test]
    fn json_embeds_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        let h = Header::new("analyze", 1, serde_json::json!({}));
        write_json(&p, &h, serde_json::json!({"a": 1})).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(v["header"]["seed"], 1);
        assert_eq!(v["a"], 1);
    }
}
