use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde_json::{json, Map, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Shortest decimal form that parses back to the same double.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

pub fn json_num(v: Option<f64>) -> Value {
    v.filter(|x| x.is_finite()).map_or(Value::Null, Value::from)
}

/// Output directory handle; every file goes directly under it.
pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> CliResult<Self> {
        fs::create_dir_all(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Ok(OutDir(path.to_path_buf()))
    }

    pub fn file(&self, name: &str) -> CliResult<PathBuf> {
        if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
            return Err(CliError::Usage(format!("invalid output name `{name}`")));
        }
        Ok(self.0.join(name))
    }

    pub fn write_json(&self, name: &str, v: &Value) -> CliResult<PathBuf> {
        let path = self.file(name)?;
        let mut w = BufWriter::new(fs::File::create(&path)?);
        serde_json::to_writer_pretty(&mut w, v)?;
        writeln!(w)?;
        w.flush()?;
        Ok(path)
    }

    pub fn writer(&self, name: &str) -> CliResult<(PathBuf, BufWriter<fs::File>)> {
        let path = self.file(name)?;
        let f = fs::File::create(&path)?;
        Ok((path, BufWriter::new(f)))
    }
}

/// Column table with an optional trailing text column.
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub status: Option<Vec<String>>,
}

impl Table {
    /// Writes `<stem>.csv` plus `<stem>.meta.json`, or a single `<stem>.json`.
    pub fn write(
        &self,
        out: &OutDir,
        stem: &str,
        format: Format,
        meta: Value,
    ) -> CliResult<Vec<PathBuf>> {
        match format {
            Format::Csv => {
                let (path, w) = out.writer(&format!("{stem}.csv"))?;
                let mut wr = csv::Writer::from_writer(w);
                let mut header = self.columns.clone();
                if self.status.is_some() {
                    header.push("status".into());
                }
                wr.write_record(&header)
                    .map_err(|e| CliError::Other(e.to_string()))?;
                for (i, row) in self.rows.iter().enumerate() {
                    let mut rec: Vec<String> =
                        row.iter().map(|v| v.map(num).unwrap_or_default()).collect();
                    if let Some(s) = &self.status {
                        rec.push(s[i].clone());
                    }
                    wr.write_record(&rec)
                        .map_err(|e| CliError::Other(e.to_string()))?;
                }
                wr.flush()?;
                let meta_path = out.write_json(&format!("{stem}.meta.json"), &meta)?;
                Ok(vec![path, meta_path])
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .enumerate()
                    .map(|(i, row)| {
                        let mut m = Map::new();
                        for (c, v) in self.columns.iter().zip(row) {
                            m.insert(c.clone(), json_num(*v));
                        }
                        if let Some(s) = &self.status {
                            m.insert("status".into(), Value::from(s[i].clone()));
                        }
                        Value::Object(m)
                    })
                    .collect();
                let doc = json!({ "metadata": meta, "columns": self.columns, "rows": rows });
                Ok(vec![out.write_json(&format!("{stem}.json"), &doc)?])
            }
        }
    }
}
