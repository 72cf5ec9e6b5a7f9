//! CSV tables, atomic file writes and the run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use risklab::LabelledDataset;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Flag(bool),
}

impl Cell {
    /// Floats carry 17 significant digits so they parse back exactly.
    fn render(self) -> String {
        match self {
            // adding 0.0 folds −0 into +0
            Cell::Float(v) => format!("{:.16e}", v + 0.0),
            Cell::Int(v) => v.to_string(),
            Cell::Flag(b) => u8::from(b).to_string(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Flag(v)
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> anyhow::Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.render()))?;
        }
        w.into_inner().map_err(|e| anyhow::anyhow!("flushing CSV: {e}"))
    }
}

/// Writes through a temporary sibling file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let name = path.file_name().context("output path has no file name")?.to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = std::fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))
}

pub fn dataset_table(name: &str, data: &LabelledDataset) -> Table {
    let mut header = vec!["label".to_string()];
    header.extend((0..data.p()).map(|k| format!("f{k}")));
    let mut t = Table { name: name.into(), header, rows: Vec::with_capacity(data.n()) };
    for i in 0..data.n() {
        let mut row = vec![Cell::Int(data.label(i) as u64)];
        row.extend(data.row(i).iter().map(|&v| Cell::Float(v)));
        t.rows.push(row);
    }
    t
}

fn reader(path: &Path) -> anyhow::Result<csv::Reader<std::fs::File>> {
    csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))
}

/// Reads `label,f0,f1,...`. The class count is one past the largest label,
/// and at least two.
pub fn read_dataset(path: &Path) -> anyhow::Result<LabelledDataset> {
    let mut rdr = reader(path)?;
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("label") || header.len() < 2 {
        bail!("{}: expected header label,f0,f1,...", path.display());
    }
    let p = header.len() - 1;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let at = |k: usize| format!("{} row {}, column {}", path.display(), i + 1, k);
        labels.push(rec[0].trim().parse::<usize>().with_context(|| at(0))?);
        for k in 1..=p {
            features.push(rec[k].trim().parse::<f64>().with_context(|| at(k))?);
        }
    }
    let classes = labels.iter().copied().max().unwrap_or(0).max(1) + 1;
    Ok(LabelledDataset::new(features, p, labels, classes)?)
}

/// Reads named float columns from a CSV with a header row.
pub fn read_columns(path: &Path, names: &[&str]) -> anyhow::Result<Vec<Vec<f64>>> {
    let mut rdr = reader(path)?;
    let header = rdr.headers()?.clone();
    let idx = names
        .iter()
        .map(|n| header.iter().position(|h| h == *n).with_context(|| format!("{}: missing column `{n}`", path.display())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (c, &k) in idx.iter().enumerate() {
            let v = rec[k].trim().parse::<f64>().with_context(|| format!("{} row {}: column {}", path.display(), i + 1, names[c]))?;
            cols[c].push(v);
        }
    }
    Ok(cols)
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetRecord {
    pub role: String,
    pub source: String,
    pub sha256: String,
    pub n: usize,
    pub p: usize,
    pub classes: usize,
}

impl DatasetRecord {
    pub fn new(role: &str, source: &str, data: &LabelledDataset) -> Self {
        Self { role: role.into(), source: source.into(), sha256: data.fingerprint(), n: data.n(), p: data.p(), classes: data.class_count() }
    }
}

/// Everything a command produced, before it is written out.
#[derive(Debug, Default)]
pub struct Report {
    pub tables: Vec<Table>,
    pub blobs: Vec<(String, Vec<u8>)>,
    pub datasets: Vec<DatasetRecord>,
    pub steps: u64,
    pub results: Value,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    parameters: &'a Value,
    seed: Option<u64>,
    code_version: &'static str,
    datasets: &'a [DatasetRecord],
    steps: u64,
    wall_clock_seconds: f64,
    outputs: Vec<&'a str>,
    results: &'a Value,
}

/// Writes every table and blob into `dir` plus `manifest.json`, or the single
/// table to stdout when no directory is given.
pub fn emit(command: &str, parameters: &Value, report: &Report, dir: Option<&Path>, seconds: f64) -> anyhow::Result<Vec<PathBuf>> {
    let Some(dir) = dir else {
        let table = report.tables.first().context("command produced no table")?;
        std::io::stdout().lock().write_all(&table.to_bytes()?)?;
        return Ok(Vec::new());
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    for t in &report.tables {
        let path = dir.join(format!("{}.csv", t.name));
        write_atomic(&path, &t.to_bytes()?)?;
        written.push(path);
    }
    for (name, bytes) in &report.blobs {
        let path = dir.join(name);
        write_atomic(&path, bytes)?;
        written.push(path);
    }
    let names: Vec<String> = written.iter().map(|p| p.file_name().expect("file").to_string_lossy().into_owned()).collect();
    let manifest = Manifest {
        command,
        parameters,
        seed: parameters.get("seed").and_then(Value::as_u64),
        code_version: env!("CARGO_PKG_VERSION"),
        datasets: &report.datasets,
        steps: report.steps,
        wall_clock_seconds: seconds,
        outputs: names.iter().map(String::as_str).collect(),
        results: &report.results,
    };
    let path = dir.join("manifest.json");
    write_atomic(&path, &serde_json::to_vec_pretty(&manifest)?)?;
    written.push(path);
    Ok(written)
}
