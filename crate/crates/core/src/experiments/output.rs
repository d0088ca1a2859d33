use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, Kind};
use crate::error::{Error, Result};

/// One measured row. Quantities a kind does not produce are `None` and
/// written as empty CSV fields.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub kind: Kind,
    pub model_id: u64,
    /// Stream index of the sampler used for this row.
    pub seed: u64,
    /// Position of the row within its `n`.
    pub sample: usize,
    pub n: usize,
    pub m: usize,
    pub beta_used: Option<f64>,
    pub u: Option<f64>,
    pub delta: Option<f64>,
    pub distance_global_gibbs: Option<f64>,
    pub distance_local_gibbs: Option<f64>,
    pub dim_t: Option<usize>,
    pub d_g: Option<usize>,
    pub d_eff: Option<f64>,
    pub s_pop: Option<f64>,
    pub runtime_ms: u64,
    /// Kind-specific columns, in a fixed order per kind.
    pub extras: Vec<(&'static str, Option<f64>)>,
}

impl ExperimentRecord {
    pub fn new(kind: Kind, n: usize, m: usize, sample: usize) -> Self {
        Self {
            kind,
            model_id: 0,
            seed: 0,
            sample,
            n,
            m,
            beta_used: None,
            u: None,
            delta: None,
            distance_global_gibbs: None,
            distance_local_gibbs: None,
            dim_t: None,
            d_g: None,
            d_eff: None,
            s_pop: None,
            runtime_ms: 0,
            extras: Vec::new(),
        }
    }

    pub fn extra(&self, name: &str) -> Option<f64> {
        self.extras.iter().find(|(k, _)| *k == name).and_then(|(_, v)| *v)
    }

    pub fn set(&mut self, name: &'static str, value: Option<f64>) {
        match self.extras.iter_mut().find(|(k, _)| *k == name) {
            Some(slot) => slot.1 = value,
            None => self.extras.push((name, value)),
        }
    }

    fn numeric_columns(&self) -> Vec<(&'static str, Option<f64>)> {
        let mut out = vec![
            ("beta_used", self.beta_used),
            ("u", self.u),
            ("delta", self.delta),
            ("distance_global_gibbs", self.distance_global_gibbs),
            ("distance_local_gibbs", self.distance_local_gibbs),
            ("dim_T", self.dim_t.map(|x| x as f64)),
            ("D_G", self.d_g.map(|x| x as f64)),
            ("d_eff", self.d_eff),
            ("S_pop", self.s_pop),
        ];
        out.extend(self.extras.iter().copied());
        out
    }
}

pub const BASE_COLUMNS: [&str; 16] = [
    "kind",
    "model_id",
    "seed",
    "sample",
    "n",
    "m",
    "beta_used",
    "u",
    "delta",
    "distance_global_gibbs",
    "distance_local_gibbs",
    "dim_T",
    "D_G",
    "d_eff",
    "S_pop",
    "runtime_ms",
];

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}


/// CSV text for rows sharing one `(kind, n)`.
pub fn records_to_csv(records: &[ExperimentRecord]) -> Result<String> {
    let names: Vec<&str> = records.first().map(|r| r.extras.iter().map(|e| e.0).collect()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = BASE_COLUMNS.iter().copied().chain(names.iter().copied()).collect();
    w.write_record(&header).map_err(csv_err)?;
    for r in records {
        let own: Vec<&str> = r.extras.iter().map(|e| e.0).collect();
        if own != names {
            return Err(Error::InvalidArgument(format!("records disagree on columns: {own:?} vs {names:?}")));
        }
        let mut row = vec![
            r.kind.name().to_string(),
            r.model_id.to_string(),
            r.seed.to_string(),
            r.sample.to_string(),
            r.n.to_string(),
            r.m.to_string(),
            opt(r.beta_used),
            opt(r.u),
            opt(r.delta),
            opt(r.distance_global_gibbs),
            opt(r.distance_local_gibbs),
            opt(r.dim_t),
            opt(r.d_g),
            opt(r.d_eff),
            opt(r.s_pop),
            r.runtime_ms.to_string(),
        ];
        row.extend(r.extras.iter().map(|e| opt(e.1)));
        w.write_record(&row).map_err(csv_err)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Mean and sample standard deviation of the finite values.
pub fn mean_std(xs: impl IntoIterator<Item = f64>) -> Option<(f64, f64, usize)> {
    let v: Vec<f64> = xs.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    Some((mean, std, v.len()))
}

/// Per-`n` mean, standard deviation and count of every numeric column.
pub fn aggregates(records: &[ExperimentRecord]) -> BTreeMap<usize, BTreeMap<&'static str, Value>> {
    let mut by_n: BTreeMap<usize, Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        by_n.entry(r.n).or_default().push(r);
    }
    by_n.into_iter()
        .map(|(n, rows)| {
            let mut cols: BTreeMap<&'static str, Value> = BTreeMap::new();
            cols.insert("rows", json!(rows.len()));
            let names: Vec<&'static str> = rows[0].numeric_columns().iter().map(|c| c.0).collect();
            for (i, name) in names.iter().enumerate() {
                let vals = rows.iter().filter_map(|r| r.numeric_columns().get(i).and_then(|c| c.1));
                if let Some((mean, std, count)) = mean_std(vals) {
                    cols.insert(name, json!({ "mean": mean, "std": std, "count": count }));
                }
            }
            (n, cols)
        })
        .collect()
}

/// Files of one run, keyed by name relative to the output directory.
#[derive(Debug, Clone, Default)]
pub struct RunFiles {
    pub files: BTreeMap<String, String>,
}

impl RunFiles {
    /// SHA-256 over `name NUL length NUL bytes` of every file in name order.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for (name, body) in &self.files {
            h.update(name.as_bytes());
            h.update([0]);
            h.update(body.len().to_string().as_bytes());
            h.update([0]);
            h.update(body.as_bytes());
        }
        hex(&h.finalize())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_hash(body: &str) -> String {
    hex(&Sha256::digest(body.as_bytes()))
}

/// JSON summary: config echo, data hash, aggregates, flags and kind notes.
pub fn summary_json(
    config: &ExperimentConfig,
    data: &RunFiles,
    records: &[ExperimentRecord],
    flags: &[String],
    notes: Value,
) -> Result<String> {
    let files: BTreeMap<&String, String> = data.files.iter().map(|(k, v)| (k, file_hash(v))).collect();
    let aggregates: BTreeMap<String, _> = aggregates(records).into_iter().map(|(n, v)| (n.to_string(), v)).collect();
    let v = json!({
        "kind": config.kind()?.name(),
        "config": config,
        "content_hash": data.content_hash(),
        "files": files,
        "records": records.len(),
        "aggregates": aggregates,
        "flags": flags,
        "notes": notes,
    });
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}
