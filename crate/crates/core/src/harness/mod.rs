//! Experiment orchestration: per-sample pipelines, ordered aggregation and
//! CSV/manifest output.

mod config;
mod dump;
mod pipelines;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

pub use config::{parse_list, parse_number, ConfigDocument, ExperimentConfig, ExperimentKind};
pub use dump::{decode_field, dump_field, encode_field, load_field, MAGIC, VERSION};
pub use pipelines::{columns, run_sample, SampleOutput};

use crate::error::{Error, Result};
use crate::stats::mean_stderr;

/// Runs fail once more than this fraction of samples error out.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: String,
    pub unit: &'static str,
}

impl Column {
    pub fn new(name: impl Into<String>, unit: &'static str) -> Self {
        Self {
            name: name.into(),
            unit,
        }
    }

    fn header(&self) -> String {
        format!("{} [{}]", self.name, self.unit)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub index: usize,
    pub values: std::result::Result<Vec<f64>, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub column: Column,
    pub mean: f64,
    pub stderr: f64,
    /// Finite values entering the mean.
    pub count: usize,
}

/// Mean and standard error per column over the finite values of the
/// successful records, in record order.
pub fn aggregate(columns: &[Column], records: &[SampleRecord]) -> Vec<Aggregate> {
    columns
        .iter()
        .enumerate()
        .map(|(j, col)| {
            let xs: Vec<f64> = records
                .iter()
                .filter_map(|r| r.values.as_ref().ok())
                .map(|v| v[j])
                .filter(|v| v.is_finite())
                .collect();
            let (mean, stderr) = mean_stderr(&xs);
            Aggregate {
                column: col.clone(),
                mean,
                stderr,
                count: xs.len(),
            }
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
    pub out_dir: Option<PathBuf>,
    pub dump_fields: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Timings {
    pub samples_ms: f64,
    pub aggregate_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug)]
pub struct ReportManifest {
    pub config_hash: String,
    pub version: &'static str,
    pub kind: ExperimentKind,
    pub columns: Vec<Column>,
    pub records: Vec<SampleRecord>,
    pub aggregates: Vec<Aggregate>,
    pub failed: usize,
    pub timings: Timings,
    pub files: Vec<PathBuf>,
}

impl ReportManifest {
    pub fn failure_fraction(&self) -> f64 {
        self.failed as f64 / self.records.len().max(1) as f64
    }

    pub fn aggregate(&self, name: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.column.name == name)
    }

    pub fn samples_csv(&self) -> String {
        samples_csv(&self.columns, &self.records)
    }

    pub fn aggregate_csv(&self) -> String {
        aggregate_csv(&self.aggregates)
    }

    pub fn manifest_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "config_hash = {}", self.config_hash);
        let _ = writeln!(s, "version = {}", self.version);
        let _ = writeln!(s, "kind = {}", self.kind);
        let _ = writeln!(s, "samples = {}", self.records.len());
        let _ = writeln!(s, "failed = {}", self.failed);
        let _ = writeln!(s, "records = samples.csv");
        let _ = writeln!(s, "aggregates = aggregate.csv");
        for r in &self.records {
            if let Err(e) = &r.values {
                let _ = writeln!(s, "error.{} = {}", r.index, e);
            }
        }
        let _ = writeln!(s, "time.samples_ms = {:.3}", self.timings.samples_ms);
        let _ = writeln!(s, "time.aggregate_ms = {:.3}", self.timings.aggregate_ms);
        let _ = writeln!(s, "time.total_ms = {:.3}", self.timings.total_ms);
        s
    }
}

fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn samples_csv(columns: &[Column], records: &[SampleRecord]) -> String {
    let mut s = String::from("sample_index,status");
    for c in columns {
        s.push(',');
        s.push_str(&c.header());
    }
    s.push('\n');
    for r in records {
        let _ = write!(s, "{}", r.index);
        match &r.values {
            Ok(v) => {
                s.push_str(",ok");
                for x in v {
                    s.push(',');
                    s.push_str(&fmt_value(*x));
                }
            }
            Err(_) => {
                s.push_str(",error");
                for _ in columns {
                    s.push(',');
                }
            }
        }
        s.push('\n');
    }
    s
}

pub fn aggregate_csv(aggs: &[Aggregate]) -> String {
    let mut s = String::from("quantity,unit,mean,stderr,count\n");
    for a in aggs {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            a.column.name,
            a.column.unit,
            fmt_value(a.mean),
            fmt_value(a.stderr),
            a.count
        );
    }
    s
}

/// Executes the sample pipeline for every index, aggregates in index order and
/// writes `samples.csv`, `aggregate.csv`, `manifest.txt` and `config.txt`
/// when an output directory is given. Errors with
/// [`Error::TooManyFailures`] (after writing) if more than 10% of samples fail.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<ReportManifest> {
    let t0 = Instant::now();
    let columns = columns(config);
    let n = pipelines::effective_samples(config);
    let dump_dir = match (&opts.out_dir, opts.dump_fields) {
        (Some(dir), true) => {
            let p = dir.join("fields");
            fs::create_dir_all(&p)?;
            Some(p)
        }
        _ => None,
    };
    let body = || -> Result<Vec<SampleRecord>> {
        let shared = pipelines::prepare(config)?;
        let outs: Vec<std::result::Result<SampleOutput, String>> = (0..n)
            .into_par_iter()
            .map(|i| run_sample(config, &shared, i).map_err(|e| e.to_string()))
            .collect();
        let mut records = Vec::with_capacity(n);
        for (i, out) in outs.into_iter().enumerate() {
            let values = match out {
                Ok(o) => {
                    if let Some(dir) = &dump_dir {
                        for (name, field, kind) in &o.fields {
                            dump_field(field, *kind, &dir.join(format!("{name}_{i:05}.hgf")))?;
                        }
                    }
                    Ok(o.values)
                }
                Err(e) => Err(e.replace(['\n', ','], ";")),
            };
            records.push(SampleRecord { index: i, values });
        }
        Ok(records)
    };
    let records = if opts.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(body)?
    } else {
        body()?
    };
    for r in &records {
        if let Ok(v) = &r.values {
            shared_check(v, columns.len())?;
        }
    }
    let t1 = Instant::now();
    let aggregates = aggregate(&columns, &records);
    let failed = records.iter().filter(|r| r.values.is_err()).count();
    let t2 = Instant::now();
    let mut manifest = ReportManifest {
        config_hash: config.hash(),
        version: env!("CARGO_PKG_VERSION"),
        kind: config.kind,
        columns,
        records,
        aggregates,
        failed,
        timings: Timings {
            samples_ms: (t1 - t0).as_secs_f64() * 1e3,
            aggregate_ms: (t2 - t1).as_secs_f64() * 1e3,
            total_ms: (t2 - t0).as_secs_f64() * 1e3,
        },
        files: Vec::new(),
    };
    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir)?;
        for (name, text) in [
            ("samples.csv", manifest.samples_csv()),
            ("aggregate.csv", manifest.aggregate_csv()),
            ("config.txt", config.document.canonical()),
            ("manifest.txt", manifest.manifest_text()),
        ] {
            let p = dir.join(name);
            fs::write(&p, text)?;
            manifest.files.push(p);
        }
    }
    if manifest.failure_fraction() > MAX_FAILURE_FRACTION {
        return Err(Error::TooManyFailures {
            failed: manifest.failed,
            total: manifest.records.len(),
        });
    }
    Ok(manifest)
}

fn shared_check(values: &[f64], n: usize) -> Result<()> {
    if values.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "pipeline produced {} values for {n} columns",
            values.len()
        )));
    }
    Ok(())
}

/// Parsed `samples.csv`.
pub fn parse_samples_csv(text: &str) -> Result<(Vec<Column>, Vec<SampleRecord>)> {
    let corrupt = |m: String| Error::Corrupt(format!("samples.csv: {m}"));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| corrupt("empty".into()))?;
    let names: Vec<&str> = header.split(',').collect();
    if names.len() < 2 || names[0] != "sample_index" || names[1] != "status" {
        return Err(corrupt("unexpected header".into()));
    }
    let columns = names[2..]
        .iter()
        .map(|h| {
            let (name, unit) = h
                .rsplit_once(" [")
                .and_then(|(n, u)| u.strip_suffix(']').map(|u| (n, u)))
                .ok_or_else(|| corrupt(format!("column '{h}' lacks a unit")))?;
            Ok(Column::new(name, leak_unit(unit)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != columns.len() + 2 {
            return Err(corrupt(format!("row '{line}' has {} fields", f.len())));
        }
        let index = f[0]
            .parse()
            .map_err(|_| corrupt(format!("bad index '{}'", f[0])))?;
        let values = if f[1] == "ok" {
            Ok(f[2..]
                .iter()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| corrupt(format!("bad value '{v}'")))
                })
                .collect::<Result<Vec<_>>>()?)
        } else {
            Err(f[1].to_string())
        };
        records.push(SampleRecord { index, values });
    }
    Ok((columns, records))
}

fn leak_unit(unit: &str) -> &'static str {
    pipelines::UNITS
        .iter()
        .find(|u| **u == unit)
        .copied()
        .unwrap_or("?")
}

pub fn parse_aggregate_csv(text: &str) -> Result<Vec<(String, f64, f64, usize)>> {
    let corrupt = |m: String| Error::Corrupt(format!("aggregate.csv: {m}"));
    let mut lines = text.lines();
    if lines.next() != Some("quantity,unit,mean,stderr,count") {
        return Err(corrupt("unexpected header".into()));
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(corrupt(format!("row '{line}'")));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| corrupt(format!("bad value '{s}'")))
            };
            let count = f[4]
                .parse()
                .map_err(|_| corrupt(format!("bad count '{}'", f[4])))?;
            Ok((f[0].to_string(), num(f[2])?, num(f[3])?, count))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportCheck {
    pub aggregates: Vec<Aggregate>,
    /// Largest relative difference between stored and recomputed aggregates.
    pub max_difference: f64,
}

/// Recomputes the aggregate table of an output directory from its
/// per-sample records.
pub fn report(dir: &Path) -> Result<ReportCheck> {
    let (columns, records) = parse_samples_csv(&fs::read_to_string(dir.join("samples.csv"))?)?;
    let stored = parse_aggregate_csv(&fs::read_to_string(dir.join("aggregate.csv"))?)?;
    let aggregates = aggregate(&columns, &records);
    if stored.len() != aggregates.len() {
        return Err(Error::Corrupt(format!(
            "{} stored aggregates for {} columns",
            stored.len(),
            aggregates.len()
        )));
    }
    let rel = |a: f64, b: f64| {
        if a.is_nan() && b.is_nan() || a == b {
            0.0
        } else {
            (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
        }
    };
    let mut max_difference: f64 = 0.0;
    for ((name, mean, stderr, count), a) in stored.iter().zip(&aggregates) {
        if *name != a.column.name || *count != a.count {
            return Err(Error::Corrupt(format!(
                "aggregate row '{name}' disagrees with the records"
            )));
        }
        max_difference = max_difference
            .max(rel(*mean, a.mean))
            .max(rel(*stderr, a.stderr));
    }
    Ok(ReportCheck {
        aggregates,
        max_difference,
    })
}
