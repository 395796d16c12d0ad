//! Result rows, their CSV encoding and the generated plot script.
//!
//! Floats are written with 9 significant digits in scientific notation and
//! rows are sorted by key, so identical results give byte-identical files.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};

pub const CSV_HEADER: [&str; 9] =
    ["experiment", "variant", "d", "k", "seed", "repeat", "kl", "steps", "wall_time_s"];

/// Step count of a run, or the marker for a search that hit its cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Steps {
    Count(usize),
    CapExceeded,
}

impl fmt::Display for Steps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Steps::Count(n) => write!(f, "{n}"),
            Steps::CapExceeded => f.write_str("cap_exceeded"),
        }
    }
}

impl std::str::FromStr for Steps {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "cap_exceeded" {
            return Ok(Steps::CapExceeded);
        }
        s.parse().map(Steps::Count).map_err(|_| format!("bad steps value {s:?}"))
    }
}

/// KL estimate of a cell, or the marker for a diverged chain batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KlValue {
    Value(f64),
    Diverged,
}

impl KlValue {
    pub fn value(&self) -> Option<f64> {
        match self {
            KlValue::Value(v) => Some(*v),
            KlValue::Diverged => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub variant: String,
    pub d: usize,
    pub k: usize,
    pub seed: u64,
    pub repeat: usize,
    pub kl: KlValue,
    pub steps: Steps,
    pub wall_time_s: f64,
}

pub type RowKey = (String, String, usize, usize, u64, usize);

impl ResultRow {
    pub fn key(&self) -> RowKey {
        (self.experiment.clone(), self.variant.clone(), self.d, self.k, self.seed, self.repeat)
    }
}

/// `x` with 9 significant digits.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.is_finite() {
        format!("{x:.8e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

pub fn parse_float(s: &str) -> Result<f64> {
    Ok(match s {
        "nan" => f64::NAN,
        "inf" => f64::INFINITY,
        "-inf" => f64::NEG_INFINITY,
        _ => s.parse().with_context(|| format!("bad number {s:?}"))?,
    })
}

/// Sorts rows by key and rejects duplicate keys.
pub fn sort_rows(rows: &mut [ResultRow]) -> Result<()> {
    rows.sort_by_key(|r| r.key());
    if let Some(w) = rows.windows(2).find(|w| w[0].key() == w[1].key()) {
        bail!("duplicate result key {:?}", w[0].key());
    }
    Ok(())
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut rows = rows.to_vec();
    sort_rows(&mut rows)?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &rows {
        let kl = match r.kl {
            KlValue::Value(v) => format_float(v),
            KlValue::Diverged => "diverged".to_string(),
        };
        w.write_record([
            r.experiment.clone(),
            r.variant.clone(),
            r.d.to_string(),
            r.k.to_string(),
            r.seed.to_string(),
            r.repeat.to_string(),
            kl,
            r.steps.to_string(),
            format_float(r.wall_time_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    create_parent(path)?;
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_csv(rows, std::io::BufWriter::new(file)).with_context(|| format!("writing {}", path.display()))
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_csv(file).with_context(|| format!("reading {}", path.display()))
}

pub fn parse_csv<R: std::io::Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        bail!("unexpected header {header:?}");
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let kl = match &rec[6] {
            "diverged" => KlValue::Diverged,
            s => KlValue::Value(parse_float(s)?),
        };
        rows.push(ResultRow {
            experiment: rec[0].to_string(),
            variant: rec[1].to_string(),
            d: rec[2].parse()?,
            k: rec[3].parse()?,
            seed: rec[4].parse()?,
            repeat: rec[5].parse()?,
            kl,
            steps: rec[7].parse().map_err(anyhow::Error::msg)?,
            wall_time_s: parse_float(&rec[8])?,
        });
    }
    Ok(rows)
}

/// Mean KL over repeats for `(variant, d, k)`; `None` if absent or diverged.
pub fn mean_kl(rows: &[ResultRow], variant: &str, d: usize, k: usize) -> Option<f64> {
    let sel: Vec<&ResultRow> = rows.iter().filter(|r| r.variant == variant && r.d == d && r.k == k).collect();
    if sel.is_empty() {
        return None;
    }
    let mut total = 0.0;
    for r in &sel {
        match r.kl {
            KlValue::Value(v) => total += v,
            KlValue::Diverged => return None,
        }
    }
    Some(total / sel.len() as f64)
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

/// Variant names in first-seen sorted order.
pub fn variants_in(rows: &[ResultRow]) -> Vec<String> {
    rows.iter().map(|r| r.variant.clone()).collect::<BTreeSet<_>>().into_iter().collect()
}

fn py_string(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

/// Self-contained matplotlib script reading `csv_path`.
///
/// KL panels plot the mean over repeats for the first `k` per variant on a
/// log axis after flooring values `<= 0` at `log_floor`; step counts are
/// plotted when present, with capped searches drawn at the cap line.
pub fn plot_script(rows: &[ResultRow], csv_path: &Path, log_floor: f64) -> String {
    let variants = variants_in(rows);
    let list = variants.iter().map(|v| py_string(v)).collect::<Vec<_>>().join(", ");
    let title = rows.first().map(|r| r.experiment.as_str()).unwrap_or("results");
    format!(
        r#"#!/usr/bin/env python3
"""Plots {title} results. Regenerate with `ald plot <csv> <script>`."""
import csv
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

CSV_PATH = {csv}
VARIANTS = [{list}]
LOG_FLOOR = {floor}
STEP_SEARCH = {search}


def load(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def main():
    rows = load(sys.argv[1] if len(sys.argv) > 1 else CSV_PATH)
    k_first = min(int(r["k"]) for r in rows) if rows else 0
    kl = defaultdict(list)
    steps = {{}}
    for r in rows:
        key = (r["variant"], int(r["d"]))
        if int(r["k"]) == k_first and r["kl"] != "diverged":
            kl[key].append(float(r["kl"]))
        steps[key] = r["steps"]
    has_search = STEP_SEARCH or any(s == "cap_exceeded" for s in steps.values())
    panels = 2 if has_search else 1
    fig, axes = plt.subplots(1, panels, figsize=(6 * panels, 4), squeeze=False)
    ax = axes[0][0]
    for v in VARIANTS:
        ds = sorted(d for (name, d) in kl if name == v)
        means = [sum(kl[(v, d)]) / len(kl[(v, d)]) for d in ds]
        ax.plot(ds, [m if m > 0 else LOG_FLOOR for m in means], marker="o", label=v)
    ax.set_yscale("log")
    ax.set_xlabel("d")
    ax.set_ylabel("KL (k = %d)" % k_first)
    ax.legend()
    if has_search:
        ax = axes[0][1]
        counts = [int(s) for s in steps.values() if s != "cap_exceeded"]
        cap = max(counts) if counts else 1
        for v in VARIANTS:
            ds = sorted(d for (name, d) in steps if name == v)
            ys = [int(steps[(v, d)]) if steps[(v, d)] != "cap_exceeded" else None for d in ds]
            ax.plot([d for d, y in zip(ds, ys) if y is not None], [y for y in ys if y is not None], marker="o", label=v)
            capped = [d for d, y in zip(ds, ys) if y is None]
            if capped:
                ax.scatter(capped, [cap * 1.1] * len(capped), marker="^", label=v + " (cap exceeded)")
        ax.set_xlabel("d")
        ax.set_ylabel("steps")
        ax.legend()
    fig.tight_layout()
    out = sys.argv[2] if len(sys.argv) > 2 else CSV_PATH.rsplit(".", 1)[0] + ".png"
    fig.savefig(out, dpi=150)


if __name__ == "__main__":
    main()
"#,
        title = title,
        csv = py_string(&csv_path.to_string_lossy()),
        list = list,
        floor = format_float(log_floor),
        search = if title == crate::config::ExperimentKind::Fig1StepsToAccuracy.as_str() { "True" } else { "False" },
    )
}

pub fn emit_plot_script(rows: &[ResultRow], csv_path: &Path, log_floor: f64, path: &Path) -> Result<()> {
    create_parent(path)?;
    std::fs::write(path, plot_script(rows, csv_path, log_floor))
        .with_context(|| format!("writing {}", path.display()))
}
