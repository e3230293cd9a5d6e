//! Merged summary tables over a run directory's CSV artifacts.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};

fn data_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().filter(|l| !l.starts_with('#') && !l.is_empty())
}

/// Final-iteration per-task per-regime accuracies from a regimes.csv.
pub fn summarize_regimes(text: &str) -> Result<Vec<(String, String, f64)>> {
    let mut rows = Vec::new();
    for line in data_lines(text).skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            bail!("malformed regimes row: {line}");
        }
        let iter: u64 = f[0].parse()?;
        rows.push((iter, f[1].to_string(), f[2].to_string(), f[3].parse::<f64>()?));
    }
    let last = rows.iter().map(|r| r.0).max().unwrap_or(0);
    Ok(rows
        .into_iter()
        .filter(|r| r.0 == last)
        .map(|(_, task, regime, acc)| (task, regime, acc))
        .collect())
}

/// Mean gap per (main_len, aux_len) cell from a sweep gap.csv.
pub fn summarize_gaps(text: &str) -> Result<Vec<(u32, u32, f64)>> {
    let mut cells: BTreeMap<(u32, u32), Vec<f64>> = BTreeMap::new();
    for line in data_lines(text).skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            bail!("malformed gap row: {line}");
        }
        cells
            .entry((f[0].parse()?, f[1].parse()?))
            .or_default()
            .push(f[3].parse()?);
    }
    Ok(cells
        .into_iter()
        .map(|((m, a), gaps)| (m, a, gaps.iter().sum::<f64>() / gaps.len() as f64))
        .collect())
}

/// Reads whatever artifacts exist under `dir`, prints a summary, and writes
/// summary.csv.
pub fn report_run(dir: &Path) -> Result<String> {
    let mut out = String::new();
    let regimes = dir.join("regimes.csv");
    if regimes.exists() {
        let text = std::fs::read_to_string(&regimes)
            .with_context(|| format!("reading {}", regimes.display()))?;
        out.push_str("kind,task,key,value\n");
        for (task, regime, acc) in summarize_regimes(&text)? {
            out.push_str(&format!("final_accuracy,{task},{regime},{acc}\n"));
        }
    }
    let gaps = dir.join("gap.csv");
    if gaps.exists() {
        let text = std::fs::read_to_string(&gaps)?;
        if out.is_empty() {
            out.push_str("kind,task,key,value\n");
        }
        for (m, a, gap) in summarize_gaps(&text)? {
            out.push_str(&format!("mean_gap,,main{m}_aux{a},{gap}\n"));
        }
    }
    if out.is_empty() {
        bail!("no regimes.csv or gap.csv under {}", dir.display());
    }
    let path = dir.join("summary.csv");
    let mut f = std::fs::File::create(&path)?;
    f.write_all(out.as_bytes())?;
    Ok(out)
}
