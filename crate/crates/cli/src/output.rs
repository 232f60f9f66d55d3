//! Writers for `ratios.csv`, `plotdata.csv` and `verdict.json`.
//!
//! Nothing time-dependent is written, so reruns of a seeded config are byte-identical.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::experiments::{Check, Outcome};
use htl_core::diagnostics::Verdict;

#[derive(Serialize)]
struct VerdictFile<'a> {
    experiment: &'a str,
    config_hash: &'a str,
    seed: Option<u64>,
    passed: bool,
    tol: f64,
    windows: Vec<Option<f64>>,
    checks: &'a [Check],
    accounting: &'a BTreeMap<String, f64>,
}

pub fn passed(out: &Outcome) -> bool {
    !out.checks.is_empty() && out.checks.iter().all(|c| c.verdict == Verdict::Pass)
}

pub fn write_all(dir: &Path, cfg: &ExperimentConfig, out: &Outcome) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let hash = cfg.hash();
    let multi = out.rows.iter().any(|r| r.series != out.rows[0].series);

    let mut w = csv::Writer::from_path(dir.join("ratios.csv"))?;
    if multi {
        w.write_record([
            "series",
            "x",
            "observed",
            "predicted",
            "ratio",
            "config_hash",
        ])?;
    } else {
        w.write_record(["x", "observed", "predicted", "ratio", "config_hash"])?;
    }
    for r in &out.rows {
        let mut rec = Vec::with_capacity(6);
        if multi {
            rec.push(r.series.clone());
        }
        rec.extend([
            num(r.x),
            num(r.observed),
            num(r.predicted),
            num(r.ratio()),
            hash.clone(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut p = csv::Writer::from_path(dir.join("plotdata.csv"))?;
    p.write_record(["series", "x", "log10_x", "ratio"])?;
    for r in &out.rows {
        p.write_record([r.series.clone(), num(r.x), num(r.x.log10()), num(r.ratio())])?;
    }
    p.flush()?;

    let v = VerdictFile {
        experiment: &cfg.experiment,
        config_hash: &hash,
        seed: cfg.seed,
        passed: passed(out),
        tol: cfg.tol,
        windows: cfg
            .windows
            .iter()
            .map(|t| t.is_finite().then_some(*t))
            .collect(),
        checks: &out.checks,
        accounting: &out.accounting,
    };
    let mut json = serde_json::to_string_pretty(&v).map_err(io::Error::other)?;
    json.push('\n');
    std::fs::write(dir.join("verdict.json"), json)
}

// shortest round-trip form, always with '.' as the decimal mark
fn num(v: f64) -> String {
    format!("{v:?}")
}
