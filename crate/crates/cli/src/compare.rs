//! `dynwin compare`: per-position series, absolute differences and summary
//! statistics for two profile datasets.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use dynwin::io::read_profiles;
use dynwin::observables::{diff_series, series_at_flagged};
use dynwin::{Error, Result};

pub const REPORT_FORMAT: u32 = 1;

#[derive(Args)]
pub struct CompareArgs {
    pub dataset_a: PathBuf,
    pub dataset_b: PathBuf,
    /// Positions (relative to the quench site), comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0, 10, 20, 29])]
    pub positions: Vec<i64>,
    /// |Δ| above which a position counts as breached.
    #[arg(long, default_value_t = 1e-3)]
    pub breach: f64,
    /// Report file (JSON); printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct PositionReport {
    pub x: i64,
    pub t: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub a_in_window: Vec<bool>,
    pub diff: Vec<f64>,
    pub max: f64,
    pub mean: f64,
    /// First time |Δ| exceeds the breach threshold.
    pub breach_time: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub format_version: u32,
    pub dataset_a: PathBuf,
    pub dataset_b: PathBuf,
    pub breach_threshold: f64,
    pub positions: Vec<PositionReport>,
    pub max: f64,
    pub mean: f64,
}

fn nearest(series: &[(f64, f64)], t: f64) -> f64 {
    series.iter().min_by(|p, q| (p.0 - t).abs().total_cmp(&(q.0 - t).abs())).map_or(f64::NAN, |p| p.1)
}

pub fn build_report(args: &CompareArgs) -> Result<Report> {
    let a = read_profiles(&args.dataset_a)?;
    let b = read_profiles(&args.dataset_b)?;
    let mut positions = Vec::new();
    for &x in &args.positions {
        let sa = series_at_flagged(&a, x).map_err(|e| Error::Invalid(format!("{}: {e}", args.dataset_a.display())))?;
        let sb = series_at_flagged(&b, x).map_err(|e| Error::Invalid(format!("{}: {e}", args.dataset_b.display())))?;
        let pa: Vec<(f64, f64)> = sa.iter().map(|p| (p.0, p.1)).collect();
        let pb: Vec<(f64, f64)> = sb.iter().map(|p| (p.0, p.1)).collect();
        let d = diff_series(&pa, &pb)?;
        let mut rep = PositionReport {
            x,
            t: Vec::new(),
            a: Vec::new(),
            b: Vec::new(),
            a_in_window: Vec::new(),
            diff: Vec::new(),
            max: 0.0,
            mean: 0.0,
            breach_time: d.iter().find(|p| p.1 > args.breach).map(|p| p.0),
        };
        for &(t, diff) in &d {
            let ka = sa.partition_point(|p| p.0 < t);
            rep.t.push(t);
            rep.a.push(sa[ka].1);
            rep.a_in_window.push(sa[ka].2);
            rep.b.push(nearest(&pb, t));
            rep.diff.push(diff);
        }
        rep.max = rep.diff.iter().copied().fold(0.0, f64::max);
        rep.mean = rep.diff.iter().sum::<f64>() / rep.diff.len() as f64;
        positions.push(rep);
    }
    let n: usize = positions.iter().map(|p| p.diff.len()).sum();
    Ok(Report {
        format_version: REPORT_FORMAT,
        dataset_a: args.dataset_a.clone(),
        dataset_b: args.dataset_b.clone(),
        breach_threshold: args.breach,
        max: positions.iter().map(|p| p.max).fold(0.0, f64::max),
        mean: positions.iter().flat_map(|p| &p.diff).sum::<f64>() / n.max(1) as f64,
        positions,
    })
}

pub fn compare(args: &CompareArgs) -> Result<()> {
    let report = build_report(args)?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?;
    for p in &report.positions {
        log::info!("x = {:>4}: max |Δ| {:.3e}, mean {:.3e}, breach {:?}", p.x, p.max, p.mean, p.breach_time);
    }
    match &args.out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}
