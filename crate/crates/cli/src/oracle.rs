//! `dynwin oracle`: exact evolution of a quenched open chain, written in the
//! profile dataset format.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use dynwin::ed::{evolve_exact, ground_state, sz_profile, MAX_SITES};
use dynwin::io::{ProfileWriter, PROFILE_COLUMNS, PROFILE_FORMAT};
use dynwin::model::named_operator;
use dynwin::observables::{ProfileEntry, ProfileRecord};
use dynwin::{Error, Result};

use crate::run::{write_json, METADATA_FORMAT, METADATA_FILE, PROFILES_FILE};

#[derive(Args)]
pub struct OracleArgs {
    /// Chain length (even, at most the exact-diagonalization limit).
    #[arg(long, default_value_t = 8)]
    pub sites: usize,
    /// Quenched chain site (default: centre); positions are measured from it.
    #[arg(long)]
    pub quench_site: Option<usize>,
    #[arg(long, default_value = "sp")]
    pub quench_op: String,
    #[arg(long, default_value_t = 2.0)]
    pub tmax: f64,
    /// Output spacing.
    #[arg(long, default_value_t = 0.05)]
    pub dt: f64,
    /// Largest internal Krylov step.
    #[arg(long, default_value_t = 0.01)]
    pub dt_internal: f64,
    #[arg(long, default_value = "dynwin-oracle")]
    pub out: PathBuf,
}

pub fn oracle(args: &OracleArgs) -> Result<()> {
    let l = args.sites;
    if l > MAX_SITES {
        return Err(Error::ResourceGuard(format!("exact evolution limited to {MAX_SITES} sites, requested {l}")));
    }
    if !(args.dt > 0.0 && args.tmax >= 0.0) {
        return Err(Error::Invalid(format!("need dt > 0 and tmax ≥ 0, got dt = {}, tmax = {}", args.dt, args.tmax)));
    }
    let q = args.quench_site.unwrap_or(l / 2);
    if q >= l {
        return Err(Error::Invalid(format!("quench site {q} lies outside the chain 0..{l}")));
    }
    let op = named_operator(&args.quench_op)?;
    std::fs::create_dir_all(&args.out)?;
    let (e_gs, gs) = ground_state(l)?;
    let mut psi = gs.apply_site_operator(&op, q)?;

    let meta_lines = vec!["mode: oracle".to_string(), format!("sites: {l}"), format!("x_origin: quench site {q}")];
    let mut writer = ProfileWriter::new(BufWriter::new(File::create(args.out.join(PROFILES_FILE))?), &meta_lines)?;
    let record = |t: f64, profile: Vec<f64>| ProfileRecord {
        t,
        entries: profile
            .into_iter()
            .enumerate()
            .map(|(i, sz)| ProfileEntry { x: i as i64 - q as i64, sz, in_window: true })
            .collect(),
    };
    writer.write(&record(0.0, sz_profile(&psi)))?;
    let steps = (args.tmax / args.dt).round() as usize;
    for k in 1..=steps {
        psi = evolve_exact(&psi, args.dt, args.dt_internal)?;
        writer.write(&record(k as f64 * args.dt, sz_profile(&psi)))?;
    }
    writer.finish()?;
    let meta = json!({
        "format_version": METADATA_FORMAT,
        "code_version": env!("CARGO_PKG_VERSION"),
        "kind": "oracle",
        "sites": l,
        "quench_site": q,
        "quench_operator": args.quench_op,
        "t_max": steps as f64 * args.dt,
        "dt": args.dt,
        "dt_internal": args.dt_internal,
        "ground_state_energy": e_gs,
        "profile": {
            "file": PROFILES_FILE,
            "format_version": PROFILE_FORMAT,
            "columns": PROFILE_COLUMNS,
            "x_origin": "offset from the quench site",
            "quench_site": q,
        },
    });
    write_json(&args.out.join(METADATA_FILE), &meta)
}
