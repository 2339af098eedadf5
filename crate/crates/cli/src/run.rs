//! `dynwin run`: quench, evolve, and write the dataset, metadata and final
//! checkpoint into the output directory.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use log::info;
use serde::Serialize;
use serde_json::{json, Value};

use dynwin::ed::ground_state;
use dynwin::io::{write_checkpoint, ProfileWriter, PROFILE_FORMAT};
use dynwin::model::named_operator;
use dynwin::observables::measure_sz_profile;
use dynwin::tebd::{open_chain_window, Evolver, MoveEvent, StepReport};
use dynwin::window::{init_window, WindowState};
use dynwin::Result;

use crate::cache;
use crate::config::{Mode, RunConfig};

pub const METADATA_FORMAT: u32 = 1;
pub const PROFILES_FILE: &str = "profiles.csv";
pub const METADATA_FILE: &str = "run.json";
pub const CHECKPOINT_FILE: &str = "checkpoint_final.cbor";

struct Start {
    window: WindowState,
    e0: Option<f64>,
    ground_state: Value,
}

fn initial_window(cfg: &RunConfig) -> Result<Start> {
    let n = cfg.window_len();
    let q = cfg.origin();
    if cfg.mode == Mode::Finite {
        let (_, gs) = ground_state(n)?;
        let psi = gs.apply_site_operator(&named_operator(&cfg.quench_operator)?, q as usize)?;
        return Ok(Start { window: open_chain_window(&psi)?, e0: None, ground_state: json!({ "kind": "open chain exact" }) });
    }
    let (u, cached) = cache::ground_state(cfg.ground_state_cache.as_deref(), cfg.chi, cfg.gs_conv_tol)?;
    let ground_state = json!({
        "kind": "uniform",
        "model": cache::MODEL_KEY,
        "chi": u.chi,
        "conv_tol": cfg.gs_conv_tol,
        "canonical_residual": u.canonical_residual(),
        "cached": cached,
    });
    let e0 = u.e0;
    let mut window = init_window(Arc::new(u), n, cfg.window_offset())?;
    window.apply_local_operator(q, &named_operator(&cfg.quench_operator)?)?;
    Ok(Start { window, e0: Some(e0), ground_state })
}

#[derive(Serialize)]
struct EventRecord {
    t: f64,
    step: usize,
    #[serde(flatten)]
    event: MoveEvent,
    global_offset: i64,
    window_size: usize,
}

#[derive(Serialize)]
struct StepRecord {
    t: f64,
    truncation_weight: f64,
    window_size: usize,
    global_offset: i64,
    fidelity_left: f64,
    fidelity_right: f64,
    max_bond: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    energy_remainder: Option<f64>,
}

fn metadata(cfg: &RunConfig, start: &Start, initial_energy: Option<f64>, reports: &[StepReport], last: &WindowState) -> Value {
    let events: Vec<EventRecord> = reports
        .iter()
        .flat_map(|r| {
            r.events.iter().map(move |e| EventRecord {
                t: r.time,
                step: r.step,
                event: e.clone(),
                global_offset: r.global_offset,
                window_size: r.len,
            })
        })
        .collect();
    let steps: Vec<StepRecord> = reports
        .iter()
        .map(|r| StepRecord {
            t: r.time,
            truncation_weight: r.truncation_weight,
            window_size: r.len,
            global_offset: r.global_offset,
            fidelity_left: r.fidelity_left,
            fidelity_right: r.fidelity_right,
            max_bond: r.max_bond,
            energy_remainder: r.energy_remainder,
        })
        .collect();
    json!({
        "format_version": METADATA_FORMAT,
        "code_version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "profile": {
            "file": PROFILES_FILE,
            "format_version": PROFILE_FORMAT,
            "columns": dynwin::io::PROFILE_COLUMNS,
            "x_origin": "offset from the quench site",
            "quench_site": cfg.origin(),
        },
        "e0": start.e0,
        "ground_state": start.ground_state,
        "initial_window": { "offset": start.window.global_offset, "size": start.window.len() },
        "initial_energy_remainder": initial_energy,
        "events": events,
        "steps": steps,
        "final": {
            "t": last.time,
            "window_size": last.len(),
            "global_offset": last.global_offset,
            "truncation_total": last.truncation_total,
            "checkpoint": CHECKPOINT_FILE,
        },
    })
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out)?;
    let clock = Instant::now();
    let start = initial_window(cfg)?;
    let evo = cfg.evolution()?;
    let halo = if cfg.mode == Mode::Finite { 0 } else { cfg.halo };
    let origin = cfg.origin();
    let initial_energy = match cfg.mode {
        Mode::Finite => None,
        _ => Some(start.window.energy_remainder(&dynwin::model::build_mpo())?),
    };

    let meta_lines = vec![
        format!("mode: {:?}", cfg.mode).to_lowercase(),
        format!("chi: {}", cfg.chi),
        format!("dt: {}", cfg.dt),
        format!("x_origin: quench site {origin}"),
    ];
    let mut writer = ProfileWriter::new(BufWriter::new(File::create(cfg.out.join(PROFILES_FILE))?), &meta_lines)?;
    writer.write(&measure_sz_profile(&start.window, halo, origin)?)?;

    let mut ev = Evolver::new(start.window.clone(), evo)?;
    let total = ev.cfg.total_steps();
    let log_every = (total / 20).max(1);
    let reports = ev.run(|w, r| {
        writer.write(&measure_sz_profile(w, halo, origin)?)?;
        if r.step % log_every == 0 || !r.events.is_empty() {
            info!(
                "t = {:.2} ({}/{total}): window [{}, {}], χmax {}, events {} ({:.1?})",
                r.time,
                r.step,
                w.first_site(),
                w.last_site(),
                r.max_bond,
                r.events.len(),
                clock.elapsed()
            );
        }
        Ok(())
    })?;
    writer.finish()?;

    write_checkpoint(&cfg.out.join(CHECKPOINT_FILE), &ev.checkpoint())?;
    let meta = metadata(cfg, &start, initial_energy, &reports, &ev.window);
    write_json(&cfg.out.join(METADATA_FILE), &meta)?;
    info!("wrote {} in {:.1?}", cfg.out.display(), clock.elapsed());
    Ok(())
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| dynwin::Error::Format(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
