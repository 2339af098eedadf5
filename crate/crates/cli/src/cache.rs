//! Ground states cached on disk, keyed by (model, chi, convergence tolerance).

use std::path::{Path, PathBuf};

use log::{info, warn};

use dynwin::groundstate::{find_ground_state, GroundStateConfig, UniformState};
use dynwin::io::{read_cbor, write_cbor};
use dynwin::Result;

pub const MODEL_KEY: &str = "spin1-heisenberg";

pub fn cache_path(dir: &Path, chi: usize, conv_tol: f64) -> PathBuf {
    dir.join(format!("gs-{MODEL_KEY}-chi{chi}-tol{conv_tol:e}.cbor"))
}

/// Loads the cached state if present and usable, otherwise computes and
/// stores it. Without a cache directory the state is always computed.
pub fn ground_state(dir: Option<&Path>, chi: usize, conv_tol: f64) -> Result<(UniformState, bool)> {
    if let Some(dir) = dir {
        let path = cache_path(dir, chi, conv_tol);
        if path.exists() {
            match read_cbor::<UniformState>(&path) {
                Ok(u) if u.chi == chi && u.canonical_residual() <= 1e-10 => {
                    info!("ground state loaded from {}", path.display());
                    return Ok((u, true));
                }
                Ok(_) => warn!("ignoring stale cache entry {}", path.display()),
                Err(e) => warn!("ignoring unreadable cache entry: {e}"),
            }
        }
    }
    let mut cfg = GroundStateConfig::new(chi);
    cfg.conv_tol = conv_tol;
    let u = find_ground_state(&cfg)?;
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
        write_cbor(&cache_path(dir, chi, conv_tol), &u)?;
    }
    Ok((u, false))
}
