//! Run configuration: optional TOML file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use dynwin::boundary::Side;
use dynwin::model::named_operator;
use dynwin::tebd::{EvolutionConfig, DEFAULT_DISCARD_TOL};
use dynwin::window::{MovePolicy, WindowMode, DEFAULT_THRESHOLD};
use dynwin::{Error, Result};

/// Largest bond dimension and window the harness will accept.
pub const MAX_CHI: usize = 1024;
pub const MAX_WINDOW: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Fixed,
    Expanding,
    Moving,
    /// Finite open chain started from its exact ground state (small L only).
    Finite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Track {
    Left,
    Right,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub chi: usize,
    pub dt: f64,
    pub t_max: f64,
    pub trotter_order: u32,
    /// Sites in the window; 0 picks the mode default (240 / 4 / 8 / 8).
    pub window_size: usize,
    pub threshold: f64,
    pub cells: usize,
    pub track: Track,
    pub quench_operator: String,
    /// Global site of the quench; profile positions are measured from it.
    /// For the finite chain this is the chain index (default: centre).
    pub quench_site: Option<i64>,
    pub halo: usize,
    pub discard_tol: f64,
    pub measure_every: usize,
    pub energy_every: usize,
    pub checkpoint_every: usize,
    pub gs_conv_tol: f64,
    pub out: PathBuf,
    pub ground_state_cache: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Fixed,
            chi: 200,
            dt: 0.05,
            t_max: 30.0,
            trotter_order: 4,
            window_size: 0,
            threshold: DEFAULT_THRESHOLD,
            cells: 1,
            track: Track::Left,
            quench_operator: "sp".into(),
            quench_site: None,
            halo: dynwin::observables::DEFAULT_HALO,
            discard_tol: DEFAULT_DISCARD_TOL,
            measure_every: 1,
            energy_every: 10,
            checkpoint_every: dynwin::tebd::CHECKPOINT_EVERY,
            gs_conv_tol: 1e-9,
            out: PathBuf::from("dynwin-out"),
            ground_state_cache: None,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
    }

    pub fn window_len(&self) -> usize {
        match (self.window_size, self.mode) {
            (0, Mode::Fixed) => 240,
            (0, Mode::Expanding) => 4,
            (0, Mode::Moving | Mode::Finite) => 8,
            (n, _) => n,
        }
    }

    pub fn origin(&self) -> i64 {
        match self.mode {
            Mode::Finite => self.quench_site.unwrap_or(self.window_len() as i64 / 2),
            _ => self.quench_site.unwrap_or(0),
        }
    }

    /// Even window offset placing the quench site near the window centre.
    pub fn window_offset(&self) -> i64 {
        2 * (self.origin() - self.window_len() as i64 / 2).div_euclid(2)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.window_len();
        if self.chi > MAX_CHI {
            return Err(Error::ResourceGuard(format!("chi {} exceeds {MAX_CHI}", self.chi)));
        }
        if n > MAX_WINDOW {
            return Err(Error::ResourceGuard(format!("window size {n} exceeds {MAX_WINDOW}")));
        }
        if self.mode == Mode::Finite && n > dynwin::ed::MAX_SITES {
            return Err(Error::ResourceGuard(format!(
                "finite chain of {n} sites exceeds the exact-diagonalization limit of {}",
                dynwin::ed::MAX_SITES
            )));
        }
        if n < 4 || n % 2 != 0 {
            return Err(Error::Invalid(format!("window size must be even and at least 4, got {n}")));
        }
        named_operator(&self.quench_operator)?;
        let q = self.origin();
        if self.mode == Mode::Finite && !(0..n as i64).contains(&q) {
            return Err(Error::Invalid(format!("quench site {q} lies outside the chain 0..{n}")));
        }
        if !(self.gs_conv_tol > 0.0) {
            return Err(Error::Invalid(format!("ground-state tolerance must be positive, got {}", self.gs_conv_tol)));
        }
        self.evolution()?.validate()
    }

    pub fn evolution(&self) -> Result<EvolutionConfig> {
        let mode = match self.mode {
            Mode::Fixed | Mode::Finite => WindowMode::Fixed,
            Mode::Expanding => WindowMode::Expanding,
            Mode::Moving => WindowMode::Moving,
        };
        let mut policy = MovePolicy::new(mode);
        policy.fidelity_threshold = self.threshold;
        policy.cells_per_event = self.cells;
        policy.track = match self.track {
            Track::Left => Some(Side::Left),
            Track::Right => Some(Side::Right),
            Track::Both => None,
        };
        let mut cfg = EvolutionConfig::new(self.chi, self.dt, self.t_max, policy);
        cfg.trotter_order = self.trotter_order;
        cfg.discard_tol = self.discard_tol;
        cfg.measure_every = self.measure_every;
        cfg.energy_every = if self.mode == Mode::Finite { 0 } else { self.energy_every };
        cfg.checkpoint_every = self.checkpoint_every;
        cfg.checkpoint_dir = Some(self.out.clone());
        Ok(cfg)
    }
}
