//! Real-time TEBD on a window with infinite boundary conditions.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::boundary::{edge_hamiltonian, BoundaryBlock, Side};
use crate::ed::DenseState;
use crate::error::{Error, Result};
use crate::groundstate::UniformState;
use crate::io::{write_checkpoint, Checkpoint};
use crate::model::{build_mpo, trotter_gates, GateSchedule, Mpo, Parity, D, MPO_DIM};
use crate::tensor::{expm_i_hermitian, svd_truncate, Tensor};
use crate::window::{edge_fidelity, should_move, Landing, MovePolicy, WindowMode, WindowSnapshot, WindowState};

pub const DEFAULT_DISCARD_TOL: f64 = 1e-12;
pub const CHECKPOINT_EVERY: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub chi: usize,
    pub dt: f64,
    pub t_max: f64,
    pub trotter_order: u32,
    pub discard_tol: f64,
    pub policy: MovePolicy,
    pub measure_every: usize,
    /// Evaluate `<H_eff> - ledger` every this many steps (0 disables).
    pub energy_every: usize,
    pub checkpoint_every: usize,
    pub checkpoint_dir: Option<PathBuf>,
}

impl EvolutionConfig {
    pub fn new(chi: usize, dt: f64, t_max: f64, policy: MovePolicy) -> Self {
        Self {
            chi,
            dt,
            t_max,
            trotter_order: 4,
            discard_tol: DEFAULT_DISCARD_TOL,
            policy,
            measure_every: 1,
            energy_every: 1,
            checkpoint_every: CHECKPOINT_EVERY,
            checkpoint_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Invalid(msg));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_max >= self.dt) || !self.t_max.is_finite() {
            return bad(format!("t_max must be at least dt, got {}", self.t_max));
        }
        if self.chi < 2 {
            return bad(format!("chi must be at least 2, got {}", self.chi));
        }
        if self.trotter_order != 2 && self.trotter_order != 4 {
            return bad(format!("trotter order must be 2 or 4, got {}", self.trotter_order));
        }
        if !(self.discard_tol >= 0.0) {
            return bad(format!("discard_tol must be non-negative, got {}", self.discard_tol));
        }
        if self.measure_every == 0 {
            return bad("measure_every must be positive".into());
        }
        if self.policy.cells_per_event == 0 {
            return bad("cells_per_event must be positive".into());
        }
        if !(self.policy.fidelity_threshold > 0.0 && self.policy.fidelity_threshold <= 1.0) {
            return bad(format!("fidelity threshold must lie in (0, 1], got {}", self.policy.fidelity_threshold));
        }
        Ok(())
    }

    pub fn total_steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MoveEvent {
    Expanded { side: Side, cells: usize, fidelity: f64 },
    Shifted { direction: Side, cells: usize, fidelity: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    pub time: f64,
    pub len: usize,
    pub global_offset: i64,
    pub truncation_weight: f64,
    pub fidelity_left: f64,
    pub fidelity_right: f64,
    pub events: Vec<MoveEvent>,
    pub energy_remainder: Option<f64>,
    pub max_bond: usize,
    pub canonical_residual: f64,
    pub norm_deviation: f64,
}

/// Edge unitaries `exp(-i h_edge τ)` per side and layer duration, rebuilt
/// whenever a boundary block changes.
#[derive(Default)]
pub struct EdgeGates {
    keys: [Option<(usize, u64, usize)>; 2],
    gates: [HashMap<u64, Tensor>; 2],
}

impl EdgeGates {
    fn slot(side: Side) -> usize {
        match side {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub fn get(&mut self, block: &BoundaryBlock, mpo: &Mpo, tau: f64) -> Result<&Tensor> {
        let i = Self::slot(block.side);
        let key = (block.sites_absorbed, block.energy_offset.to_bits(), block.chi());
        if self.keys[i] != Some(key) {
            self.keys[i] = Some(key);
            self.gates[i].clear();
        }
        let map = &mut self.gates[i];
        if !map.contains_key(&tau.to_bits()) {
            let g = expm_i_hermitian(&edge_hamiltonian(block, mpo), tau)?;
            map.insert(tau.to_bits(), g);
        }
        Ok(&map[&tau.to_bits()])
    }
}

/// Applies one gate `exp(-i h τ)` on window sites `(i, i + 1)`; the center
/// must be adjacent. Returns the discarded weight.
pub fn apply_two_site_gate(w: &mut WindowState, i: usize, gate: &Tensor, chi: usize, tol: f64) -> Result<f64> {
    if w.center_pos < i || w.center_pos > i + 2 {
        return Err(Error::Invalid(format!("center at bond {} is not adjacent to sites ({i}, {})", w.center_pos, i + 1)));
    }
    w.apply_gate(i, gate, chi, tol, Landing::Middle)
}

/// One Trotter layer: all gates of `parity` inside the window plus, on odd
/// layers, the two edge unitaries. Sweeps away from the end holding the
/// orthogonality center.
pub fn apply_layer(
    w: &mut WindowState,
    parity: Parity,
    gate: &Tensor,
    tau: f64,
    chi: usize,
    tol: f64,
    edges: &mut EdgeGates,
    mpo: &Mpo,
) -> Result<f64> {
    let n = w.len();
    let first = match parity {
        Parity::Even => 0,
        Parity::Odd => 1,
    };
    let pairs: Vec<usize> = (first..n.saturating_sub(1)).step_by(2).collect();
    let odd = parity == Parity::Odd;
    let rightward = 2 * w.center_pos <= n;
    let mut weight = 0.0;
    let mut edge = |w: &mut WindowState, side: Side| -> Result<()> {
        if !odd {
            return Ok(());
        }
        let block = match side {
            Side::Left => &w.left_block,
            Side::Right => &w.right_block,
        };
        let g = edges.get(block, mpo, tau)?.clone();
        w.apply_edge_gate(side, &g)
    };
    if rightward {
        edge(w, Side::Left)?;
        for &i in &pairs {
            if w.center_pos < i || w.center_pos > i + 2 {
                w.move_center((i + 1).max(1))?;
            }
            let landing = if i + 2 < n { Landing::Right } else { Landing::Middle };
            weight += w.apply_gate(i, gate, chi, tol, landing)?;
        }
        edge(w, Side::Right)?;
    } else {
        edge(w, Side::Right)?;
        for &i in pairs.iter().rev() {
            if w.center_pos < i || w.center_pos > i + 2 {
                w.move_center(i + 1)?;
            }
            let landing = if i >= 1 { Landing::Left } else { Landing::Middle };
            weight += w.apply_gate(i, gate, chi, tol, landing)?;
        }
        edge(w, Side::Left)?;
    }
    Ok(weight)
}

/// One full time step: every layer of the schedule in order.
pub fn sweep(
    w: &mut WindowState,
    schedule: &GateSchedule,
    chi: usize,
    tol: f64,
    edges: &mut EdgeGates,
    mpo: &Mpo,
) -> Result<f64> {
    let mut weight = 0.0;
    for layer in &schedule.steps {
        weight += apply_layer(w, layer.parity, &layer.gate, layer.tau, chi, tol, edges, mpo)?;
    }
    Ok(weight)
}

/// Open chain written as a window between trivial one-dimensional blocks,
/// exact up to the dropped zero singular values.
pub fn open_chain_window(state: &DenseState) -> Result<WindowState> {
    let l = state.l;
    if l < 2 || l % 2 != 0 {
        return Err(Error::Invalid(format!("open chain needs an even length ≥ 2, got {l}")));
    }
    let mut sites = Vec::with_capacity(l);
    let mut rest = Tensor::from_vec(&[D, state.amplitudes.len() / D], state.amplitudes.clone())?;
    let mut left_dim = 1;
    for _ in 0..l - 1 {
        let svd = svd_truncate(&rest, usize::MAX, 0.0)?;
        let k = svd.kept();
        sites.push(svd.u.reshape(&[left_dim, D, k])?);
        let cols = svd.v.ncols();
        rest = svd.v.scale_rows(&svd.s).reshape(&[k * D, cols / D])?;
        left_dim = k;
    }
    // rest is (k·3, 1): split off the last site in right-canonical form.
    let last = rest.reshape(&[left_dim, D])?;
    let svd = svd_truncate(&last, usize::MAX, 0.0)?;
    let k = svd.kept();
    let prev = sites.pop().expect("l ≥ 2");
    sites.push(prev.scale_last_axis_matrix(&svd.u));
    sites.push(svd.v.reshape(&[k, D, 1])?);
    let norm = svd.s.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut left = BoundaryBlock::trivial(Side::Left, 1, MPO_DIM);
    let mut right = BoundaryBlock::trivial(Side::Right, 1, MPO_DIM);
    left.uniform_gauge = false;
    right.uniform_gauge = false;
    Ok(WindowState {
        left_block: left,
        right_block: right,
        sites,
        center_lambda: svd.s.iter().map(|x| x / norm).collect(),
        center_pos: l - 1,
        global_offset: 0,
        uniform: Arc::new(UniformState::product(1)?),
        time: 0.0,
        energy_ledger: 0.0,
        truncation_total: 0.0,
    })
}

/// Stateful driver: window, reference state for the edge fidelities, gate
/// caches and step counter.
pub struct Evolver {
    pub cfg: EvolutionConfig,
    pub window: WindowState,
    /// Window right after the last move event (or the start).
    pub reference: WindowState,
    pub step: usize,
    schedule: GateSchedule,
    edges: EdgeGates,
    mpo: Mpo,
    last_checkpoint: Option<PathBuf>,
}

impl Evolver {
    pub fn new(window: WindowState, cfg: EvolutionConfig) -> Result<Self> {
        let reference = window.clone();
        Self::resume(window, reference, 0, cfg)
    }

    pub fn resume(window: WindowState, reference: WindowState, step: usize, cfg: EvolutionConfig) -> Result<Self> {
        cfg.validate()?;
        let schedule = trotter_gates(cfg.dt, cfg.trotter_order)?;
        Ok(Self { cfg, window, reference, step, schedule, edges: EdgeGates::default(), mpo: build_mpo(), last_checkpoint: None })
    }

    pub fn from_checkpoint(ck: Checkpoint, cfg: EvolutionConfig) -> Result<Self> {
        Self::resume(ck.window.into(), ck.reference.into(), ck.step, cfg)
    }

    pub fn finished(&self) -> bool {
        self.step >= self.cfg.total_steps()
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.dt
    }

    pub fn mpo(&self) -> &Mpo {
        &self.mpo
    }

    fn poisoned(&self) -> Error {
        Error::Poisoned { time: self.time(), checkpoint: self.last_checkpoint.clone() }
    }

    /// Advances one time step and applies the window policy.
    pub fn advance(&mut self) -> Result<StepReport> {
        let (chi, tol) = (self.cfg.chi, self.cfg.discard_tol);
        let weight = sweep(&mut self.window, &self.schedule, chi, tol, &mut self.edges, &self.mpo)
            .map_err(|e| match e {
                Error::Numerical { .. } => self.poisoned(),
                other => other,
            })?;
        self.step += 1;
        self.window.time = self.time();
        if !self.window.is_finite() {
            return Err(self.poisoned());
        }

        let mut f_left = edge_fidelity(&self.window, &self.reference, Side::Left)?;
        let mut f_right = edge_fidelity(&self.window, &self.reference, Side::Right)?;
        let events = self.apply_policy(f_left, f_right)?;
        if !events.is_empty() {
            self.reference = self.window.clone();
            f_left = 1.0;
            f_right = 1.0;
        }

        let every = self.cfg.energy_every;
        let energy_remainder = if every > 0 && self.step % every == 0 {
            Some(self.window.energy_remainder(&self.mpo)?)
        } else {
            None
        };
        let report = StepReport {
            step: self.step,
            time: self.time(),
            len: self.window.len(),
            global_offset: self.window.global_offset,
            truncation_weight: weight,
            fidelity_left: f_left,
            fidelity_right: f_right,
            events,
            energy_remainder,
            max_bond: self.window.max_bond_dim(),
            canonical_residual: self.window.canonical_residual(),
            norm_deviation: (self.window.norm_sqr() - 1.0).abs(),
        };
        if let Some(dir) = &self.cfg.checkpoint_dir {
            if self.cfg.checkpoint_every > 0 && self.step % self.cfg.checkpoint_every == 0 {
                let slot = if (self.step / self.cfg.checkpoint_every) % 2 == 1 { "a" } else { "b" };
                let path = dir.join(format!("checkpoint_{slot}.cbor"));
                write_checkpoint(&path, &self.checkpoint())?;
                self.last_checkpoint = Some(path);
            }
        }
        Ok(report)
    }

    fn apply_policy(&mut self, f_left: f64, f_right: f64) -> Result<Vec<MoveEvent>> {
        let policy = &self.cfg.policy;
        let cells = policy.cells_per_event;
        let mut events = Vec::new();
        match policy.mode {
            WindowMode::Fixed => {}
            WindowMode::Expanding => {
                if should_move(f_left, policy) {
                    self.window.expand(Side::Left, cells)?;
                    events.push(MoveEvent::Expanded { side: Side::Left, cells, fidelity: f_left });
                }
                if should_move(f_right, policy) {
                    self.window.expand(Side::Right, cells)?;
                    events.push(MoveEvent::Expanded { side: Side::Right, cells, fidelity: f_right });
                }
            }
            WindowMode::Moving => {
                let candidates: Vec<(Side, f64)> = match policy.track {
                    Some(Side::Left) => vec![(Side::Left, f_left)],
                    Some(Side::Right) => vec![(Side::Right, f_right)],
                    None => vec![(Side::Left, f_left), (Side::Right, f_right)],
                };
                if let Some(&(direction, fidelity)) = candidates.iter().find(|(_, f)| should_move(*f, policy)) {
                    self.window.shift(direction, cells)?;
                    events.push(MoveEvent::Shifted { direction, cells, fidelity });
                }
            }
        }
        Ok(events)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(self.step, WindowSnapshot::from(&self.window), WindowSnapshot::from(&self.reference))
    }

    /// Runs to `t_max`, handing the state to `sink` on the measurement cadence.
    pub fn run<F>(&mut self, mut sink: F) -> Result<Vec<StepReport>>
    where
        F: FnMut(&WindowState, &StepReport) -> Result<()>,
    {
        let mut reports = Vec::with_capacity(self.cfg.total_steps().saturating_sub(self.step));
        while !self.finished() {
            let report = self.advance()?;
            if self.step % self.cfg.measure_every == 0 {
                sink(&self.window, &report)?;
            }
            reports.push(report);
        }
        Ok(reports)
    }
}

/// Evolves `w` to `cfg.t_max`; returns the final window and the step reports.
pub fn evolve<F>(w: WindowState, cfg: &EvolutionConfig, sink: F) -> Result<(WindowState, Vec<StepReport>)>
where
    F: FnMut(&WindowState, &StepReport) -> Result<()>,
{
    let mut ev = Evolver::new(w, cfg.clone())?;
    let reports = ev.run(sink)?;
    Ok((ev.window, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ed::{evolve_exact, quenched_ground_state, sz_profile};
    use crate::groundstate::tests::ground_state_24;
    use crate::model::{bond_hamiltonian, spin1_operators};
    use crate::observables::total_sz;
    use crate::tensor::C64;
    use crate::window::init_window;

    fn gs_window(n: usize) -> WindowState {
        init_window(Arc::new(ground_state_24().clone()), n, -2 * (n as i64 / 4)).unwrap()
    }

    fn quenched(n: usize) -> WindowState {
        let mut w = gs_window(n);
        w.apply_local_operator(0, &spin1_operators().sp).unwrap();
        w
    }

    fn sz(w: &WindowState) -> Vec<f64> {
        w.site_expectations(&spin1_operators().sz).unwrap()
    }

    #[test]
    fn identity_gate_changes_nothing() {
        let mut w = quenched(8);
        let before = sz(&w);
        let c = w.center_pos;
        let weight = apply_two_site_gate(&mut w, c - 1, &Tensor::identity(D * D), 64, 0.0).unwrap();
        assert!(weight <= 1e-24);
        assert!(sz(&w).iter().zip(&before).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(apply_two_site_gate(&mut w, 5, &Tensor::identity(D * D), 64, 0.0).is_err());
    }

    #[test]
    fn two_site_gate_matches_dense_vector() {
        let ops = spin1_operators();
        let state = DenseState::product(&[1, 1]).unwrap();
        let mut w = open_chain_window(&state).unwrap();
        let swap_like = expm_i_hermitian(&bond_hamiltonian().h, 0.7).unwrap();
        apply_two_site_gate(&mut w, 0, &swap_like, 9, 0.0).unwrap();
        let expected: Vec<C64> = (0..9).map(|r| swap_like.get(&[r, 4])).collect();
        let psi = w.sites[0].scale_last_axis(&w.center_lambda).reshape(&[3, w.center_lambda.len()]).unwrap();
        let psi = psi.matmul(&w.sites[1].clone().reshape(&[w.center_lambda.len(), 3]).unwrap()).unwrap();
        let overlap: C64 = psi.data().iter().zip(&expected).map(|(a, b)| a.conj() * b).sum();
        assert!((overlap.norm() - 1.0).abs() < 1e-12);
        let profile = sz(&w);
        let m = [ops.sz.get(&[0, 0]).re, 0.0, ops.sz.get(&[2, 2]).re];
        let exact: f64 = (0..9).map(|k| expected[k].norm_sqr() * m[k / 3]).sum();
        assert!((profile[0] - exact).abs() < 1e-12);
    }

    #[test]
    fn open_chain_round_trips_dense_states() {
        let psi = quenched_ground_state(6, 3).unwrap();
        let w = open_chain_window(&psi).unwrap();
        assert!(w.canonical_residual() < 1e-12);
        let exact = sz_profile(&psi);
        assert!(sz(&w).iter().zip(&exact).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(open_chain_window(&DenseState::product(&[0, 1, 2]).unwrap()).is_err());
    }

    #[test]
    fn open_chain_follows_exact_dynamics() {
        let l = 6;
        let psi = quenched_ground_state(l, l / 2).unwrap();
        let mut cfg = EvolutionConfig::new(27, 0.05, 1.0, MovePolicy::default());
        cfg.discard_tol = 0.0;
        cfg.energy_every = 0;
        let (w, reports) = evolve(open_chain_window(&psi).unwrap(), &cfg, |_, _| Ok(())).unwrap();
        assert_eq!(reports.len(), 20);
        assert!(reports.iter().all(|r| r.truncation_weight < 1e-20));
        let exact = sz_profile(&evolve_exact(&psi, 1.0, 0.05).unwrap());
        let err = sz(&w).iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "max |Δsz| = {err:e}");
    }

    #[test]
    fn unperturbed_window_is_stationary() {
        let mut cfg = EvolutionConfig::new(24, 0.05, 0.5, MovePolicy::new(WindowMode::Expanding));
        cfg.energy_every = 5;
        let (w, reports) = evolve(gs_window(6), &cfg, |_, _| Ok(())).unwrap();
        assert!(sz(&w).iter().all(|s| s.abs() < 1e-10));
        assert!(reports.iter().all(|r| r.events.is_empty() && r.fidelity_left > 1.0 - 1e-6));
        let e = reports.last().unwrap().energy_remainder.unwrap();
        assert!(e.abs() < 1e-6, "remainder {e:e}");
    }

    #[test]
    fn quench_conserves_energy_and_magnetization() {
        let mut cfg = EvolutionConfig::new(64, 0.05, 0.5, MovePolicy::default());
        cfg.energy_every = 5;
        let w = quenched(8);
        let e0 = w.energy_remainder(&build_mpo()).unwrap();
        let mut totals = Vec::new();
        let (_, reports) = evolve(w, &cfg, |w, _| {
            totals.push(total_sz(w)?.unwrap());
            Ok(())
        })
        .unwrap();
        assert!(totals.iter().all(|t| (t - 1.0).abs() < 1e-6), "{totals:?}");
        for r in &reports {
            assert!(r.canonical_residual < 1e-10);
            assert!(r.norm_deviation < 1e-10);
            if let Some(e) = r.energy_remainder {
                assert!((e - e0).abs() < 1e-6, "t = {}: {e} vs {e0}", r.time);
            }
        }
    }

    #[test]
    fn expanding_window_grows_symmetrically() {
        let mut cfg = EvolutionConfig::new(24, 0.05, 1.5, MovePolicy::new(WindowMode::Expanding));
        cfg.energy_every = 0;
        let (w, reports) = evolve(quenched(4), &cfg, |_, _| Ok(())).unwrap();
        let events: usize = reports.iter().map(|r| r.events.len()).sum();
        assert!(events >= 2);
        assert_eq!(w.len(), 4 + 2 * events);
        for r in &reports {
            assert!((0.0..=1.0 + 1e-12).contains(&r.fidelity_left));
            assert!((0.0..=1.0 + 1e-12).contains(&r.fidelity_right));
        }
        assert!((total_sz(&w).unwrap().unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn moving_window_tracks_one_side() {
        let mut policy = MovePolicy::new(WindowMode::Moving);
        policy.track = Some(Side::Left);
        let mut cfg = EvolutionConfig::new(24, 0.05, 1.5, policy);
        cfg.energy_every = 0;
        let (w, reports) = evolve(quenched(8), &cfg, |_, _| Ok(())).unwrap();
        assert_eq!(w.len(), 8);
        assert!(w.global_offset < -4);
        assert!(reports.iter().flat_map(|r| &r.events).all(|e| matches!(e, MoveEvent::Shifted { direction: Side::Left, .. })));
    }

    #[test]
    fn resume_from_checkpoint_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = EvolutionConfig::new(16, 0.05, 0.3, MovePolicy::new(WindowMode::Expanding));
        cfg.checkpoint_every = 2;
        cfg.checkpoint_dir = Some(dir.path().to_path_buf());
        cfg.energy_every = 0;
        let mut full = Evolver::new(quenched(4), cfg.clone()).unwrap();
        full.run(|_, _| Ok(())).unwrap();
        let ck = crate::io::read_checkpoint(&dir.path().join("checkpoint_b.cbor")).unwrap();
        assert_eq!(ck.step, 4);
        let mut resumed = Evolver::from_checkpoint(ck, cfg).unwrap();
        resumed.run(|_, _| Ok(())).unwrap();
        assert_eq!(resumed.window.sites.len(), full.window.sites.len());
        for (a, b) in resumed.window.sites.iter().zip(&full.window.sites) {
            assert_eq!(a.data(), b.data());
        }
        assert_eq!(resumed.window.center_lambda, full.window.center_lambda);
    }

    #[test]
    fn poisoned_state_aborts() {
        let mut w = quenched(6);
        w.sites[2].data_mut()[0] = C64::new(f64::NAN, 0.0);
        let cfg = EvolutionConfig::new(16, 0.05, 0.1, MovePolicy::default());
        let err = evolve(w, &cfg, |_, _| Ok(())).unwrap_err();
        assert!(matches!(err, Error::Poisoned { checkpoint: None, .. }), "{err}");
    }

    #[test]
    fn config_validation() {
        let ok = EvolutionConfig::new(16, 0.05, 1.0, MovePolicy::default());
        assert!(ok.validate().is_ok());
        assert_eq!(ok.total_steps(), 20);
        for bad in [
            EvolutionConfig { dt: 0.0, ..ok.clone() },
            EvolutionConfig { t_max: 0.01, ..ok.clone() },
            EvolutionConfig { chi: 1, ..ok.clone() },
            EvolutionConfig { trotter_order: 3, ..ok.clone() },
            EvolutionConfig { measure_every: 0, ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Invalid(_))));
        }
    }
}
