//! Finite MPS window embedded in an infinite uniform state.
//!
//! Sites left of the orthogonality center are left-canonical, sites at or
//! right of it right-canonical, and the Schmidt values of the center bond
//! are stored explicitly. Bond `c` is the bond to the left of site `c`; the
//! center is kept strictly inside the window (`1 ≤ c ≤ N - 1`) so the bond
//! bases at both edges stay tied to the boundary blocks.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::boundary::{
    absorb_site, chain_energy, uniform_boundary_block, uniform_gauge_match, BoundaryBlock, Side,
};
use crate::error::{Error, Result};
use crate::groundstate::{dims3, UniformState};
use crate::model::{build_mpo, Mpo, D};
use crate::tensor::{contract, eigh_hermitian, nuclear_norm, svd_truncate, Tensor};

pub const MIN_WINDOW: usize = 4;
pub const DEFAULT_THRESHOLD: f64 = 1.0 - 1e-4;
/// Tolerance for recognizing an absorbed edge tensor as a rotated copy of
/// the uniform tensor.
const SNAP_TOL: f64 = 1e-12;
const BOUNDARY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowMode {
    Fixed,
    Expanding,
    Moving,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MovePolicy {
    pub mode: WindowMode,
    pub fidelity_threshold: f64,
    /// Two-site unit cells added (and, when moving, removed) per event.
    pub cells_per_event: usize,
    /// Moving mode only: follow the front on this side and ignore the other.
    pub track: Option<Side>,
}

impl MovePolicy {
    pub fn new(mode: WindowMode) -> Self {
        Self { mode, fidelity_threshold: DEFAULT_THRESHOLD, cells_per_event: 1, track: None }
    }
}

impl Default for MovePolicy {
    fn default() -> Self {
        Self::new(WindowMode::Fixed)
    }
}

/// Where the orthogonality center ends up after a two-site update on sites
/// `(i, i + 1)`: bond `i`, `i + 1` or `i + 2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Landing {
    Left,
    Middle,
    Right,
}

#[derive(Clone, Debug)]
pub struct WindowState {
    pub left_block: BoundaryBlock,
    pub right_block: BoundaryBlock,
    pub sites: Vec<Tensor>,
    pub center_lambda: Vec<f64>,
    pub center_pos: usize,
    /// Global coordinate of window site 0; always even.
    pub global_offset: i64,
    pub uniform: Arc<UniformState>,
    pub time: f64,
    /// Energy the window is expected to carry in the ground state:
    /// `<H_eff> - energy_ledger` is the excitation energy.
    pub energy_ledger: f64,
    /// Sum of discarded weights over the lifetime of the window.
    pub truncation_total: f64,
}

pub fn init_window(u: Arc<UniformState>, n: usize, offset: i64) -> Result<WindowState> {
    let mpo = build_mpo();
    let left = uniform_boundary_block(&u, &mpo, Side::Left, BOUNDARY_TOL)?;
    let right = uniform_boundary_block(&u, &mpo, Side::Right, BOUNDARY_TOL)?;
    WindowState::with_blocks(u, n, offset, left, right)
}

impl WindowState {
    /// Uniform window between precomputed fixed-point blocks.
    pub fn with_blocks(
        u: Arc<UniformState>,
        n: usize,
        offset: i64,
        left_block: BoundaryBlock,
        right_block: BoundaryBlock,
    ) -> Result<WindowState> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::Invalid(format!("window length must be even and at least 2, got {n}")));
        }
        if offset.rem_euclid(2) != 0 {
            return Err(Error::Invalid(format!("window offset must be even, got {offset}")));
        }
        let c = n / 2;
        let sites = (0..n)
            .map(|i| {
                let x = offset + i as i64;
                if i < c { u.a_at(x).clone() } else { u.b_at(x).clone() }
            })
            .collect();
        let center_lambda = u.lambda_left_of(offset + c as i64).to_vec();
        let energy_ledger = n as f64 * u.e0 + u.bond_energy[1];
        Ok(WindowState {
            left_block,
            right_block,
            sites,
            center_lambda,
            center_pos: c,
            global_offset: offset,
            uniform: u,
            time: 0.0,
            energy_ledger,
            truncation_total: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn first_site(&self) -> i64 {
        self.global_offset
    }

    pub fn last_site(&self) -> i64 {
        self.global_offset + self.len() as i64 - 1
    }

    pub fn contains(&self, x: i64) -> bool {
        x >= self.first_site() && x <= self.last_site()
    }

    pub fn local_index(&self, x: i64) -> Result<usize> {
        if !self.contains(x) {
            return Err(Error::OutsideWindow { site: x, first: self.first_site(), last: self.last_site() });
        }
        Ok((x - self.global_offset) as usize)
    }

    pub fn bond_dim(&self, bond: usize) -> usize {
        if bond == self.len() {
            dims3(&self.sites[bond - 1]).2
        } else {
            dims3(&self.sites[bond]).0
        }
    }

    pub fn max_bond_dim(&self) -> usize {
        (0..=self.len()).map(|b| self.bond_dim(b)).max().unwrap_or(0)
    }

    /// `<Ψ|Ψ>` from the center Schmidt values.
    pub fn norm_sqr(&self) -> f64 {
        self.center_lambda.iter().map(|x| x * x).sum()
    }

    /// Largest violation of the left/right canonical constraints.
    pub fn canonical_residual(&self) -> f64 {
        use crate::groundstate::{left_residual, right_residual};
        self.sites
            .iter()
            .enumerate()
            .map(|(i, t)| if i < self.center_pos { left_residual(t) } else { right_residual(t) })
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.sites.iter().all(Tensor::is_finite) && self.center_lambda.iter().all(|x| x.is_finite())
    }

    // ---- center motion ---------------------------------------------------

    fn shift_center_right(&mut self) -> Result<()> {
        let c = self.center_pos;
        if c + 1 >= self.len() {
            return Err(Error::Invalid(format!("center cannot move past bond {}", self.len() - 1)));
        }
        let (l, d, r) = dims3(&self.sites[c]);
        let m = self.sites[c].scale_rows(&self.center_lambda).reshape(&[l * d, r])?;
        let svd = svd_truncate(&m, usize::MAX, 0.0)?;
        let k = svd.kept();
        self.sites[c] = svd.u.reshape(&[l, d, k])?;
        self.sites[c + 1] = contract(&svd.v, &self.sites[c + 1], &[(1, 0)])?;
        self.center_lambda = normalized(&svd.s);
        self.center_pos = c + 1;
        Ok(())
    }

    fn shift_center_left(&mut self) -> Result<()> {
        let c = self.center_pos;
        if c <= 1 {
            return Err(Error::Invalid("center cannot move onto the left edge bond".into()));
        }
        let (l, d, r) = dims3(&self.sites[c - 1]);
        let m = self.sites[c - 1].scale_last_axis(&self.center_lambda).reshape(&[l, d * r])?;
        let svd = svd_truncate(&m, usize::MAX, 0.0)?;
        let k = svd.kept();
        self.sites[c - 1] = svd.v.reshape(&[k, d, r])?;
        self.sites[c - 2] = self.sites[c - 2].scale_last_axis_matrix(&svd.u);
        self.center_lambda = normalized(&svd.s);
        self.center_pos = c - 1;
        Ok(())
    }

    /// Moves the orthogonality center to `bond` (between 1 and N - 1).
    pub fn move_center(&mut self, bond: usize) -> Result<()> {
        if bond < 1 || bond + 1 > self.len() {
            return Err(Error::Invalid(format!("center bond {bond} outside 1..={}", self.len() - 1)));
        }
        while self.center_pos < bond {
            self.shift_center_right()?;
        }
        while self.center_pos > bond {
            self.shift_center_left()?;
        }
        Ok(())
    }

    // ---- local updates ---------------------------------------------------

    /// Applies a two-site gate on window sites `(i, i + 1)` and truncates to
    /// `chi`; the center must be adjacent to the pair. Returns the discarded
    /// weight relative to the pre-truncation norm.
    pub fn apply_gate(&mut self, i: usize, gate: &Tensor, chi: usize, tol: f64, landing: Landing) -> Result<f64> {
        let n = self.len();
        if i + 1 >= n {
            return Err(Error::Invalid(format!("gate on sites ({i}, {}) outside window of {n}", i + 1)));
        }
        let c = self.center_pos;
        if c < i || c > i + 2 {
            return Err(Error::Invalid(format!("center at bond {c} is not adjacent to sites ({i}, {})", i + 1)));
        }
        if (landing == Landing::Left && i == 0) || (landing == Landing::Right && i + 2 >= n) {
            return Err(Error::Invalid("landing bond would be an edge bond".into()));
        }
        let (left, right) = (&self.sites[i], &self.sites[i + 1]);
        let theta = match c - i {
            0 => contract(&left.scale_rows(&self.center_lambda), right, &[(2, 0)])?,
            1 => contract(&left.scale_last_axis(&self.center_lambda), right, &[(2, 0)])?,
            _ => contract(left, &right.scale_last_axis(&self.center_lambda), &[(2, 0)])?,
        };
        let (l, _, _) = dims3(left);
        let (_, _, r) = dims3(right);
        let theta = crate::groundstate::apply_two_site(gate, &theta).reshape(&[l * D, D * r])?;
        let svd = svd_truncate(&theta, chi, tol)?;
        let norm2: f64 = svd.s.iter().map(|s| s * s).sum();
        let weight = svd.truncation_weight / (norm2 + svd.truncation_weight);
        let k = svd.kept();
        let s = normalized(&svd.s);
        match landing {
            Landing::Middle => {
                self.sites[i] = svd.u.reshape(&[l, D, k])?;
                self.sites[i + 1] = svd.v.reshape(&[k, D, r])?;
                self.center_lambda = s;
                self.center_pos = i + 1;
            }
            Landing::Left => {
                self.sites[i + 1] = svd.v.reshape(&[k, D, r])?;
                let m = svd.u.scale_last_axis(&s).reshape(&[l, D * k])?;
                let inner = svd_truncate(&m, usize::MAX, 0.0)?;
                let k2 = inner.kept();
                self.sites[i] = inner.v.reshape(&[k2, D, k])?;
                self.sites[i - 1] = self.sites[i - 1].scale_last_axis_matrix(&inner.u);
                self.center_lambda = normalized(&inner.s);
                self.center_pos = i;
            }
            Landing::Right => {
                self.sites[i] = svd.u.reshape(&[l, D, k])?;
                let m = svd.v.scale_rows(&s).reshape(&[k * D, r])?;
                let inner = svd_truncate(&m, usize::MAX, 0.0)?;
                let k2 = inner.kept();
                self.sites[i + 1] = inner.u.reshape(&[k, D, k2])?;
                self.sites[i + 2] = contract(&inner.v, &self.sites[i + 2], &[(1, 0)])?;
                self.center_lambda = normalized(&inner.s);
                self.center_pos = i + 2;
            }
        }
        self.truncation_total += weight;
        Ok(weight)
    }

    /// Applies a unitary on (boundary bond ⊗ edge site). Exact: the edge
    /// tensor stays canonical and no truncation occurs.
    pub fn apply_edge_gate(&mut self, side: Side, gate: &Tensor) -> Result<()> {
        let n = self.len();
        match side {
            Side::Left => {
                if self.center_pos < 1 {
                    return Err(Error::Invalid("left edge gate needs the center right of site 0".into()));
                }
                let (l, d, r) = dims3(&self.sites[0]);
                let m = self.sites[0].clone().reshape(&[l * d, r])?;
                self.sites[0] = gate.matmul(&m)?.reshape(&[l, d, r])?;
            }
            Side::Right => {
                if self.center_pos > n - 1 {
                    return Err(Error::Invalid("right edge gate needs the center left of the last site".into()));
                }
                let (l, d, r) = dims3(&self.sites[n - 1]);
                let m = self.sites[n - 1].clone().reshape(&[l, d * r])?;
                self.sites[n - 1] = m.matmul(&gate.transpose())?.reshape(&[l, d, r])?;
            }
        }
        Ok(())
    }

    /// Applies a one-site operator at global site `x`, renormalizes and
    /// restores the canonical form around it.
    pub fn apply_local_operator(&mut self, x: i64, op: &Tensor) -> Result<()> {
        let i = self.local_index(x)?;
        if op.shape() != [D, D] {
            return Err(Error::Dimension(format!("local operator of shape {:?}", op.shape())));
        }
        let apply = |t: &Tensor| -> Result<Tensor> { Ok(contract(op, t, &[(1, 1)])?.permute(&[1, 0, 2])) };
        if i == 0 {
            self.move_center(1)?;
            let (l, d, r) = dims3(&self.sites[0]);
            let m = apply(&self.sites[0])?.scale_last_axis(&self.center_lambda).reshape(&[l * d, r])?;
            let svd = svd_truncate(&m, usize::MAX, 0.0)?;
            let k = svd.kept();
            self.sites[0] = svd.u.reshape(&[l, d, k])?;
            self.sites[1] = contract(&svd.v, &self.sites[1], &[(1, 0)])?;
            self.center_lambda = normalize_checked(&svd.s)?;
        } else {
            self.move_center(i)?;
            let (l, d, r) = dims3(&self.sites[i]);
            let m = apply(&self.sites[i])?.scale_rows(&self.center_lambda).reshape(&[l, d * r])?;
            let svd = svd_truncate(&m, usize::MAX, 0.0)?;
            let k = svd.kept();
            self.sites[i] = svd.v.reshape(&[k, d, r])?;
            self.sites[i - 1] = self.sites[i - 1].scale_last_axis_matrix(&svd.u);
            self.center_lambda = normalize_checked(&svd.s)?;
        }
        Ok(())
    }

    // ---- window geometry ---------------------------------------------------

    /// Inserts `cells` uniform unit cells at the given edge.
    pub fn expand(&mut self, side: Side, cells: usize) -> Result<()> {
        let block = match side {
            Side::Left => &self.left_block,
            Side::Right => &self.right_block,
        };
        if !block.uniform_gauge {
            return Err(Error::Invalid(format!(
                "cannot expand on the {side:?} edge: the boundary basis no longer matches the uniform state"
            )));
        }
        let added = 2 * cells;
        let u = Arc::clone(&self.uniform);
        match side {
            Side::Left => {
                let new_offset = self.global_offset - added as i64;
                let mut sites: Vec<Tensor> = (0..added).map(|k| u.a_at(new_offset + k as i64).clone()).collect();
                sites.append(&mut self.sites);
                self.sites = sites;
                self.global_offset = new_offset;
                self.center_pos += added;
            }
            Side::Right => {
                let start = self.last_site() + 1;
                self.sites.extend((0..added).map(|k| u.b_at(start + k as i64).clone()));
            }
        }
        self.energy_ledger += added as f64 * u.e0;
        Ok(())
    }

    /// Folds `cells` unit cells at the given edge into the boundary block.
    pub fn contract(&mut self, side: Side, cells: usize) -> Result<()> {
        let removed = 2 * cells;
        let n = self.len();
        if n < removed + MIN_WINDOW {
            return Err(Error::WindowTooSmall { len: n.saturating_sub(removed), min: MIN_WINDOW });
        }
        let mpo = build_mpo();
        let u = Arc::clone(&self.uniform);
        match side {
            Side::Right => {
                let new_n = n - removed;
                if self.center_pos > new_n - 1 {
                    self.move_center(new_n - 1)?;
                }
                let mut block = self.right_block.clone();
                for k in (new_n..n).rev() {
                    let x = self.global_offset + k as i64;
                    let snapped = if block.uniform_gauge {
                        uniform_gauge_match(&self.sites[k], u.b_at(x), Side::Right, SNAP_TOL)
                    } else {
                        None
                    };
                    let keep_uniform = snapped.is_some();
                    let absorbed = match snapped {
                        Some(g) => {
                            self.sites[k - 1] = self.sites[k - 1].scale_last_axis_matrix(&g);
                            u.b_at(x).clone()
                        }
                        None => self.sites[k].clone(),
                    };
                    block = absorb_site(&block, &absorbed, &mpo, u.e0)?;
                    block.uniform_gauge = keep_uniform && self.right_block.uniform_gauge;
                    self.right_block.uniform_gauge = block.uniform_gauge;
                }
                self.sites.truncate(new_n);
                self.right_block = block;
            }
            Side::Left => {
                if self.center_pos < removed + 1 {
                    self.move_center(removed + 1)?;
                }
                let mut block = self.left_block.clone();
                for k in 0..removed {
                    let x = self.global_offset + k as i64;
                    let snapped = if block.uniform_gauge {
                        uniform_gauge_match(&self.sites[k], u.a_at(x), Side::Left, SNAP_TOL)
                    } else {
                        None
                    };
                    let keep_uniform = snapped.is_some();
                    let absorbed = match snapped {
                        Some(g) => {
                            self.sites[k + 1] = contract(&g, &self.sites[k + 1], &[(1, 0)])?;
                            u.a_at(x).clone()
                        }
                        None => self.sites[k].clone(),
                    };
                    block = absorb_site(&block, &absorbed, &mpo, u.e0)?;
                    block.uniform_gauge = keep_uniform && self.left_block.uniform_gauge;
                    self.left_block.uniform_gauge = block.uniform_gauge;
                }
                self.sites.drain(..removed);
                self.center_pos -= removed;
                self.global_offset += removed as i64;
                self.left_block = block;
            }
        }
        self.energy_ledger -= removed as f64 * u.e0;
        Ok(())
    }

    /// Expands toward `direction` and contracts the opposite edge by the same
    /// number of cells.
    pub fn shift(&mut self, direction: Side, cells: usize) -> Result<()> {
        self.expand(direction, cells)?;
        self.contract(direction.opposite(), cells)
    }

    // ---- measurements ------------------------------------------------------

    /// Site tensors with the center Schmidt values folded into one of them.
    pub fn sites_with_center(&self) -> Vec<Tensor> {
        let mut out = self.sites.clone();
        let c = self.center_pos;
        if c < out.len() {
            out[c] = out[c].scale_rows(&self.center_lambda);
        } else {
            let last = out.len() - 1;
            out[last] = out[last].scale_last_axis(&self.center_lambda);
        }
        out
    }

    /// `<H_eff>` of window plus both boundary blocks.
    pub fn energy(&self, mpo: &Mpo) -> Result<f64> {
        chain_energy(&self.left_block, &self.sites_with_center(), &self.right_block, mpo)
    }

    /// Excitation energy relative to the ground state: `<H_eff> - ledger`.
    pub fn energy_remainder(&self, mpo: &Mpo) -> Result<f64> {
        Ok(self.energy(mpo)? - self.energy_ledger)
    }

    /// Right environments `G_k` (Gram matrix of the states right of bond `k`)
    /// for `k = 0..=c`.
    fn right_grams(&self) -> Result<Vec<Tensor>> {
        let c = self.center_pos;
        let mut grams = vec![Tensor::zeros(&[0, 0]); c + 1];
        grams[c] = Tensor::from_diag(&self.center_lambda.iter().map(|x| x * x).collect::<Vec<_>>());
        for k in (0..c).rev() {
            // G_k[l, l'] = Σ conj(A[l, s, r]) G[r, r'] A[l', s, r'].
            let t = contract(&self.sites[k], &grams[k + 1], &[(2, 1)])?; // (l', s, r)
            grams[k] = contract(&self.sites[k].conj(), &t, &[(1, 1), (2, 2)])?;
        }
        Ok(grams)
    }

    /// Left environments `Y_k` for `k = c..=N`.
    fn left_grams(&self) -> Result<Vec<Tensor>> {
        let n = self.len();
        let c = self.center_pos;
        let mut grams = vec![Tensor::zeros(&[0, 0]); n + 1];
        grams[c] = Tensor::from_diag(&self.center_lambda.iter().map(|x| x * x).collect::<Vec<_>>());
        for k in c..n {
            // Y_{k+1}[r, r'] = Σ conj(B[l, s, r]) Y[l, l'] B[l', s, r'].
            let t = contract(&grams[k], &self.sites[k], &[(1, 0)])?; // (l, s, r')
            grams[k + 1] = contract(&self.sites[k].conj(), &t, &[(0, 0), (1, 1)])?;
        }
        Ok(grams)
    }

    /// `<op>` on every window site, in window order.
    pub fn site_expectations(&self, op: &Tensor) -> Result<Vec<f64>> {
        let n = self.len();
        let c = self.center_pos;
        let mut out = vec![0.0; n];
        let right = self.right_grams()?;
        for k in 0..c {
            let a = &self.sites[k];
            let t = contract(a, &right[k + 1], &[(2, 1)])?; // (l, s', r)
            let ot = contract(op, &t, &[(1, 1)])?; // (s, l, r)
            out[k] = contract(&a.conj(), &ot, &[(0, 1), (1, 0), (2, 2)])?.data()[0].re;
        }
        let left = self.left_grams()?;
        for k in c..n {
            let b = &self.sites[k];
            let t = contract(&left[k], b, &[(1, 0)])?; // (l, s', r)
            let ot = contract(op, &t, &[(1, 1)])?; // (s, l, r)
            out[k] = contract(&b.conj(), &ot, &[(0, 1), (1, 0), (2, 2)])?.data()[0].re;
        }
        Ok(out)
    }

    /// Schmidt values across `bond` (0..=N), descending.
    pub fn bond_spectrum(&self, bond: usize) -> Result<Vec<f64>> {
        let n = self.len();
        if bond > n {
            return Err(Error::Invalid(format!("bond {bond} outside 0..={n}")));
        }
        if bond == self.center_pos {
            return Ok(self.center_lambda.clone());
        }
        let gram = if bond < self.center_pos { self.right_grams()?.swap_remove(bond) } else { self.left_grams()?.swap_remove(bond) };
        let (vals, _) = eigh_hermitian(&gram.hermitian_part())?;
        let mut s: Vec<f64> = vals.iter().map(|v| v.max(0.0).sqrt()).collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Ok(s)
    }

    /// Purification `M` with `ρ = M M†` of the reduced density matrix on the
    /// boundary bond plus the adjacent edge site.
    fn edge_purification(&self, side: Side) -> Result<Tensor> {
        let n = self.len();
        match side {
            Side::Left => {
                let g = if self.center_pos == 1 {
                    Tensor::from_diag(&self.center_lambda.iter().map(|x| x * x).collect::<Vec<_>>())
                } else {
                    self.right_grams()?.swap_remove(1)
                };
                let k = psd_root_transpose(&g)?;
                let (l, d, r) = dims3(&self.sites[0]);
                self.sites[0].clone().reshape(&[l * d, r])?.matmul(&k)
            }
            Side::Right => {
                let y = if self.center_pos == n - 1 {
                    Tensor::from_diag(&self.center_lambda.iter().map(|x| x * x).collect::<Vec<_>>())
                } else {
                    self.left_grams()?.swap_remove(n - 1)
                };
                let k = psd_root_transpose(&y)?;
                let (l, d, r) = dims3(&self.sites[n - 1]);
                // ρ[(s β), (s' β')] = Σ B[l, s, β] Y[l', l] conj(B[l', s', β']), Y[l, l'] = <χ_l|χ_l'>.
                let bt = self.sites[n - 1].clone().reshape(&[l, d * r])?.transpose();
                bt.matmul(&k)
            }
        }
    }
}

/// `K` with `K K† = Gᵀ` for a Hermitian PSD `G`.
fn psd_root_transpose(g: &Tensor) -> Result<Tensor> {
    crate::tensor::psd_factor(&g.hermitian_part().transpose())
}

fn normalized(s: &[f64]) -> Vec<f64> {
    let n = s.iter().map(|x| x * x).sum::<f64>().sqrt();
    s.iter().map(|x| x / n).collect()
}

fn normalize_checked(s: &[f64]) -> Result<Vec<f64>> {
    let n = s.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n > 1e-300) {
        return Err(Error::Numerical { context: "operator annihilated the window state".into() });
    }
    Ok(s.iter().map(|x| x / n).collect())
}

/// `√F = tr√(√ρ ρ' √ρ)` between the edge reduced density matrices (boundary
/// bond ⊗ edge site) of two windows, as the sum of singular values of the
/// overlap of their purifications.
pub fn edge_fidelity(now: &WindowState, prev: &WindowState, side: Side) -> Result<f64> {
    if now.global_offset != prev.global_offset || now.len() != prev.len() {
        return Err(Error::Incomparable(format!(
            "windows [{}, {}] and [{}, {}] differ",
            now.first_site(),
            now.last_site(),
            prev.first_site(),
            prev.last_site()
        )));
    }
    let (bn, bp) = match side {
        Side::Left => (&now.left_block, &prev.left_block),
        Side::Right => (&now.right_block, &prev.right_block),
    };
    if bn.sites_absorbed != bp.sites_absorbed || bn.chi() != bp.chi() {
        return Err(Error::Incomparable(format!("{side:?} boundary blocks differ")));
    }
    let m_now = now.edge_purification(side)?;
    let m_prev = prev.edge_purification(side)?;
    nuclear_norm(&m_prev.adjoint().matmul(&m_now)?)
}

/// True iff the fidelity fell strictly below the policy threshold.
pub fn should_move(f: f64, policy: &MovePolicy) -> bool {
    f < policy.fidelity_threshold
}

pub fn apply_local_operator(w: &WindowState, x: i64, op: &Tensor) -> Result<WindowState> {
    let mut out = w.clone();
    out.apply_local_operator(x, op)?;
    Ok(out)
}

pub fn expand(w: &WindowState, side: Side, cells: usize) -> Result<WindowState> {
    let mut out = w.clone();
    out.expand(side, cells)?;
    Ok(out)
}

pub fn contract_window(w: &WindowState, side: Side, cells: usize) -> Result<WindowState> {
    let mut out = w.clone();
    out.contract(side, cells)?;
    Ok(out)
}

pub fn shift_window(w: &WindowState, direction: Side, cells: usize) -> Result<WindowState> {
    let mut out = w.clone();
    out.shift(direction, cells)?;
    Ok(out)
}

/// Serializable snapshot of a window (the uniform state is stored inline).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WindowSnapshot {
    pub left_block: BoundaryBlock,
    pub right_block: BoundaryBlock,
    pub sites: Vec<Tensor>,
    pub center_lambda: Vec<f64>,
    pub center_pos: usize,
    pub global_offset: i64,
    pub uniform: UniformState,
    pub time: f64,
    pub energy_ledger: f64,
    pub truncation_total: f64,
}

impl From<&WindowState> for WindowSnapshot {
    fn from(w: &WindowState) -> Self {
        WindowSnapshot {
            left_block: w.left_block.clone(),
            right_block: w.right_block.clone(),
            sites: w.sites.clone(),
            center_lambda: w.center_lambda.clone(),
            center_pos: w.center_pos,
            global_offset: w.global_offset,
            uniform: (*w.uniform).clone(),
            time: w.time,
            energy_ledger: w.energy_ledger,
            truncation_total: w.truncation_total,
        }
    }
}

impl From<WindowSnapshot> for WindowState {
    fn from(s: WindowSnapshot) -> Self {
        WindowState {
            left_block: s.left_block,
            right_block: s.right_block,
            sites: s.sites,
            center_lambda: s.center_lambda,
            center_pos: s.center_pos,
            global_offset: s.global_offset,
            uniform: Arc::new(s.uniform),
            time: s.time,
            energy_ledger: s.energy_ledger,
            truncation_total: s.truncation_total,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groundstate::tests::ground_state_24;
    use crate::model::{spin1_operators, trotter_gates};
    use crate::tensor::{expm_i_hermitian, C64};
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn window(n: usize, offset: i64) -> WindowState {
        init_window(Arc::new(ground_state_24().clone()), n, offset).unwrap()
    }

    fn aklt_window(n: usize) -> WindowState {
        init_window(Arc::new(UniformState::aklt()), n, 0).unwrap()
    }

    fn random_unitary(rng: &mut StdRng, n: usize) -> Tensor {
        let h = Tensor::from_fn(&[n, n], |_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        expm_i_hermitian(&h.hermitian_part(), 1.0).unwrap()
    }

    fn scramble(w: &mut WindowState, rng: &mut StdRng) {
        let n = w.len();
        w.move_center(1).unwrap();
        for i in 0..n - 1 {
            let landing = if i + 2 < n { Landing::Right } else { Landing::Middle };
            w.apply_gate(i, &random_unitary(rng, D * D), 64, 0.0, landing).unwrap();
        }
        w.apply_edge_gate(Side::Right, &random_unitary(rng, w.right_block.chi() * D)).unwrap();
        w.move_center(1).unwrap();
        w.apply_edge_gate(Side::Left, &random_unitary(rng, w.left_block.chi() * D)).unwrap();
    }

    /// Full amplitude tensor `ψ[α, s_0 .. s_{N-1}, β]` as an `(α s_0) x rest` matrix.
    fn dense(w: &WindowState) -> Tensor {
        let sites = w.sites_with_center();
        let mut psi = sites[0].clone();
        for t in &sites[1..] {
            let shape = psi.shape().to_vec();
            let rows: usize = shape[..shape.len() - 1].iter().product();
            let m = psi.reshape(&[rows, *shape.last().unwrap()]).unwrap();
            let (l, d, r) = dims3(t);
            psi = m.matmul(&t.clone().reshape(&[l, d * r]).unwrap()).unwrap();
            psi = psi.reshape(&[rows * d, r]).unwrap();
        }
        psi
    }

    fn dense_edge_rho(w: &WindowState, side: Side) -> Tensor {
        let psi = dense(w);
        let total = psi.len();
        let edge = match side {
            Side::Left => w.left_block.chi() * D,
            Side::Right => D * w.right_block.chi(),
        };
        let m = match side {
            Side::Left => psi.reshape(&[edge, total / edge]).unwrap(),
            Side::Right => psi.reshape(&[total / edge, edge]).unwrap().transpose(),
        };
        m.matmul(&m.adjoint()).unwrap()
    }

    fn dense_fidelity(rho: &Tensor, sigma: &Tensor) -> f64 {
        let (vals, vecs) = eigh_hermitian(&rho.hermitian_part()).unwrap();
        let root = crate::tensor::hermitian_function(&vals, &vecs, |x| C64::new(x.max(0.0).sqrt(), 0.0));
        let inner = root.matmul(sigma).unwrap().matmul(&root).unwrap().hermitian_part();
        let (vals, _) = eigh_hermitian(&inner).unwrap();
        vals.iter().map(|v| v.max(0.0).sqrt()).sum()
    }

    fn sz_profile(w: &WindowState) -> Vec<f64> {
        w.site_expectations(&spin1_operators().sz).unwrap()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn fresh_window_is_the_ground_state() {
        let w = window(8, -4);
        let mpo = build_mpo();
        assert!(w.canonical_residual() < 1e-12);
        assert!((w.norm_sqr() - 1.0).abs() < 1e-12);
        assert!(w.energy_remainder(&mpo).unwrap().abs() < 1e-8);
        assert!(sz_profile(&w).iter().all(|s| s.abs() < 1e-8));
        let id = w.site_expectations(&Tensor::identity(D)).unwrap();
        assert!(id.iter().all(|x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn window_validation() {
        let u = Arc::new(UniformState::aklt());
        assert!(matches!(init_window(u.clone(), 3, 0), Err(Error::Invalid(_))));
        assert!(matches!(init_window(u, 4, 1), Err(Error::Invalid(_))));
        let mut w = aklt_window(4);
        let op = spin1_operators().sp;
        assert!(matches!(w.apply_local_operator(4, &op), Err(Error::OutsideWindow { site: 4, .. })));
        assert!(matches!(w.contract(Side::Left, 1), Err(Error::WindowTooSmall { .. })));
        assert!(w.move_center(0).is_err());
        assert!(w.move_center(4).is_err());
    }

    #[test]
    fn center_moves_keep_the_state() {
        let mut rng = StdRng::seed_from_u64(7);
        let mut w = aklt_window(8);
        scramble(&mut w, &mut rng);
        let before = dense(&w);
        let sz = sz_profile(&w);
        for c in [7, 2, 5, 1, 4] {
            w.move_center(c).unwrap();
            assert!(w.canonical_residual() < 1e-12);
            assert!(max_diff(&sz_profile(&w), &sz) < 1e-12);
        }
        assert!(dense(&w).max_abs_diff(&before) < 1e-12);
    }

    #[test]
    fn landings_agree() {
        let mut rng = StdRng::seed_from_u64(3);
        let mut base = aklt_window(8);
        scramble(&mut base, &mut rng);
        base.move_center(3).unwrap();
        let gate = random_unitary(&mut rng, D * D);
        let mut results = Vec::new();
        for landing in [Landing::Left, Landing::Middle, Landing::Right] {
            let mut w = base.clone();
            let weight = w.apply_gate(2, &gate, 64, 0.0, landing).unwrap();
            assert!(weight < 1e-14);
            assert!(w.canonical_residual() < 1e-12);
            results.push(dense(&w));
        }
        assert!(results[0].max_abs_diff(&results[1]) < 1e-12);
        assert!(results[1].max_abs_diff(&results[2]) < 1e-12);
        let mut w = base.clone();
        assert!(w.apply_gate(0, &gate, 64, 0.0, Landing::Middle).is_err());
        assert!(w.apply_gate(2, &gate, 64, 0.0, Landing::Middle).is_ok());
        assert!(w.apply_gate(0, &gate, 64, 0.0, Landing::Left).is_err());
    }

    #[test]
    fn truncation_reports_discarded_weight() {
        let mut rng = StdRng::seed_from_u64(11);
        let mut w = aklt_window(8);
        scramble(&mut w, &mut rng);
        scramble(&mut w, &mut rng);
        w.move_center(4).unwrap();
        let before = w.bond_dim(4);
        assert!(before > 2);
        let weight = w.apply_gate(3, &Tensor::identity(D * D), 2, 0.0, Landing::Middle).unwrap();
        assert_eq!(w.bond_dim(4), 2);
        assert!(weight > 0.0 && weight < 1.0);
        assert!((w.norm_sqr() - 1.0).abs() < 1e-12);
        assert!((w.truncation_total - weight).abs() < 1e-15);
    }

    #[test]
    fn quench_raises_magnetization_by_one() {
        let ops = spin1_operators();
        let mut w = window(60, -30);
        w.apply_local_operator(0, &ops.sp).unwrap();
        assert!(w.canonical_residual() < 1e-12);
        assert!((w.norm_sqr() - 1.0).abs() < 1e-12);
        let total: f64 = sz_profile(&w).iter().sum();
        assert!((total - 1.0).abs() < 1e-4, "ΣSz = {total}");
        let mut edge = window(8, -4);
        edge.apply_local_operator(-4, &ops.sp).unwrap();
        assert!(edge.canonical_residual() < 1e-12);
        assert!(sz_profile(&edge)[0] > 0.1);
        let cube = ops.sp.matmul(&ops.sp).unwrap().matmul(&ops.sp).unwrap();
        let mut dead = aklt_window(4);
        assert!(matches!(dead.apply_local_operator(1, &cube), Err(Error::Numerical { .. })));
    }

    #[test]
    fn expansion_is_exact_and_keeps_the_ledger() {
        let mpo = build_mpo();
        let mut w = window(6, -2);
        w.apply_local_operator(0, &spin1_operators().sp).unwrap();
        let remainder = w.energy_remainder(&mpo).unwrap();
        let sz = sz_profile(&w);
        w.expand(Side::Left, 1).unwrap();
        w.expand(Side::Right, 2).unwrap();
        assert_eq!((w.first_site(), w.last_site(), w.len()), (-4, 7, 12));
        assert!(w.canonical_residual() < 1e-12);
        assert!((w.energy_remainder(&mpo).unwrap() - remainder).abs() < 1e-8);
        let inner = sz_profile(&w);
        assert!(max_diff(&inner[2..8], &sz) < 1e-9);
        let deficit = |p: &[f64]| (p.iter().sum::<f64>() - 1.0).abs();
        assert!(deficit(&inner) < deficit(&sz));
    }

    #[test]
    fn contraction_of_uniform_sites_recovers_the_fixed_point() {
        let mpo = build_mpo();
        let mut w = window(12, -6);
        let u = w.uniform.clone();
        w.move_center(3).unwrap();
        w.contract(Side::Right, 2).unwrap();
        w.contract(Side::Left, 1).unwrap();
        assert_eq!((w.first_site(), w.last_site()), (-4, 1));
        assert!(w.left_block.uniform_gauge && w.right_block.uniform_gauge);
        assert_eq!(w.right_block.sites_absorbed, 4);
        for side in [Side::Left, Side::Right] {
            let fixed = uniform_boundary_block(&u, &mpo, side, BOUNDARY_TOL).unwrap();
            let block = if side == Side::Left { &w.left_block } else { &w.right_block };
            assert!(block.e.max_abs_diff(&fixed.e) < 1e-8, "{side:?}");
        }
        assert!(w.energy_remainder(&mpo).unwrap().abs() < 1e-8);
        assert!(w.canonical_residual() < 1e-12);
    }

    #[test]
    fn shift_round_trip_after_quench() {
        let mpo = build_mpo();
        let mut w = window(10, -4);
        w.apply_local_operator(0, &spin1_operators().sp).unwrap();
        let sz = sz_profile(&w);
        let e = w.energy_remainder(&mpo).unwrap();
        let there = shift_window(&w, Side::Left, 1).unwrap();
        assert_eq!(there.first_site(), -6);
        let back = shift_window(&there, Side::Right, 1).unwrap();
        assert_eq!(back.first_site(), -4);
        assert!(max_diff(&sz_profile(&back), &sz) < 1e-8);
        assert!((back.energy_remainder(&mpo).unwrap() - e).abs() < 1e-8);
        assert!(back.left_block.uniform_gauge && back.right_block.uniform_gauge);
    }

    #[test]
    fn perturbed_contraction_blocks_expansion() {
        let mpo = build_mpo();
        let mut w = window(8, -4);
        w.apply_local_operator(3, &spin1_operators().sp).unwrap();
        let e = w.energy(&mpo).unwrap();
        w.contract(Side::Right, 1).unwrap();
        assert!(!w.right_block.uniform_gauge);
        assert!((w.energy(&mpo).unwrap() - (e - 2.0 * w.uniform.e0)).abs() < 1e-8);
        assert!((sz_profile(&w).iter().sum::<f64>() - 1.0).abs() > 1e-3);
        assert!(matches!(w.expand(Side::Right, 1), Err(Error::Invalid(_))));
        assert!(w.expand(Side::Left, 1).is_ok());
    }

    #[test]
    fn fidelity_matches_dense_oracle() {
        let mut rng = StdRng::seed_from_u64(5);
        let mut a = aklt_window(6);
        scramble(&mut a, &mut rng);
        let mut b = a.clone();
        let gate = trotter_gates(0.3, 2).unwrap().steps[0].gate.clone();
        b.move_center(1).unwrap();
        b.apply_gate(0, &gate, 64, 0.0, Landing::Right).unwrap();
        b.apply_edge_gate(Side::Left, &random_unitary(&mut rng, 6)).unwrap();
        b.move_center(5).unwrap();
        b.apply_gate(4, &gate, 64, 0.0, Landing::Middle).unwrap();
        for (now, prev) in [(&a, &b), (&b, &a)] {
            for side in [Side::Left, Side::Right] {
                let f = edge_fidelity(now, prev, side).unwrap();
                let oracle = dense_fidelity(&dense_edge_rho(prev, side), &dense_edge_rho(now, side));
                assert!((f - oracle).abs() < 1e-10, "{side:?}: {f} vs {oracle}");
                assert!(f < 1.0 - 1e-6);
            }
        }
        for c in [1, 3, 5] {
            let mut moved = b.clone();
            moved.move_center(c).unwrap();
            assert!((edge_fidelity(&moved, &b, Side::Left).unwrap() - 1.0).abs() < 1e-12);
            assert!((edge_fidelity(&moved, &b, Side::Right).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_edge_states_have_zero_fidelity() {
        let ops = spin1_operators();
        let u = Arc::new(UniformState::product(0).unwrap());
        let up = init_window(u.clone(), 4, 0).unwrap();
        let mut flipped = up.clone();
        flipped.apply_local_operator(0, &ops.sm).unwrap();
        assert!(edge_fidelity(&flipped, &up, Side::Left).unwrap() < 1e-12);
        assert!((edge_fidelity(&flipped, &up, Side::Right).unwrap() - 1.0).abs() < 1e-12);
        let shifted = expand(&up, Side::Left, 1).unwrap();
        assert!(matches!(edge_fidelity(&shifted, &up, Side::Left), Err(Error::Incomparable(_))));
    }

    #[test]
    fn move_decision_is_strict() {
        let policy = MovePolicy::new(WindowMode::Expanding);
        assert!(!should_move(policy.fidelity_threshold, &policy));
        assert!(should_move(policy.fidelity_threshold - 1e-12, &policy));
        assert!(!should_move(1.0, &policy));
    }

    #[test]
    fn bond_spectrum_matches_center_values() {
        let mut rng = StdRng::seed_from_u64(9);
        let mut w = aklt_window(8);
        scramble(&mut w, &mut rng);
        let spectra: Vec<Vec<f64>> = (1..8).map(|b| w.bond_spectrum(b).unwrap()).collect();
        for b in 1..8 {
            let mut moved = w.clone();
            moved.move_center(b).unwrap();
            let exact = &moved.center_lambda;
            let got = &spectra[b - 1][..exact.len()];
            assert!(max_diff(got, exact) < 1e-10, "bond {b}");
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let mut w = window(6, -2);
        w.apply_local_operator(0, &spin1_operators().sp).unwrap();
        let mut bytes = Vec::new();
        ciborium::into_writer(&WindowSnapshot::from(&w), &mut bytes).unwrap();
        let back: WindowState = ciborium::from_reader::<WindowSnapshot, _>(bytes.as_slice()).unwrap().into();
        assert_eq!(back.center_pos, w.center_pos);
        assert_eq!(back.global_offset, w.global_offset);
        assert!(dense(&back).max_abs_diff(&dense(&w)) == 0.0);
        assert_eq!(back.uniform.e0, w.uniform.e0);
    }
}
