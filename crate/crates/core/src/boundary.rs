//! Boundary block operators for infinite boundary conditions.
//!
//! A block `E[bra, w, ket]` summarizes a semi-infinite half chain in the
//! χ-dimensional bond basis at the window edge, with one slot per MPO
//! channel. For a left block channel 0 is the identity and channel 4 the
//! accumulated Hamiltonian; a right block uses the opposite assignment so
//! that the channels pair up with the MPO directly.
//!
//! The extensive part of the Hamiltonian channel is removed as sites are
//! absorbed; `energy_offset` records what was taken out.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groundstate::{dims3, UniformState};
use crate::model::{Mpo, CH_DONE, CH_START, D};
use crate::tensor::{contract, expm_i_hermitian, Tensor, C64};

const MAX_FIXED_POINT_ITER: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryBlock {
    pub side: Side,
    /// `(χ, w, χ)`: bra bond, MPO channel, ket bond.
    pub e: Tensor,
    /// Window sites folded in after the uniform fixed point was reached.
    pub sites_absorbed: usize,
    /// Total energy removed from the Hamiltonian channel.
    pub energy_offset: f64,
    /// True while the block basis is exactly the uniform-state bond basis,
    /// which is what allows uniform tensors to be inserted next to it.
    pub uniform_gauge: bool,
}

impl BoundaryBlock {
    /// Block representing an empty half chain on a bond of dimension `chi`.
    pub fn trivial(side: Side, chi: usize, w: usize) -> Self {
        let id_ch = identity_channel(side, w);
        let mut e = Tensor::zeros(&[chi, w, chi]);
        for a in 0..chi {
            e.set(&[a, id_ch, a], C64::new(1.0, 0.0));
        }
        Self { side, e, sites_absorbed: 0, energy_offset: 0.0, uniform_gauge: true }
    }

    pub fn chi(&self) -> usize {
        self.e.shape()[0]
    }

    pub fn channels(&self) -> usize {
        self.e.shape()[1]
    }

    pub fn identity_channel(&self) -> usize {
        identity_channel(self.side, self.channels())
    }

    pub fn hamiltonian_channel(&self) -> usize {
        hamiltonian_channel(self.side, self.channels())
    }

    pub fn channel(&self, w: usize) -> Tensor {
        let chi = self.chi();
        Tensor::from_fn(&[chi, chi], |ix| self.e.get(&[ix[0], w, ix[1]]))
    }

    fn set_channel(&mut self, w: usize, m: &Tensor) {
        let chi = self.chi();
        for a in 0..chi {
            for b in 0..chi {
                self.e.set(&[a, w, b], m.get(&[a, b]));
            }
        }
    }

    /// Removes `shift · identity` from the Hamiltonian channel.
    fn subtract_energy(&mut self, shift: f64) {
        let id = self.channel(self.identity_channel());
        let h_ch = self.hamiltonian_channel();
        let h = self.channel(h_ch);
        self.set_channel(h_ch, &h.sub(&id.scale_real(shift)).unwrap());
        self.energy_offset += shift;
    }

    /// Deviation of the identity channel from the identity matrix.
    pub fn identity_residual(&self) -> f64 {
        self.channel(self.identity_channel()).identity_deviation()
    }
}

fn identity_channel(side: Side, w: usize) -> usize {
    match side {
        Side::Left => CH_START,
        Side::Right => w - 1,
    }
}

fn hamiltonian_channel(side: Side, w: usize) -> usize {
    match side {
        Side::Left => w - 1,
        Side::Right => CH_START,
    }
}

/// `E'[b, w', b'] = Σ conj(A[a, s, b]) E[a, w, a'] W[w, w', s, s'] A[a', s', b']`.
pub fn absorb_left(e: &Tensor, a: &Tensor, mpo: &Mpo) -> Result<Tensor> {
    let t1 = contract(e, a, &[(2, 0)])?; // (a, w, s', b')
    let t2 = contract(&t1, &mpo.w, &[(1, 0), (2, 3)])?; // (a, b', w', s)
    let t3 = contract(&a.conj(), &t2, &[(0, 0), (1, 3)])?; // (b, b', w')
    Ok(t3.permute(&[0, 2, 1]))
}

/// `E'[a, w, a'] = Σ conj(B[a, s, b]) W[w, w', s, s'] B[a', s', b'] E[b, w', b']`.
pub fn absorb_right(e: &Tensor, b: &Tensor, mpo: &Mpo) -> Result<Tensor> {
    let t1 = contract(b, e, &[(2, 2)])?; // (a', s', b, w')
    let t2 = contract(&t1, &mpo.w, &[(1, 3), (3, 1)])?; // (a', b, w, s)
    let t3 = contract(&b.conj(), &t2, &[(1, 3), (2, 1)])?; // (a, a', w)
    Ok(t3.permute(&[0, 2, 1]))
}

fn absorb(block: &BoundaryBlock, site: &Tensor, mpo: &Mpo) -> Result<Tensor> {
    let (l, d, r) = dims3(site);
    if d != D || mpo.w.shape()[2] != d {
        return Err(Error::Dimension(format!("site tensor physical dimension {d}")));
    }
    let (bond, other) = match block.side {
        Side::Left => (l, r),
        Side::Right => (r, l),
    };
    if bond != block.chi() {
        return Err(Error::Dimension(format!(
            "site bond {bond} does not match block dimension {} (other bond {other})",
            block.chi()
        )));
    }
    match block.side {
        Side::Left => absorb_left(&block.e, site, mpo),
        Side::Right => absorb_right(&block.e, site, mpo),
    }
}

/// Folds one canonical window site into the block and removes `e0` from
/// the Hamiltonian channel.
pub fn absorb_site(block: &BoundaryBlock, site_tensor: &Tensor, mpo: &Mpo, e0: f64) -> Result<BoundaryBlock> {
    let e = absorb(block, site_tensor, mpo)?;
    let mut out = BoundaryBlock {
        side: block.side,
        e,
        sites_absorbed: block.sites_absorbed + 1,
        energy_offset: block.energy_offset,
        uniform_gauge: false,
    };
    out.subtract_energy(e0);
    Ok(out)
}

/// Fixed point of absorbing uniform unit cells.
///
/// After each cell the Hamiltonian channel is shifted so that its
/// expectation in the edge density matrix `λ²` vanishes; the shift converges
/// to `2 e0`.
pub fn uniform_boundary_block(u: &UniformState, mpo: &Mpo, side: Side, tol: f64) -> Result<BoundaryBlock> {
    // The window always starts on sublattice a and ends on sublattice b, so
    // both blocks meet it on a b|a bond.
    let rho = &u.lambda[1];
    let chi = rho.len();
    let mut block = BoundaryBlock::trivial(side, chi, mpo.dim());
    let cell: [&Tensor; 2] = match side {
        Side::Left => [&u.a_left[0], &u.a_left[1]],
        Side::Right => [&u.b_right[1], &u.b_right[0]],
    };
    let h_ch = block.hamiltonian_channel();
    let mut last = f64::INFINITY;
    for _ in 0..MAX_FIXED_POINT_ITER {
        let prev_h = block.channel(h_ch);
        let mut e = block.e.clone();
        for site in cell {
            e = match side {
                Side::Left => absorb_left(&e, site, mpo)?,
                Side::Right => absorb_right(&e, site, mpo)?,
            };
        }
        block.e = e;
        let h = block.channel(h_ch);
        let shift: f64 = (0..chi).map(|k| rho[k] * rho[k] * h.get(&[k, k]).re).sum();
        block.subtract_energy(shift);
        last = block.channel(h_ch).max_abs_diff(&prev_h);
        if !last.is_finite() {
            break;
        }
        if last < tol {
            block.sites_absorbed = 0;
            return Ok(block);
        }
    }
    Err(Error::NoConvergence { what: "boundary fixed point", steps: MAX_FIXED_POINT_ITER, last })
}

/// The Hamiltonian channel, Hermitian-symmetrized.
pub fn boundary_hamiltonian(block: &BoundaryBlock) -> Tensor {
    block.channel(block.hamiltonian_channel()).hermitian_part()
}

/// `exp(-i h_B dt)` on the block's bond index.
pub fn evolve_boundary(block: &BoundaryBlock, dt: f64) -> Result<Tensor> {
    expm_i_hermitian(&boundary_hamiltonian(block), dt)
}

/// Effective Hamiltonian on (block bond ⊗ adjacent edge site), including
/// the block's own Hamiltonian channel and the MPO coupling across the edge.
///
/// Left: rows `(α, s)`; right: rows `(s, β)`.
pub fn edge_hamiltonian(block: &BoundaryBlock, mpo: &Mpo) -> Tensor {
    let chi = block.chi();
    let w = mpo.dim();
    let dim = chi * D;
    let mut h = Tensor::zeros(&[dim, dim]);
    for ch in 0..w {
        let (slot, e) = match block.side {
            Side::Left => (mpo.slot(ch, CH_DONE), block.channel(ch)),
            Side::Right => (mpo.slot(CH_START, ch), block.channel(ch)),
        };
        if slot.max_abs() == 0.0 || e.max_abs() == 0.0 {
            continue;
        }
        let term = match block.side {
            Side::Left => e.kron(&slot),
            Side::Right => slot.kron(&e),
        };
        h = h.add(&term).unwrap();
    }
    h.hermitian_part()
}

/// `<H>` of a chain `left · sites · right`, where `sites` is any MPS whose
/// outer bonds match the blocks. No energy is subtracted.
pub fn chain_energy(left: &BoundaryBlock, sites: &[Tensor], right: &BoundaryBlock, mpo: &Mpo) -> Result<f64> {
    let mut e = left.e.clone();
    for s in sites {
        e = absorb_left(&e, s, mpo)?;
    }
    if e.shape() != right.e.shape() {
        return Err(Error::Dimension(format!(
            "left environment {:?} vs right block {:?}",
            e.shape(),
            right.e.shape()
        )));
    }
    let total: C64 = e.data().iter().zip(right.e.data()).map(|(a, b)| a * b).sum();
    Ok(total.re)
}

/// If `site` equals `uniform` up to a unitary on the bond facing away from
/// the block, returns that unitary.
///
/// Left side: `site = uniform · V` (V on the right bond). Right side:
/// `site = U · uniform` (U on the left bond).
pub fn uniform_gauge_match(site: &Tensor, uniform: &Tensor, side: Side, tol: f64) -> Option<Tensor> {
    if site.shape() != uniform.shape() {
        return None;
    }
    let (l, d, r) = dims3(site);
    let (g, rebuilt) = match side {
        Side::Left => {
            let x = contract(&uniform.conj(), site, &[(0, 0), (1, 1)]).ok()?; // (r_u, r_w)
            let v = polar_unitary(&x)?;
            let rebuilt = uniform.clone().reshape(&[l * d, r]).ok()?.matmul(&v).ok()?;
            (v, rebuilt.reshape(&[l, d, r]).ok()?)
        }
        Side::Right => {
            let x = contract(site, &uniform.conj(), &[(1, 1), (2, 2)]).ok()?; // (l_w, l_u)
            let u = polar_unitary(&x)?;
            let rebuilt = u.matmul(&uniform.clone().reshape(&[l, d * r]).ok()?).ok()?;
            (u, rebuilt.reshape(&[l, d, r]).ok()?)
        }
    };
    if rebuilt.max_abs_diff(site) <= tol {
        Some(g)
    } else {
        None
    }
}

fn polar_unitary(x: &Tensor) -> Option<Tensor> {
    if x.nrows() != x.ncols() {
        return None;
    }
    let svd = crate::tensor::svd_truncate(x, usize::MAX, 0.0).ok()?;
    if svd.kept() != x.nrows() {
        return None;
    }
    svd.u.matmul(&svd.v).ok()
}
