//! Exact reference calculations on short open chains.
//!
//! The Hamiltonian is applied matrix-free, bond by bond. Ground states come
//! from Lanczos with full reorthogonalization and real-time evolution from a
//! short-Krylov propagator with adaptive internal steps.

use crate::error::{Error, Result};
use crate::model::{bond_hamiltonian, spin1_operators, D};
use crate::tensor::{eigh_hermitian, Tensor, C64, ONE, ZERO};

pub const MAX_SITES: usize = 12;
const DENSE_MAX_SITES: usize = 6;
const KRYLOV_DIM: usize = 20;
const KRYLOV_TOL: f64 = 1e-12;

/// Open-chain Heisenberg Hamiltonian `Σ S_i·S_{i+1}` on `l` spin-1 sites.
#[derive(Clone, Debug)]
pub struct ChainHamiltonian {
    l: usize,
    bond: [[f64; 9]; 9],
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    pub amplitudes: Vec<C64>,
    pub l: usize,
}

pub fn build_hamiltonian(l: usize) -> Result<ChainHamiltonian> {
    if l < 2 {
        return Err(Error::Invalid(format!("chain needs at least 2 sites, got {l}")));
    }
    if l > MAX_SITES {
        return Err(Error::ResourceGuard(format!(
            "exact diagonalization limited to {MAX_SITES} sites, requested {l}"
        )));
    }
    let h = bond_hamiltonian().h;
    let mut bond = [[0.0; 9]; 9];
    for (i, row) in bond.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = h.get(&[i, j]).re;
        }
    }
    Ok(ChainHamiltonian { l, bond })
}

impl ChainHamiltonian {
    pub fn sites(&self) -> usize {
        self.l
    }

    pub fn dim(&self) -> usize {
        D.pow(self.l as u32)
    }

    /// `out = H v`.
    pub fn apply(&self, v: &[C64], out: &mut [C64]) {
        let dim = self.dim();
        assert_eq!(v.len(), dim);
        assert_eq!(out.len(), dim);
        out.iter_mut().for_each(|z| *z = ZERO);
        for i in 0..self.l - 1 {
            let stride = D.pow((self.l - 2 - i) as u32);
            let block = stride * 9;
            for base in (0..dim).step_by(block) {
                for inner in 0..stride {
                    let mut local = [ZERO; 9];
                    for (k, slot) in local.iter_mut().enumerate() {
                        *slot = v[base + inner + k * stride];
                    }
                    for (r, row) in self.bond.iter().enumerate() {
                        let mut acc = ZERO;
                        for (c, &h) in row.iter().enumerate() {
                            if h != 0.0 {
                                acc += local[c] * h;
                            }
                        }
                        out[base + inner + r * stride] += acc;
                    }
                }
            }
        }
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; v.len()];
        self.apply(v, &mut out);
        out
    }

    /// Dense matrix, for chains of at most six sites.
    pub fn dense(&self) -> Result<Tensor> {
        if self.l > DENSE_MAX_SITES {
            return Err(Error::ResourceGuard(format!(
                "dense Hamiltonian limited to {DENSE_MAX_SITES} sites"
            )));
        }
        let dim = self.dim();
        let mut m = Tensor::zeros(&[dim, dim]);
        let mut e = vec![ZERO; dim];
        for j in 0..dim {
            e[j] = ONE;
            let col = self.matvec(&e);
            e[j] = ZERO;
            for (i, z) in col.into_iter().enumerate() {
                m.set(&[i, j], z);
            }
        }
        Ok(m)
    }

    pub fn expectation(&self, state: &DenseState) -> f64 {
        dot(&state.amplitudes, &self.matvec(&state.amplitudes)).re
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
}

/// Total magnetization `Σ m_i` of a basis index.
fn magnetization(mut index: usize, l: usize) -> i32 {
    let mut m = 0;
    for _ in 0..l {
        m += 1 - (index % D) as i32;
        index /= D;
    }
    m
}

impl DenseState {
    pub fn new(amplitudes: Vec<C64>, l: usize) -> Result<Self> {
        if amplitudes.len() != D.pow(l as u32) {
            return Err(Error::Dimension(format!(
                "{} amplitudes for {l} sites",
                amplitudes.len()
            )));
        }
        Ok(Self { amplitudes, l })
    }

    /// Product state with site `i` in local basis state `states[i]`.
    pub fn product(states: &[usize]) -> Result<Self> {
        let l = states.len();
        let mut index = 0;
        for &s in states {
            if s >= D {
                return Err(Error::Invalid(format!("local state {s} out of range")));
            }
            index = index * D + s;
        }
        let mut amplitudes = vec![ZERO; D.pow(l as u32)];
        amplitudes[index] = ONE;
        Ok(Self { amplitudes, l })
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    pub fn overlap(&self, other: &DenseState) -> C64 {
        dot(&self.amplitudes, &other.amplitudes)
    }

    /// Applies a one-site operator and renormalizes.
    pub fn apply_site_operator(&self, op: &Tensor, site: usize) -> Result<DenseState> {
        if site >= self.l {
            return Err(Error::Invalid(format!("site {site} outside chain of {}", self.l)));
        }
        let stride = D.pow((self.l - 1 - site) as u32);
        let mut out = vec![ZERO; self.amplitudes.len()];
        for base in (0..out.len()).step_by(stride * D) {
            for inner in 0..stride {
                for r in 0..D {
                    let mut acc = ZERO;
                    for c in 0..D {
                        acc += op.get(&[r, c]) * self.amplitudes[base + inner + c * stride];
                    }
                    out[base + inner + r * stride] = acc;
                }
            }
        }
        let n = norm(&out);
        if n < 1e-300 {
            return Err(Error::Numerical { context: "operator annihilated the state".into() });
        }
        out.iter_mut().for_each(|z| *z /= n);
        Ok(DenseState { amplitudes: out, l: self.l })
    }
}

/// Per-site `<S^z>`.
pub fn sz_profile(state: &DenseState) -> Vec<f64> {
    let l = state.l;
    let mut out = vec![0.0; l];
    for (index, amp) in state.amplitudes.iter().enumerate() {
        let p = amp.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let mut rest = index;
        for site in (0..l).rev() {
            out[site] += p * (1.0 - (rest % D) as f64);
            rest /= D;
        }
    }
    out
}

struct Lanczos {
    basis: Vec<Vec<C64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

/// Krylov recursion with full reorthogonalization; stops early on an
/// invariant subspace.
fn lanczos(h: &ChainHamiltonian, start: &[C64], max_dim: usize) -> Lanczos {
    let mut v = start.to_vec();
    let n0 = norm(&v);
    v.iter_mut().for_each(|z| *z /= n0);
    let mut basis = vec![v];
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let mut w = vec![ZERO; start.len()];
    loop {
        let k = basis.len() - 1;
        h.apply(&basis[k], &mut w);
        let a = dot(&basis[k], &w).re;
        alpha.push(a);
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
        }
        let b = norm(&w);
        if basis.len() == max_dim || b < 1e-13 {
            beta.push(b);
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|z| z / b).collect());
    }
    Lanczos { basis, alpha, beta }
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> Tensor {
    let m = alpha.len();
    let mut t = Tensor::zeros(&[m, m]);
    for i in 0..m {
        t.set(&[i, i], C64::new(alpha[i], 0.0));
        if i + 1 < m {
            t.set(&[i, i + 1], C64::new(beta[i], 0.0));
            t.set(&[i + 1, i], C64::new(beta[i], 0.0));
        }
    }
    t
}

/// Deterministic start vector in the zero-magnetization sector.
fn start_vector(l: usize) -> Vec<C64> {
    (0..D.pow(l as u32))
        .map(|i| {
            if magnetization(i, l) == 0 {
                C64::new(1.0 + 0.1 * ((i * 7919) % 101) as f64 / 101.0, 0.0)
            } else {
                ZERO
            }
        })
        .collect()
}

/// Lowest `k` eigenpairs in the zero-magnetization sector, residual ≤ 1e-10.
pub fn lowest_states(l: usize, k: usize) -> Result<Vec<(f64, DenseState)>> {
    let h = build_hamiltonian(l)?;
    let dim = h.dim();
    let max_dim = 200.min(dim);
    let mut start = start_vector(l);
    let mut last = f64::INFINITY;
    for _restart in 0..20 {
        let lz = lanczos(&h, &start, max_dim);
        let t = tridiagonal(&lz.alpha, &lz.beta);
        let (theta, s) = eigh_hermitian(&t)?;
        let wanted = k.min(theta.len());
        let mut pairs = Vec::with_capacity(wanted);
        let mut worst: f64 = 0.0;
        for j in 0..wanted {
            let mut v = vec![ZERO; dim];
            for (i, q) in lz.basis.iter().enumerate() {
                axpy(s.get(&[i, j]), q, &mut v);
            }
            let n = norm(&v);
            v.iter_mut().for_each(|z| *z /= n);
            let hv = h.matvec(&v);
            let e = dot(&v, &hv).re;
            let res = hv.iter().zip(&v).map(|(a, b)| (a - b * e).norm_sqr()).sum::<f64>().sqrt();
            worst = worst.max(res);
            pairs.push((e, DenseState { amplitudes: v, l }));
        }
        last = worst;
        if worst <= 1e-10 {
            return Ok(pairs);
        }
        if lz.basis.len() < max_dim {
            break;
        }
        // Restart from the sum of the wanted Ritz vectors.
        start = vec![ZERO; dim];
        for (_, p) in &pairs {
            axpy(ONE, &p.amplitudes, &mut start);
        }
    }
    Err(Error::NoConvergence { what: "Lanczos ground state", steps: 20, last })
}

pub fn ground_state(l: usize) -> Result<(f64, DenseState)> {
    let mut v = lowest_states(l, 1)?;
    Ok(v.remove(0))
}

/// Open-chain estimate of the bulk energy per site: the ground-state energy
/// divided by the number of bonds, which removes most of the edge penalty.
pub fn energy_per_site_estimate(l: usize) -> Result<f64> {
    let (e, _) = ground_state(l)?;
    Ok(e / (l - 1) as f64)
}

/// `exp(-i H t) |state>` by Krylov steps of dimension 20; each internal step
/// is at most `dt_internal` and is halved until the Lanczos error estimate is
/// below 1e-12.
pub fn evolve_exact(state: &DenseState, t: f64, dt_internal: f64) -> Result<DenseState> {
    let h = build_hamiltonian(state.l)?;
    if !(dt_internal > 0.0) {
        return Err(Error::Invalid("internal time step must be positive".into()));
    }
    let mut psi = state.amplitudes.clone();
    let mut elapsed = 0.0;
    let mut h_step = dt_internal.min(t.abs());
    let sign = t.signum();
    let mut refinements = 0;
    while elapsed < t.abs() - 1e-15 {
        let step = h_step.min(t.abs() - elapsed);
        let lz = lanczos(&h, &psi, KRYLOV_DIM);
        let m = lz.alpha.len();
        let tri = tridiagonal(&lz.alpha, &lz.beta);
        let (theta, s) = eigh_hermitian(&tri)?;
        // c = exp(-i T τ) e_1 in the Krylov basis.
        let tau = sign * step;
        let coeffs: Vec<C64> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| s.get(&[i, j]) * C64::from_polar(1.0, -theta[j] * tau) * s.get(&[0, j]).conj())
                    .sum()
            })
            .collect();
        let estimate = if m < KRYLOV_DIM { 0.0 } else { lz.beta[m - 1] * coeffs[m - 1].norm() };
        if estimate > KRYLOV_TOL {
            h_step *= 0.5;
            refinements += 1;
            if refinements > 60 {
                return Err(Error::NoConvergence {
                    what: "Krylov propagator",
                    steps: refinements,
                    last: estimate,
                });
            }
            continue;
        }
        let n0 = norm(&psi);
        let mut next = vec![ZERO; psi.len()];
        for (c, q) in coeffs.iter().zip(&lz.basis) {
            axpy(c * n0, q, &mut next);
        }
        psi = next;
        elapsed += step;
    }
    Ok(DenseState { amplitudes: psi, l: state.l })
}

/// Reference propagation by full diagonalization (at most six sites).
pub fn evolve_dense(state: &DenseState, t: f64) -> Result<DenseState> {
    let h = build_hamiltonian(state.l)?.dense()?;
    let u = crate::tensor::expm_i_hermitian(&h, t)?;
    let v = Tensor::from_vec(&[state.amplitudes.len(), 1], state.amplitudes.clone())?;
    Ok(DenseState { amplitudes: u.matmul(&v)?.into_data(), l: state.l })
}

/// Open-chain quench: ground state of `l` sites with `S+` applied at `site`.
pub fn quenched_ground_state(l: usize, site: usize) -> Result<DenseState> {
    let (_, gs) = ground_state(l)?;
    gs.apply_site_operator(&spin1_operators().sp, site)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_mpo, embed_two_site, mpo_dense};

    #[test]
    fn two_site_spectrum() {
        let h = build_hamiltonian(2).unwrap().dense().unwrap();
        assert_eq!(h.hermiticity_deviation(), 0.0);
        let (e, _) = eigh_hermitian(&h).unwrap();
        let expected = [-2.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        for (a, b) in e.iter().zip(expected) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn three_sites_match_kron_construction() {
        let h = build_hamiltonian(3).unwrap().dense().unwrap();
        let bond = bond_hamiltonian().h;
        let expected = embed_two_site(&bond, 0, 3).add(&embed_two_site(&bond, 1, 3)).unwrap();
        assert!(h.max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn four_sites_match_mpo() {
        let h = build_hamiltonian(4).unwrap().dense().unwrap();
        assert!(h.max_abs_diff(&mpo_dense(&build_mpo(), 4)) < 1e-13);
    }

    #[test]
    fn size_guard() {
        assert!(matches!(build_hamiltonian(20), Err(Error::ResourceGuard(_))));
        assert!(matches!(build_hamiltonian(1), Err(Error::Invalid(_))));
    }

    #[test]
    fn two_site_ground_energy() {
        let (e, gs) = ground_state(2).unwrap();
        assert!((e + 2.0).abs() < 1e-12);
        assert!((gs.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ten_site_energy_per_site_bracket() {
        let (e, gs) = ground_state(10).unwrap();
        assert!((e + 12.894560).abs() < 1e-5, "{e}");
        let per_site = e / 9.0;
        assert!((-1.45..=-1.35).contains(&per_site), "{per_site}");
        let sz = sz_profile(&gs);
        assert!(sz.iter().sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn lowest_states_are_orthogonal() {
        let states = lowest_states(4, 2).unwrap();
        assert_eq!(states.len(), 2);
        assert!(states[0].1.overlap(&states[1].1).norm() < 1e-10);
        assert!(states[0].0 <= states[1].0);
    }

    #[test]
    fn eigenstate_only_acquires_phase() {
        let (e, gs) = ground_state(6).unwrap();
        let t = 1.3;
        let out = evolve_exact(&gs, t, 0.1).unwrap();
        let ov = gs.overlap(&out);
        assert!((ov.norm() - 1.0).abs() < 1e-10);
        assert!((ov - C64::from_polar(1.0, -e * t)).norm() < 1e-9);
    }

    #[test]
    fn zero_time_is_identity() {
        let psi = quenched_ground_state(4, 1).unwrap();
        assert_eq!(evolve_exact(&psi, 0.0, 0.1).unwrap(), psi);
    }

    #[test]
    fn krylov_matches_full_diagonalization() {
        let psi = quenched_ground_state(6, 2).unwrap();
        let a = evolve_exact(&psi, 1.5, 0.1).unwrap();
        let b = evolve_dense(&psi, 1.5).unwrap();
        let diff = a.amplitudes.iter().zip(&b.amplitudes).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "{diff}");
        assert!((a.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn quench_adds_one_unit_of_sz() {
        let psi = quenched_ground_state(6, 2).unwrap();
        assert!((sz_profile(&psi).iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn center_quench_profile_is_mirror_symmetric() {
        // Odd length puts the quench exactly on the mirror axis.
        let psi = quenched_ground_state(5, 2).unwrap();
        let out = evolve_exact(&psi, 0.8, 0.1).unwrap();
        let sz = sz_profile(&out);
        for k in 0..5 {
            assert!((sz[k] - sz[4 - k]).abs() < 1e-10, "{sz:?}");
        }
    }

    #[test]
    fn energy_is_conserved() {
        let h = build_hamiltonian(8).unwrap();
        let psi = quenched_ground_state(8, 4).unwrap();
        let e0 = h.expectation(&psi);
        let out = evolve_exact(&psi, 2.0, 0.1).unwrap();
        assert!((h.expectation(&out) - e0).abs() < 1e-8);
    }
}
