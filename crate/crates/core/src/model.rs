//! Spin-1 operators, the antiferromagnetic Heisenberg bond Hamiltonian, its
//! MPO and Suzuki–Trotter gate schedules.
//!
//! Local basis ordering is `m = +1, 0, -1`. Two-site operators are indexed
//! `s1 * 3 + s2` with the left site as the slow index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{expm_hermitian, expm_i_hermitian, Tensor, C64};

pub const D: usize = 3;
pub const MPO_DIM: usize = 5;

/// Identity-propagation channel on the left of a bond of the MPO.
pub const CH_START: usize = 0;
/// Completed-Hamiltonian channel.
pub const CH_DONE: usize = MPO_DIM - 1;

#[derive(Clone, Debug)]
pub struct SiteOperators {
    pub sz: Tensor,
    pub sp: Tensor,
    pub sm: Tensor,
    pub sx: Tensor,
    pub sy: Tensor,
    pub id: Tensor,
}

pub fn spin1_operators() -> SiteOperators {
    let r2 = std::f64::consts::SQRT_2;
    let sz = Tensor::from_diag(&[1.0, 0.0, -1.0]);
    let mut sp = Tensor::zeros(&[D, D]);
    sp.set(&[0, 1], C64::new(r2, 0.0));
    sp.set(&[1, 2], C64::new(r2, 0.0));
    let sm = sp.adjoint();
    let sx = sp.add(&sm).unwrap().scale_real(0.5);
    let sy = sp.sub(&sm).unwrap().scale(C64::new(0.0, -0.5));
    SiteOperators { sz, sp, sm, sx, sy, id: Tensor::identity(D) }
}

/// Looks up a named single-site operator (`sp`, `sm`, `sz`, `sx`, `sy`, `id`).
pub fn named_operator(name: &str) -> Result<Tensor> {
    let ops = spin1_operators();
    Ok(match name.to_ascii_lowercase().as_str() {
        "sp" | "s+" | "splus" => ops.sp,
        "sm" | "s-" | "sminus" => ops.sm,
        "sz" => ops.sz,
        "sx" => ops.sx,
        "sy" => ops.sy,
        "id" | "identity" => ops.id,
        other => return Err(Error::Invalid(format!("unknown operator '{other}'"))),
    })
}

#[derive(Clone, Debug)]
pub struct BondHamiltonian {
    pub h: Tensor,
}

/// `S·S` on two neighbouring spin-1 sites, `J = 1`.
pub fn bond_hamiltonian() -> BondHamiltonian {
    let ops = spin1_operators();
    // S·S = Sz Sz + (S+ S- + S- S+) / 2 keeps the matrix exactly real.
    let zz = ops.sz.kron(&ops.sz);
    let pm = ops.sp.kron(&ops.sm);
    let mp = ops.sm.kron(&ops.sp);
    let h = zz.add(&pm.add(&mp).unwrap().scale_real(0.5)).unwrap();
    BondHamiltonian { h }
}

/// Heisenberg MPO, `w[wl, wr, bra, ket]`, lower channel index on the left.
///
/// Channel 0 carries the identity ahead of any interaction, channel 4 the
/// completed Hamiltonian; closing a chain with `e_0` on the left and `e_4`
/// on the right gives the open-chain Hamiltonian.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mpo {
    pub w: Tensor,
}

impl Mpo {
    /// The `d x d` operator in slot `(wl, wr)`.
    pub fn slot(&self, wl: usize, wr: usize) -> Tensor {
        Tensor::from_fn(&[D, D], |ix| self.w.get(&[wl, wr, ix[0], ix[1]]))
    }

    pub fn dim(&self) -> usize {
        self.w.shape()[0]
    }
}

pub fn build_mpo() -> Mpo {
    let ops = spin1_operators();
    let mut w = Tensor::zeros(&[MPO_DIM, MPO_DIM, D, D]);
    let mut put = |wl: usize, wr: usize, op: &Tensor| {
        for a in 0..D {
            for b in 0..D {
                w.set(&[wl, wr, a, b], op.get(&[a, b]));
            }
        }
    };
    put(CH_START, CH_START, &ops.id);
    put(CH_DONE, CH_DONE, &ops.id);
    put(0, 1, &ops.sp);
    put(1, CH_DONE, &ops.sm.scale_real(0.5));
    put(0, 2, &ops.sm);
    put(2, CH_DONE, &ops.sp.scale_real(0.5));
    put(0, 3, &ops.sz);
    put(3, CH_DONE, &ops.sz);
    Mpo { w }
}

/// Dense `d^n x d^n` operator obtained by closing `n` copies of the MPO with
/// the start/done selection vectors.
pub fn mpo_dense(mpo: &Mpo, n: usize) -> Tensor {
    let w = mpo.dim();
    // acc[c] is the accumulated operator on the sites so far, in channel c.
    let mut acc: Vec<Tensor> = (0..w)
        .map(|c| if c == CH_START { Tensor::identity(1) } else { Tensor::zeros(&[1, 1]) })
        .collect();
    for _ in 0..n {
        let dim = acc[0].nrows() * D;
        let mut next: Vec<Tensor> = (0..w).map(|_| Tensor::zeros(&[dim, dim])).collect();
        for wl in 0..w {
            if acc[wl].max_abs() == 0.0 {
                continue;
            }
            for (wr, slot) in next.iter_mut().enumerate() {
                let op = mpo.slot(wl, wr);
                if op.max_abs() == 0.0 {
                    continue;
                }
                *slot = slot.add(&acc[wl].kron(&op)).unwrap();
            }
        }
        acc = next;
    }
    acc.swap_remove(CH_DONE)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    /// Bonds `(x, x + 1)` with `x` even in global coordinates.
    Even,
    Odd,
}

impl Parity {
    pub fn of_bond(left_site: i64) -> Parity {
        if left_site.rem_euclid(2) == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

#[derive(Clone, Debug)]
pub struct GateStep {
    pub parity: Parity,
    /// Time covered by this layer.
    pub tau: f64,
    pub gate: Tensor,
}

#[derive(Clone, Debug)]
pub struct GateSchedule {
    pub steps: Vec<GateStep>,
    pub order: u32,
    pub dt: f64,
}

impl GateSchedule {
    /// Total time covered by the layers of the given parity.
    pub fn parity_time(&self, parity: Parity) -> f64 {
        self.steps.iter().filter(|s| s.parity == parity).map(|s| s.tau).sum()
    }
}

/// `θ = 1 / (4 - 4^{1/3})`.
pub fn suzuki_theta() -> f64 {
    1.0 / (4.0 - 4f64.cbrt())
}

/// Layer pattern `(parity, fraction of dt)` of a symmetric splitting.
///
/// Order 4 composes five second-order steps with fractions
/// `θ, θ, 1 - 4θ, θ, θ` and merges adjacent even half-layers.
pub fn trotter_layers(order: u32) -> Result<Vec<(Parity, f64)>> {
    let fractions: Vec<f64> = match order {
        2 => vec![1.0],
        4 => {
            let th = suzuki_theta();
            vec![th, th, 1.0 - 4.0 * th, th, th]
        }
        o => return Err(Error::Invalid(format!("unsupported Trotter order {o}"))),
    };
    let mut layers: Vec<(Parity, f64)> = Vec::with_capacity(2 * fractions.len() + 1);
    for f in fractions {
        match layers.last_mut() {
            Some((Parity::Even, tau)) => *tau += 0.5 * f,
            _ => layers.push((Parity::Even, 0.5 * f)),
        }
        layers.push((Parity::Odd, f));
        layers.push((Parity::Even, 0.5 * f));
    }
    Ok(layers)
}

/// Real-time schedule: each layer's gate is `exp(-i h tau)`.
pub fn trotter_gates(dt: f64, order: u32) -> Result<GateSchedule> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Invalid(format!("time step must be positive, got {dt}")));
    }
    let h = bond_hamiltonian().h;
    let steps = trotter_layers(order)?
        .into_iter()
        .map(|(parity, frac)| {
            let tau = frac * dt;
            Ok(GateStep { parity, tau, gate: expm_i_hermitian(&h, tau)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GateSchedule { steps, order, dt })
}

/// Imaginary-time schedule: each layer's gate is `exp(-h tau)`.
pub fn imaginary_gates(dtau: f64, order: u32) -> Result<GateSchedule> {
    if !(dtau > 0.0) || !dtau.is_finite() {
        return Err(Error::Invalid(format!("imaginary time step must be positive, got {dtau}")));
    }
    let h = bond_hamiltonian().h;
    let steps = trotter_layers(order)?
        .into_iter()
        .map(|(parity, frac)| {
            let tau = frac * dtau;
            Ok(GateStep { parity, tau, gate: expm_hermitian(&h, tau)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GateSchedule { steps, order, dt: dtau })
}

/// Embeds a two-site operator acting on sites `(i, i + 1)` of an `n`-site
/// chain as a dense matrix.
pub fn embed_two_site(op: &Tensor, i: usize, n: usize) -> Tensor {
    let left = Tensor::identity(D.pow(i as u32));
    let right = Tensor::identity(D.pow((n - i - 2) as u32));
    left.kron(op).kron(&right)
}

/// Embeds a one-site operator on site `i` of an `n`-site chain.
pub fn embed_one_site(op: &Tensor, i: usize, n: usize) -> Tensor {
    let left = Tensor::identity(D.pow(i as u32));
    let right = Tensor::identity(D.pow((n - i - 1) as u32));
    left.kron(op).kron(&right)
}

/// Dense product of one full schedule on an open `n`-site chain whose bond
/// `(i, i + 1)` has global parity of `i + first_site`.
pub fn schedule_dense(schedule: &GateSchedule, n: usize, first_site: i64) -> Tensor {
    let dim = D.pow(n as u32);
    let mut u = Tensor::identity(dim);
    for step in &schedule.steps {
        for i in 0..n - 1 {
            if Parity::of_bond(first_site + i as i64) == step.parity {
                u = embed_two_site(&step.gate, i, n).matmul(&u).unwrap();
            }
        }
    }
    u
}

/// Spectral-norm distance between one Trotter step and the exact propagator
/// on an open three-site chain (the smallest system with both parities).
pub fn trotter_step_error(dt: f64, order: u32) -> Result<f64> {
    let n = 3;
    let mut h = Tensor::zeros(&[D.pow(n as u32); 2]);
    for i in 0..n - 1 {
        h = h.add(&embed_two_site(&bond_hamiltonian().h, i, n))?;
    }
    let exact = expm_i_hermitian(&h, dt)?;
    let approx = schedule_dense(&trotter_gates(dt, order)?, n, 0);
    Ok(crate::tensor::singular_values(&approx.sub(&exact)?)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{eigh_hermitian, ONE};

    fn commutator(a: &Tensor, b: &Tensor) -> Tensor {
        a.matmul(b).unwrap().sub(&b.matmul(a).unwrap()).unwrap()
    }

    #[test]
    fn sz_eigenvalue_on_top_state() {
        let ops = spin1_operators();
        assert_eq!(ops.sz.get(&[0, 0]), ONE);
    }

    #[test]
    fn ladder_coefficient() {
        let ops = spin1_operators();
        // |m=-1> is index 2, |m=0> is index 1.
        let r2 = std::f64::consts::SQRT_2;
        assert!((ops.sp.get(&[1, 2]) - C64::new(r2, 0.0)).norm() < 1e-15);
        assert!(ops.sp.get(&[0, 2]).norm() == 0.0);
    }

    #[test]
    fn spin_algebra() {
        let o = spin1_operators();
        let i = C64::new(0.0, 1.0);
        assert!(commutator(&o.sx, &o.sy).max_abs_diff(&o.sz.scale(i)) < 1e-15);
        assert!(commutator(&o.sy, &o.sz).max_abs_diff(&o.sx.scale(i)) < 1e-15);
        assert!(commutator(&o.sz, &o.sx).max_abs_diff(&o.sy.scale(i)) < 1e-15);
        let sp = o.sx.add(&o.sy.scale(i)).unwrap();
        assert!(sp.max_abs_diff(&o.sp) < 1e-15);
        assert!(o.sm.max_abs_diff(&o.sp.adjoint()) < 1e-15);
    }

    #[test]
    fn bond_spectrum() {
        let h = bond_hamiltonian().h;
        assert!(h.trace().norm() < 1e-14);
        assert!(h.hermiticity_deviation() < 1e-14);
        let (e, _) = eigh_hermitian(&h).unwrap();
        let expected = [-2.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        for (a, b) in e.iter().zip(expected) {
            assert!((a - b).abs() < 1e-13, "{e:?}");
        }
    }

    #[test]
    fn bond_matches_cartesian_kron() {
        let o = spin1_operators();
        let direct = o
            .sx
            .kron(&o.sx)
            .add(&o.sy.kron(&o.sy))
            .unwrap()
            .add(&o.sz.kron(&o.sz))
            .unwrap();
        assert!(direct.max_abs_diff(&bond_hamiltonian().h) < 1e-15);
    }

    #[test]
    fn bond_conserves_total_sz() {
        let o = spin1_operators();
        let total = o.sz.kron(&o.id).add(&o.id.kron(&o.sz)).unwrap();
        assert!(commutator(&bond_hamiltonian().h, &total).max_abs() < 1e-15);
    }

    #[test]
    fn mpo_closes_to_chain_hamiltonian() {
        let mpo = build_mpo();
        assert_eq!(mpo.dim(), 5);
        let h = bond_hamiltonian().h;
        assert!(mpo_dense(&mpo, 2).max_abs_diff(&h) < 1e-15);
        for n in 3..=5 {
            let mut expected = Tensor::zeros(&[D.pow(n as u32); 2]);
            for i in 0..n - 1 {
                expected = expected.add(&embed_two_site(&h, i, n)).unwrap();
            }
            assert!(mpo_dense(&mpo, n).max_abs_diff(&expected) < 1e-13, "n = {n}");
        }
    }

    #[test]
    fn theta_solves_cubic() {
        let th = suzuki_theta();
        assert!((th - 0.4144907717).abs() < 1e-10);
        assert!((4.0 * th.powi(3) + (1.0 - 4.0 * th).powi(3)).abs() < 1e-14);
    }

    #[test]
    fn schedule_covers_dt_per_parity() {
        for order in [2, 4] {
            let s = trotter_gates(0.05, order).unwrap();
            assert!((s.parity_time(Parity::Even) - 0.05).abs() < 1e-15);
            assert!((s.parity_time(Parity::Odd) - 0.05).abs() < 1e-15);
            for step in &s.steps {
                assert!(step.gate.matmul(&step.gate.adjoint()).unwrap().identity_deviation() < 1e-12);
            }
        }
        assert_eq!(trotter_gates(0.05, 4).unwrap().steps.len(), 11);
        assert!(trotter_gates(0.05, 3).is_err());
    }

    #[test]
    fn tiny_dt_gates_are_identity() {
        let s = trotter_gates(1e-14, 4).unwrap();
        for step in &s.steps {
            assert!(step.gate.identity_deviation() < 1e-12);
        }
    }

    #[test]
    fn fourth_order_local_error_slope() {
        let dts = [0.1, 0.05, 0.025];
        let errs: Vec<f64> = dts.iter().map(|&dt| trotter_step_error(dt, 4).unwrap()).collect();
        for k in 0..2 {
            let slope = (errs[k] / errs[k + 1]).log2();
            assert!((4.5..5.5).contains(&slope), "slope {slope} from {errs:?}");
        }
    }
}
