//! Translationally invariant ground state with a two-site unit cell.
//!
//! The state is found by imaginary-time iTEBD in the Hastings form (right
//! canonical tensors plus Schmidt values, no inversion of small λ) and then
//! brought to exact mixed-canonical form by iterated LQ/QR sweeps over the
//! unit cell.
//!
//! Sublattice `a` (index 0) sits on even global sites. `lambda[0]` lives on
//! the bond `a|b`, `lambda[1]` on the bond `b|a`.

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{bond_hamiltonian, imaginary_gates, GateSchedule, Parity, D};
use crate::tensor::{contract, lq_positive, qr_positive, svd_truncate, Tensor, C64};

pub const LAMBDA_FLOOR: f64 = 1e-14;
const GAUGE_TOL: f64 = 1e-13;
const GAUGE_MAX_ITER: usize = 20_000;
/// Discarded weight below which iTEBD drops Schmidt values regardless of χ.
const ITEBD_DISCARD: f64 = 1e-14;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UniformState {
    /// Vidal tensors `Γ_a`, `Γ_b`, shape `(χ, d, χ)`.
    pub gamma: [Tensor; 2],
    /// Schmidt values on the bonds `a|b` and `b|a`, descending, `Σ λ² = 1`.
    pub lambda: [Vec<f64>; 2],
    /// Left-canonical forms `A_a = λ_{b|a} Γ_a`, `A_b = λ_{a|b} Γ_b`.
    pub a_left: [Tensor; 2],
    /// Right-canonical forms `B_a = Γ_a λ_{a|b}`, `B_b = Γ_b λ_{b|a}`.
    pub b_right: [Tensor; 2],
    /// `<S·S>` on the bonds `a|b` and `b|a`.
    pub bond_energy: [f64; 2],
    /// Energy per site, the mean of the two bond energies.
    pub e0: f64,
    pub chi: usize,
}

#[derive(Clone, Debug)]
pub struct GroundStateConfig {
    pub chi: usize,
    pub conv_tol: f64,
    pub dtau_schedule: Vec<f64>,
    /// Trotter order of the last stage; earlier stages use order 2.
    pub final_order: u32,
    /// Step budget per dτ stage.
    pub max_steps: usize,
}

impl GroundStateConfig {
    pub fn new(chi: usize) -> Self {
        Self { chi, conv_tol: 1e-9, dtau_schedule: vec![0.1, 0.05], final_order: 4, max_steps: 20_000 }
    }
}

/// Sublattice of a global site.
pub fn sublattice(x: i64) -> usize {
    x.rem_euclid(2) as usize
}

/// Index into `UniformState::lambda` of the bond to the left of site `x`.
pub fn bond_left_of(x: i64) -> usize {
    1 - sublattice(x)
}

pub fn left_residual(a: &Tensor) -> f64 {
    let (l, d, r) = dims3(a);
    let m = a.clone().reshape(&[l * d, r]).unwrap();
    m.adjoint().matmul(&m).unwrap().identity_deviation()
}

pub fn right_residual(b: &Tensor) -> f64 {
    let (l, d, r) = dims3(b);
    let m = b.clone().reshape(&[l, d * r]).unwrap();
    m.matmul(&m.adjoint()).unwrap().identity_deviation()
}

pub(crate) fn dims3(t: &Tensor) -> (usize, usize, usize) {
    match t.shape() {
        &[l, d, r] => (l, d, r),
        s => panic!("expected a site tensor, got shape {s:?}"),
    }
}

impl UniformState {
    /// Product state with every site in local basis state `s` (χ = 1).
    pub fn product(s: usize) -> Result<Self> {
        if s >= D {
            return Err(Error::Invalid(format!("local state {s} out of range")));
        }
        let mut t = Tensor::zeros(&[1, D, 1]);
        t.set(&[0, s, 0], C64::new(1.0, 0.0));
        let mut u = UniformState {
            gamma: [t.clone(), t.clone()],
            lambda: [vec![1.0], vec![1.0]],
            a_left: [t.clone(), t.clone()],
            b_right: [t.clone(), t],
            bond_energy: [0.0; 2],
            e0: 0.0,
            chi: 1,
        };
        u.refresh_energy();
        Ok(u)
    }

    /// AKLT valence-bond state (χ = 2), exactly canonical on both sides.
    pub fn aklt() -> Self {
        let c_pm = (2.0f64 / 3.0).sqrt();
        let c_0 = (1.0f64 / 3.0).sqrt();
        let mut t = Tensor::zeros(&[2, D, 2]);
        t.set(&[0, 0, 1], C64::new(c_pm, 0.0));
        t.set(&[0, 1, 0], C64::new(-c_0, 0.0));
        t.set(&[1, 1, 1], C64::new(c_0, 0.0));
        t.set(&[1, 2, 0], C64::new(-c_pm, 0.0));
        let l = vec![std::f64::consts::FRAC_1_SQRT_2; 2];
        let gamma = t.scale_last_axis(&[std::f64::consts::SQRT_2; 2]);
        let mut u = UniformState {
            gamma: [gamma.clone(), gamma],
            lambda: [l.clone(), l],
            a_left: [t.clone(), t.clone()],
            b_right: [t.clone(), t],
            bond_energy: [0.0; 2],
            e0: 0.0,
            chi: 2,
        };
        u.refresh_energy();
        u
    }

    fn refresh_energy(&mut self) {
        self.bond_energy = bond_energies(self);
        self.e0 = 0.5 * (self.bond_energy[0] + self.bond_energy[1]);
    }

    /// Energy of the bond between global sites `x` and `x + 1`.
    pub fn bond_energy_at(&self, x: i64) -> f64 {
        self.bond_energy[sublattice(x)]
    }

    pub fn bond_dims(&self) -> [usize; 2] {
        [self.lambda[0].len(), self.lambda[1].len()]
    }

    /// Schmidt values on the bond to the left of global site `x`.
    pub fn lambda_left_of(&self, x: i64) -> &[f64] {
        &self.lambda[bond_left_of(x)]
    }

    pub fn a_at(&self, x: i64) -> &Tensor {
        &self.a_left[sublattice(x)]
    }

    pub fn b_at(&self, x: i64) -> &Tensor {
        &self.b_right[sublattice(x)]
    }

    /// Largest deviation from the left/right canonical constraints.
    pub fn canonical_residual(&self) -> f64 {
        self.a_left
            .iter()
            .map(left_residual)
            .chain(self.b_right.iter().map(right_residual))
            .fold(0.0, f64::max)
    }

    /// Largest violation of `λ_{b|a} B_a = A_a λ_{a|b}` and its partner.
    pub fn gauge_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for x in 0..2 {
            let lam_l = &self.lambda[1 - x];
            let lam_r = &self.lambda[x];
            let lhs = self.b_right[x].scale_rows(lam_l);
            let rhs = self.a_left[x].scale_last_axis(lam_r);
            worst = worst.max(lhs.max_abs_diff(&rhs));
        }
        worst
    }
}

/// Average of `<S_i·S_{i+1}>` over the two bonds of the unit cell.
pub fn energy_per_site(u: &UniformState) -> f64 {
    let e = bond_energies(u);
    0.5 * (e[0] + e[1])
}

/// `<S·S>` on the bonds `a|b` and `b|a`.
pub fn bond_energies(u: &UniformState) -> [f64; 2] {
    let h = bond_hamiltonian().h;
    let mut out = [0.0; 2];
    for (x, slot) in out.iter_mut().enumerate() {
        let y = 1 - x;
        let theta = two_site_theta(&u.b_right[x], &u.b_right[y], &u.lambda[y]);
        *slot = theta_expectation(&theta, &h);
    }
    out
}

/// `λ · B_x B_y`, shape `(χ, d, d, χ)`.
pub(crate) fn two_site_theta(bx: &Tensor, by: &Tensor, lam_left: &[f64]) -> Tensor {
    contract(&bx.scale_rows(lam_left), by, &[(2, 0)]).unwrap()
}

/// `<θ| h |θ>` for a two-site wavefunction `θ[l, s1, s2, r]`.
pub(crate) fn theta_expectation(theta: &Tensor, h: &Tensor) -> f64 {
    let htheta = apply_two_site(h, theta);
    theta.inner(&htheta).re
}

/// Acts with a `d² x d²` operator on the physical legs of `θ[l, s1, s2, r]`.
pub(crate) fn apply_two_site(op: &Tensor, theta: &Tensor) -> Tensor {
    let s = theta.shape();
    let (l, r) = (s[0], s[3]);
    let flat = theta.clone().reshape(&[l, D * D, r]).unwrap();
    contract(op, &flat, &[(1, 1)]).unwrap().permute(&[1, 0, 2]).reshape(&[l, D, D, r]).unwrap()
}

/// Imaginary- or real-time TEBD on the two-site cell, Hastings form.
#[derive(Clone, Debug)]
pub struct Itebd {
    pub b: [Tensor; 2],
    pub lambda: [Vec<f64>; 2],
}

impl Itebd {
    pub fn from_uniform(u: &UniformState) -> Self {
        Self { b: u.b_right.clone(), lambda: u.lambda.clone() }
    }

    /// Applies `gate` on every bond of the given parity. Even bonds start on
    /// sublattice `a`.
    pub fn apply_layer(&mut self, parity: Parity, gate: &Tensor, chi: usize, tol: f64) -> Result<f64> {
        let x = match parity {
            Parity::Even => 0,
            Parity::Odd => 1,
        };
        let y = 1 - x;
        let (dl, _, _) = dims3(&self.b[x]);
        let (_, _, dr) = dims3(&self.b[y]);
        let phi = apply_two_site(gate, &contract(&self.b[x], &self.b[y], &[(2, 0)])?);
        let phi_m = phi.reshape(&[dl * D, D * dr])?;
        let theta = phi_m.scale_rows(&repeat_each(&self.lambda[y], D));
        let svd = svd_truncate(&theta, chi, tol)?;
        let norm = svd.s.iter().map(|s| s * s).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Numerical { context: "iTEBD update produced a null state".into() });
        }
        let k = svd.kept();
        self.lambda[x] = svd.s.iter().map(|s| s / norm).collect();
        let bx = phi_m.matmul(&svd.v.adjoint())?.scale_real(1.0 / norm);
        self.b[x] = bx.reshape(&[dl, D, k])?;
        self.b[y] = svd.v.reshape(&[k, D, dr])?;
        Ok(svd.truncation_weight / (norm * norm))
    }

    pub fn apply_schedule(&mut self, schedule: &GateSchedule, chi: usize, tol: f64) -> Result<f64> {
        let mut weight = 0.0;
        for step in &schedule.steps {
            weight += self.apply_layer(step.parity, &step.gate, chi, tol)?;
        }
        Ok(weight)
    }
}

/// Scales every row of an `(l·d) x n` matrix by `lam[l]`.
fn repeat_each(values: &[f64], times: usize) -> Vec<f64> {
    values.iter().flat_map(|&v| std::iter::repeat(v).take(times)).collect()
}

/// Largest entrywise change between two Schmidt spectra, padding with zeros.
pub fn lambda_distance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| (a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max)
}

pub fn find_ground_state(cfg: &GroundStateConfig) -> Result<UniformState> {
    if cfg.chi < 2 {
        return Err(Error::Invalid(format!("chi must be at least 2, got {}", cfg.chi)));
    }
    if cfg.dtau_schedule.is_empty()
        || cfg.dtau_schedule.iter().any(|&t| !(t > 0.0))
        || cfg.dtau_schedule.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::Invalid("dtau schedule must be positive and decreasing".into()));
    }
    let mut it = Itebd::from_uniform(&UniformState::aklt());
    let last_stage = cfg.dtau_schedule.len() - 1;
    for (stage, &dtau) in cfg.dtau_schedule.iter().enumerate() {
        let order = if stage == last_stage { cfg.final_order } else { 2 };
        let schedule = imaginary_gates(dtau, order)?;
        let mut last = f64::INFINITY;
        let mut converged = false;
        let mut steps = 0;
        while steps < cfg.max_steps {
            let before = it.lambda.clone();
            it.apply_schedule(&schedule, cfg.chi, ITEBD_DISCARD)?;
            steps += 1;
            last = (0..2).map(|k| lambda_distance(&before[k], &it.lambda[k])).fold(0.0, f64::max);
            if last < cfg.conv_tol {
                converged = true;
                break;
            }
        }
        debug!("iTEBD stage dtau={dtau}: {steps} steps, last change {last:e}");
        if !converged && stage == last_stage {
            return Err(Error::NoConvergence { what: "iTEBD ground state", steps, last });
        }
    }
    let u = canonicalize_cell(&it.b, cfg.chi)?;
    info!("ground state chi={} e0={:.12}", cfg.chi, u.e0);
    Ok(u)
}

/// Restores the canonical invariants of a (possibly re-gauged) uniform state.
///
/// The state is read from `Γ_a λ_{a|b}` and `Γ_b λ_{b|a}`; stored canonical
/// forms are ignored.
pub fn canonicalize(u: &UniformState) -> Result<UniformState> {
    let m = [u.gamma[0].scale_last_axis(&u.lambda[0]), u.gamma[1].scale_last_axis(&u.lambda[1])];
    canonicalize_cell(&m, u.chi)
}

/// Canonical form of the infinite chain `… M_a M_b M_a M_b …`.
pub fn canonicalize_cell(m: &[Tensor; 2], chi: usize) -> Result<UniformState> {
    // Right-orthonormalize: M_x R_x = R_{x-1} B_x around the cell.
    let (d1, _, d0) = dims3(&m[0]);
    let mut r1 = Tensor::identity(d1);
    let mut b: [Tensor; 2] = [m[0].clone(), m[1].clone()];
    let mut converged = false;
    let mut last = f64::INFINITY;
    for _ in 0..GAUGE_MAX_ITER {
        let (lb, q) = lq_site(&m[1].scale_last_axis_matrix(&r1))?;
        b[1] = q;
        let (la, q) = lq_site(&m[0].scale_last_axis_matrix(&lb))?;
        b[0] = q;
        let n = la.norm();
        let next = la.scale_real(1.0 / n);
        last = next.max_abs_diff(&r1);
        r1 = next;
        if last < GAUGE_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { what: "right gauge fixing", steps: GAUGE_MAX_ITER, last });
    }

    // Left-orthonormalize with bond matrices: C_{x-1} B_x = A_x C_x.
    let mut c1 = Tensor::identity(d1);
    let mut a: [Tensor; 2] = [b[0].clone(), b[1].clone()];
    let mut c0 = Tensor::identity(d0);
    converged = false;
    for _ in 0..GAUGE_MAX_ITER {
        let (q, r) = qr_site(&contract(&c1, &b[0], &[(1, 0)])?)?;
        a[0] = q;
        c0 = r;
        let (q, r) = qr_site(&contract(&c0, &b[1], &[(1, 0)])?)?;
        a[1] = q;
        let n = r.norm();
        let next = r.scale_real(1.0 / n);
        last = next.max_abs_diff(&c1);
        c1 = next;
        if last < GAUGE_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { what: "left gauge fixing", steps: GAUGE_MAX_ITER, last });
    }

    // Diagonalize the bond matrices: C = U S V†.
    let s1 = svd_truncate(&c1, usize::MAX, 0.0)?;
    let s0 = svd_truncate(&c0, usize::MAX, 0.0)?;
    for s in [&s0, &s1] {
        let smallest = s.s.last().copied().unwrap_or(0.0) / s.s.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(smallest >= LAMBDA_FLOOR) {
            return Err(Error::RankDeficient { smallest, floor: LAMBDA_FLOOR });
        }
    }
    let (u1, v1) = (s1.u.clone(), s1.v.adjoint());
    let (u0, v0) = (s0.u.clone(), s0.v.adjoint());
    let rotate = |t: &Tensor, left: &Tensor, right: &Tensor| -> Result<Tensor> {
        let t = contract(&left.adjoint(), t, &[(1, 0)])?;
        contract(&t, right, &[(2, 0)])
    };
    let a_left = [rotate(&a[0], &u1, &u0)?, rotate(&a[1], &u0, &u1)?];
    let b_right = [rotate(&b[0], &v1, &v0)?, rotate(&b[1], &v0, &v1)?];
    let norm = |s: &[f64]| -> Vec<f64> {
        let n = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        s.iter().map(|x| x / n).collect()
    };
    let lambda = [norm(&s0.s), norm(&s1.s)];
    let inv = |s: &[f64]| -> Vec<f64> { s.iter().map(|x| 1.0 / x).collect() };
    let gamma = [
        b_right[0].scale_last_axis(&inv(&lambda[0])),
        b_right[1].scale_last_axis(&inv(&lambda[1])),
    ];
    let mut u = UniformState { gamma, lambda, a_left, b_right, bond_energy: [0.0; 2], e0: 0.0, chi };
    u.refresh_energy();
    Ok(u)
}

impl Tensor {
    /// `T[l, s, r] -> Σ_r' T[l, s, r'] M[r', r]`.
    pub(crate) fn scale_last_axis_matrix(&self, m: &Tensor) -> Tensor {
        let r = *self.shape().last().unwrap();
        let rows = self.len() / r;
        let flat = self.clone().reshape(&[rows, r]).unwrap();
        let mut shape = self.shape().to_vec();
        *shape.last_mut().unwrap() = m.ncols();
        flat.matmul(m).unwrap().reshape(&shape).unwrap()
    }
}

/// `T[l, s, r] = L[l, l'] Q[l', s, r]` with `Q` right-orthonormal.
fn lq_site(t: &Tensor) -> Result<(Tensor, Tensor)> {
    let (l, d, r) = dims3(t);
    let (lm, q) = lq_positive(&t.clone().reshape(&[l, d * r])?)?;
    let k = q.nrows();
    if k != l {
        return Err(Error::Numerical { context: format!("bond of dimension {l} exceeds rank {k}") });
    }
    Ok((lm, q.reshape(&[k, d, r])?))
}

/// `T[l, s, r] = Q[l, s, r'] R[r', r]` with `Q` left-orthonormal.
fn qr_site(t: &Tensor) -> Result<(Tensor, Tensor)> {
    let (l, d, r) = dims3(t);
    let (q, rm) = qr_positive(&t.clone().reshape(&[l * d, r])?)?;
    let k = q.ncols();
    if k != r {
        return Err(Error::Numerical { context: format!("bond of dimension {r} exceeds rank {k}") });
    }
    Ok((q.reshape(&[l, d, k])?, rm))
}

/// Largest λ change under one real-time step applied to the uniform state.
pub fn real_time_lambda_change(u: &UniformState, schedule: &GateSchedule) -> Result<f64> {
    let mut it = Itebd::from_uniform(u);
    it.apply_schedule(schedule, u.chi, 0.0)?;
    Ok((0..2).map(|k| lambda_distance(&u.lambda[k], &it.lambda[k])).fold(0.0, f64::max))
}

/// Single-site `<op>` on sublattice `x` of the uniform state.
pub fn site_expectation(u: &UniformState, x: usize, op: &Tensor) -> f64 {
    let t = u.b_right[x].scale_rows(&u.lambda[1 - x]);
    let opt = contract(op, &t, &[(1, 1)]).unwrap().permute(&[1, 0, 2]);
    t.inner(&opt).re
}
