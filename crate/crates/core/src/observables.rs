//! Physical quantities extracted from a window, on global coordinates.

use serde::{Deserialize, Serialize};

use crate::boundary::Side;
use crate::error::{Error, Result};
use crate::groundstate::{dims3, site_expectation, sublattice};
use crate::model::spin1_operators;
use crate::tensor::{contract, Tensor};
use crate::window::WindowState;

pub const DEFAULT_HALO: usize = 20;
const TAIL_TOL: f64 = 1e-14;
const TAIL_MAX_SITES: usize = 5_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    /// Site relative to the chosen origin (the quench site).
    pub x: i64,
    pub sz: f64,
    pub in_window: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub t: f64,
    pub entries: Vec<ProfileEntry>,
}

impl ProfileRecord {
    pub fn at(&self, x: i64) -> Option<&ProfileEntry> {
        self.entries.binary_search_by_key(&x, |e| e.x).ok().map(|i| &self.entries[i])
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.sz).sum()
    }
}

/// `<op>` on the first `count` uniform sites beyond the given edge, nearest
/// first. Only defined while that block still holds uniform tensors.
pub fn tail_expectations(w: &WindowState, op: &Tensor, side: Side, count: usize) -> Result<Option<Vec<f64>>> {
    let mut out = Vec::with_capacity(count);
    let ok = tail_walk(w, op, side, |_, _, v| {
        out.push(v);
        out.len() < count
    })?;
    Ok(ok.then_some(out))
}

/// Sum of `<op> - <op>_uniform` over all sites beyond the given edge, i.e.
/// the tail's deviation from the uniform state.
pub fn tail_sum(w: &WindowState, op: &Tensor, side: Side) -> Result<Option<f64>> {
    let background = [site_expectation(&w.uniform, 0, op), site_expectation(&w.uniform, 1, op)];
    let mut total = 0.0;
    let mut quiet = 0;
    let ok = tail_walk(w, op, side, |k, x, v| {
        let dv = v - background[sublattice(x)];
        total += dv;
        quiet = if dv.abs() < TAIL_TOL { quiet + 1 } else { 0 };
        quiet < 4 && k < TAIL_MAX_SITES
    })?;
    Ok(ok.then_some(total))
}

/// Walks outward from the edge; `visit(k, x, value)` returns whether to continue.
/// Returns false when the block no longer matches the uniform state.
fn tail_walk(w: &WindowState, op: &Tensor, side: Side, mut visit: impl FnMut(usize, i64, f64) -> bool) -> Result<bool> {
    let u = &w.uniform;
    match side {
        Side::Left => {
            if !w.left_block.uniform_gauge {
                return Ok(false);
            }
            // Gram matrix of the states right of the left edge bond.
            let mut g = gram_right_of_edge(w)?;
            let mut x = w.first_site() - 1;
            let mut k = 0;
            loop {
                let a = u.a_at(x);
                let t = contract(a, &g, &[(2, 1)])?;
                let ot = contract(op, &t, &[(1, 1)])?;
                let v = contract(&a.conj(), &ot, &[(0, 1), (1, 0), (2, 2)])?.data()[0].re;
                g = contract(&a.conj(), &t, &[(1, 1), (2, 2)])?;
                k += 1;
                if !visit(k, x, v) {
                    return Ok(true);
                }
                x -= 1;
            }
        }
        Side::Right => {
            if !w.right_block.uniform_gauge {
                return Ok(false);
            }
            let mut y = gram_left_of_edge(w)?;
            let mut x = w.last_site() + 1;
            let mut k = 0;
            loop {
                let b = u.b_at(x);
                let t = contract(&y, b, &[(1, 0)])?;
                let ot = contract(op, &t, &[(1, 1)])?;
                let v = contract(&b.conj(), &ot, &[(0, 1), (1, 0), (2, 2)])?.data()[0].re;
                y = contract(&b.conj(), &t, &[(0, 0), (1, 1)])?;
                k += 1;
                if !visit(k, x, v) {
                    return Ok(true);
                }
                x += 1;
            }
        }
    }
}

fn gram_right_of_edge(w: &WindowState) -> Result<Tensor> {
    let mut g = Tensor::from_diag(&w.center_lambda.iter().map(|x| x * x).collect::<Vec<_>>());
    for k in (0..w.center_pos).rev() {
        let t = contract(&w.sites[k], &g, &[(2, 1)])?;
        g = contract(&w.sites[k].conj(), &t, &[(1, 1), (2, 2)])?;
    }
    Ok(g)
}

fn gram_left_of_edge(w: &WindowState) -> Result<Tensor> {
    let mut y = Tensor::from_diag(&w.center_lambda.iter().map(|x| x * x).collect::<Vec<_>>());
    for k in w.center_pos..w.len() {
        let t = contract(&y, &w.sites[k], &[(1, 0)])?;
        y = contract(&w.sites[k].conj(), &t, &[(0, 0), (1, 1)])?;
    }
    debug_assert_eq!(y.nrows(), dims3(w.sites.last().unwrap()).2);
    Ok(y)
}

/// `<S^z>` on every window site plus `halo` sites each side (flagged as
/// outside). Outside values come from the uniform tails while the adjacent
/// block is still uniform, and are the ground-state value 0 otherwise.
/// `x` is measured from `origin`.
pub fn measure_sz_profile(w: &WindowState, halo: usize, origin: i64) -> Result<ProfileRecord> {
    let sz = spin1_operators().sz;
    let inside = w.site_expectations(&sz)?;
    let left = tail_expectations(w, &sz, Side::Left, halo)?.unwrap_or_else(|| vec![0.0; halo]);
    let right = tail_expectations(w, &sz, Side::Right, halo)?.unwrap_or_else(|| vec![0.0; halo]);
    let mut entries = Vec::with_capacity(inside.len() + 2 * halo);
    let first = w.first_site();
    for (k, v) in left.iter().enumerate().rev() {
        entries.push(ProfileEntry { x: first - 1 - k as i64 - origin, sz: *v, in_window: false });
    }
    for (i, v) in inside.iter().enumerate() {
        entries.push(ProfileEntry { x: first + i as i64 - origin, sz: *v, in_window: true });
    }
    let last = w.last_site();
    for (k, v) in right.iter().enumerate() {
        entries.push(ProfileEntry { x: last + 1 + k as i64 - origin, sz: *v, in_window: false });
    }
    Ok(ProfileRecord { t: w.time, entries })
}

/// `Σ_x (<S^z(x)> - <S^z>_uniform)` over the whole infinite chain (window
/// plus both tails): the magnetization added by the quench. `None` if a
/// block has absorbed non-uniform sites.
pub fn total_sz(w: &WindowState) -> Result<Option<f64>> {
    let sz = spin1_operators().sz;
    let background = [site_expectation(&w.uniform, 0, &sz), site_expectation(&w.uniform, 1, &sz)];
    let first = w.first_site();
    let inside: f64 = w
        .site_expectations(&sz)?
        .iter()
        .enumerate()
        .map(|(i, v)| v - background[sublattice(first + i as i64)])
        .sum();
    let left = tail_sum(w, &sz, Side::Left)?;
    let right = tail_sum(w, &sz, Side::Right)?;
    Ok(left.zip(right).map(|(l, r)| inside + l + r))
}

/// Time series at `x`; `in_window` marks samples taken inside the window.
pub fn series_at_flagged(records: &[ProfileRecord], x: i64) -> Result<Vec<(f64, f64, bool)>> {
    let out: Vec<(f64, f64, bool)> =
        records.iter().filter_map(|r| r.at(x).map(|e| (r.t, e.sz, e.in_window))).collect();
    if out.is_empty() {
        return Err(Error::Invalid(format!("position {x} is never covered by the dataset")));
    }
    Ok(out)
}

pub fn series_at(records: &[ProfileRecord], x: i64) -> Result<Vec<(f64, f64)>> {
    Ok(series_at_flagged(records, x)?.into_iter().map(|(t, s, _)| (t, s)).collect())
}

/// `|a - b|` on a's time grid; each sample of `a` is paired with the
/// nearest sample of `b` within half of b's spacing.
pub fn diff_series(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Incomparable("empty series".into()));
    }
    let spacing = b.windows(2).map(|p| p[1].0 - p[0].0).fold(f64::INFINITY, f64::min);
    let half = if spacing.is_finite() { 0.5 * spacing } else { 1e-9 };
    let mut out = Vec::new();
    for &(t, v) in a {
        let j = b.partition_point(|p| p.0 < t);
        let nearest = [j.checked_sub(1), Some(j)]
            .into_iter()
            .flatten()
            .filter(|&k| k < b.len())
            .min_by(|&p, &q| (b[p].0 - t).abs().partial_cmp(&(b[q].0 - t).abs()).unwrap());
        if let Some(k) = nearest {
            if (b[k].0 - t).abs() <= half + 1e-12 {
                out.push((t, (v - b[k].1).abs()));
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Incomparable("series share no sample times".into()));
    }
    Ok(out)
}

/// Von Neumann entropy `-Σ λ² ln λ²` across `bond` (0..=N).
pub fn entanglement_entropy(w: &WindowState, bond: usize) -> Result<f64> {
    let s = w.bond_spectrum(bond)?;
    Ok(s.iter().map(|x| x * x).filter(|&p| p > 0.0).map(|p| -p * p.ln()).sum())
}
