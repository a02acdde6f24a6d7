//! Cavities coupled to a discretized waveguide continuum.
//!
//! Each direction carries `K/2` modes at detunings `q_j` from `omega_0`,
//! uniform over `[-W, W]` with spacing `dq`. Cavity `n` at `x_n` couples to a
//! mode of wavevector `k` with `g_n e^{i k x_n}`, `g_n^2 = kappa_n dq / (4 pi)`,
//! so eliminating the bath gives the delay equations. Everything is in the
//! frame rotating at `omega_0`.

use super::delay::DelaySeries;
use crate::dynamics::{integrate_observe, IntegratorOptions};
use crate::error::{Error, Result};
use crate::linalg::ZERO;
use crate::waveguide::WaveguideParams;
use num_complex::Complex64;
use std::collections::HashMap;
use std::f64::consts::PI;

type C = Complex64;

/// Recurrence guard: windows must end before this fraction of `2 pi / dq`.
pub const RECURRENCE_FRACTION: f64 = 0.8;
pub const MIN_MODES: usize = 64;
/// Default half-bandwidth in units of the largest cavity rate.
pub const DEFAULT_BANDWIDTH: f64 = 40.0;
pub const MAX_SECTOR_DIM: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBath {
    /// Detunings of one direction; the other direction repeats them.
    pub detuning: Vec<f64>,
    pub spacing: f64,
    /// Per-mode coupling amplitude for each cavity.
    pub g: [f64; 2],
    /// Per-mode coupling of the local intrinsic-loss reservoirs (zero when absent).
    pub g_loss: [f64; 2],
    pub loss_detuning: Vec<f64>,
}

impl DiscreteBath {
    /// `k_modes` waveguide modes (split evenly between directions) over `omega_0 +- half_width`.
    pub fn new(p: &WaveguideParams, k_modes: usize, half_width: f64) -> Result<Self> {
        if k_modes < MIN_MODES || k_modes % 2 != 0 {
            return Err(Error::Domain(format!("need an even K >= {MIN_MODES}, got {k_modes}")));
        }
        if !(half_width > 0.0) {
            return Err(Error::Domain("bandwidth must be positive".into()));
        }
        let m = k_modes / 2;
        let dq = 2.0 * half_width / m as f64;
        let detuning = (0..m).map(|j| -half_width + (j as f64 + 0.5) * dq).collect();
        let g = [(p.kappa1 * dq / (4.0 * PI)).sqrt(), (p.kappa2 * dq / (4.0 * PI)).sqrt()];
        Ok(Self { detuning, spacing: dq, g, g_loss: [0.0; 2], loss_detuning: Vec::new() })
    }

    /// Default bandwidth `40 max(kappa)`.
    pub fn with_default_width(p: &WaveguideParams, k_modes: usize) -> Result<Self> {
        Self::new(p, k_modes, DEFAULT_BANDWIDTH * p.kappa1.max(p.kappa2))
    }

    /// Smallest even mode count whose recurrence clears `t_max` at the given bandwidth.
    pub fn modes_for_window(t_max: f64, half_width: f64) -> usize {
        let dq_max = RECURRENCE_FRACTION * 2.0 * PI / t_max.max(1e-300);
        let m = (2.0 * half_width / dq_max).ceil() as usize;
        (2 * m).max(MIN_MODES)
    }

    /// Adds one reservoir per cavity (`n_loss` modes each, same spacing) carrying
    /// the intrinsic loss, for unitary evolution.
    pub fn with_loss_reservoirs(mut self, p: &WaveguideParams, n_loss: usize) -> Self {
        let dq = self.spacing;
        let half = 0.5 * dq * n_loss as f64;
        self.loss_detuning = (0..n_loss).map(|j| -half + (j as f64 + 0.5) * dq).collect();
        self.g_loss = [(p.kappa_i1 * dq / (2.0 * PI)).sqrt(), (p.kappa_i2 * dq / (2.0 * PI)).sqrt()];
        self
    }

    pub fn recurrence_time(&self) -> f64 {
        2.0 * PI / self.spacing
    }

    pub fn check_window(&self, t_max: f64) -> Result<()> {
        let limit = RECURRENCE_FRACTION * self.recurrence_time();
        if t_max > limit {
            log::warn!("discrete bath recurs at {:.4} ps; window {t_max:.4} ps exceeds {limit:.4} ps", self.recurrence_time());
            return Err(Error::Domain(format!(
                "window {t_max} ps exceeds {RECURRENCE_FRACTION} of the recurrence time {:.4} ps",
                self.recurrence_time()
            )));
        }
        Ok(())
    }

    pub fn n_modes(&self) -> usize {
        2 * self.detuning.len() + 2 * self.loss_detuning.len()
    }
}

/// Sparse single-particle hopping `h_ij` with diagonal energies.
struct Hopping {
    n: usize,
    diag: Vec<C>,
    /// `(i, j, h_ij)` for `i != j`, both orientations stored.
    links: Vec<Vec<(usize, C)>>,
}

impl Hopping {
    fn new(n: usize) -> Self {
        Self { n, diag: vec![ZERO; n], links: vec![Vec::new(); n] }
    }

    /// Hermitian pair `h_ij = v`, `h_ji = conj(v)`; `links[j]` lists targets reached from `j`.
    fn link(&mut self, i: usize, j: usize, v: C) {
        self.links[j].push((i, v));
        self.links[i].push((j, v.conj()));
    }
}

/// Single-particle layout: cavities 0, 1, then waveguide right movers, left
/// movers, then loss reservoirs. `emitters` prepends two emitter sites.
fn bath_hopping(p: &WaveguideParams, bath: &DiscreteBath, emitters: bool, intrinsic_damping: bool) -> (Hopping, usize) {
    let off = if emitters { 2 } else { 0 };
    let m = bath.detuning.len();
    let nl = bath.loss_detuning.len();
    let n = off + 2 + 2 * m + 2 * nl;
    let mut h = Hopping::new(n);
    let cav = |k: usize| off + k;
    for k in 0..2 {
        let mut e = C::new(p.omega_c(k) - p.omega_0, 0.0);
        if intrinsic_damping {
            e -= C::new(0.0, 0.5 * p.kappa_i(k));
        }
        h.diag[cav(k)] = e;
    }
    if emitters {
        for k in 0..2 {
            h.diag[k] = C::new(p.omega_e(k) - p.omega_0, 0.0);
            h.link(k, cav(k), C::new(p.coupling(k), 0.0));
        }
    }
    let k0 = p.omega_0 / p.v_g;
    let x = [0.0, p.x_d];
    for (dir, sign) in [(0usize, 1.0f64), (1, -1.0)] {
        for (j, &q) in bath.detuning.iter().enumerate() {
            let site = off + 2 + dir * m + j;
            h.diag[site] = C::new(q, 0.0);
            let k = sign * (k0 + q / p.v_g);
            for c in 0..2 {
                // Cavity row: -i g e^{i k x} beta.
                h.link(cav(c), site, C::from_polar(bath.g[c], k * x[c]));
            }
        }
    }
    for c in 0..2 {
        if bath.g_loss[c] == 0.0 {
            continue;
        }
        for (j, &q) in bath.loss_detuning.iter().enumerate() {
            let site = off + 2 + 2 * m + c * nl + j;
            h.diag[site] = C::new(q, 0.0);
            h.link(cav(c), site, C::new(bath.g_loss[c], 0.0));
        }
    }
    (h, off)
}

fn dense_rhs(h: &Hopping) -> impl Fn(f64, &[C], &mut [C]) + '_ {
    move |_, y, out| {
        for i in 0..h.n {
            let mut acc = h.diag[i] * y[i];
            for &(j, v) in &h.links[i] {
                // links[i] holds (target j, h_ji); the row for i needs h_ij = conj.
                acc += v.conj() * y[j];
            }
            out[i] = C::new(acc.im, -acc.re);
        }
    }
}

fn tight() -> IntegratorOptions {
    IntegratorOptions { rtol: 1e-10, atol: 1e-12, ..Default::default() }
}

/// Cavity amplitudes with cavity `m` initially excited: `corr[n][m]` is
/// `<c_n(t) c_m^dag(0)>` without the `e^{-i omega_0 t}` factor.
pub fn single_excitation_schrodinger(p: &WaveguideParams, bath: &DiscreteBath, t_grid: &[f64]) -> Result<DelaySeries> {
    p.validate()?;
    if let Some(&t_max) = t_grid.last() {
        bath.check_window(t_max)?;
    }
    let (h, _) = bath_hopping(p, bath, false, true);
    let mut corr: [[Vec<C>; 2]; 2] = Default::default();
    for m in 0..2 {
        let mut y0 = vec![ZERO; h.n];
        y0[m] = C::new(1.0, 0.0);
        let mut rows = [Vec::new(), Vec::new()];
        integrate_observe(dense_rhs(&h), 0.0, &y0, t_grid, &tight(), |_, _, y| {
            rows[0].push(y[0]);
            rows[1].push(y[1]);
            Ok(())
        })?;
        let [r0, r1] = rows;
        corr[0][m] = r0;
        corr[1][m] = r1;
    }
    Ok(DelaySeries { t: t_grid.to_vec(), corr })
}

/// Two-excitation sector of a hard-core/boson mixture: sites `0..hard` hold at
/// most one quantum.
struct PairSector {
    pairs: Vec<(u32, u32)>,
    lookup: HashMap<(u32, u32), usize>,
}

impl PairSector {
    fn new(n: usize, hard: usize) -> Result<Self> {
        let dim = n * (n + 1) / 2 - hard;
        if dim > MAX_SECTOR_DIM {
            return Err(Error::ResourceLimit(format!("two-excitation sector of {dim} states exceeds {MAX_SECTOR_DIM}")));
        }
        let mut pairs = Vec::with_capacity(dim);
        for a in 0..n {
            for b in a..n {
                if a == b && a < hard {
                    continue;
                }
                pairs.push((a as u32, b as u32));
            }
        }
        let lookup = pairs.iter().enumerate().map(|(k, &p)| (p, k)).collect();
        Ok(Self { pairs, lookup })
    }

    fn index(&self, a: usize, b: usize) -> Option<usize> {
        let key = if a <= b { (a as u32, b as u32) } else { (b as u32, a as u32) };
        self.lookup.get(&key).copied()
    }
}

/// Sparse two-quantum Hamiltonian rows `(column, value)`.
fn pair_hamiltonian(h: &Hopping, sector: &PairSector) -> Vec<Vec<(usize, C)>> {
    let mut rows: Vec<Vec<(usize, C)>> = vec![Vec::new(); sector.pairs.len()];
    for (col, &(a, b)) in sector.pairs.iter().enumerate() {
        let (a, b) = (a as usize, b as usize);
        rows[col].push((col, h.diag[a] + h.diag[b]));
        // Move one quantum from j to i: amplitude sqrt(n_j) sqrt(n_i + 1) in the
        // normalized occupation basis.
        let moves: &[(usize, usize)] = if a == b { &[(a, b)] } else { &[(a, b), (b, a)] };
        for &(j, other) in moves {
            let n_j = if a == b { 2.0f64 } else { 1.0 };
            for &(i, v) in &h.links[j] {
                let Some(row) = sector.index(i, other) else { continue };
                let n_i_after = if i == other { 2.0f64 } else { 1.0 };
                rows[row].push((col, v * (n_j * n_i_after).sqrt()));
            }
        }
    }
    rows
}

/// Emitter populations with both emitters excited at t = 0, by Schrodinger
/// evolution of emitters, cavities and the discrete bath (intrinsic loss via
/// the reservoirs of `bath`).
pub fn two_excitation_unitary(p: &WaveguideParams, bath: &DiscreteBath, t_grid: &[f64]) -> Result<[Vec<f64>; 2]> {
    p.validate()?;
    if let Some(&t_max) = t_grid.last() {
        bath.check_window(t_max)?;
    }
    let (h, _) = bath_hopping(p, bath, true, false);
    let sector = PairSector::new(h.n, 2)?;
    let rows = pair_hamiltonian(&h, &sector);
    let dim = sector.pairs.len();
    let mut indptr = Vec::with_capacity(dim + 1);
    let mut entries: Vec<(u32, C)> = Vec::new();
    indptr.push(0usize);
    for row in &rows {
        entries.extend(row.iter().map(|&(k, v)| (k as u32, v)));
        indptr.push(entries.len());
    }
    drop(rows);
    let mut y0 = vec![ZERO; dim];
    y0[sector.index(0, 1).expect("both emitters excited")] = C::new(1.0, 0.0);
    let rhs = |_: f64, y: &[C], out: &mut [C]| {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for &(k, v) in &entries[indptr[r]..indptr[r + 1]] {
                acc += v * y[k as usize];
            }
            *o = C::new(acc.im, -acc.re);
        }
    };
    let opts = IntegratorOptions { rtol: 1e-7, atol: 1e-9, ..Default::default() };
    let mut pops = [Vec::with_capacity(t_grid.len()), Vec::with_capacity(t_grid.len())];
    let mut norm_drift = 0.0f64;
    let stats = integrate_observe(rhs, 0.0, &y0, t_grid, &opts, |_, _, y| {
        let mut pe = [0.0; 2];
        let mut total = 0.0;
        for (&(a, b), z) in sector.pairs.iter().zip(y) {
            let w = z.norm_sqr();
            total += w;
            for (e, slot) in pe.iter_mut().enumerate() {
                if a as usize == e || b as usize == e {
                    *slot += w;
                }
            }
        }
        norm_drift = norm_drift.max((total - 1.0).abs());
        pops[0].push(pe[0]);
        pops[1].push(pe[1]);
        Ok(())
    })?;
    log::debug!("two-excitation norm drift {norm_drift:.3e} over {dim} states, {stats:?}");
    Ok(pops)
}

/// Number of two-excitation states for `n_sites` single-particle sites, `hard` of them hard-core.
pub fn two_excitation_dimension(n_sites: usize, hard: usize) -> usize {
    n_sites * (n_sites + 1) / 2 - hard
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> WaveguideParams {
        WaveguideParams::resonant_pair(4.0)
    }

    #[test]
    fn isolated_cavity_decays_at_half_kappa() {
        let mut p = params();
        p.kappa2 = 0.0;
        p.kappa_i1 = 0.0;
        // The band misses a kappa / (pi W) tail of the Lorentzian; W = 400 kappa keeps it below 1e-3.
        let w = 400.0 * p.kappa1;
        let bath = DiscreteBath::new(&p, DiscreteBath::modes_for_window(1.0, w), w).unwrap();
        let t: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();
        let s = single_excitation_schrodinger(&p, &bath, &t).unwrap();
        for (k, &tk) in t.iter().enumerate() {
            assert!((s.corr[0][0][k].norm() - (-0.5 * p.kappa1 * tk).exp()).abs() < 1e-3, "t = {tk}");
        }
    }

    #[test]
    fn decoupled_cavity_stays_empty() {
        let mut p = params();
        p.kappa1 = 0.0;
        let bath = DiscreteBath::with_default_width(&p, 128).unwrap();
        let t = [0.0, 0.2, 0.5];
        let s = single_excitation_schrodinger(&p, &bath, &t).unwrap();
        assert!(s.corr[0][1].iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn window_beyond_recurrence_is_rejected() {
        let p = params();
        let bath = DiscreteBath::with_default_width(&p, 64).unwrap();
        let t = [0.0, bath.recurrence_time()];
        assert!(matches!(single_excitation_schrodinger(&p, &bath, &t), Err(Error::Domain(_))));
    }

    #[test]
    fn sector_dimension_matches_count() {
        let s = PairSector::new(10, 2).unwrap();
        assert_eq!(s.pairs.len(), two_excitation_dimension(10, 2));
        assert_eq!(two_excitation_dimension(10, 2), 53);
    }

    #[test]
    fn uncoupled_emitters_stay_excited() {
        let mut p = params();
        p.v1 = 0.0;
        p.v2 = 0.0;
        let bath = DiscreteBath::new(&p, 64, 10.0).unwrap();
        let pops = two_excitation_unitary(&p, &bath, &[0.0, 1.0, 2.0]).unwrap();
        for e in 0..2 {
            assert!(pops[e].iter().all(|&v| (v - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn pair_hamiltonian_is_hermitian() {
        let p = params();
        let bath = DiscreteBath::new(&p, 64, 10.0).unwrap().with_loss_reservoirs(&p, 8);
        let (h, _) = bath_hopping(&p, &bath, true, false);
        let sector = PairSector::new(h.n, 2).unwrap();
        let rows = pair_hamiltonian(&h, &sector);
        let mut m: HashMap<(usize, usize), C> = HashMap::new();
        for (r, row) in rows.iter().enumerate() {
            for &(c, v) in row {
                *m.entry((r, c)).or_insert(ZERO) += v;
            }
        }
        for (&(r, c), &v) in &m {
            let t = m.get(&(c, r)).copied().unwrap_or(ZERO);
            assert!((v - t.conj()).norm() < 1e-14, "({r},{c})");
        }
    }
}
