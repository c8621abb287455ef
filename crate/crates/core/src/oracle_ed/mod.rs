//! Exact state-vector propagation for small spin systems.
//!
//! Basis index bit `n` holds spin `n`: bit 1 is `|up>` (`sigma^z = +1`),
//! bit 0 is `|down>`. The Hamiltonian is applied on the fly from bit patterns:
//! the Ising term is diagonal, and the XY term
//! `J (sx_i sx_j + sy_i sy_j) = 2J (s+_i s-_j + s-_i s+_j)` swaps anti-aligned
//! bit pairs with amplitude `2J`.

pub mod dense;
mod krylov;

pub use krylov::KrylovControl;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::CorrelationField;
use crate::error::{Error, Result};
use crate::lattice::{Axis, Couplings, Lattice, Model};
use crate::observables::{
    validate_times, Component, Estimate, ObservableRequest, ObservableSeries, COLLECTIVE_X,
};
use crate::oracle_ising::OracleOutput;

/// Largest spin count (a 2^22 complex vector is 64 MiB).
pub const MAX_SPINS: usize = 22;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    sites: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `prod_n (|up> + |down>) / sqrt(2)`: every amplitude `2^(-M/2)`.
    pub fn plus_x(sites: usize) -> Result<Self> {
        check_size(sites)?;
        let dim = 1usize << sites;
        let a = Complex64::new((dim as f64).sqrt().recip(), 0.0);
        Ok(StateVector {
            sites,
            amplitudes: vec![a; dim],
        })
    }

    pub fn from_amplitudes(sites: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_size(sites)?;
        if amplitudes.len() != 1 << sites {
            return Err(Error::InvalidParameter {
                name: "amplitudes",
                reason: format!(
                    "expected {} amplitudes, got {}",
                    1usize << sites,
                    amplitudes.len()
                ),
            });
        }
        Ok(StateVector { sites, amplitudes })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    /// `<self|other>`
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        inner(&self.amplitudes, &other.amplitudes)
    }

    /// `<sigma^d_n>` for `d = x, y, z` (component index 0, 1, 2).
    pub fn magnetization(&self, n: usize, component: usize) -> f64 {
        let mask = 1usize << n;
        let psi = &self.amplitudes;
        match component {
            0 => psi
                .iter()
                .enumerate()
                .map(|(b, a)| (psi[b ^ mask].conj() * a).re)
                .sum(),
            1 => psi
                .iter()
                .enumerate()
                .map(|(b, a)| {
                    // sigma^y |up> = i |down>, sigma^y |down> = -i |up>
                    let phase = if b & mask != 0 {
                        Complex64::i()
                    } else {
                        -Complex64::i()
                    };
                    (psi[b ^ mask].conj() * phase * a).re
                })
                .sum(),
            _ => psi
                .iter()
                .enumerate()
                .map(|(b, a)| spin_z(b, n) * a.norm_sqr())
                .sum(),
        }
    }

    /// `<sigma^b_n sigma^b_m>` for distinct sites.
    pub fn pair(&self, n: usize, m: usize, component: Component) -> f64 {
        debug_assert_ne!(n, m);
        let mask = (1usize << n) | (1usize << m);
        let psi = &self.amplitudes;
        match component {
            Component::Xx => psi
                .iter()
                .enumerate()
                .map(|(b, a)| (psi[b ^ mask].conj() * a).re)
                .sum(),
            // (i z_n)(i z_m) with z = +-1 from the bits
            Component::Yy => psi
                .iter()
                .enumerate()
                .map(|(b, a)| -spin_z(b, n) * spin_z(b, m) * (psi[b ^ mask].conj() * a).re)
                .sum(),
            Component::Zz => psi
                .iter()
                .enumerate()
                .map(|(b, a)| spin_z(b, n) * spin_z(b, m) * a.norm_sqr())
                .sum(),
        }
    }

    pub fn collective(&self, component: usize) -> f64 {
        (0..self.sites)
            .map(|n| self.magnetization(n, component))
            .sum()
    }

    /// Connected `C^bb_nm = <s_n s_m> - <s_n><s_m>`.
    pub fn connected(&self, n: usize, m: usize, component: Component) -> f64 {
        let c = component.index();
        self.pair(n, m, component) - self.magnetization(n, c) * self.magnetization(m, c)
    }
}

fn check_size(sites: usize) -> Result<()> {
    if sites > MAX_SPINS {
        return Err(Error::TooManySpins {
            sites,
            cap: MAX_SPINS,
        });
    }
    Ok(())
}

#[inline]
fn spin_z(basis: usize, n: usize) -> f64 {
    if basis >> n & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

pub(crate) fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Matrix-free Hamiltonian of one coupling matrix.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    model: Model,
    sites: usize,
    /// Ising energies per basis state.
    diagonal: Vec<f64>,
    /// XY exchange terms `2 J_ij`, grouped by tile.
    exchange: ExchangeGroups,
    /// `sum_{i<j} |J_ij|`, the natural energy scale.
    scale: f64,
}

impl Hamiltonian {
    pub fn new(couplings: &Couplings) -> Result<Self> {
        let sites = couplings.len();
        check_size(sites)?;
        let mut pairs = Vec::new();
        for i in 0..sites {
            for j in (i + 1)..sites {
                let v = couplings.get(i, j);
                if v != 0.0 {
                    pairs.push((i, j, v));
                }
            }
        }
        let scale = pairs.iter().map(|p| p.2.abs()).sum();
        let (diagonal, exchange) = match couplings.model() {
            Model::Ising => {
                let diagonal = (0..1usize << sites)
                    .into_par_iter()
                    .map(|b| {
                        pairs
                            .iter()
                            .map(|&(i, j, v)| if (b >> i ^ b >> j) & 1 == 0 { v } else { -v })
                            .sum()
                    })
                    .collect();
                (diagonal, ExchangeGroups::default())
            }
            Model::Xy => (Vec::new(), ExchangeGroups::new(sites, &pairs, TILE_BITS)),
        };
        Ok(Hamiltonian {
            model: couplings.model(),
            sites,
            diagonal,
            exchange,
            scale,
        })
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dimension(&self) -> usize {
        1 << self.sites
    }

    pub fn energy_scale(&self) -> f64 {
        self.scale
    }

    /// `out = H psi`
    pub fn apply(&self, psi: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(psi.len(), self.dimension());
        assert_eq!(out.len(), self.dimension());
        match self.model {
            Model::Ising => out
                .par_iter_mut()
                .zip(psi.par_iter().zip(self.diagonal.par_iter()))
                .for_each(|(o, (a, d))| *o = a * d),
            Model::Xy => self.exchange.apply(psi, out),
        }
    }

    pub fn expectation(&self, psi: &[Complex64]) -> f64 {
        let mut h = vec![Complex64::new(0.0, 0.0); psi.len()];
        self.apply(psi, &mut h);
        inner(psi, &h).re
    }
}

/// Basis states are processed in tiles of `2^TILE_BITS` amplitudes so that
/// each sweep over the vectors applies many exchange terms from cache.
const TILE_BITS: usize = 14;

/// Exchange terms `(i, j, amp)` with `i < j`, split by how the flipped pair
/// straddles tiles: both bits inside a tile, only `j` outside, or both outside.
#[derive(Debug, Clone, Default)]
struct ExchangeGroups {
    tile_bits: usize,
    local: Vec<(usize, usize, f64)>,
    mixed: Vec<(usize, Vec<(usize, f64)>)>,
    remote: Vec<(usize, usize, f64)>,
}

impl ExchangeGroups {
    fn new(sites: usize, pairs: &[(usize, usize, f64)], tile_bits: usize) -> Self {
        let tile_bits = tile_bits.min(sites);
        let mut groups = ExchangeGroups {
            tile_bits,
            ..Self::default()
        };
        for j in tile_bits..sites {
            groups.mixed.push((j, Vec::new()));
        }
        for &(i, j, v) in pairs {
            let amp = 2.0 * v;
            if j < tile_bits {
                groups.local.push((i, j, amp));
            } else if i < tile_bits {
                groups.mixed[j - tile_bits].1.push((i, amp));
            } else {
                groups.remote.push((i, j, amp));
            }
        }
        groups
    }

    fn apply(&self, psi: &[Complex64], out: &mut [Complex64]) {
        let tile = 1usize << self.tile_bits;
        let tiles = psi.len() / tile;
        out.fill(Complex64::new(0.0, 0.0));
        for (p, o) in psi.chunks(tile).zip(out.chunks_mut(tile)) {
            for &(i, j, amp) in &self.local {
                local_pair(p, o, i, j, amp);
            }
        }
        for (j, terms) in &self.mixed {
            let bit = 1usize << (j - self.tile_bits);
            for t in (0..tiles).filter(|t| t & bit == 0) {
                let u = t | bit;
                let (pt, pu) = (&psi[t * tile..][..tile], &psi[u * tile..][..tile]);
                let (ot, ou) = tile_pair_mut(out, t, u, tile);
                for &(i, amp) in terms {
                    let low = 1usize << i;
                    for base in (0..tile).step_by(low << 1) {
                        for p in base + low..base + 2 * low {
                            ot[p] += pu[p ^ low] * amp;
                            ou[p ^ low] += pt[p] * amp;
                        }
                    }
                }
            }
        }
        for &(i, j, amp) in &self.remote {
            let (bi, bj) = (
                1usize << (i - self.tile_bits),
                1usize << (j - self.tile_bits),
            );
            for t in (0..tiles).filter(|t| t & bi != 0 && t & bj == 0) {
                let u = t ^ bi ^ bj;
                let (lo, hi) = (t.min(u), t.max(u));
                let (pl, ph) = (&psi[lo * tile..][..tile], &psi[hi * tile..][..tile]);
                let (ol, oh) = tile_pair_mut(out, lo, hi, tile);
                for ((ol, oh), (pl, ph)) in ol.iter_mut().zip(oh.iter_mut()).zip(pl.iter().zip(ph))
                {
                    *ol += ph * amp;
                    *oh += pl * amp;
                }
            }
        }
    }
}

fn tile_pair_mut(
    out: &mut [Complex64],
    t: usize,
    u: usize,
    tile: usize,
) -> (&mut [Complex64], &mut [Complex64]) {
    debug_assert!(t < u);
    let (a, b) = out.split_at_mut(u * tile);
    (&mut a[t * tile..][..tile], &mut b[..tile])
}

/// Both flipped bits inside one tile; visits only the anti-aligned quarter.
fn local_pair(psi: &[Complex64], out: &mut [Complex64], i: usize, j: usize, amp: f64) {
    let (low, high) = (1usize << i, 1usize << j);
    let mask = low | high;
    for outer in (0..psi.len()).step_by(high << 1) {
        for middle in (outer..outer + high).step_by(low << 1) {
            // bit i set, bit j clear
            let a = middle + low;
            let b = a ^ mask;
            for k in 0..low {
                out[a + k] += psi[b + k] * amp;
                out[b + k] += psi[a + k] * amp;
            }
        }
    }
}

/// `H psi` for the model tagged on `couplings`.
pub fn apply_hamiltonian(couplings: &Couplings, psi: &StateVector) -> Result<StateVector> {
    if psi.sites != couplings.len() {
        return Err(Error::InvalidParameter {
            name: "psi",
            reason: format!("{} spins, couplings have {}", psi.sites, couplings.len()),
        });
    }
    let h = Hamiltonian::new(couplings)?;
    let mut out = vec![Complex64::new(0.0, 0.0); psi.amplitudes.len()];
    h.apply(&psi.amplitudes, &mut out);
    Ok(StateVector {
        sites: psi.sites,
        amplitudes: out,
    })
}

/// Conservation record of one propagation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EdDiagnostics {
    pub max_norm_drift: f64,
    /// Relative to `max(|<H>_0|, sum_{i<j} |J_ij|)`.
    pub max_energy_drift: f64,
    pub max_sz_drift: f64,
    pub steps: usize,
    pub matvecs: usize,
}

/// Propagates `psi0` to each sample time, handing every state to `sink`.
pub fn evolve_with(
    psi0: &StateVector,
    couplings: &Couplings,
    times: &[f64],
    control: &KrylovControl,
    mut sink: impl FnMut(usize, &StateVector),
) -> Result<EdDiagnostics> {
    validate_times(times)?;
    let n0 = psi0.norm();
    if (n0 - 1.0).abs() > control.norm_tolerance {
        return Err(Error::NotNormalized { norm: n0 });
    }
    let h = Hamiltonian::new(couplings)?;
    if psi0.sites != h.sites() {
        return Err(Error::InvalidParameter {
            name: "psi0",
            reason: format!("{} spins, couplings have {}", psi0.sites, h.sites()),
        });
    }
    let e0 = h.expectation(&psi0.amplitudes);
    let energy_scale = e0.abs().max(h.energy_scale());
    let sz0 = psi0.collective(2);
    let mut propagator = krylov::Propagator::new(&h, control);
    let mut psi = psi0.clone();
    let mut diagnostics = EdDiagnostics::default();
    let mut t = 0.0;
    for (k, &target) in times.iter().enumerate() {
        if target > t {
            propagator.advance(&mut psi.amplitudes, t, target - t)?;
        }
        t = target;
        let norm_drift = (psi.norm() - 1.0).abs();
        let energy_drift = (h.expectation(&psi.amplitudes) - e0).abs() / energy_scale;
        diagnostics.max_norm_drift = diagnostics.max_norm_drift.max(norm_drift);
        diagnostics.max_energy_drift = diagnostics.max_energy_drift.max(energy_drift);
        if h.model() == Model::Xy {
            let sz_drift = (psi.collective(2) - sz0).abs();
            diagnostics.max_sz_drift = diagnostics.max_sz_drift.max(sz_drift);
        }
        if norm_drift > control.norm_tolerance || energy_drift > control.energy_tolerance {
            return Err(Error::PropagatorDiverged {
                time: target,
                estimate: norm_drift.max(energy_drift),
            });
        }
        sink(k, &psi);
    }
    diagnostics.steps = propagator.steps();
    diagnostics.matvecs = propagator.matvecs();
    Ok(diagnostics)
}

/// `exp(-iHt) psi0` at every sample time. Holds all states in memory; use
/// [`evolve_with`] for large systems.
pub fn evolve_ed(
    psi0: &StateVector,
    couplings: &Couplings,
    times: &[f64],
    control: &KrylovControl,
) -> Result<(Vec<StateVector>, EdDiagnostics)> {
    let mut states = Vec::with_capacity(times.len());
    let diagnostics = evolve_with(psi0, couplings, times, control, |_, s| {
        states.push(s.clone())
    })?;
    Ok((states, diagnostics))
}

struct Probe {
    reference: usize,
    axis: Axis,
    component: Component,
    sites: Vec<usize>,
}

fn probes(lattice: &Lattice, request: &ObservableRequest) -> Result<Vec<Probe>> {
    request.validate(lattice)?;
    let mut out = Vec::new();
    for corr in &request.correlations {
        let sites = corr.probe_sites(lattice)?;
        for &component in &corr.components {
            out.push(Probe {
                reference: corr.reference,
                axis: corr.axis,
                component,
                sites: sites.clone(),
            });
        }
    }
    Ok(out)
}

/// Exact observables of one state: `S_x` if requested, then one row of
/// connected correlations per (request, component) in request order.
pub fn ed_observables(
    psi: &StateVector,
    lattice: &Lattice,
    request: &ObservableRequest,
) -> Result<(Option<f64>, Vec<Vec<f64>>)> {
    if psi.sites != lattice.len() {
        return Err(Error::InvalidParameter {
            name: "psi",
            reason: format!("{} spins on a {lattice} lattice", psi.sites),
        });
    }
    let rows = probes(lattice, request)?
        .iter()
        .map(|p| {
            p.sites
                .iter()
                .map(|&s| psi.connected(p.reference, s, p.component))
                .collect()
        })
        .collect();
    Ok((request.collective_x.then(|| psi.collective(0)), rows))
}

/// Runs the `+x` quench exactly and records the requested observables.
pub fn run_ed(
    couplings: &Couplings,
    times: &[f64],
    request: &ObservableRequest,
    control: &KrylovControl,
) -> Result<(OracleOutput, EdDiagnostics)> {
    let probes = probes(couplings.lattice(), request)?;
    let psi0 = StateVector::plus_x(couplings.len())?;
    let nt = times.len();
    let mut sx = Vec::with_capacity(nt);
    let mut values: Vec<Array2<f64>> = probes
        .iter()
        .map(|p| Array2::zeros((nt, p.sites.len())))
        .collect();
    let diagnostics = evolve_with(&psi0, couplings, times, control, |k, psi| {
        if request.collective_x {
            sx.push(Estimate::exact(psi.collective(0)));
        }
        for (p, field) in probes.iter().zip(values.iter_mut()) {
            for (j, &site) in p.sites.iter().enumerate() {
                field[[k, j]] = psi.connected(p.reference, site, p.component);
            }
        }
    })?;
    let mut series = ObservableSeries::new(times.to_vec());
    if request.collective_x {
        series.push(COLLECTIVE_X, sx);
    }
    let fields = probes
        .into_iter()
        .zip(values)
        .map(|(p, values)| CorrelationField {
            component: p.component,
            reference: p.reference,
            axis: p.axis,
            sites: p.sites,
            times: times.to_vec(),
            stderr: Array2::zeros(values.dim()),
            values,
            replicates: Vec::new(),
        })
        .collect();
    Ok((OracleOutput { series, fields }, diagnostics))
}
