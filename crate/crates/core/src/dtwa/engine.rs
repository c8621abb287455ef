//! Parallel trajectory ensembles with scheduling-independent results.
//!
//! Trajectories are grouped into fixed blocks of [`BLOCK_SIZE`] consecutive
//! indices. Each block draws its randomness from per-trajectory streams and
//! accumulates into its own leaf; leaves are merged along a binary tree over
//! block indices. The tree shape depends only on the trajectory count, so
//! every worker count produces bit-identical sums.

use std::ops::Range;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::integrator::{propagate_ising, SpinBatch, XyIntegrator};
use super::{trajectory_rng, IntegratorControl, SpinState};
use crate::analysis::{connected, CorrelationField};
use crate::error::{Error, Result};
use crate::lattice::{Couplings, Model};
use crate::observables::{
    validate_times, Component, Moments, ObservableRequest, ObservableSeries, COLLECTIVE_X,
};

/// Trajectories per leaf of the reduction tree.
pub const BLOCK_SIZE: u64 = 32;

const BOOTSTRAP_DOMAIN: u64 = 0x5EED_B007_57A9_0001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub trajectories: u64,
    pub master_seed: u64,
    pub times: Vec<f64>,
    pub integrator: IntegratorControl,
    pub observables: ObservableRequest,
    /// Poisson-bootstrap replicates of the correlation fields; 0 disables.
    pub bootstrap_resamples: usize,
}

impl RunConfig {
    pub fn validate(&self, couplings: &Couplings) -> Result<()> {
        if self.trajectories == 0 {
            return Err(Error::InvalidParameter {
                name: "n_trajectories",
                reason: "at least one trajectory is required".into(),
            });
        }
        validate_times(&self.times)?;
        self.integrator.validate()?;
        self.observables.validate(couplings.lattice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub max_norm_drift: f64,
    pub max_energy_drift: f64,
    pub max_sz_drift: f64,
    /// Smallest and largest accepted step over all blocks (0 for Ising).
    pub min_step: f64,
    pub max_step: f64,
    pub wall_seconds: f64,
}

impl Default for RunDiagnostics {
    fn default() -> Self {
        RunDiagnostics {
            max_norm_drift: 0.0,
            max_energy_drift: 0.0,
            max_sz_drift: 0.0,
            min_step: f64::INFINITY,
            max_step: 0.0,
            wall_seconds: 0.0,
        }
    }
}

impl RunDiagnostics {
    fn merge(&mut self, other: &RunDiagnostics) {
        self.max_norm_drift = self.max_norm_drift.max(other.max_norm_drift);
        self.max_energy_drift = self.max_energy_drift.max(other.max_energy_drift);
        self.max_sz_drift = self.max_sz_drift.max(other.max_sz_drift);
        self.min_step = self.min_step.min(other.min_step);
        self.max_step = self.max_step.max(other.max_step);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub series: ObservableSeries,
    pub fields: Vec<CorrelationField>,
    pub diagnostics: RunDiagnostics,
}

/// Runs the DTWA ensemble on `workers` threads (`None` = rayon default).
/// Outputs do not depend on the worker count.
pub fn run_dtwa(
    config: &RunConfig,
    couplings: &Couplings,
    workers: Option<usize>,
) -> Result<RunOutput> {
    config.validate(couplings)?;
    let started = Instant::now();
    let plan = Plan::new(config, couplings)?;
    let blocks = config.trajectories.div_ceil(BLOCK_SIZE);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| Error::InvalidParameter {
        name: "workers",
        reason: e.to_string(),
    })?;
    let total = pool.install(|| plan.reduce(0..blocks))?;
    let mut output = plan.finish(total);
    output.diagnostics.wall_seconds = started.elapsed().as_secs_f64();
    Ok(output)
}

/// Probe sites of one correlation component.
struct Probe {
    component: Component,
    reference: usize,
    request: usize,
    sites: Vec<usize>,
}

struct Plan<'a> {
    config: &'a RunConfig,
    couplings: &'a Couplings,
    probes: Vec<Probe>,
}

impl<'a> Plan<'a> {
    fn new(config: &'a RunConfig, couplings: &'a Couplings) -> Result<Self> {
        let mut probes = Vec::new();
        for (request_index, request) in config.observables.correlations.iter().enumerate() {
            let sites = request.probe_sites(couplings.lattice())?;
            for &component in &request.components {
                probes.push(Probe {
                    component,
                    reference: request.reference,
                    request: request_index,
                    sites: sites.clone(),
                });
            }
        }
        Ok(Plan {
            config,
            couplings,
            probes,
        })
    }

    fn reduce(&self, blocks: Range<u64>) -> Result<Accumulator> {
        if blocks.end - blocks.start == 1 {
            return self.block(blocks.start);
        }
        let mid = blocks.start + (blocks.end - blocks.start) / 2;
        let (left, right) = rayon::join(
            || self.reduce(blocks.start..mid),
            || self.reduce(mid..blocks.end),
        );
        let mut left = left?;
        left.merge(&right?);
        Ok(left)
    }

    fn empty_accumulator(&self) -> Accumulator {
        let t = self.config.times.len();
        let r = self.config.bootstrap_resamples;
        Accumulator {
            collective_x: if self.config.observables.collective_x {
                vec![Moments::default(); t]
            } else {
                Vec::new()
            },
            probes: self
                .probes
                .iter()
                .map(|p| ProbeSums::new(t, p.sites.len(), r))
                .collect(),
            weight_sums: vec![0.0; r],
            diagnostics: RunDiagnostics::default(),
        }
    }

    fn block(&self, block: u64) -> Result<Accumulator> {
        let first = block * BLOCK_SIZE;
        let last = (first + BLOCK_SIZE).min(self.config.trajectories);
        let m = self.couplings.len();
        let seed = self.config.master_seed;
        let states: Vec<SpinState> = (first..last)
            .map(|k| SpinState::sample(m, &mut trajectory_rng(seed, k)))
            .collect();
        let resamples = self.config.bootstrap_resamples;
        let weights: Vec<Vec<f64>> = (first..last)
            .map(|k| poisson_weights(seed, k, resamples))
            .collect();
        let batch = SpinBatch::from_states(&states);
        let mut leaf = self.empty_accumulator();
        for w in &weights {
            for (total, wr) in leaf.weight_sums.iter_mut().zip(w) {
                *total += wr;
            }
        }
        let weight_sums = leaf.weight_sums.clone();
        match self.couplings.model() {
            Model::Ising => {
                propagate_ising(self.couplings, &batch, &self.config.times, |k, s| {
                    let drift = s.norm_drift(&batch).into_iter().fold(0.0, f64::max);
                    leaf.diagnostics.max_norm_drift = leaf.diagnostics.max_norm_drift.max(drift);
                    leaf.record(self, k, s, &weights)
                });
            }
            Model::Xy => {
                let mut integrator =
                    XyIntegrator::new(self.couplings, &self.config.integrator, batch.width());
                let stats = integrator.integrate(&batch, &self.config.times, |k, s| {
                    if k == 0 {
                        leaf = self.empty_accumulator();
                        leaf.weight_sums.clone_from(&weight_sums);
                    }
                    leaf.record(self, k, s, &weights)
                })?;
                leaf.diagnostics = RunDiagnostics {
                    max_norm_drift: stats.norm_drift,
                    max_energy_drift: stats.energy_drift,
                    max_sz_drift: stats.sz_drift,
                    min_step: stats.step,
                    max_step: stats.step,
                    wall_seconds: 0.0,
                };
            }
        }
        Ok(leaf)
    }

    fn finish(&self, total: Accumulator) -> RunOutput {
        let times = self.config.times.clone();
        let mut series = ObservableSeries::new(times.clone());
        if self.config.observables.collective_x {
            series.push(
                COLLECTIVE_X,
                total.collective_x.iter().map(Moments::estimate).collect(),
            );
        }
        let nt = times.len();
        let fields = self
            .probes
            .iter()
            .zip(&total.probes)
            .map(|(probe, sums)| {
                let nj = probe.sites.len();
                let mut values = Array2::zeros((nt, nj));
                let mut stderr = Array2::zeros((nt, nj));
                for t in 0..nt {
                    let a = sums.reference[t].estimate();
                    for j in 0..nj {
                        let c = connected(
                            sums.pair[t * nj + j].estimate(),
                            a,
                            sums.site[t * nj + j].estimate(),
                        );
                        values[[t, j]] = c.mean;
                        stderr[[t, j]] = c.stderr;
                    }
                }
                let replicates = (0..self.config.bootstrap_resamples)
                    .map(|r| {
                        let w = total.weight_sums[r];
                        Array2::from_shape_fn((nt, nj), |(t, j)| {
                            if w == 0.0 {
                                return f64::NAN;
                            }
                            let cell = &sums.boot[(r * nt + t) * (1 + 2 * nj)..][..1 + 2 * nj];
                            let a = cell[0] / w;
                            cell[2 + 2 * j] / w - a * (cell[1 + 2 * j] / w)
                        })
                    })
                    .collect();
                let request = &self.config.observables.correlations[probe.request];
                CorrelationField {
                    component: probe.component,
                    reference: probe.reference,
                    axis: request.axis,
                    sites: probe.sites.clone(),
                    times: times.clone(),
                    values,
                    stderr,
                    replicates,
                }
            })
            .collect();
        let mut diagnostics = total.diagnostics;
        if diagnostics.min_step.is_infinite() {
            diagnostics.min_step = 0.0;
        }
        RunOutput {
            series,
            fields,
            diagnostics,
        }
    }
}

/// Per-time sums of one correlation probe.
#[derive(Clone)]
struct ProbeSums {
    reference: Vec<Moments>,
    /// `[t * J + j]`
    site: Vec<Moments>,
    pair: Vec<Moments>,
    /// `[(r * T + t) * (1 + 2J) + ...]`: weighted `a`, then `b_j`, `a b_j`
    /// for each `j`.
    boot: Vec<f64>,
}

impl ProbeSums {
    fn new(times: usize, sites: usize, resamples: usize) -> Self {
        ProbeSums {
            reference: vec![Moments::default(); times],
            site: vec![Moments::default(); times * sites],
            pair: vec![Moments::default(); times * sites],
            boot: vec![0.0; resamples * times * (1 + 2 * sites)],
        }
    }

    fn merge(&mut self, other: &ProbeSums) {
        for (a, b) in self
            .reference
            .iter_mut()
            .chain(self.site.iter_mut())
            .chain(self.pair.iter_mut())
            .zip(other.reference.iter().chain(&other.site).chain(&other.pair))
        {
            a.merge(b);
        }
        for (a, b) in self.boot.iter_mut().zip(&other.boot) {
            *a += b;
        }
    }
}

struct Accumulator {
    collective_x: Vec<Moments>,
    probes: Vec<ProbeSums>,
    weight_sums: Vec<f64>,
    diagnostics: RunDiagnostics,
}

impl Accumulator {
    fn merge(&mut self, other: &Accumulator) {
        for (a, b) in self.collective_x.iter_mut().zip(&other.collective_x) {
            a.merge(b);
        }
        for (a, b) in self.probes.iter_mut().zip(&other.probes) {
            a.merge(b);
        }
        for (a, b) in self.weight_sums.iter_mut().zip(&other.weight_sums) {
            *a += b;
        }
        self.diagnostics.merge(&other.diagnostics);
    }

    fn record(&mut self, plan: &Plan<'_>, t: usize, batch: &SpinBatch, weights: &[Vec<f64>]) {
        let nt = plan.config.times.len();
        if let Some(m) = self.collective_x.get_mut(t) {
            for column in batch.x.columns() {
                m.push(column.sum());
            }
        }
        for (probe, sums) in plan.probes.iter().zip(self.probes.iter_mut()) {
            let values = batch.component(probe.component.index());
            let nj = probe.sites.len();
            for (b, w) in weights.iter().enumerate() {
                let a = values[[probe.reference, b]];
                sums.reference[t].push(a);
                for (j, &site) in probe.sites.iter().enumerate() {
                    let v = values[[site, b]];
                    sums.site[t * nj + j].push(v);
                    sums.pair[t * nj + j].push(a * v);
                }
                for (r, &wr) in w.iter().enumerate() {
                    if wr == 0.0 {
                        continue;
                    }
                    let cell = &mut sums.boot[(r * nt + t) * (1 + 2 * nj)..][..1 + 2 * nj];
                    cell[0] += wr * a;
                    for (j, &site) in probe.sites.iter().enumerate() {
                        let v = values[[site, b]];
                        cell[1 + 2 * j] += wr * v;
                        cell[2 + 2 * j] += wr * a * v;
                    }
                }
            }
        }
    }
}

/// Poisson(1) multiplicities of trajectory `index` in each bootstrap
/// replicate, drawn from a stream disjoint from the sampling stream.
fn poisson_weights(master_seed: u64, index: u64, resamples: usize) -> Vec<f64> {
    if resamples == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed ^ BOOTSTRAP_DOMAIN);
    rng.set_stream(index);
    (0..resamples)
        .map(|_| {
            let u: f64 = rng.random();
            let mut k = 0u32;
            let mut p = (-1.0f64).exp();
            let mut cdf = p;
            while u > cdf && k < 64 {
                k += 1;
                p /= f64::from(k);
                cdf += p;
            }
            f64::from(k)
        })
        .collect()
}
