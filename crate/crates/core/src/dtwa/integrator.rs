//! Batched trajectory propagation.
//!
//! A batch stores `B` trajectories column-wise in `M x B` matrices so the
//! mean fields of the whole batch come from one matrix product `J * S`.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Axis, Zip};
use serde::{Deserialize, Serialize};

use super::SpinState;
use crate::error::{Error, Result};
use crate::lattice::Couplings;

/// Fixed-step RK4 control. The step starts at `step / |J|` and is halved
/// until every trajectory in a batch meets both drift tolerances at every
/// sample time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorControl {
    /// Initial step in units of `1/J`.
    pub step: f64,
    pub max_halvings: u32,
    /// Bound on the drift of each `|s_n|^2`.
    pub norm_tolerance: f64,
    /// Bound on the relative drift of the classical XY energy.
    pub energy_tolerance: f64,
}

impl Default for IntegratorControl {
    fn default() -> Self {
        IntegratorControl {
            step: 5e-3,
            max_halvings: 12,
            norm_tolerance: 1e-8,
            energy_tolerance: 1e-6,
        }
    }
}

impl IntegratorControl {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(positive(self.step)
            && positive(self.norm_tolerance)
            && positive(self.energy_tolerance))
        {
            return Err(Error::InvalidParameter {
                name: "integrator",
                reason: "step and tolerances must be positive".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SpinBatch {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub z: Array2<f64>,
}

impl SpinBatch {
    pub fn from_states(states: &[SpinState]) -> Self {
        let m = states[0].len();
        let b = states.len();
        let mut batch = SpinBatch {
            x: Array2::zeros((m, b)),
            y: Array2::zeros((m, b)),
            z: Array2::zeros((m, b)),
        };
        for (k, s) in states.iter().enumerate() {
            batch.x.column_mut(k).assign(&Array1::from(s.sx.clone()));
            batch.y.column_mut(k).assign(&Array1::from(s.sy.clone()));
            batch.z.column_mut(k).assign(&Array1::from(s.sz.clone()));
        }
        batch
    }

    pub fn width(&self) -> usize {
        self.x.ncols()
    }

    pub fn component(&self, index: usize) -> &Array2<f64> {
        match index {
            0 => &self.x,
            1 => &self.y,
            _ => &self.z,
        }
    }

    pub fn state(&self, column: usize) -> SpinState {
        SpinState {
            sx: self.x.column(column).to_vec(),
            sy: self.y.column(column).to_vec(),
            sz: self.z.column(column).to_vec(),
        }
    }

    /// Per-trajectory `max_n |s_n . s_n - r_n . r_n|` against `reference`.
    pub fn norm_drift(&self, reference: &SpinBatch) -> Vec<f64> {
        let mut out = vec![0.0f64; self.width()];
        let (m, w) = self.x.dim();
        for n in 0..m {
            for (b, d) in out.iter_mut().enumerate().take(w) {
                let sq =
                    |s: &SpinBatch| s.x[[n, b]].powi(2) + s.y[[n, b]].powi(2) + s.z[[n, b]].powi(2);
                *d = d.max((sq(self) - sq(reference)).abs());
            }
        }
        out
    }
}

/// Closed-form Ising propagation of a batch, reporting each sample time.
pub(crate) fn propagate_ising(
    couplings: &Couplings,
    initial: &SpinBatch,
    times: &[f64],
    mut sink: impl FnMut(usize, &SpinBatch),
) {
    let mut beta = Array2::zeros(initial.z.raw_dim());
    general_mat_mul(1.0, couplings.matrix(), &initial.z, 0.0, &mut beta);
    let mut state = initial.clone();
    for (k, &t) in times.iter().enumerate() {
        Zip::from(&mut state.x)
            .and(&mut state.y)
            .and(&initial.x)
            .and(&initial.y)
            .and(&beta)
            .for_each(|x, y, &x0, &y0, &b| {
                let (sin, cos) = (2.0 * b * t).sin_cos();
                *x = x0 * cos - y0 * sin;
                *y = y0 * cos + x0 * sin;
            });
        sink(k, &state);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct DriftStats {
    pub step: f64,
    pub norm_drift: f64,
    pub energy_drift: f64,
    pub sz_drift: f64,
}

struct Violation {
    time: f64,
    norm_drift: f64,
    energy_drift: f64,
}

pub(crate) struct XyIntegrator<'a> {
    couplings: &'a Array2<f64>,
    control: IntegratorControl,
    initial_step: f64,
    energy_scale: f64,
    // RK4 scratch, all M x B
    bx: Array2<f64>,
    by: Array2<f64>,
    k: SpinBatch,
    acc: SpinBatch,
    probe: SpinBatch,
}

impl<'a> XyIntegrator<'a> {
    pub fn new(couplings: &'a Couplings, control: &IntegratorControl, width: usize) -> Self {
        let m = couplings.len();
        let zeros = || Array2::zeros((m, width));
        let scratch = || SpinBatch {
            x: zeros(),
            y: zeros(),
            z: zeros(),
        };
        let strength = couplings.strength().abs();
        XyIntegrator {
            couplings: couplings.matrix(),
            control: *control,
            initial_step: if strength > 0.0 {
                control.step / strength
            } else {
                control.step
            },
            energy_scale: couplings.matrix().iter().map(|v| v.abs()).sum(),
            bx: zeros(),
            by: zeros(),
            k: scratch(),
            acc: scratch(),
            probe: scratch(),
        }
    }

    /// Integrates the batch to every sample time, halving the step until the
    /// conservation checks pass. `sink` sees only the accepted attempt, but is
    /// called again from the start on each retry, so it must reset itself when
    /// `time_index == 0`.
    pub fn integrate(
        &mut self,
        initial: &SpinBatch,
        times: &[f64],
        mut sink: impl FnMut(usize, &SpinBatch),
    ) -> Result<DriftStats> {
        let mut last = None;
        for halving in 0..=self.control.max_halvings {
            let step = self.initial_step / f64::from(1u32 << halving.min(31));
            match self.attempt(initial, times, step, &mut sink) {
                Ok(stats) => return Ok(stats),
                Err(v) => last = Some((step, v)),
            }
        }
        let (step, v) = last.expect("at least one attempt");
        Err(Error::StepUnderflow {
            time: v.time,
            step,
            norm_drift: v.norm_drift,
            energy_drift: v.energy_drift,
        })
    }

    fn attempt(
        &mut self,
        initial: &SpinBatch,
        times: &[f64],
        step: f64,
        sink: &mut impl FnMut(usize, &SpinBatch),
    ) -> std::result::Result<DriftStats, Violation> {
        let mut state = initial.clone();
        let e0 = self.energies(&state);
        let sz0 = state.z.sum_axis(Axis(0));
        let mut stats = DriftStats {
            step,
            ..DriftStats::default()
        };
        let mut t = 0.0;
        for (index, &target) in times.iter().enumerate() {
            let span = target - t;
            if span > 0.0 {
                let n = ((span / step) - 1e-9).ceil().max(1.0) as usize;
                let h = span / n as f64;
                for _ in 0..n {
                    self.rk4_step(&mut state, h);
                }
            }
            t = target;

            let norm = state.norm_drift(initial).into_iter().fold(0.0, f64::max);
            let energy = self
                .energies(&state)
                .iter()
                .zip(&e0)
                .map(|(e, e0)| (e - e0).abs() / e0.abs().max(self.energy_scale))
                .fold(0.0, f64::max);
            let sz = (&state.z.sum_axis(Axis(0)) - &sz0)
                .iter()
                .fold(0.0f64, |a, v| a.max(v.abs()));
            stats.norm_drift = stats.norm_drift.max(norm);
            stats.energy_drift = stats.energy_drift.max(energy);
            stats.sz_drift = stats.sz_drift.max(sz);
            if norm > self.control.norm_tolerance || energy > self.control.energy_tolerance {
                return Err(Violation {
                    time: target,
                    norm_drift: norm,
                    energy_drift: energy,
                });
            }
            sink(index, &state);
        }
        Ok(stats)
    }

    /// Per-trajectory `sum_n (s^x_n beta^x_n + s^y_n beta^y_n)`.
    fn energies(&mut self, s: &SpinBatch) -> Vec<f64> {
        general_mat_mul(1.0, self.couplings, &s.x, 0.0, &mut self.bx);
        general_mat_mul(1.0, self.couplings, &s.y, 0.0, &mut self.by);
        let mut e = vec![0.0; s.width()];
        for n in 0..s.x.nrows() {
            for (b, e) in e.iter_mut().enumerate() {
                *e += s.x[[n, b]] * self.bx[[n, b]] + s.y[[n, b]] * self.by[[n, b]];
            }
        }
        e
    }

    fn rk4_step(&mut self, s: &mut SpinBatch, h: f64) {
        derivative(self.couplings, s, &mut self.bx, &mut self.by, &mut self.k);
        self.acc.x.assign(&self.k.x);
        self.acc.y.assign(&self.k.y);
        self.acc.z.assign(&self.k.z);
        for (offset, weight) in [(0.5, 2.0), (0.5, 2.0), (1.0, 1.0)] {
            self.set_probe(s, offset * h);
            derivative(
                self.couplings,
                &self.probe,
                &mut self.bx,
                &mut self.by,
                &mut self.k,
            );
            self.acc.x.scaled_add(weight, &self.k.x);
            self.acc.y.scaled_add(weight, &self.k.y);
            self.acc.z.scaled_add(weight, &self.k.z);
        }
        let w = h / 6.0;
        s.x.scaled_add(w, &self.acc.x);
        s.y.scaled_add(w, &self.acc.y);
        s.z.scaled_add(w, &self.acc.z);
    }

    /// `probe = s + h * k`.
    fn set_probe(&mut self, s: &SpinBatch, h: f64) {
        for (p, (s, k)) in [
            (&mut self.probe.x, (&s.x, &self.k.x)),
            (&mut self.probe.y, (&s.y, &self.k.y)),
            (&mut self.probe.z, (&s.z, &self.k.z)),
        ] {
            Zip::from(p)
                .and(s)
                .and(k)
                .for_each(|p, &s, &k| *p = s + h * k);
        }
    }
}

/// `k = f(s)` for the classical XY equations of motion.
fn derivative(
    couplings: &Array2<f64>,
    s: &SpinBatch,
    bx: &mut Array2<f64>,
    by: &mut Array2<f64>,
    k: &mut SpinBatch,
) {
    general_mat_mul(1.0, couplings, &s.x, 0.0, bx);
    general_mat_mul(1.0, couplings, &s.y, 0.0, by);
    Zip::from(&mut k.x)
        .and(&mut k.y)
        .and(&s.z)
        .and(&*bx)
        .and(&*by)
        .for_each(|kx, ky, &z, &bx, &by| {
            *kx = 2.0 * z * by;
            *ky = -2.0 * z * bx;
        });
    Zip::from(&mut k.z)
        .and(&s.x)
        .and(&s.y)
        .and(&*bx)
        .and(&*by)
        .for_each(|kz, &x, &y, &bx, &by| *kz = 2.0 * (y * bx - x * by));
}
