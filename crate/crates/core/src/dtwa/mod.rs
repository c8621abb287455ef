//! Discrete truncated Wigner approximation (DTWA) for the `+x` Ramsey quench.
//!
//! Each Monte-Carlo trajectory starts from a discrete phase-space point of
//! the `+x` product state, `s = (1, ±1, ±1)` per spin, and follows the
//! classical mean-field equations of motion. Quantum expectation values are
//! estimated by trajectory averages:
//!
//! * Ising: `ds^x = -2 s^y beta^z`, `ds^y = 2 s^x beta^z`, `ds^z = 0`, solved
//!   in closed form because `beta^z` is constant.
//! * XY: `ds^x = 2 s^z beta^y`, `ds^y = -2 s^z beta^x`,
//!   `ds^z = 2 (s^y beta^x - s^x beta^y)`, integrated with classic RK4.
//!
//! Here `beta^d_n = sum_{m != n} J_nm s^d_m` is the mean field on spin `n`.

mod engine;
mod integrator;

pub use engine::{run_dtwa, RunConfig, RunDiagnostics, RunOutput, BLOCK_SIZE};
pub use integrator::IntegratorControl;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lattice::{Couplings, Model};
use integrator::{SpinBatch, XyIntegrator};

/// Classical spin vectors of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinState {
    pub sx: Vec<f64>,
    pub sy: Vec<f64>,
    pub sz: Vec<f64>,
}

impl SpinState {
    /// Discrete Wigner sample of the `+x` product state: `s^x = 1`,
    /// `s^y` and `s^z` independent and uniform on `{-1, +1}`.
    pub fn sample<R: Rng + ?Sized>(sites: usize, rng: &mut R) -> Self {
        let mut state = SpinState::polarized_x(sites);
        for n in 0..sites {
            state.sy[n] = if rng.random::<bool>() { 1.0 } else { -1.0 };
            state.sz[n] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        state
    }

    /// Every spin exactly along `(1, 0, 0)`, the mean-field initial state.
    pub fn polarized_x(sites: usize) -> Self {
        SpinState {
            sx: vec![1.0; sites],
            sy: vec![0.0; sites],
            sz: vec![0.0; sites],
        }
    }

    pub fn len(&self) -> usize {
        self.sx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sx.is_empty()
    }

    pub fn component(&self, index: usize) -> &[f64] {
        match index {
            0 => &self.sx,
            1 => &self.sy,
            _ => &self.sz,
        }
    }

    /// `max_n |s_n . s_n - 3|`.
    pub fn max_norm_drift(&self) -> f64 {
        (0..self.len())
            .map(|n| (self.sx[n].powi(2) + self.sy[n].powi(2) + self.sz[n].powi(2) - 3.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn collective_x(&self) -> f64 {
        self.sx.iter().sum()
    }

    pub fn collective_z(&self) -> f64 {
        self.sz.iter().sum()
    }
}

/// Random stream of trajectory `index`; independent of scheduling.
pub fn trajectory_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

pub fn sample_initial(sites: usize, master_seed: u64, index: u64) -> SpinState {
    SpinState::sample(sites, &mut trajectory_rng(master_seed, index))
}

/// `beta^d_n = sum_{m != n} J_nm s^d_m` for `d = x, y, z`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanField {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

pub fn mean_field(state: &SpinState, couplings: &Couplings) -> MeanField {
    assert_eq!(
        state.len(),
        couplings.len(),
        "state and couplings differ in size"
    );
    let j = couplings.matrix();
    let field = |s: &[f64]| -> Vec<f64> {
        j.rows()
            .into_iter()
            .map(|row| row.iter().zip(s).map(|(a, b)| a * b).sum())
            .collect()
    };
    MeanField {
        x: field(&state.sx),
        y: field(&state.sy),
        z: field(&state.sz),
    }
}

/// Closed-form Ising trajectory: `s^z` frozen, `(s^x, s^y)` rotated by
/// `2 beta^z_n t`.
pub fn evolve_ising(state: &SpinState, couplings: &Couplings, t: f64) -> Result<SpinState> {
    couplings.require(Model::Ising)?;
    let beta = mean_field(state, couplings).z;
    let mut out = state.clone();
    for (n, b) in beta.iter().enumerate() {
        let (sin, cos) = (2.0 * b * t).sin_cos();
        out.sx[n] = state.sx[n] * cos - state.sy[n] * sin;
        out.sy[n] = state.sy[n] * cos + state.sx[n] * sin;
    }
    Ok(out)
}

/// Right-hand side of the classical XY equations of motion.
pub fn xy_derivative(state: &SpinState, couplings: &Couplings) -> Result<SpinState> {
    couplings.require(Model::Xy)?;
    let beta = mean_field(state, couplings);
    let m = state.len();
    let mut rate = SpinState {
        sx: vec![0.0; m],
        sy: vec![0.0; m],
        sz: vec![0.0; m],
    };
    for n in 0..m {
        rate.sx[n] = 2.0 * state.sz[n] * beta.y[n];
        rate.sy[n] = -2.0 * state.sz[n] * beta.x[n];
        rate.sz[n] = 2.0 * (state.sy[n] * beta.x[n] - state.sx[n] * beta.y[n]);
    }
    Ok(rate)
}

/// Classical XY energy `sum_{n<m} 2 J_nm (s^x_n s^x_m + s^y_n s^y_m)`.
pub fn classical_energy(state: &SpinState, couplings: &Couplings) -> f64 {
    let beta = mean_field(state, couplings);
    (0..state.len())
        .map(|n| state.sx[n] * beta.x[n] + state.sy[n] * beta.y[n])
        .sum()
}

/// One integrated XY trajectory with its conservation record.
#[derive(Debug, Clone, PartialEq)]
pub struct XyTrajectory {
    /// State at every requested sample time.
    pub states: Vec<SpinState>,
    /// Step size that met the drift tolerances.
    pub step: f64,
    pub norm_drift: f64,
    pub energy_drift: f64,
    pub sz_drift: f64,
}

/// Integrates one trajectory to each of `times` (measured from `t = 0`).
pub fn integrate_xy(
    state: &SpinState,
    couplings: &Couplings,
    times: &[f64],
    control: &IntegratorControl,
) -> Result<XyTrajectory> {
    couplings.require(Model::Xy)?;
    crate::observables::validate_times(times)?;
    let batch = SpinBatch::from_states(std::slice::from_ref(state));
    let mut states = vec![state.clone(); times.len()];
    let mut integrator = XyIntegrator::new(couplings, control, 1);
    let stats = integrator.integrate(&batch, times, |k, b| states[k] = b.state(0))?;
    Ok(XyTrajectory {
        states,
        step: stats.step,
        norm_drift: stats.norm_drift,
        energy_drift: stats.energy_drift,
        sz_drift: stats.sz_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;
    use crate::observables::Moments;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn pair(model: Model, j: f64) -> Couplings {
        Couplings::power_law(Lattice::new(1, 2).unwrap(), model, j, 1.0).unwrap()
    }

    fn state(sx: &[f64], sy: &[f64], sz: &[f64]) -> SpinState {
        SpinState {
            sx: sx.to_vec(),
            sy: sy.to_vec(),
            sz: sz.to_vec(),
        }
    }

    #[test]
    fn samples_point_along_x() {
        let s = sample_initial(50, 7, 3);
        assert!(s.sx.iter().all(|&v| v == 1.0));
        assert!(s.sy.iter().chain(&s.sz).all(|&v| v == 1.0 || v == -1.0));
        assert_eq!(s.max_norm_drift(), 0.0);
        assert_eq!(s, sample_initial(50, 7, 3));
        assert_ne!(s, sample_initial(50, 7, 4));
    }

    #[test]
    fn sample_moments_are_unbiased() {
        let n_t = 10_000;
        let (mut y, mut yz) = (0.0, 0.0);
        for k in 0..n_t {
            let s = sample_initial(4, 11, k);
            y += s.sy[2];
            yz += s.sy[1] * s.sz[1];
        }
        let bound = 4.0 / (n_t as f64).sqrt();
        assert!((y / n_t as f64).abs() < bound);
        assert!((yz / n_t as f64).abs() < bound);
    }

    #[test]
    fn mean_field_examples() {
        let c = pair(Model::Xy, 0.7);
        let mf = mean_field(&state(&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]), &c);
        assert_eq!((mf.x[0], mf.y[0], mf.z[0]), (0.7, 0.7, 0.7));

        let all = Couplings::power_law(Lattice::new(3, 3).unwrap(), Model::Xy, 0.5, 0.0).unwrap();
        let up = state(&[1.0; 9], &[0.0; 9], &[1.0; 9]);
        assert!(mean_field(&up, &all).z.iter().all(|&b| b == 8.0 * 0.5));

        let chain = Couplings::power_law(Lattice::new(1, 3).unwrap(), Model::Xy, 1.0, 1.0).unwrap();
        let s = state(&[1.0; 3], &[0.0; 3], &[1.0, -1.0, 1.0]);
        assert_eq!(mean_field(&s, &chain).z[1], 2.0);
    }

    #[test]
    fn ising_rotation() {
        let c = pair(Model::Ising, 1.3);
        let s0 = state(&[1.0, 1.0], &[-1.0, 1.0], &[1.0, 1.0]);
        assert_eq!(evolve_ising(&s0, &c, 0.0).unwrap(), s0);
        let t = 0.37;
        let s = evolve_ising(&s0, &c, t).unwrap();
        let w = 2.0 * 1.3 * t;
        assert_relative_eq!(s.sx[0], w.cos() + w.sin(), epsilon = 1e-15);
        assert_eq!(s.sz, s0.sz);
        assert!(s.max_norm_drift() < 1e-14);
        assert!(evolve_ising(&s0, &pair(Model::Xy, 1.0), t).is_err());
    }

    #[test]
    fn ising_average_over_partner_is_cosine() {
        let c = pair(Model::Ising, 1.0);
        let t = 0.8;
        let avg: f64 = [1.0, -1.0]
            .iter()
            .flat_map(|&z2| [1.0, -1.0].map(|y1| (z2, y1)))
            .map(|(z2, y1)| {
                let s0 = state(&[1.0, 1.0], &[y1, 1.0], &[1.0, z2]);
                evolve_ising(&s0, &c, t).unwrap().sx[0]
            })
            .sum::<f64>()
            / 4.0;
        assert_relative_eq!(avg, (2.0 * t).cos(), epsilon = 1e-14);
    }

    #[test]
    fn xy_derivative_examples() {
        let c = pair(Model::Xy, 1.0);
        let still = xy_derivative(&SpinState::polarized_x(2), &c).unwrap();
        assert!(still
            .sx
            .iter()
            .chain(&still.sy)
            .chain(&still.sz)
            .all(|&v| v == 0.0));
        let s = state(&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]);
        assert_eq!(xy_derivative(&s, &c).unwrap().sz[0], 0.0);
        assert!(xy_derivative(&s, &pair(Model::Ising, 1.0)).is_err());
    }

    #[test]
    fn zero_duration_run_returns_input() {
        let c = pair(Model::Xy, 1.0);
        let s0 = sample_initial(2, 1, 0);
        let run = integrate_xy(&s0, &c, &[0.0], &IntegratorControl::default()).unwrap();
        assert_eq!(run.states, vec![s0]);
    }

    #[test]
    fn mean_field_state_has_no_dynamics() {
        let l = Lattice::new(3, 3).unwrap();
        let xy = Couplings::power_law(l, Model::Xy, 1.0, 1.0).unwrap();
        let s0 = SpinState::polarized_x(9);
        let run = integrate_xy(&s0, &xy, &[0.5, 1.0], &IntegratorControl::default()).unwrap();
        assert!(run.states.iter().all(|s| *s == s0));
        let ising = xy.with_model(Model::Ising);
        assert_eq!(evolve_ising(&s0, &ising, 1.0).unwrap(), s0);
    }

    fn enumerated_two_spin_xy(times: &[f64]) -> Vec<f64> {
        // all 16 discrete initial points: an exact phase-space average
        let c = pair(Model::Xy, 1.0);
        let mut total = vec![0.0; times.len()];
        for code in 0..16u32 {
            let bit = |b: u32| if code >> b & 1 == 1 { 1.0 } else { -1.0 };
            let s0 = state(&[1.0, 1.0], &[bit(0), bit(1)], &[bit(2), bit(3)]);
            let run = integrate_xy(&s0, &c, times, &IntegratorControl::default()).unwrap();
            for (acc, s) in total.iter_mut().zip(&run.states) {
                *acc += s.collective_x() / 16.0;
            }
        }
        total
    }

    #[test]
    fn two_spin_xy_average_is_exact_through_fourth_order() {
        let times = [0.05, 0.1, 0.2, 0.3];
        for (t, sx) in times.iter().zip(enumerated_two_spin_xy(&times)) {
            let deviation = (sx / 2.0 - (2.0 * t).cos()).abs();
            assert!(deviation <= 4.0 * t.powi(6), "t = {t}: {deviation:e}");
        }
    }

    #[test]
    fn two_spin_xy_sampled_within_statistical_error() {
        let c = pair(Model::Xy, 1.0);
        let times = [0.1, 0.2, 0.3];
        let mut moments = vec![Moments::default(); times.len()];
        for index in 0..4000 {
            let s0 = sample_initial(2, 11, index);
            let run = integrate_xy(&s0, &c, &times, &IntegratorControl::default()).unwrap();
            for (m, s) in moments.iter_mut().zip(&run.states) {
                m.push(s.collective_x());
            }
        }
        for (t, m) in times.iter().zip(&moments) {
            let e = m.estimate();
            assert!(
                (e.mean - 2.0 * (2.0 * t).cos()).abs() <= 4.0 * e.stderr.max(1e-3),
                "t = {t}: {e:?}"
            );
        }
    }

    proptest! {
        #[test]
        fn xy_z_rates_sum_to_zero(seed in 0u64..1000, alpha in 0.0f64..3.0) {
            let c = Couplings::power_law(Lattice::new(3, 2).unwrap(), Model::Xy, 1.0, alpha).unwrap();
            let mut rng = trajectory_rng(seed, 0);
            let s = state(
                &(0..6).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>(),
                &(0..6).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>(),
                &(0..6).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>(),
            );
            let rate = xy_derivative(&s, &c).unwrap();
            prop_assert!(rate.sz.iter().sum::<f64>().abs() < 1e-12);
            // rates are tangent to the spin sphere
            for n in 0..6 {
                let dot = s.sx[n] * rate.sx[n] + s.sy[n] * rate.sy[n] + s.sz[n] * rate.sz[n];
                prop_assert!(dot.abs() < 1e-12);
            }
        }

        #[test]
        fn xy_trajectories_conserve_invariants(seed in 0u64..10_000, alpha in 0.5f64..3.0) {
            let c = Couplings::power_law(Lattice::new(3, 3).unwrap(), Model::Xy, 1.0, alpha).unwrap();
            let s0 = sample_initial(9, seed, 0);
            let run = integrate_xy(&s0, &c, &[0.25, 0.5, 1.0], &IntegratorControl::default()).unwrap();
            let e0 = classical_energy(&s0, &c);
            for s in &run.states {
                prop_assert!(s.max_norm_drift() <= 1e-8);
                prop_assert!((s.collective_z() - s0.collective_z()).abs() <= 1e-8);
                let scale = e0.abs().max(c.matrix().iter().map(|v| v.abs()).sum());
                prop_assert!((classical_energy(s, &c) - e0).abs() / scale <= 1e-6);
            }
        }
    }
}
