//! Short-iteration Lanczos propagator.
//!
//! Each step builds an orthonormal Krylov basis `V` of `H` from the current
//! state, diagonalizes the tridiagonal projection `T = V^H H V`, and applies
//! `exp(-i T dt)` in that basis. The a-posteriori error of a step is
//! `beta_m |[exp(-i T dt) e_1]_{m-1}|`; the basis grows until the error of the
//! full step is below `step_tolerance`, and if the dimension cap is reached
//! first the step is halved instead. Diagonal Hamiltonians are propagated by
//! exact phases instead.

use nalgebra::{DMatrix, Dyn, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{inner, norm, Hamiltonian};
use crate::error::{Error, Result};
use crate::lattice::Model;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KrylovControl {
    pub dimension: usize,
    /// Local error bound per step.
    pub step_tolerance: f64,
    /// Bound on `| ||psi|| - 1 |` at each sample time.
    pub norm_tolerance: f64,
    /// Bound on the relative drift of `<H>` at each sample time.
    pub energy_tolerance: f64,
}

impl Default for KrylovControl {
    fn default() -> Self {
        KrylovControl {
            dimension: 20,
            step_tolerance: 1e-12,
            norm_tolerance: 1e-9,
            energy_tolerance: 1e-9,
        }
    }
}

const MAX_BISECTIONS: u32 = 40;
const MIN_DIMENSION: usize = 4;

pub(super) struct Propagator<'a> {
    h: &'a Hamiltonian,
    control: KrylovControl,
    basis: Vec<Vec<Complex64>>,
    work: Vec<Complex64>,
    steps: usize,
    matvecs: usize,
}

impl<'a> Propagator<'a> {
    pub fn new(h: &'a Hamiltonian, control: &KrylovControl) -> Self {
        Propagator {
            h,
            control: *control,
            basis: Vec::new(),
            work: vec![Complex64::new(0.0, 0.0); h.dimension()],
            steps: 0,
            matvecs: 0,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn matvecs(&self) -> usize {
        self.matvecs
    }

    /// `psi <- exp(-i H span) psi`, starting at time `t0`.
    pub fn advance(&mut self, psi: &mut [Complex64], t0: f64, span: f64) -> Result<()> {
        if self.h.model() == Model::Ising {
            self.h
                .diagonal
                .iter()
                .zip(psi.iter_mut())
                .for_each(|(&d, a)| *a *= Complex64::from_polar(1.0, -d * span));
            self.steps += 1;
            return Ok(());
        }
        let mut done = 0.0;
        loop {
            let remaining = span - done;
            let dt = self.lanczos_step(psi, t0 + done, remaining)?;
            self.steps += 1;
            if dt == remaining {
                return Ok(());
            }
            done += dt;
        }
    }

    /// One Krylov step of at most `max_dt`; returns the length taken. The
    /// basis grows until the full `max_dt` converges or the dimension cap is
    /// reached, after which the step is bisected.
    fn lanczos_step(&mut self, psi: &mut [Complex64], t: f64, max_dt: f64) -> Result<f64> {
        let m = self.control.dimension.max(2).min(self.h.dimension());
        let tol = self.control.step_tolerance;
        let beta0 = norm(psi);
        let mut alphas = Vec::with_capacity(m);
        let mut betas = Vec::with_capacity(m);
        self.basis.resize_with(m, Vec::new);
        {
            let v0 = &mut self.basis[0];
            v0.clear();
            v0.extend(psi.iter().map(|a| a / beta0));
        }
        let mut residual = 0.0;
        let mut eig = None;
        for k in 0..m {
            self.h.apply(&self.basis[k], &mut self.work);
            self.matvecs += 1;
            let alpha = inner(&self.basis[k], &self.work).re;
            alphas.push(alpha);
            // full reorthogonalization against the whole basis
            for v in &self.basis[..=k] {
                let c = inner(v, &self.work);
                self.work.iter_mut().zip(v).for_each(|(w, v)| *w -= c * v);
            }
            let b = norm(&self.work);
            let decomposition = tridiagonal_eigen(&alphas, &betas);
            if b <= 1e-14 * (1.0 + alpha.abs()) {
                residual = 0.0;
                eig = Some(decomposition);
                break;
            }
            residual = b;
            let converged = k + 1 >= MIN_DIMENSION
                && beta0 * b * coefficients(&decomposition, max_dt)[k].norm() <= tol;
            eig = Some(decomposition);
            if converged || k + 1 == m {
                break;
            }
            betas.push(b);
            let next = &mut self.basis[k + 1];
            next.clear();
            next.extend(self.work.iter().map(|w| w / b));
        }
        let eig = eig.expect("at least one Lanczos iteration");
        let size = alphas.len();

        let mut dt = max_dt;
        let mut c = coefficients(&eig, dt);
        let mut bisections = 0;
        loop {
            let estimate = beta0 * residual * c[size - 1].norm();
            if estimate <= tol {
                break;
            }
            bisections += 1;
            if bisections > MAX_BISECTIONS {
                return Err(Error::PropagatorDiverged { time: t, estimate });
            }
            dt *= 0.5;
            c = coefficients(&eig, dt);
        }

        psi.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
        for (coef, v) in c.iter().zip(&self.basis) {
            let coef = coef * beta0;
            psi.iter_mut().zip(v).for_each(|(a, v)| *a += coef * v);
        }
        Ok(dt)
    }
}

fn tridiagonal_eigen(alphas: &[f64], betas: &[f64]) -> SymmetricEigen<f64, Dyn> {
    let size = alphas.len();
    let t = DMatrix::from_fn(size, size, |r, c| {
        if r == c {
            alphas[r]
        } else if r + 1 == c {
            betas[r]
        } else if c + 1 == r {
            betas[c]
        } else {
            0.0
        }
    });
    SymmetricEigen::new(t)
}

/// `exp(-i T dt) e_1` in the Lanczos basis.
fn coefficients(eig: &SymmetricEigen<f64, Dyn>, dt: f64) -> Vec<Complex64> {
    let size = eig.eigenvalues.len();
    let weights: Vec<Complex64> = (0..size)
        .map(|q| Complex64::from_polar(eig.eigenvectors[(0, q)], -eig.eigenvalues[q] * dt))
        .collect();
    (0..size)
        .map(|r| {
            (0..size)
                .map(|q| weights[q] * eig.eigenvectors[(r, q)])
                .sum::<Complex64>()
        })
        .collect()
}
