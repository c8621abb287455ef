//! Closed-form solution of the Ising quench from the `+x` product state.
//!
//! Under `H = sum_{i<j} J_ij sz_i sz_j` every `sz` is conserved, so
//! `sigma^+_i(t)` only picks up phases set by the other spins' `sz`.
//! Averaging those phases over the `+x` state gives products of cosines:
//!
//! * `<sigma^x_i> = prod_{k != i} cos(2 J_ik t)`
//! * `<sigma^+_i sigma^+_j> = 1/4 prod_{k != i,j} cos(2t (J_ik + J_jk))`
//! * `<sigma^+_i sigma^-_j> = 1/4 prod_{k != i,j} cos(2t (J_ik - J_jk))`
//!
//! The `oracle_ed` tests cross-check every formula against exact
//! propagation before anything here is used as a reference.

use ndarray::Array2;
use num_complex::Complex64;

use crate::analysis::CorrelationField;
use crate::error::{Error, Result};
use crate::lattice::{Couplings, Model};
use crate::observables::{
    validate_times, Component, Estimate, ObservableRequest, ObservableSeries, COLLECTIVE_X,
};

/// `<sigma^x_i>(t)`; `<sigma^y_i>` vanishes at all times.
pub fn ising_magnetization(couplings: &Couplings, i: usize, t: f64) -> Result<f64> {
    couplings.require(Model::Ising)?;
    couplings.lattice().check_site(i)?;
    Ok((0..couplings.len())
        .filter(|&k| k != i)
        .map(|k| (2.0 * couplings.get(i, k) * t).cos())
        .product())
}

/// `S_x(t) = sum_i <sigma^x_i>(t)`.
pub fn ising_collective_x(couplings: &Couplings, t: f64) -> Result<f64> {
    (0..couplings.len())
        .map(|i| ising_magnetization(couplings, i, t))
        .sum()
}

/// Two-spin raising/lowering expectations of a pair of distinct sites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairAmplitudes {
    /// `<sigma^+_i sigma^+_j>`
    pub pp: Complex64,
    /// `<sigma^+_i sigma^-_j>`
    pub pm: Complex64,
}

pub fn ising_pair(couplings: &Couplings, i: usize, j: usize, t: f64) -> Result<PairAmplitudes> {
    couplings.require(Model::Ising)?;
    check_pair(couplings, i, j)?;
    let (mut pp, mut pm) = (0.25, 0.25);
    for k in (0..couplings.len()).filter(|&k| k != i && k != j) {
        let (a, b) = (couplings.get(i, k), couplings.get(j, k));
        pp *= (2.0 * t * (a + b)).cos();
        pm *= (2.0 * t * (a - b)).cos();
    }
    Ok(PairAmplitudes {
        pp: Complex64::new(pp, 0.0),
        pm: Complex64::new(pm, 0.0),
    })
}

/// Connected correlation `C^bb_ij(t)`. `C^zz` vanishes identically because
/// every `sz` is conserved in a product state.
pub fn ising_connected(
    couplings: &Couplings,
    i: usize,
    j: usize,
    t: f64,
    component: Component,
) -> Result<f64> {
    let pair = ising_pair(couplings, i, j, t)?;
    Ok(match component {
        Component::Xx => {
            let mi = ising_magnetization(couplings, i, t)?;
            let mj = ising_magnetization(couplings, j, t)?;
            2.0 * (pair.pp + pair.pm).re - mi * mj
        }
        Component::Yy => 2.0 * (pair.pm - pair.pp).re,
        Component::Zz => 0.0,
    })
}

/// Relative error of DTWA `C^yy_ij`, `|1 - cos^2(2 t J_ij)|`: the DTWA
/// multiplies both pair amplitudes by `cos^2(2 t J_ij)`.
pub fn dtwa_error_prediction(couplings: &Couplings, i: usize, j: usize, t: f64) -> Result<f64> {
    check_pair(couplings, i, j)?;
    Ok((1.0 - (2.0 * t * couplings.get(i, j)).cos().powi(2)).abs())
}

/// All-to-all approximation of the contrast, `M cos^{M-1}(2 t J_eff)`.
pub fn collective_contrast(sites: usize, j_eff: f64, t: f64) -> Result<f64> {
    if sites < 2 {
        return Err(Error::InvalidParameter {
            name: "M",
            reason: format!("{sites} site(s); at least 2 are required"),
        });
    }
    Ok(sites as f64 * (2.0 * t * j_eff).cos().powi(sites as i32 - 1))
}

fn check_pair(couplings: &Couplings, i: usize, j: usize) -> Result<()> {
    couplings.lattice().check_site(i)?;
    couplings.lattice().check_site(j)?;
    if i == j {
        return Err(Error::InvalidParameter {
            name: "pair",
            reason: format!("sites must differ (both {i})"),
        });
    }
    Ok(())
}

/// Exact series and correlation fields on a time grid; every stderr is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutput {
    pub series: ObservableSeries,
    pub fields: Vec<CorrelationField>,
}

pub fn ising_observables(
    couplings: &Couplings,
    times: &[f64],
    request: &ObservableRequest,
) -> Result<OracleOutput> {
    couplings.require(Model::Ising)?;
    validate_times(times)?;
    request.validate(couplings.lattice())?;
    let mut series = ObservableSeries::new(times.to_vec());
    if request.collective_x {
        let values = times
            .iter()
            .map(|&t| ising_collective_x(couplings, t).map(Estimate::exact))
            .collect::<Result<_>>()?;
        series.push(COLLECTIVE_X, values);
    }
    let mut fields = Vec::new();
    for corr in &request.correlations {
        let sites = corr.probe_sites(couplings.lattice())?;
        for &component in &corr.components {
            let mut values = Array2::zeros((times.len(), sites.len()));
            for (k, &t) in times.iter().enumerate() {
                for (j, &site) in sites.iter().enumerate() {
                    values[[k, j]] =
                        ising_connected(couplings, corr.reference, site, t, component)?;
                }
            }
            fields.push(CorrelationField {
                component,
                reference: corr.reference,
                axis: corr.axis,
                sites: sites.clone(),
                times: times.to_vec(),
                stderr: Array2::zeros(values.dim()),
                values,
                replicates: Vec::new(),
            });
        }
    }
    Ok(OracleOutput { series, fields })
}
