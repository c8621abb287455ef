//! Light-cone analysis: connected correlations, threshold contours and
//! power-law fits `tau_j = c * j^eta`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Axis;
use crate::observables::{Component, Estimate};

/// Default correlation threshold for light-cone contours.
pub const DEFAULT_THRESHOLD: f64 = 0.05;

/// Threshold set used for contour sensitivity studies.
pub const SENSITIVITY_THRESHOLDS: [f64; 5] = [0.01, 0.02, 0.03, 0.04, 0.05];

/// Smallest separation used in the fit: the whole range on chains, `j >= 2`
/// on square lattices where short distances deviate from the power law.
pub fn default_fit_start(dimension: usize) -> usize {
    if dimension >= 2 {
        2
    } else {
        1
    }
}

/// Connected correlation `C(t, j)` from a reference site along one axis.
///
/// Column `k` holds separation `j = k + 1`. `replicates` carries bootstrap
/// resamples of the whole field when the producer supports them.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationField {
    pub component: Component,
    pub reference: usize,
    pub axis: Axis,
    pub sites: Vec<usize>,
    pub times: Vec<f64>,
    pub values: Array2<f64>,
    pub stderr: Array2<f64>,
    pub replicates: Vec<Array2<f64>>,
}

impl CorrelationField {
    pub fn j_max(&self) -> usize {
        self.sites.len()
    }

    pub fn at(&self, time_index: usize, j: usize) -> Estimate {
        Estimate {
            mean: self.values[[time_index, j - 1]],
            stderr: self.stderr[[time_index, j - 1]],
        }
    }

    /// Same field with values replaced by bootstrap replicate `r`.
    pub fn replicate(&self, r: usize) -> CorrelationField {
        CorrelationField {
            values: self.replicates[r].clone(),
            stderr: Array2::zeros(self.stderr.dim()),
            replicates: Vec::new(),
            ..self.clone()
        }
    }

    /// Rows `time,observable,mean,stderr` with ids `C_<comp>_j<j>`.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for j in 1..=self.j_max() {
            for (k, t) in self.times.iter().enumerate() {
                let e = self.at(k, j);
                out.push_str(&format!(
                    "{t},C_{}_j{j},{:e},{:e}\n",
                    self.component, e.mean, e.stderr
                ));
            }
        }
        out
    }
}

/// `<A B> - <A><B>` with the standard error propagated in quadrature.
pub fn connected(pair: Estimate, a: Estimate, b: Estimate) -> Estimate {
    let mean = pair.mean - a.mean * b.mean;
    let stderr =
        (pair.stderr.powi(2) + (b.mean * a.stderr).powi(2) + (a.mean * b.stderr).powi(2)).sqrt();
    Estimate { mean, stderr }
}

/// First-passage times of `C(t, j)` through a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub threshold: f64,
    /// `taus[k]` belongs to separation `j = k + 1`; `None` = never crossed.
    pub taus: Vec<Option<f64>>,
}

impl Contour {
    pub fn crossed(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.taus
            .iter()
            .enumerate()
            .filter_map(|(k, tau)| tau.map(|t| (k + 1, t)))
    }

    pub fn is_empty(&self) -> bool {
        self.taus.iter().all(Option::is_none)
    }

    /// Rows `j,tau,status`; absent separations have an empty tau.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,tau,status\n");
        for (k, tau) in self.taus.iter().enumerate() {
            match tau {
                Some(t) => out.push_str(&format!("{},{t},crossed\n", k + 1)),
                None => out.push_str(&format!("{},,absent\n", k + 1)),
            }
        }
        out
    }
}

/// Earliest time each separation reaches `threshold`, linearly
/// interpolated between samples. Later dips below the threshold are ignored.
pub fn extract_contour(field: &CorrelationField, threshold: f64) -> Result<Contour> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::InvalidParameter {
            name: "threshold",
            reason: format!("{threshold} must be positive"),
        });
    }
    let times = &field.times;
    let taus = field
        .values
        .columns()
        .into_iter()
        .map(|column| {
            let first = column.iter().position(|&c| c >= threshold)?;
            if first == 0 {
                return Some(times[0]);
            }
            let (c0, c1) = (column[first - 1], column[first]);
            let (t0, t1) = (times[first - 1], times[first]);
            Some(t0 + (threshold - c0) / (c1 - c0) * (t1 - t0))
        })
        .collect();
    Ok(Contour { threshold, taus })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub eta: f64,
    /// Natural log of the prefactor `c`.
    pub log_prefactor: f64,
    /// Bootstrap standard deviation of `eta`, when replicates exist.
    pub eta_stderr: Option<f64>,
    pub j_min: usize,
    pub j_max: usize,
    pub points: usize,
    /// Root-mean-square residual in `ln tau`.
    pub residual: f64,
}

impl PowerLawFit {
    pub fn predict(&self, j: f64) -> f64 {
        (self.log_prefactor + self.eta * j.ln()).exp()
    }
}

/// Least-squares line through `(ln j, ln tau_j)` for crossed `j >= j_min`.
pub fn fit_power_law(contour: &Contour, j_min: usize) -> Result<PowerLawFit> {
    let points: Vec<(f64, f64)> = contour
        .crossed()
        .filter(|&(j, tau)| j >= j_min && tau > 0.0)
        .map(|(j, tau)| ((j as f64).ln(), tau.ln()))
        .collect();
    if points.len() < 3 {
        return Err(Error::InsufficientPoints {
            j_min,
            found: points.len(),
        });
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let eta = sxy / sxx;
    let log_prefactor = mean_y - eta * mean_x;
    let residual = (points
        .iter()
        .map(|p| (p.1 - log_prefactor - eta * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let j_max = contour
        .crossed()
        .filter(|&(j, tau)| j >= j_min && tau > 0.0)
        .map(|(j, _)| j)
        .max()
        .unwrap_or(j_min);
    Ok(PowerLawFit {
        eta,
        log_prefactor,
        eta_stderr: None,
        j_min,
        j_max,
        points: points.len(),
        residual,
    })
}

/// Contour and fit of a field, with the bootstrap spread of `eta` over
/// the field's replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct LightCone {
    pub contour: Contour,
    pub fit: Result<PowerLawFit>,
    /// `eta` of every replicate whose fit succeeded.
    pub replicate_etas: Vec<f64>,
}

pub fn light_cone(field: &CorrelationField, threshold: f64, j_min: usize) -> Result<LightCone> {
    let contour = extract_contour(field, threshold)?;
    let mut fit = fit_power_law(&contour, j_min);
    let mut replicate_etas = Vec::with_capacity(field.replicates.len());
    for r in 0..field.replicates.len() {
        let c = extract_contour(&field.replicate(r), threshold)?;
        if let Ok(f) = fit_power_law(&c, j_min) {
            replicate_etas.push(f.eta);
        }
    }
    if let Ok(f) = fit.as_mut() {
        if replicate_etas.len() >= 2 {
            f.eta_stderr = Some(sample_std(&replicate_etas));
        }
    }
    Ok(LightCone {
        contour,
        fit,
        replicate_etas,
    })
}

fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// `Delta tau_j = tau_a(j) - tau_b(j)` evaluated on the fitted power laws,
/// at every `j >= j_min` crossed in both contours.
pub fn contour_difference(a: &Contour, b: &Contour, j_min: usize) -> Result<Vec<(usize, f64)>> {
    if a.threshold != b.threshold {
        return Err(Error::ThresholdMismatch {
            a: a.threshold,
            b: b.threshold,
        });
    }
    if a.taus.len() != b.taus.len() {
        return Err(Error::SeparationMismatch);
    }
    let fit_a = fit_power_law(a, j_min)?;
    let fit_b = fit_power_law(b, j_min)?;
    Ok(a.taus
        .iter()
        .zip(&b.taus)
        .enumerate()
        .filter(|(k, (ta, tb))| k + 1 >= j_min && ta.is_some() && tb.is_some())
        .map(|(k, _)| {
            let j = (k + 1) as f64;
            (k + 1, fit_a.predict(j) - fit_b.predict(j))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossoverRow {
    pub alpha: f64,
    pub fit: Result<PowerLawFit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crossover {
    pub rows: Vec<CrossoverRow>,
    /// Every successive `eta` is strictly larger.
    pub strictly_increasing: bool,
    /// Every successive pair is increasing or has overlapping 1-sigma bars.
    pub increasing_within_errors: bool,
}

/// Tabulates `eta(alpha)` with monotonic-trend diagnostics. Rows are
/// sorted by `alpha`; failed fits break both trend flags.
pub fn eta_crossover(mut rows: Vec<CrossoverRow>) -> Crossover {
    rows.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let mut strictly_increasing = true;
    let mut increasing_within_errors = true;
    for pair in rows.windows(2) {
        match (&pair[0].fit, &pair[1].fit) {
            (Ok(lo), Ok(hi)) => {
                if hi.eta <= lo.eta {
                    strictly_increasing = false;
                }
                let slack = lo.eta_stderr.unwrap_or(0.0) + hi.eta_stderr.unwrap_or(0.0);
                if hi.eta < lo.eta - slack {
                    increasing_within_errors = false;
                }
            }
            _ => {
                strictly_increasing = false;
                increasing_within_errors = false;
            }
        }
    }
    if rows.iter().any(|r| r.fit.is_err()) {
        strictly_increasing = false;
        increasing_within_errors = false;
    }
    Crossover {
        rows,
        strictly_increasing,
        increasing_within_errors,
    }
}
