//! Observable requests and time series shared by the DTWA engine and the
//! exact oracles.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Axis, Lattice};

/// Spin component pair of a two-point correlation `<s^b_n s^b_m>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Xx,
    Yy,
    Zz,
}

impl Component {
    /// Index of the single-spin component (0 = x, 1 = y, 2 = z).
    pub fn index(self) -> usize {
        match self {
            Component::Xx => 0,
            Component::Yy => 1,
            Component::Zz => 2,
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Component::Xx => "xx",
            Component::Yy => "yy",
            Component::Zz => "zz",
        })
    }
}

/// Connected correlations from `reference` to the sites along `+axis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRequest {
    pub reference: usize,
    pub axis: Axis,
    pub components: Vec<Component>,
    /// Largest separation; `None` runs to the lattice edge.
    pub j_max: Option<usize>,
}

impl CorrelationRequest {
    /// `C^yy` from the lattice center along `+y`.
    pub fn center_yy(lattice: &Lattice) -> Self {
        CorrelationRequest {
            reference: lattice.center(),
            axis: Axis::Y,
            components: vec![Component::Yy],
            j_max: None,
        }
    }

    /// Probe sites for `j = 1, 2, ...`; rejects empty rays and bad sites.
    pub fn probe_sites(&self, lattice: &Lattice) -> Result<Vec<usize>> {
        lattice.check_site(self.reference)?;
        let sites = lattice.ray(self.reference, self.axis, self.j_max);
        if sites.is_empty() {
            return Err(Error::InvalidParameter {
                name: "correlations",
                reason: format!(
                    "no sites along +{:?} from site {}",
                    self.axis, self.reference
                ),
            });
        }
        if self.components.is_empty() {
            return Err(Error::InvalidParameter {
                name: "correlations",
                reason: "no components requested".into(),
            });
        }
        Ok(sites)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservableRequest {
    /// Collective `S_x = sum_n <sigma^x_n>`.
    pub collective_x: bool,
    pub correlations: Vec<CorrelationRequest>,
}

impl ObservableRequest {
    pub fn validate(&self, lattice: &Lattice) -> Result<()> {
        for request in &self.correlations {
            request.probe_sites(lattice)?;
        }
        Ok(())
    }
}

pub fn validate_times(times: &[f64]) -> Result<()> {
    let ordered = times.windows(2).all(|w| w[0] < w[1]);
    if times.is_empty() || !ordered || times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidTimeGrid);
    }
    Ok(())
}

/// `count` equally spaced times from 0 to `t_max` inclusive.
pub fn uniform_times(t_max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count)
            .map(|k| t_max * k as f64 / (count - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; zero for exact values.
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(mean: f64) -> Self {
        Estimate { mean, stderr: 0.0 }
    }
}

/// Streaming count/mean/M2 accumulator with an order-fixed merge.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, value: f64) {
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        let (na, nb) = (self.count as f64, other.count as f64);
        self.mean += delta * nb / n as f64;
        self.m2 += other.m2 + delta * delta * na * nb / n as f64;
        self.count = n;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn estimate(&self) -> Estimate {
        let stderr = if self.count > 1 {
            (self.m2.max(0.0) / (self.count - 1) as f64 / self.count as f64).sqrt()
        } else {
            0.0
        };
        Estimate {
            mean: self.mean,
            stderr,
        }
    }
}

/// Named observables sampled on a common time grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub entries: Vec<(String, Vec<Estimate>)>,
}

impl ObservableSeries {
    pub fn new(times: Vec<f64>) -> Self {
        ObservableSeries {
            times,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, id: impl Into<String>, values: Vec<Estimate>) {
        debug_assert_eq!(values.len(), self.times.len());
        self.entries.push((id.into(), values));
    }

    pub fn get(&self, id: &str) -> Option<&[Estimate]> {
        self.entries
            .iter()
            .find(|(name, _)| name == id)
            .map(|(_, v)| v.as_slice())
    }

    /// Long-format rows `time,observable,mean,stderr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,observable,mean,stderr\n");
        for (id, values) in &self.entries {
            for (t, e) in self.times.iter().zip(values) {
                out.push_str(&format!("{t},{id},{:e},{:e}\n", e.mean, e.stderr));
            }
        }
        out
    }
}

/// Id of the collective x magnetization in series output.
pub const COLLECTIVE_X: &str = "S_x";
