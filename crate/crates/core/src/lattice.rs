//! Rectangular lattices with open boundaries and power-law couplings.
//!
//! Sites carry 1-based integer coordinates `(n_x, n_y)` with
//! `1 <= n_x <= nx` and `1 <= n_y <= ny`, at unit lattice spacing. Site
//! indices are row-major and 0-based: `index = (n_y - 1) * nx + (n_x - 1)`.
//! This ordering is part of the output format and does not change.

use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interaction type of the quench Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// `sum_{i<j} J_ij sz_i sz_j`
    Ising,
    /// `sum_{i<j} J_ij (sx_i sx_j + sy_i sy_j)`
    Xy,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::Ising => f.write_str("ising"),
            Model::Xy => f.write_str("xy"),
        }
    }
}

/// Lattice direction along which correlations are probed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

/// An `nx` by `ny` grid with open boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    nx: usize,
    ny: usize,
}

impl Lattice {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        let sites = nx.saturating_mul(ny);
        if nx == 0 || ny == 0 || sites < 2 {
            return Err(Error::TooFewSites { nx, ny, sites });
        }
        Ok(Lattice { nx, ny })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Number of sites `M`.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// 1 for chains (`nx == 1` or `ny == 1`), 2 otherwise.
    pub fn dimension(&self) -> usize {
        if self.nx == 1 || self.ny == 1 {
            1
        } else {
            2
        }
    }

    /// Index of the site at 1-based coordinates, if inside the lattice.
    pub fn site(&self, x: usize, y: usize) -> Option<usize> {
        if (1..=self.nx).contains(&x) && (1..=self.ny).contains(&y) {
            Some((y - 1) * self.nx + (x - 1))
        } else {
            None
        }
    }

    /// 1-based coordinates of a site index.
    pub fn position(&self, index: usize) -> (usize, usize) {
        debug_assert!(index < self.len());
        (index % self.nx + 1, index / self.nx + 1)
    }

    pub fn check_site(&self, index: usize) -> Result<()> {
        if index < self.len() {
            Ok(())
        } else {
            Err(Error::InvalidSite {
                index,
                sites: self.len(),
            })
        }
    }

    /// Euclidean distance between two sites in lattice units.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (xi, yi) = self.position(i);
        let (xj, yj) = self.position(j);
        let dx = xi as f64 - xj as f64;
        let dy = yi as f64 - yj as f64;
        dx.hypot(dy)
    }

    /// The central site, `(ceil(nx/2), ceil(ny/2))`; `(16, 16)` on a 31x31 grid.
    pub fn center(&self) -> usize {
        self.site(self.nx.div_ceil(2), self.ny.div_ceil(2))
            .expect("center lies inside the lattice")
    }

    /// Sites at separations `j = 1, 2, ...` from `reference` along `+axis`,
    /// stopping at the boundary or after `j_max` sites.
    pub fn ray(&self, reference: usize, axis: Axis, j_max: Option<usize>) -> Vec<usize> {
        let (x0, y0) = self.position(reference);
        let limit = j_max.unwrap_or(usize::MAX);
        (1..)
            .map_while(|j| match axis {
                Axis::X => self.site(x0 + j, y0),
                Axis::Y => self.site(x0, y0 + j),
            })
            .take(limit)
            .collect()
    }

    /// Image of a site under the reflection `n_x -> nx + 1 - n_x`.
    pub fn reflect_x(&self, index: usize) -> usize {
        let (x, y) = self.position(index);
        self.site(self.nx + 1 - x, y)
            .expect("reflection stays inside")
    }
}

impl fmt::Display for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.nx, self.ny)
    }
}

/// Symmetric pair couplings `J_ij = J / |r_i - r_j|^alpha` with `J_ii = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Couplings {
    lattice: Lattice,
    model: Model,
    strength: f64,
    alpha: f64,
    values: Array2<f64>,
}

impl Couplings {
    /// Power-law couplings over every pair of sites, without any cutoff.
    pub fn power_law(lattice: Lattice, model: Model, strength: f64, alpha: f64) -> Result<Self> {
        if !strength.is_finite() {
            return Err(Error::InvalidParameter {
                name: "J",
                reason: format!("{strength} is not finite"),
            });
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("{alpha} must be finite and >= 0"),
            });
        }
        let m = lattice.len();
        let mut values = Array2::zeros((m, m));
        for i in 0..m {
            for j in (i + 1)..m {
                let r = lattice.distance(i, j);
                let v = strength / r.powf(alpha);
                values[[i, j]] = v;
                values[[j, i]] = v;
            }
        }
        Ok(Couplings {
            lattice,
            model,
            strength,
            alpha,
            values,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn model(&self) -> Model {
        self.model
    }

    /// The energy scale `J`.
    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn with_model(&self, model: Model) -> Self {
        Couplings {
            model,
            ..self.clone()
        }
    }

    pub fn require(&self, model: Model) -> Result<()> {
        if self.model == model {
            Ok(())
        } else {
            Err(Error::ModelMismatch {
                expected: model,
                found: self.model,
            })
        }
    }

    /// Constant all-to-all coupling giving `center` the same total
    /// interaction energy: `sum_{k != center} J_{center,k} / (M - 1)`.
    pub fn effective_coupling(&self, center: usize) -> Result<f64> {
        self.lattice.check_site(center)?;
        let total: f64 = self.values.row(center).iter().sum();
        Ok(total / (self.len() - 1) as f64)
    }

    /// `M` lines of `M` comma-separated couplings.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * self.len() * 8);
        for row in self.values.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}
