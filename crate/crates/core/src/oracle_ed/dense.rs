//! Dense matrices from Kronecker products of Pauli matrices, for checking the
//! matrix-free propagator on very small systems.
//!
//! Site `M-1` is the leftmost (most significant) factor so the matrix index
//! coincides with the bit layout of [`StateVector`](super::StateVector).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{Couplings, Model};

/// Largest spin count accepted here.
pub const MAX_DENSE_SPINS: usize = 8;

type CMatrix = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Pauli matrix in the `(down, up)` basis; `axis` is 0, 1 or 2.
pub fn pauli(axis: usize) -> CMatrix {
    let z = c(0.0, 0.0);
    match axis {
        0 => CMatrix::from_row_slice(2, 2, &[z, c(1.0, 0.0), c(1.0, 0.0), z]),
        1 => CMatrix::from_row_slice(2, 2, &[z, c(0.0, 1.0), c(0.0, -1.0), z]),
        _ => CMatrix::from_row_slice(2, 2, &[c(-1.0, 0.0), z, z, c(1.0, 0.0)]),
    }
}

/// `sigma^axis` acting on `site` of `sites` spins.
pub fn site_operator(sites: usize, site: usize, axis: usize) -> CMatrix {
    (0..sites).rev().fold(CMatrix::identity(1, 1), |acc, n| {
        let factor = if n == site {
            pauli(axis)
        } else {
            CMatrix::identity(2, 2)
        };
        acc.kronecker(&factor)
    })
}

pub fn dense_hamiltonian(couplings: &Couplings) -> Result<CMatrix> {
    let m = couplings.len();
    if m > MAX_DENSE_SPINS {
        return Err(Error::TooManySpins {
            sites: m,
            cap: MAX_DENSE_SPINS,
        });
    }
    let axes: &[usize] = match couplings.model() {
        Model::Ising => &[2],
        Model::Xy => &[0, 1],
    };
    let ops: Vec<Vec<CMatrix>> = axes
        .iter()
        .map(|&a| (0..m).map(|n| site_operator(m, n, a)).collect())
        .collect();
    let mut h = CMatrix::zeros(1 << m, 1 << m);
    for i in 0..m {
        for j in (i + 1)..m {
            let v = couplings.get(i, j);
            for per_axis in &ops {
                h += (&per_axis[i] * &per_axis[j]) * c(v, 0.0);
            }
        }
    }
    Ok(h)
}

/// `exp(-i H t) psi` by full diagonalization.
pub fn dense_evolve(h: &CMatrix, psi: &[Complex64], t: f64) -> Vec<Complex64> {
    let eig = h.clone().symmetric_eigen();
    let u = &eig.eigenvectors;
    let phases =
        CMatrix::from_diagonal(&eig.eigenvalues.map(|e| Complex64::from_polar(1.0, -e * t)));
    let propagator = u * phases * u.adjoint();
    let v = nalgebra::DVector::from_column_slice(psi);
    (propagator * v).iter().copied().collect()
}
