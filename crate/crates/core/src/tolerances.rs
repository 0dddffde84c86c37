//! Numerical tolerances shared by every module.
//!
//! Defaults are used by the plain constructors (`DensityMatrix::new`,
//! `herm_eig`, ...); the `*_with` variants accept an explicit record so the
//! CLI can override them.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Max entrywise |M - M^dag| accepted as Hermitian.
    pub herm: f64,
    /// Per-dimension Frobenius reconstruction tolerance (scaled by n).
    pub recon: f64,
    /// Eigenvalues at or below this make a state non-faithful.
    pub faithful: f64,
    /// |Tr rho - 1| accepted for a density matrix.
    pub trace: f64,
    /// Most negative eigenvalue accepted as positive semidefinite.
    pub psd: f64,
    /// Fubini-Study radius inside which two pure states are the same atom.
    pub matching: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            herm: 1e-10,
            recon: 1e-10,
            faithful: 1e-12,
            trace: 1e-10,
            psd: 1e-12,
            matching: 1e-10,
        }
    }
}
