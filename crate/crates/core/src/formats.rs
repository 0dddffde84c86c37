//! JSON and CSV file formats.
//!
//! Complex numbers are `[re, im]` pairs and matrices are lists of rows.
//! CSV floats use 15 significant digits in scientific notation.

use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::commonbasis::CommonBasis;
use crate::dynamics::LindbladModel;
use crate::ensembles::DiscreteEnsemble;
use crate::error::{Error, Result};
use crate::experiments::HaarRow;
use crate::ldp::RatePoint;
use crate::matcore::{ComplexMatrix, ComplexVector, C64};
use crate::states::{DensityMatrix, PureState};
use crate::tolerances::Tolerances;

pub type ComplexJson = [f64; 2];
pub type MatrixJson = Vec<Vec<ComplexJson>>;

fn complex_to_json(z: C64) -> ComplexJson {
    [z.re, z.im]
}

pub fn vector_to_json(v: &ComplexVector) -> Vec<ComplexJson> {
    v.iter().copied().map(complex_to_json).collect()
}

pub fn vector_from_json(v: &[ComplexJson]) -> ComplexVector {
    ComplexVector::from_iterator(v.len(), v.iter().map(|[re, im]| C64::new(*re, *im)))
}

pub fn matrix_to_json(m: &ComplexMatrix) -> MatrixJson {
    m.row_iter()
        .map(|row| row.iter().copied().map(complex_to_json).collect())
        .collect()
}

pub fn matrix_from_json(rows: &MatrixJson) -> Result<ComplexMatrix> {
    let n = rows.len();
    let cols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
        return Err(Error::Format(format!("ragged matrix: rows of length {cols} and {}", bad.len())));
    }
    Ok(ComplexMatrix::from_fn(n, cols, |i, j| {
        let [re, im] = rows[i][j];
        C64::new(re, im)
    }))
}

fn check_declared_dim(declared: usize, found: usize) -> Result<()> {
    if declared != found {
        return Err(Error::Format(format!("declared dim {declared} but matrix has {found} rows")));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityJson {
    pub dim: usize,
    pub matrix: MatrixJson,
}

impl DensityJson {
    pub fn from_state(rho: &DensityMatrix) -> Self {
        DensityJson {
            dim: rho.dim(),
            matrix: matrix_to_json(rho.matrix()),
        }
    }

    pub fn to_state(&self, tol: &Tolerances) -> Result<DensityMatrix> {
        check_declared_dim(self.dim, self.matrix.len())?;
        DensityMatrix::with_tolerances(matrix_from_json(&self.matrix)?, tol)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelJson {
    pub dim: usize,
    pub hamiltonian: MatrixJson,
    #[serde(default)]
    pub jumps: Vec<MatrixJson>,
    #[serde(default)]
    pub rates: Vec<f64>,
}

impl ModelJson {
    pub fn from_model(model: &LindbladModel) -> Self {
        ModelJson {
            dim: model.dim(),
            hamiltonian: matrix_to_json(model.hamiltonian()),
            jumps: model.jumps().iter().map(matrix_to_json).collect(),
            rates: model.rates().to_vec(),
        }
    }

    pub fn to_model(&self) -> Result<LindbladModel> {
        check_declared_dim(self.dim, self.hamiltonian.len())?;
        let jumps = self.jumps.iter().map(matrix_from_json).collect::<Result<_>>()?;
        LindbladModel::new(matrix_from_json(&self.hamiltonian)?, jumps, self.rates.clone())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleJson {
    pub dim: usize,
    pub atoms: Vec<Vec<ComplexJson>>,
    pub weights: Vec<f64>,
}

impl EnsembleJson {
    pub fn from_ensemble(mu: &DiscreteEnsemble) -> Self {
        EnsembleJson {
            dim: mu.dim(),
            atoms: mu.atoms().iter().map(|a| vector_to_json(a.amplitudes())).collect(),
            weights: mu.weights().to_vec(),
        }
    }

    pub fn to_ensemble(&self) -> Result<DiscreteEnsemble> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                check_declared_dim(self.dim, a.len())?;
                PureState::new(vector_from_json(a))
            })
            .collect::<Result<_>>()?;
        DiscreteEnsemble::new(atoms, self.weights.clone())
    }
}

/// Large-deviation experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LdpConfigJson {
    pub rho: DensityJson,
    pub sigma: DensityJson,
    pub epsilon: f64,
    pub sample_sizes: Vec<u64>,
    /// Alternative realization of `sigma` to sample from; defaults to the common-basis measure.
    #[serde(default)]
    pub reference: Option<EnsembleJson>,
    /// Monte Carlo trials per sample size; `None` skips the Monte Carlo column.
    #[serde(default)]
    pub mc_trials: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommonBasisJson {
    pub dim: usize,
    pub basis: Vec<Vec<ComplexJson>>,
    pub dual: Vec<Vec<ComplexJson>>,
    pub rho_coeffs: Vec<f64>,
    pub sigma_coeffs: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub lambdas: Vec<Option<f64>>,
    pub gram_condition_number: f64,
}

impl CommonBasisJson {
    pub fn from_basis(cb: &CommonBasis) -> Self {
        CommonBasisJson {
            dim: cb.dim(),
            basis: cb.basis().iter().map(|b| vector_to_json(b.amplitudes())).collect(),
            dual: cb.dual().iter().map(vector_to_json).collect(),
            rho_coeffs: cb.rho_coeffs().to_vec(),
            sigma_coeffs: cb.sigma_coeffs().to_vec(),
            eigenvalues: cb.eigenvalues().to_vec(),
            lambdas: cb.lambdas(),
            gram_condition_number: cb.gram_condition_number(),
        }
    }

    pub fn to_basis(&self) -> Result<CommonBasis> {
        let basis = self
            .basis
            .iter()
            .map(|b| PureState::new(vector_from_json(b)))
            .collect::<Result<_>>()?;
        let dual = self.dual.iter().map(|d| vector_from_json(d)).collect();
        CommonBasis::from_parts(
            basis,
            dual,
            self.rho_coeffs.clone(),
            self.sigma_coeffs.clone(),
            self.eigenvalues.clone(),
        )
    }
}

pub fn from_json_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    from_json_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn read_density(path: &Path, tol: &Tolerances) -> Result<DensityMatrix> {
    read_json::<DensityJson>(path)?.to_state(tol)
}

pub fn read_model(path: &Path) -> Result<LindbladModel> {
    read_json::<ModelJson>(path)?.to_model()
}

/// `x` with 15 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.14e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn haar_csv(rows: &[HaarRow]) -> String {
    let mut out = String::from("idx,d_u,d_bs,d_unr,abs_bs_unr_gap\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.idx,
            fmt_float(r.d_u),
            fmt_float(r.d_bs),
            fmt_float(r.d_unr),
            fmt_float(r.abs_bs_unr_gap)
        );
    }
    out
}

pub fn contraction_csv(series: &[(f64, f64)]) -> String {
    let mut out = String::from("t,d_bs\n");
    for (t, d) in series {
        let _ = writeln!(out, "{},{}", fmt_float(*t), fmt_float(*d));
    }
    out
}

pub fn rate_csv(points: &[RatePoint]) -> String {
    let mut out = String::from("n,prob,rate,tolerance_budget\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.n,
            fmt_float(p.prob),
            fmt_float(p.rate),
            fmt_float(p.tolerance_budget)
        );
    }
    out
}
