//! Random-pair experiment comparing the three relative entropies.

use rayon::prelude::*;
use serde::Serialize;

use crate::entropy::{bs_entropy, umegaki, unr_entropy};
use crate::error::{Error, Result};
use crate::states::{sample_faithful, DensityMatrix, RngStream};

/// Gap above which `D_U < D_BS` counts as strict.
pub const STRICT_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HaarRow {
    pub idx: usize,
    pub d_u: f64,
    pub d_bs: f64,
    pub d_unr: f64,
    pub abs_bs_unr_gap: f64,
}

impl HaarRow {
    /// `|D_BS − D_UNR| / max(1, D_BS)`.
    pub fn relative_gap(&self) -> f64 {
        self.abs_bs_unr_gap / self.d_bs.max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HaarSummary {
    pub dim: usize,
    pub samples: usize,
    pub seed: u64,
    pub max_gap: f64,
    pub max_relative_gap: f64,
    /// Fraction of pairs with `D_U < D_BS`.
    pub fraction_u_below_bs: f64,
    /// Fraction of pairs with `D_BS − D_U > 1e-6`.
    pub fraction_strict: f64,
    /// Pairs with `D_U > D_BS + 1e-9`.
    pub ordering_violations: usize,
}

/// Pair `i` of an experiment: two Hilbert-Schmidt random faithful states from `rng.child(i)`.
pub fn random_pair(dim: usize, rng: &RngStream, idx: usize) -> (DensityMatrix, DensityMatrix) {
    let mut stream = rng.child(idx as u64);
    let rho = sample_faithful(dim, &mut stream);
    let sigma = sample_faithful(dim, &mut stream);
    (rho, sigma)
}

/// Evaluates all three entropies on `samples` random pairs.
pub fn haar_experiment(dim: usize, samples: usize, rng: &RngStream) -> Result<Vec<HaarRow>> {
    if dim < 2 {
        return Err(Error::InvalidArgument(format!("dim = {dim} must be at least 2")));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    (0..samples)
        .into_par_iter()
        .map(|idx| {
            let (rho, sigma) = random_pair(dim, rng, idx);
            let d_u = umegaki(&rho, &sigma)?;
            let d_bs = bs_entropy(&rho, &sigma)?;
            let d_unr = unr_entropy(&rho, &sigma)?;
            Ok(HaarRow {
                idx,
                d_u,
                d_bs,
                d_unr,
                abs_bs_unr_gap: (d_bs - d_unr).abs(),
            })
        })
        .collect()
}

pub fn summarize(dim: usize, seed: u64, rows: &[HaarRow]) -> HaarSummary {
    let n = rows.len().max(1) as f64;
    HaarSummary {
        dim,
        samples: rows.len(),
        seed,
        max_gap: rows.iter().map(|r| r.abs_bs_unr_gap).fold(0.0, f64::max),
        max_relative_gap: rows.iter().map(HaarRow::relative_gap).fold(0.0, f64::max),
        fraction_u_below_bs: rows.iter().filter(|r| r.d_u < r.d_bs).count() as f64 / n,
        fraction_strict: rows.iter().filter(|r| r.d_bs - r.d_u > STRICT_GAP).count() as f64 / n,
        ordering_violations: rows.iter().filter(|r| r.d_u > r.d_bs + 1e-9).count(),
    }
}
