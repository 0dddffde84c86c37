//! Common (generally non-orthogonal) basis of two faithful states.
//!
//! For faithful `ρ, σ` we decompose the Hermitian matrix
//! `ρ^{-1/2} σ ρ^{-1/2} = Σ κ_i |y_i⟩⟨y_i|` and set `u_i = ρ^{-1/2} y_i`.
//! The `u_i` are eigenvectors of `ρ^{-1}σ` with eigenvalue `κ_i`, and they
//! are automatically ρ-orthogonal (`⟨u_i|ρ|u_j⟩ = ⟨y_i|y_j⟩ = δ_ij`), also
//! inside degenerate eigenspaces. From them:
//!
//! ```text
//! ψ_i  = ρ u_i / ‖ρ u_i‖
//! ρ_i  = ‖ρ u_i‖² / ⟨u_i|ρ|u_i⟩
//! σ_i  = ρ_i ⟨u_i|σ|u_i⟩ / ⟨u_i|ρ|u_i⟩
//! ψ_i^⊥ = u_i / ⟨ψ_i|u_i⟩
//! ```
//!
//! so that `ρ = Σ ρ_i |ψ_i⟩⟨ψ_i|`, `σ = Σ σ_i |ψ_i⟩⟨ψ_i|` and
//! `⟨ψ_i|ψ_j^⊥⟩ = δ_ij`.
//!
//! Numerically, everything is evaluated in the eigenbases `ρ = W P W†`,
//! `σ = V Λ V†`. The decomposition comes from the SVD of
//! `B = Λ^{1/2} V†W P^{-1/2}`, since `B†B = W†(ρ^{-1/2}σρ^{-1/2})W`; this
//! resolves small `κ_i` to full relative precision. With `y_i` normalized,
//! `⟨u_i|ρ|u_i⟩ = 1` and `⟨u_i|σ|u_i⟩ = κ_i`, so `ρ_i = Σ_k p_k |⟨w_k|y_i⟩|²`
//! and `σ_i = κ_i ρ_i` are sums of nonnegative terms.

use crate::ensembles::DiscreteEnsemble;
use crate::error::{check_dims, Result};
use crate::matcore::{condition_number, gram_eig, herm_inv, herm_inv_sqrt, ComplexMatrix, ComplexVector};
use crate::states::{fubini_study, DensityMatrix, PureState};

/// Weights below this are clamped when forming the coefficient measures.
pub const WEIGHT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct CommonBasis {
    basis: Vec<PureState>,
    dual: Vec<ComplexVector>,
    rho_coeffs: Vec<f64>,
    sigma_coeffs: Vec<f64>,
    eigenvalues: Vec<f64>,
}

impl CommonBasis {
    /// Assembles a basis from raw parts; used by deserializers and tests.
    pub fn from_parts(
        basis: Vec<PureState>,
        dual: Vec<ComplexVector>,
        rho_coeffs: Vec<f64>,
        sigma_coeffs: Vec<f64>,
        eigenvalues: Vec<f64>,
    ) -> Result<Self> {
        let n = basis.len();
        for len in [dual.len(), rho_coeffs.len(), sigma_coeffs.len(), eigenvalues.len()] {
            check_dims(n, len)?;
        }
        for b in &basis {
            check_dims(n, b.dim())?;
        }
        Ok(CommonBasis {
            basis,
            dual,
            rho_coeffs,
            sigma_coeffs,
            eigenvalues,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[PureState] {
        &self.basis
    }

    /// Unnormalized dual vectors with `⟨ψ_i|ψ_j^⊥⟩ = δ_ij`.
    pub fn dual(&self) -> &[ComplexVector] {
        &self.dual
    }

    pub fn rho_coeffs(&self) -> &[f64] {
        &self.rho_coeffs
    }

    pub fn sigma_coeffs(&self) -> &[f64] {
        &self.sigma_coeffs
    }

    /// Spectrum `κ_i` of `ρ^{-1/2} σ ρ^{-1/2}`, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Roots `λ_i = 1/(1-κ_i)` of `det(ρ + λ(σ-ρ)) = 0`; `None` where `κ_i = 1`.
    pub fn lambdas(&self) -> Vec<Option<f64>> {
        self.eigenvalues
            .iter()
            .map(|k| {
                let d = 1.0 - k;
                (d.abs() > 1e-14).then(|| 1.0 / d)
            })
            .collect()
    }

    /// Gram matrix `G_ij = ⟨ψ_i|ψ_j⟩`.
    pub fn gram(&self) -> ComplexMatrix {
        let n = self.dim();
        ComplexMatrix::from_fn(n, n, |i, j| self.basis[i].inner(&self.basis[j]))
    }

    pub fn gram_condition_number(&self) -> f64 {
        condition_number(&self.gram())
    }

    /// Max over i,j of `|⟨ψ_i|ψ_j^⊥⟩ - δ_ij|`.
    pub fn biorthogonality_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let v = self.basis[i].amplitudes().dotc(&self.dual[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - target).norm());
            }
        }
        worst
    }

    /// `Σ c_i |ψ_i⟩⟨ψ_i|`.
    pub fn expand(&self, coeffs: &[f64]) -> ComplexMatrix {
        let n = self.dim();
        let mut m = ComplexMatrix::zeros(n, n);
        for (psi, &c) in self.basis.iter().zip(coeffs) {
            m += psi.projector().scale(c);
        }
        m
    }

    pub fn rho_reconstruction(&self) -> ComplexMatrix {
        self.expand(&self.rho_coeffs)
    }

    pub fn sigma_reconstruction(&self) -> ComplexMatrix {
        self.expand(&self.sigma_coeffs)
    }
}

/// Builds the common basis of two faithful states.
pub fn common_basis(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<CommonBasis> {
    check_dims(rho.dim(), sigma.dim())?;
    rho.require_faithful("rho")?;
    sigma.require_faithful("sigma")?;
    let n = rho.dim();
    let (p, w) = (rho.eigenvalues(), &rho.spectrum().eigenvectors);
    let (lam, v) = (sigma.eigenvalues(), &sigma.spectrum().eigenvectors);
    // B = Λ^{1/2} V†W P^{-1/2}, so B†B is ρ^{-1/2}σρ^{-1/2} in ρ's eigenbasis.
    let mut b = v.adjoint() * w;
    for (i, l) in lam.iter().enumerate() {
        b.row_mut(i).scale_mut(l.sqrt());
    }
    for (j, pj) in p.iter().enumerate() {
        b.column_mut(j).scale_mut(pj.sqrt().recip());
    }
    let eig = gram_eig(&b)?;

    let mut basis = Vec::with_capacity(n);
    let mut dual = Vec::with_capacity(n);
    let mut rho_coeffs = Vec::with_capacity(n);
    let mut sigma_coeffs = Vec::with_capacity(n);
    for (i, &kappa) in eig.eigenvalues.iter().enumerate() {
        let y = eig.eigenvectors.column(i);
        let rho_i: f64 = p.iter().zip(y.iter()).map(|(pk, yk)| pk * yk.norm_sqr()).sum();
        let rho_u = w * ComplexVector::from_fn(n, |k, _| y[k] * p[k].sqrt());
        let u = w * ComplexVector::from_fn(n, |k, _| y[k] / p[k].sqrt());
        rho_coeffs.push(rho_i);
        sigma_coeffs.push(kappa * rho_i);
        dual.push(u.scale(rho_i.sqrt()));
        basis.push(PureState::normalize(rho_u)?);
    }
    Ok(CommonBasis {
        basis,
        dual,
        rho_coeffs,
        sigma_coeffs,
        eigenvalues: eig.eigenvalues,
    })
}

/// Frobenius error of `ρ^{-1} = Σ (1/ρ_i) |ψ_i^⊥⟩⟨ψ_i^⊥|`.
pub fn dual_consistency(cb: &CommonBasis, rho: &DensityMatrix) -> Result<f64> {
    check_dims(cb.dim(), rho.dim())?;
    let inv = herm_inv(rho.matrix())?;
    let n = cb.dim();
    let mut sum = ComplexMatrix::zeros(n, n);
    for (d, &w) in cb.dual.iter().zip(&cb.rho_coeffs) {
        sum += (d * d.adjoint()).scale(1.0 / w);
    }
    Ok((inv - sum).norm())
}

/// `(μ_CB, ν_CB)`: phase-canonical basis atoms weighted by `ρ_i` and `σ_i`.
pub fn cb_measures(cb: &CommonBasis) -> Result<(DiscreteEnsemble, DiscreteEnsemble)> {
    let atoms: Vec<PureState> = cb.basis.iter().map(PureState::canonical).collect();
    let mu = DiscreteEnsemble::new(atoms.clone(), floor_weights(&cb.rho_coeffs))?;
    let nu = DiscreteEnsemble::new(atoms, floor_weights(&cb.sigma_coeffs))?;
    Ok((mu, nu))
}

fn floor_weights(w: &[f64]) -> Vec<f64> {
    let clamped: Vec<f64> = w.iter().map(|&x| x.max(WEIGHT_FLOOR)).collect();
    let total: f64 = clamped.iter().sum();
    clamped.iter().map(|x| x / total).collect()
}

/// Permutation `π` with `d_FS(a.ψ_i, b.ψ_{π(i)}) ≤ 1e-8` for every `i`, if one exists.
///
/// Greedy: pairs are taken in order of increasing distance.
pub fn basis_match(a: &CommonBasis, b: &CommonBasis) -> Option<Vec<usize>> {
    const TOL: f64 = 1e-8;
    if a.dim() != b.dim() {
        return None;
    }
    let n = a.dim();
    let mut pairs = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let d = fubini_study(&a.basis[i], &b.basis[j]).ok()?;
            if d <= TOL {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut perm = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for (_, i, j) in pairs {
        if perm[i] == usize::MAX && !used[j] {
            perm[i] = j;
            used[j] = true;
        }
    }
    perm.iter().all(|&p| p != usize::MAX).then_some(perm)
}

/// Smallest gap between consecutive `κ_i`.
pub fn spectral_gap(cb: &CommonBasis) -> f64 {
    cb.eigenvalues
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

/// `ρ^{-1/2}` helper re-exported for diagnostics.
pub fn inverse_sqrt(rho: &DensityMatrix) -> Result<ComplexMatrix> {
    herm_inv_sqrt(rho.matrix())
}
