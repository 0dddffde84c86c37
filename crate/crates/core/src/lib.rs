//! Quantum relative entropies computed through common-basis unravelings.
//!
//! Two faithful density matrices `ρ, σ` can always be written as convex
//! combinations of the same (generally non-orthogonal) family of pure
//! states. The classical KL divergence between the two coefficient vectors
//! equals the Belavkin-Staszewski relative entropy `Tr[ρ log(√ρ σ⁻¹ √ρ)]`.
//! This crate computes that basis, the related entropies and f-divergences,
//! Lindblad and stochastic Schrödinger dynamics, and exact large-deviation
//! probabilities for empirical measures on the basis.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod commonbasis;
pub mod dynamics;
pub mod ensembles;
pub mod entropy;
pub mod error;
pub mod experiments;
pub mod formats;
pub mod ldp;
pub mod matcore;
pub mod states;
pub mod tolerances;

pub use commonbasis::{basis_match, cb_measures, common_basis, dual_consistency, CommonBasis};
pub use ensembles::{kl_divergence, realize, DiscreteEnsemble};
pub use entropy::{bs_entropy, max_f_divergence, umegaki, unr_entropy, DivergenceGenerator, KrausMap};
pub use error::{Error, Result};
pub use matcore::{ComplexMatrix, ComplexVector, C64};
pub use states::{fubini_study, trace_distance, DensityMatrix, PureState, RngStream};
pub use tolerances::Tolerances;
