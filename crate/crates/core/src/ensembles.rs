//! Finitely supported probability measures on pure states.
//!
//! Atoms are rays, so two ensembles are compared by matching atoms whose
//! Fubini-Study distance is below the matching tolerance. KL and
//! f-divergences return `f64::INFINITY` when absolute continuity fails.

use std::cmp::Ordering;

use crate::entropy::DivergenceGenerator;
use crate::error::{check_dims, Error, Result};
use crate::matcore::{numerical_rank, ComplexMatrix};
use crate::states::{fubini_study, trace_distance, DensityMatrix, PureState};
use crate::tolerances::Tolerances;

const WEIGHT_SUM_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct DiscreteEnsemble {
    dim: usize,
    atoms: Vec<PureState>,
    weights: Vec<f64>,
}

impl DiscreteEnsemble {
    /// Validates weights (nonnegative, summing to one) and pairwise distinct atoms.
    pub fn new(atoms: Vec<PureState>, weights: Vec<f64>) -> Result<Self> {
        let ens = Self::unchecked_atoms(atoms, weights)?;
        let tol = Tolerances::default().matching;
        for i in 0..ens.atoms.len() {
            for j in (i + 1)..ens.atoms.len() {
                let distance = fubini_study(&ens.atoms[i], &ens.atoms[j])?;
                if distance <= tol {
                    return Err(Error::DuplicateAtoms {
                        first: i,
                        second: j,
                        distance,
                    });
                }
            }
        }
        Ok(ens)
    }

    /// Like [`new`](Self::new) but coincident atoms are merged and their weights summed.
    ///
    /// Atoms are grouped by sorting their phase-canonical amplitudes, so
    /// bit-identical atoms (the common case for deterministic or
    /// replicated paths) always merge.
    pub fn merged(atoms: Vec<PureState>, weights: Vec<f64>) -> Result<Self> {
        let raw = Self::unchecked_atoms(atoms, weights)?;
        let tol = Tolerances::default().matching;
        let canon: Vec<PureState> = raw.atoms.iter().map(PureState::canonical).collect();
        let mut order: Vec<usize> = (0..canon.len()).collect();
        order.sort_by(|&a, &b| lex_cmp(&canon[a], &canon[b]));
        let mut atoms: Vec<PureState> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for &k in &order {
            let same = atoms
                .last()
                .map(|last| fubini_study(last, &canon[k]).map(|d| d <= tol))
                .transpose()?
                .unwrap_or(false);
            if same {
                *weights.last_mut().unwrap() += raw.weights[k];
            } else {
                atoms.push(canon[k].clone());
                weights.push(raw.weights[k]);
            }
        }
        Ok(DiscreteEnsemble {
            dim: raw.dim,
            atoms,
            weights,
        })
    }

    fn unchecked_atoms(atoms: Vec<PureState>, weights: Vec<f64>) -> Result<Self> {
        let dim = atoms.first().ok_or(Error::EmptyEnsemble)?.dim();
        if atoms.len() != weights.len() {
            return Err(Error::InvalidWeights(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        for a in &atoms {
            check_dims(dim, a.dim())?;
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidWeights(format!("weight {w} is not a probability")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidWeights(format!("weights sum to {total}")));
        }
        Ok(DiscreteEnsemble {
            dim,
            atoms,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[PureState] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same atoms with new weights.
    pub fn reweighted(&self, weights: Vec<f64>) -> Result<Self> {
        let mut out = Self::unchecked_atoms(self.atoms.clone(), weights)?;
        out.dim = self.dim;
        Ok(out)
    }

    /// `t·self + (1-t)·other` for ensembles listing the same atoms.
    pub fn mix(&self, other: &Self, t: f64) -> Result<Self> {
        require_same_atoms(&self.atoms, &other.atoms)?;
        let weights = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| t * a + (1.0 - t) * b)
            .collect();
        self.reweighted(weights)
    }

    /// Numerical rank of the matrix whose columns are the atoms.
    pub fn support_rank(&self) -> usize {
        let m = ComplexMatrix::from_fn(self.dim, self.atoms.len(), |i, j| self.atoms[j].amplitudes()[i]);
        numerical_rank(&m, 1e-10)
    }
}

fn lex_cmp(a: &PureState, b: &PureState) -> Ordering {
    for (x, y) in a.amplitudes().iter().zip(b.amplitudes().iter()) {
        let o = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

fn require_same_atoms(a: &[PureState], b: &[PureState]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::AtomSetMismatch(format!("{} vs {} atoms", a.len(), b.len())));
    }
    let tol = Tolerances::default().matching;
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if fubini_study(x, y)? > tol {
            return Err(Error::AtomSetMismatch(format!("atom {i} differs")));
        }
    }
    Ok(())
}

/// `Λ(μ) = Σ w_k |ψ_k⟩⟨ψ_k|`.
pub fn realize(mu: &DiscreteEnsemble) -> Result<DensityMatrix> {
    if mu.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut m = ComplexMatrix::zeros(mu.dim, mu.dim);
    for (psi, &w) in mu.atoms.iter().zip(&mu.weights) {
        m += psi.projector().scale(w);
    }
    DensityMatrix::new(m)
}

/// For every atom of `mu`, the index of the atom of `nu` within `tol`, if any.
///
/// Two candidates within `tol` is an [`Error::AmbiguousMatch`].
pub fn match_atoms(mu: &DiscreteEnsemble, nu: &DiscreteEnsemble, tol: f64) -> Result<Vec<Option<usize>>> {
    check_dims(mu.dim, nu.dim)?;
    mu.atoms
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut hit = None;
            let mut candidates = 0;
            let mut best = f64::INFINITY;
            for (j, b) in nu.atoms.iter().enumerate() {
                let d = fubini_study(a, b)?;
                if d <= tol {
                    candidates += 1;
                    if d < best {
                        best = d;
                        hit = Some(j);
                    }
                }
            }
            if candidates > 1 {
                Err(Error::AmbiguousMatch { atom: i, candidates })
            } else {
                Ok(hit)
            }
        })
        .collect()
}

/// `Σ μ_k log(μ_k/ν_k)` in nats; `+∞` when μ is not absolutely continuous w.r.t. ν.
pub fn kl_divergence(mu: &DiscreteEnsemble, nu: &DiscreteEnsemble) -> Result<f64> {
    let matching = match_atoms(mu, nu, Tolerances::default().matching)?;
    let mut total = 0.0;
    for (k, m) in matching.iter().enumerate() {
        let p = mu.weights[k];
        if p == 0.0 {
            continue;
        }
        match m {
            Some(j) if nu.weights[*j] > 0.0 => total += p * (p / nu.weights[*j]).ln(),
            _ => return Ok(f64::INFINITY),
        }
    }
    Ok(total)
}

/// `Σ ν_k f(μ_k/ν_k)` with `0·f(0/0) = 0`; `+∞` if μ charges an atom ν does not.
pub fn f_divergence(mu: &DiscreteEnsemble, nu: &DiscreteEnsemble, f: &DivergenceGenerator) -> Result<f64> {
    let matching = match_atoms(mu, nu, Tolerances::default().matching)?;
    let mut mass_on_nu = vec![0.0; nu.len()];
    for (k, m) in matching.iter().enumerate() {
        let p = mu.weights[k];
        match m {
            Some(j) => mass_on_nu[*j] += p,
            None if p > 0.0 => return Ok(f64::INFINITY),
            None => {}
        }
    }
    let mut total = 0.0;
    for (q, p) in nu.weights.iter().zip(&mass_on_nu) {
        if *q > 0.0 {
            total += q * f.eval(p / q);
        } else if *p > 0.0 {
            return Ok(f64::INFINITY);
        }
    }
    Ok(total)
}

/// Classical KL of probability vectors on a shared index set.
pub fn classical_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            if a == 0.0 {
                0.0
            } else if b == 0.0 {
                f64::INFINITY
            } else {
                a * (a / b).ln()
            }
        })
        .sum()
}

/// Deterministic coarse-graining kernel mapping each atom to a center.
#[derive(Debug, Clone)]
pub struct CoarseKernel {
    atoms: Vec<PureState>,
    centers: Vec<PureState>,
    assignment: Vec<usize>,
    radius: f64,
}

impl CoarseKernel {
    pub fn centers(&self) -> &[PureState] {
        &self.centers
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Pushes an ensemble listing the kernel's atoms forward onto the centers.
    pub fn apply(&self, ens: &DiscreteEnsemble) -> Result<DiscreteEnsemble> {
        require_same_atoms(&self.atoms, &ens.atoms)?;
        let mut weights = vec![0.0; self.centers.len()];
        for (k, &c) in self.assignment.iter().enumerate() {
            weights[c] += ens.weights[k];
        }
        DiscreteEnsemble::unchecked_atoms(self.centers.clone(), weights)
    }
}

/// Greedy Fubini-Study ball cover of the atoms of `mu`.
///
/// Atoms are visited in order; each joins the first existing center within
/// `radius`, otherwise it becomes a new center.
pub fn coarse_grain(mu: &DiscreteEnsemble, radius: f64) -> Result<(CoarseKernel, DiscreteEnsemble)> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    let mut centers: Vec<PureState> = Vec::new();
    let mut assignment = Vec::with_capacity(mu.len());
    for atom in &mu.atoms {
        let mut found = None;
        for (c, center) in centers.iter().enumerate() {
            if fubini_study(atom, center)? <= radius {
                found = Some(c);
                break;
            }
        }
        let c = found.unwrap_or_else(|| {
            centers.push(atom.clone());
            centers.len() - 1
        });
        assignment.push(c);
    }
    let kernel = CoarseKernel {
        atoms: mu.atoms.clone(),
        centers,
        assignment,
        radius,
    };
    let pushed = kernel.apply(mu)?;
    Ok((kernel, pushed))
}

/// Transport plan between two ensembles: `(index in μ, index in ν, mass)`.
#[derive(Debug, Clone, Default)]
pub struct Coupling {
    pub entries: Vec<(usize, usize, f64)>,
}

impl Coupling {
    /// `π = μ ⊗ ν`.
    pub fn product(mu: &DiscreteEnsemble, nu: &DiscreteEnsemble) -> Self {
        let mut entries = Vec::with_capacity(mu.len() * nu.len());
        for (i, a) in mu.weights.iter().enumerate() {
            for (j, b) in nu.weights.iter().enumerate() {
                entries.push((i, j, a * b));
            }
        }
        Coupling { entries }
    }

    /// Moves mass along the closest remaining pairs first.
    pub fn greedy(mu: &DiscreteEnsemble, nu: &DiscreteEnsemble) -> Result<Self> {
        check_dims(mu.dim, nu.dim)?;
        let mut pairs = Vec::with_capacity(mu.len() * nu.len());
        for (i, a) in mu.atoms.iter().enumerate() {
            for (j, b) in nu.atoms.iter().enumerate() {
                pairs.push((fubini_study(a, b)?, i, j));
            }
        }
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut left = mu.weights.clone();
        let mut right = nu.weights.clone();
        let mut entries = Vec::new();
        for (_, i, j) in pairs {
            let m = left[i].min(right[j]);
            if m > 0.0 {
                entries.push((i, j, m));
                left[i] -= m;
                right[j] -= m;
            }
        }
        Ok(Coupling { entries })
    }

    pub fn identity(mu: &DiscreteEnsemble) -> Self {
        Coupling {
            entries: mu.weights.iter().enumerate().map(|(i, &w)| (i, i, w)).collect(),
        }
    }
}

/// Returns `(d_TR(Λμ, Λν), Σ π·d_FS)`; the first never exceeds the second.
pub fn coupling_bound_check(
    mu: &DiscreteEnsemble,
    nu: &DiscreteEnsemble,
    coupling: &Coupling,
) -> Result<(f64, f64)> {
    check_dims(mu.dim, nu.dim)?;
    let mut left = vec![0.0; mu.len()];
    let mut right = vec![0.0; nu.len()];
    let mut cost = 0.0;
    for &(i, j, m) in &coupling.entries {
        if i >= mu.len() || j >= nu.len() {
            return Err(Error::InvalidCoupling(format!("index pair ({i}, {j}) out of range")));
        }
        if !(m >= 0.0) {
            return Err(Error::InvalidCoupling(format!("negative mass {m}")));
        }
        left[i] += m;
        right[j] += m;
        cost += m * fubini_study(&mu.atoms[i], &nu.atoms[j])?;
    }
    for (side, got, want) in [("first", &left, &mu.weights), ("second", &right, &nu.weights)] {
        if let Some(k) = (0..got.len()).find(|&k| (got[k] - want[k]).abs() > WEIGHT_SUM_TOL) {
            return Err(Error::InvalidCoupling(format!(
                "{side} marginal at atom {k} is {} instead of {}",
                got[k], want[k]
            )));
        }
    }
    let lhs = trace_distance(&realize(mu)?, &realize(nu)?)?;
    Ok((lhs, cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{diag, from_rows, C64};
    use crate::states::{haar_pure, RngStream};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn qubit_basis() -> Vec<PureState> {
        vec![PureState::basis(2, 0), PureState::basis(2, 1)]
    }

    fn random_ensemble(rng: &mut RngStream, atoms: &[PureState]) -> DiscreteEnsemble {
        use rand::Rng;
        let raw: Vec<f64> = (0..atoms.len()).map(|_| rng.random::<f64>() + 0.01).collect();
        let s: f64 = raw.iter().sum();
        DiscreteEnsemble::new(atoms.to_vec(), raw.iter().map(|w| w / s).collect()).unwrap()
    }

    #[test]
    fn realize_examples() {
        let psi = PureState::basis(2, 1);
        let single = DiscreteEnsemble::new(vec![psi.clone()], vec![1.0]).unwrap();
        assert!((realize(&single).unwrap().matrix() - psi.projector()).norm() < 1e-15);
        let half = DiscreteEnsemble::new(qubit_basis(), vec![0.5, 0.5]).unwrap();
        assert!((realize(&half).unwrap().matrix() - diag(&[0.5, 0.5])).norm() < 1e-15);
        let plus = PureState::from_slice(&[c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)]).unwrap();
        let mixed = DiscreteEnsemble::new(vec![PureState::basis(2, 0), plus], vec![0.5, 0.5]).unwrap();
        let expect = from_rows(&[&[c(0.75), c(0.25)], &[c(0.25), c(0.25)]]);
        assert!((realize(&mixed).unwrap().matrix() - expect).norm() < 1e-15);
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert_eq!(DiscreteEnsemble::new(vec![], vec![]).unwrap_err(), Error::EmptyEnsemble);
        assert!(matches!(
            DiscreteEnsemble::new(qubit_basis(), vec![0.7, 0.7]),
            Err(Error::InvalidWeights(_))
        ));
        assert!(matches!(
            DiscreteEnsemble::new(qubit_basis(), vec![1.5, -0.5]),
            Err(Error::InvalidWeights(_))
        ));
        let dup = vec![PureState::basis(2, 0), PureState::basis(2, 0).with_phase(0.3)];
        assert!(matches!(
            DiscreteEnsemble::new(dup.clone(), vec![0.5, 0.5]),
            Err(Error::DuplicateAtoms { .. })
        ));
        let merged = DiscreteEnsemble::merged(dup, vec![0.5, 0.5]).unwrap();
        assert_eq!(merged.len(), 1);
        assert_abs_diff_eq!(merged.weights()[0], 1.0);
    }

    #[test]
    fn kl_examples() {
        let mu = DiscreteEnsemble::new(qubit_basis(), vec![0.75, 0.25]).unwrap();
        let nu = DiscreteEnsemble::new(qubit_basis(), vec![0.5, 0.5]).unwrap();
        assert_eq!(kl_divergence(&mu, &mu).unwrap(), 0.0);
        let expect = 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln();
        assert_abs_diff_eq!(kl_divergence(&mu, &nu).unwrap(), expect, epsilon = 1e-15);
        assert_abs_diff_eq!(kl_divergence(&mu, &nu).unwrap(), 0.130812, epsilon = 1e-6);
        let only_zero = DiscreteEnsemble::new(vec![PureState::basis(2, 0)], vec![1.0]).unwrap();
        assert_eq!(kl_divergence(&mu, &only_zero).unwrap(), f64::INFINITY);
        // matched atom with zero reference weight
        let zero_w = DiscreteEnsemble::new(qubit_basis(), vec![1.0, 0.0]).unwrap();
        assert_eq!(kl_divergence(&mu, &zero_w).unwrap(), f64::INFINITY);
        // zero mass on the left contributes nothing
        assert_abs_diff_eq!(
            kl_divergence(&zero_w, &nu).unwrap(),
            2f64.ln(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn kl_matches_atoms_up_to_phase_and_order() {
        let mu = DiscreteEnsemble::new(qubit_basis(), vec![0.75, 0.25]).unwrap();
        let swapped = vec![PureState::basis(2, 1).with_phase(1.0), PureState::basis(2, 0).with_phase(-2.0)];
        let nu = DiscreteEnsemble::new(swapped, vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(kl_divergence(&mu, &nu).unwrap(), 0.130812, epsilon = 1e-6);
    }

    #[test]
    fn f_divergence_examples() {
        let mu = DiscreteEnsemble::new(qubit_basis(), vec![0.75, 0.25]).unwrap();
        let nu = DiscreteEnsemble::new(qubit_basis(), vec![0.5, 0.5]).unwrap();
        for f in DivergenceGenerator::registry() {
            assert_eq!(f_divergence(&mu, &mu, &f).unwrap(), 0.0);
        }
        let chi = DivergenceGenerator::x_squared_minus_x();
        assert_abs_diff_eq!(f_divergence(&mu, &nu, &chi).unwrap(), 0.25, epsilon = 1e-15);
        let single = DiscreteEnsemble::new(vec![PureState::basis(2, 0)], vec![1.0]).unwrap();
        assert_eq!(f_divergence(&mu, &single, &chi).unwrap(), f64::INFINITY);
        // reverse-KL generator blows up where μ vanishes on supp ν
        let nl = DivergenceGenerator::neg_log();
        assert_eq!(f_divergence(&single, &mu, &nl).unwrap(), f64::INFINITY);
    }

    #[test]
    fn f_divergence_x_log_x_is_kl() {
        let mut rng = RngStream::new(21, 0);
        let f = DivergenceGenerator::x_log_x();
        for _ in 0..50 {
            let atoms: Vec<PureState> = (0..5).map(|_| haar_pure(3, &mut rng)).collect();
            let mu = random_ensemble(&mut rng, &atoms);
            let nu = random_ensemble(&mut rng, &atoms);
            let a = kl_divergence(&mu, &nu).unwrap();
            let b = f_divergence(&mu, &nu, &f).unwrap();
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn ambiguous_match_is_an_error() {
        let a = PureState::basis(2, 0);
        let eps: f64 = 6e-11;
        let b1 = PureState::from_slice(&[c(eps.cos()), c(eps.sin())]).unwrap();
        let b2 = PureState::from_slice(&[c(eps.cos()), c(-eps.sin())]).unwrap();
        let mu = DiscreteEnsemble::new(vec![a], vec![1.0]).unwrap();
        let nu = DiscreteEnsemble::new(vec![b1, b2], vec![0.5, 0.5]).unwrap();
        assert!(matches!(kl_divergence(&mu, &nu), Err(Error::AmbiguousMatch { .. })));
    }

    #[test]
    fn coarse_grain_extremes() {
        let mut rng = RngStream::new(22, 0);
        let atoms: Vec<PureState> = (0..6).map(|_| haar_pure(3, &mut rng)).collect();
        let mu = random_ensemble(&mut rng, &atoms);
        let (k, out) = coarse_grain(&mu, FRAC_PI_2).unwrap();
        assert_eq!(k.centers().len(), 1);
        assert_abs_diff_eq!(out.weights()[0], 1.0, epsilon = 1e-14);
        let mut min_d = f64::INFINITY;
        for i in 0..atoms.len() {
            for j in (i + 1)..atoms.len() {
                min_d = min_d.min(fubini_study(&atoms[i], &atoms[j]).unwrap());
            }
        }
        let (k, out) = coarse_grain(&mu, 0.5 * min_d).unwrap();
        assert_eq!(k.assignment(), &[0, 1, 2, 3, 4, 5]);
        assert_eq!(out.weights(), mu.weights());
        assert!(coarse_grain(&mu, 0.0).is_err());
    }

    #[test]
    fn kernel_assignment_respects_radius() {
        let mut rng = RngStream::new(23, 0);
        let atoms: Vec<PureState> = (0..20).map(|_| haar_pure(2, &mut rng)).collect();
        let mu = random_ensemble(&mut rng, &atoms);
        let (k, _) = coarse_grain(&mu, 0.4).unwrap();
        for (a, &c) in atoms.iter().zip(k.assignment()) {
            assert!(fubini_study(a, &k.centers()[c]).unwrap() <= 0.4);
        }
    }

    #[test]
    fn coupling_examples() {
        let mut rng = RngStream::new(24, 0);
        let atoms: Vec<PureState> = (0..3).map(|_| haar_pure(2, &mut rng)).collect();
        let mu = random_ensemble(&mut rng, &atoms);
        let (l, r) = coupling_bound_check(&mu, &mu, &Coupling::identity(&mu)).unwrap();
        assert!(l < 1e-15 && r < 1e-15);

        let psi = haar_pure(3, &mut rng);
        let phi = haar_pure(3, &mut rng);
        let a = DiscreteEnsemble::new(vec![psi.clone()], vec![1.0]).unwrap();
        let b = DiscreteEnsemble::new(vec![phi.clone()], vec![1.0]).unwrap();
        let (l, r) = coupling_bound_check(&a, &b, &Coupling::identity(&a)).unwrap();
        let d = fubini_study(&psi, &phi).unwrap();
        assert_abs_diff_eq!(r, d, epsilon = 1e-15);
        assert_abs_diff_eq!(l, d.sin(), epsilon = 1e-12);

        let bad = Coupling { entries: vec![(0, 0, 0.5)] };
        assert!(matches!(coupling_bound_check(&a, &b, &bad), Err(Error::InvalidCoupling(_))));
    }

    #[test]
    fn faithful_realizations_span_the_space() {
        let mut rng = RngStream::new(25, 0);
        for n in 2..=5 {
            let atoms: Vec<PureState> = (0..(n + 3)).map(|_| haar_pure(n, &mut rng)).collect();
            let mu = random_ensemble(&mut rng, &atoms);
            assert!(realize(&mu).unwrap().is_faithful());
            assert_eq!(mu.support_rank(), n);
        }
        // fewer than n atoms can never realize a faithful state
        let few: Vec<PureState> = (0..2).map(|_| haar_pure(3, &mut rng)).collect();
        let mu = random_ensemble(&mut rng, &few);
        assert!(!realize(&mu).unwrap().is_faithful());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn realize_is_affine(seed in any::<u64>(), t in 0.0f64..=1.0) {
            let mut rng = RngStream::new(seed, 0);
            let atoms: Vec<PureState> = (0..4).map(|_| haar_pure(3, &mut rng)).collect();
            let mu = random_ensemble(&mut rng, &atoms);
            let nu = random_ensemble(&mut rng, &atoms);
            let lhs = realize(&mu.mix(&nu, t).unwrap()).unwrap();
            let rhs = realize(&mu).unwrap().matrix().scale(t) + realize(&nu).unwrap().matrix().scale(1.0 - t);
            prop_assert!((lhs.matrix() - rhs).norm() <= 1e-12);
        }

        #[test]
        fn gibbs_inequality(seed in any::<u64>(), k in 1usize..=8) {
            let mut rng = RngStream::new(seed, 1);
            let atoms: Vec<PureState> = (0..k).map(|_| haar_pure(4, &mut rng)).collect();
            let mu = random_ensemble(&mut rng, &atoms);
            let nu = random_ensemble(&mut rng, &atoms);
            prop_assert!(kl_divergence(&mu, &nu).unwrap() >= 0.0);
            prop_assert_eq!(kl_divergence(&mu, &mu).unwrap(), 0.0);
        }

        #[test]
        fn coarse_graining_never_increases_divergence(seed in any::<u64>(), radius in 0.05f64..1.6) {
            let mut rng = RngStream::new(seed, 2);
            let atoms: Vec<PureState> = (0..12).map(|_| haar_pure(2, &mut rng)).collect();
            let mu = random_ensemble(&mut rng, &atoms);
            let nu = random_ensemble(&mut rng, &atoms);
            let (kernel, mu_c) = coarse_grain(&mu, radius).unwrap();
            let nu_c = kernel.apply(&nu).unwrap();
            prop_assert!(kl_divergence(&mu_c, &nu_c).unwrap() <= kl_divergence(&mu, &nu).unwrap() + 1e-10);
            for f in DivergenceGenerator::registry() {
                let before = f_divergence(&mu, &nu, &f).unwrap();
                let after = f_divergence(&mu_c, &nu_c, &f).unwrap();
                prop_assert!(after <= before + 1e-10, "{} {} {}", f.name(), after, before);
            }
        }
    }
}
