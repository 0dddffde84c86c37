//! Lindblad propagation and stochastic Schrödinger trajectories.
//!
//! Density matrices are vectorized column-major, so
//! `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`, and the master equation
//!
//! ```text
//! ∂ρ/∂t = −i[H, ρ] + Σ γ_j² (S_j ρ S_j† − ½{S_j†S_j, ρ})
//! ```
//!
//! is propagated exactly by the matrix exponential of its superoperator.
//!
//! Trajectories follow the linear stochastic Schrödinger equation
//! `dψ = Aψ dt + i Σ γ_j S_j ψ dX_j` with `A = −iH − ½ Σ γ_j² S_j†S_j` and
//! independent Brownian drivers `X_j`. Each step applies `exp(A·dt)` to the
//! drift and an Euler–Maruyama increment to the noise, then renormalizes.
//! The product of the squared pre-normalization norms is kept as the path
//! weight; `E[w |ψ⟩⟨ψ|] = ρ_t`, so weighted means are unbiased up to the
//! time step.

use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::ensembles::DiscreteEnsemble;
use crate::entropy::bs_entropy;
use crate::error::{check_dims, Error, Result};
use crate::matcore::{check_square, hermiticity_defect, hermitize, identity, is_finite, ComplexMatrix, ComplexVector, C64, I, ONE, ZERO};
use crate::states::{DensityMatrix, PureState, RngStream};
use crate::tolerances::Tolerances;

/// Per-step norm band outside which a trajectory step is rejected.
const NORM_BAND: (f64, f64) = (0.5, 2.0);

/// Tolerance for trace and positivity of propagated states.
pub const EVOLVE_TOL: f64 = 1e-9;

/// Per-step slack allowed when checking that a divergence series is nonincreasing.
pub const CONTRACTION_SLACK: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct LindbladModel {
    dim: usize,
    hamiltonian: ComplexMatrix,
    jumps: Vec<ComplexMatrix>,
    rates: Vec<f64>,
}

impl LindbladModel {
    pub fn new(hamiltonian: ComplexMatrix, jumps: Vec<ComplexMatrix>, rates: Vec<f64>) -> Result<Self> {
        let dim = check_square(&hamiltonian)?;
        if dim == 0 {
            return Err(Error::InvalidModel("dimension must be positive".into()));
        }
        if !is_finite(&hamiltonian) {
            return Err(Error::NonFinite);
        }
        let deviation = hermiticity_defect(&hamiltonian);
        let tolerance = Tolerances::default().herm;
        if deviation > tolerance {
            return Err(Error::NotHermitian { deviation, tolerance });
        }
        if jumps.len() != rates.len() {
            return Err(Error::InvalidModel(format!(
                "{} jump operators but {} rates",
                jumps.len(),
                rates.len()
            )));
        }
        for s in &jumps {
            check_dims(dim, check_square(s)?)?;
            if !is_finite(s) {
                return Err(Error::NonFinite);
            }
        }
        if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::InvalidModel(format!("rate {r} is not a nonnegative number")));
        }
        Ok(LindbladModel {
            dim,
            hamiltonian: hermitize(&hamiltonian),
            jumps,
            rates,
        })
    }

    /// Closed system `dρ/dt = −i[H, ρ]`.
    pub fn unitary(hamiltonian: ComplexMatrix) -> Result<Self> {
        Self::new(hamiltonian, Vec::new(), Vec::new())
    }

    /// Qubit amplitude damping: `H = 0`, `S = |0⟩⟨1|`.
    pub fn amplitude_damping(rate: f64) -> Result<Self> {
        let mut lower = ComplexMatrix::zeros(2, 2);
        lower[(0, 1)] = ONE;
        Self::new(ComplexMatrix::zeros(2, 2), vec![lower], vec![rate])
    }

    /// Qubit dephasing: `H = 0`, `S = σ_z`.
    pub fn dephasing(rate: f64) -> Result<Self> {
        Self::new(
            ComplexMatrix::zeros(2, 2),
            vec![crate::matcore::diag(&[1.0, -1.0])],
            vec![rate],
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[ComplexMatrix] {
        &self.jumps
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// `A = −iH − ½ Σ γ_j² S_j†S_j`.
    pub fn drift(&self) -> ComplexMatrix {
        let mut a = self.hamiltonian.map(|z| -I * z);
        for (s, &g) in self.jumps.iter().zip(&self.rates) {
            a -= (s.adjoint() * s).scale(0.5 * g * g);
        }
        a
    }
}

/// `L` with `vec(dρ/dt) = L vec(ρ)`, of size `n² × n²`.
pub fn lindblad_superop(model: &LindbladModel) -> ComplexMatrix {
    let n = model.dim;
    let id = identity(n);
    let h = &model.hamiltonian;
    let mut l = (id.kronecker(h) - h.transpose().kronecker(&id)).map(|z| -I * z);
    for (s, &g) in model.jumps.iter().zip(&model.rates) {
        let g2 = g * g;
        let sds = s.adjoint() * s;
        l += s.conjugate().kronecker(s).scale(g2);
        l -= id.kronecker(&sds).scale(0.5 * g2);
        l -= sds.transpose().kronecker(&id).scale(0.5 * g2);
    }
    l
}

/// `exp(t·L)` acting on vectorized states.
pub fn lindblad_propagator(model: &LindbladModel, t: f64) -> Result<ComplexMatrix> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time {t} must be finite and nonnegative")));
    }
    Ok(lindblad_superop(model).scale(t).exp())
}

/// `ρ(t)` for `ρ(0) = ρ₀`.
pub fn lindblad_evolve(model: &LindbladModel, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    check_dims(model.dim, rho0.dim())?;
    let prop = lindblad_propagator(model, t)?;
    apply_propagator(&prop, rho0)
}

fn apply_propagator(prop: &ComplexMatrix, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let n = rho.dim();
    let v = ComplexVector::from_column_slice(rho.matrix().as_slice());
    let out = ComplexMatrix::from_column_slice(n, n, (prop * v).as_slice());
    let tol = Tolerances {
        trace: EVOLVE_TOL,
        psd: EVOLVE_TOL,
        ..Tolerances::default()
    };
    DensityMatrix::with_tolerances(hermitize(&out), &tol)
        .map_err(|e| Error::ValidationFailure(format!("propagated state is invalid: {e}")))
}

/// `D_BS(ρ_t ‖ σ_t)` at each requested time.
///
/// Fails with `NotFaithful` carrying the time stamp if either state leaves the
/// faithful cone.
pub fn contraction_scan(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    sigma0: &DensityMatrix,
    times: &[f64],
) -> Result<Vec<(f64, f64)>> {
    check_dims(model.dim, rho0.dim())?;
    check_dims(model.dim, sigma0.dim())?;
    rho0.require_faithful("rho")?;
    sigma0.require_faithful("sigma")?;
    if let Some(&t0) = times.first() {
        if !(t0 >= 0.0) {
            return Err(Error::InvalidArgument(format!("times must start at or after 0, got {t0}")));
        }
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("times must be strictly increasing".into()));
    }
    let l = lindblad_superop(model);
    let mut series = Vec::with_capacity(times.len());
    for &t in times {
        let prop = l.scale(t).exp();
        let rho = apply_propagator(&prop, rho0)?;
        let sigma = apply_propagator(&prop, sigma0)?;
        for (which, state) in [("rho", &rho), ("sigma", &sigma)] {
            if !state.is_faithful() {
                return Err(Error::NotFaithful {
                    which: which.into(),
                    min_eigenvalue: state.min_eigenvalue(),
                    threshold: state.faithful_threshold(),
                    time: Some(t),
                });
            }
        }
        series.push((t, bs_entropy(&rho, &sigma)?));
    }
    Ok(series)
}

/// Indices `k` where `series[k].1 > series[k-1].1 + slack`.
pub fn monotonicity_violations(series: &[(f64, f64)], slack: f64) -> Vec<usize> {
    (1..series.len())
        .filter(|&k| series[k].1 > series[k - 1].1 + slack)
        .collect()
}

/// Evenly spaced grid `0, t_max/steps, …, t_max`.
pub fn time_grid(t_max: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| t_max * k as f64 / steps.max(1) as f64).collect()
}

/// Sampled path of the stochastic Schrödinger equation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PureState>,
    /// Cumulative product of squared pre-normalization norms.
    pub weights: Vec<f64>,
    pub seed: u64,
    pub stream_id: u64,
}

impl Trajectory {
    pub fn final_state(&self) -> &PureState {
        self.states.last().expect("trajectory has at least one point")
    }

    pub fn final_weight(&self) -> f64 {
        *self.weights.last().expect("trajectory has at least one point")
    }
}

/// Shared per-model step data.
struct Stepper {
    propagator: ComplexMatrix,
    noise_ops: Vec<ComplexMatrix>,
    sqrt_dt: f64,
    dt: f64,
    steps: usize,
}

impl Stepper {
    fn new(model: &LindbladModel, t_final: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
        }
        if !(t_final >= 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidArgument(format!("t_final = {t_final} must be nonnegative")));
        }
        // Round the step count and shrink dt slightly so the grid ends exactly at t_final.
        let steps = (t_final / dt).round().max(if t_final > 0.0 { 1.0 } else { 0.0 }) as usize;
        let dt = if steps == 0 { dt } else { t_final / steps as f64 };
        let noise_ops = model
            .jumps
            .iter()
            .zip(&model.rates)
            .filter(|(_, &g)| g > 0.0)
            .map(|(s, &g)| s.map(|z| I * g * z))
            .collect();
        Ok(Stepper {
            propagator: model.drift().scale(dt).exp(),
            noise_ops,
            sqrt_dt: dt.sqrt(),
            dt,
            steps,
        })
    }

    /// One step in place; returns the squared pre-normalization norm.
    fn step(&self, psi: &mut ComplexVector, buf: &mut ComplexVector, rng: &mut RngStream, time: f64) -> Result<f64> {
        buf.gemv(ONE, &self.propagator, psi, ZERO);
        for op in &self.noise_ops {
            let dx: f64 = rand::Rng::sample(rng, StandardNormal);
            buf.gemv(C64::new(dx * self.sqrt_dt, 0.0), op, psi, ONE);
        }
        let norm_sq = buf.norm_squared();
        let norm = norm_sq.sqrt();
        if !(norm >= NORM_BAND.0 && norm <= NORM_BAND.1) {
            return Err(Error::StepExplosion { time, norm });
        }
        psi.copy_from(buf);
        psi.unscale_mut(norm);
        Ok(norm_sq)
    }

    /// Final normalized state and path weight.
    fn run(&self, psi0: &PureState, rng: &mut RngStream) -> Result<(PureState, f64)> {
        let mut psi = psi0.amplitudes().clone();
        let mut buf = psi.clone();
        let mut weight = 1.0;
        for k in 0..self.steps {
            weight *= self.step(&mut psi, &mut buf, rng, (k + 1) as f64 * self.dt)?;
        }
        Ok((PureState::normalize(psi)?, weight))
    }
}

/// One trajectory from `ψ₀` on the grid `0, dt, …, t_final`.
pub fn sse_trajectory(
    model: &LindbladModel,
    psi0: &PureState,
    t_final: f64,
    dt: f64,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    check_dims(model.dim, psi0.dim())?;
    if !(t_final >= dt) {
        return Err(Error::InvalidArgument(format!("t_final = {t_final} is shorter than dt = {dt}")));
    }
    let stepper = Stepper::new(model, t_final, dt)?;
    let mut times = Vec::with_capacity(stepper.steps + 1);
    let mut states = Vec::with_capacity(stepper.steps + 1);
    let mut weights = Vec::with_capacity(stepper.steps + 1);
    let mut psi = psi0.amplitudes().clone();
    let mut buf = psi.clone();
    let mut weight = 1.0;
    times.push(0.0);
    states.push(psi0.clone());
    weights.push(weight);
    for k in 0..stepper.steps {
        let t = (k + 1) as f64 * stepper.dt;
        weight *= stepper.step(&mut psi, &mut buf, rng, t)?;
        times.push(t);
        states.push(PureState::normalize(psi.clone())?);
        weights.push(weight);
    }
    Ok(Trajectory {
        times,
        states,
        weights,
        seed: rng.seed(),
        stream_id: rng.stream_id(),
    })
}

/// Output of [`evolve_ensemble`].
#[derive(Debug, Clone)]
pub struct EvolvedEnsemble {
    pub ensemble: DiscreteEnsemble,
    /// Estimated standard error of `realize(ensemble)` in Frobenius norm.
    pub frobenius_stderr: f64,
    pub trajectories: usize,
}

impl EvolvedEnsemble {
    /// Three standard errors converted to a trace-distance bound.
    pub fn trace_distance_tolerance(&self) -> f64 {
        let n = self.ensemble.dim() as f64;
        3.0 * 0.5 * n.sqrt() * self.frobenius_stderr
    }
}

/// Pushes every atom of `μ₀` through `n_per_atom` trajectories.
///
/// Trajectory `k` of atom `a` uses `rng.child(a·n_per_atom + k)`. Final states
/// are weighted by `w_a · w_path / Σ w_path` within each atom and coincident
/// end points are merged.
pub fn evolve_ensemble(
    model: &LindbladModel,
    mu0: &DiscreteEnsemble,
    t: f64,
    dt: f64,
    n_per_atom: usize,
    rng: &RngStream,
) -> Result<EvolvedEnsemble> {
    check_dims(model.dim, mu0.dim())?;
    if n_per_atom == 0 {
        return Err(Error::InvalidArgument("need at least one trajectory per atom".into()));
    }
    if t == 0.0 {
        return Ok(EvolvedEnsemble {
            ensemble: mu0.clone(),
            frobenius_stderr: 0.0,
            trajectories: 0,
        });
    }
    if !(t >= dt) {
        return Err(Error::InvalidArgument(format!("t = {t} is shorter than dt = {dt}")));
    }
    let stepper = Stepper::new(model, t, dt)?;
    let n = model.dim;
    let mut atoms = Vec::with_capacity(mu0.len() * n_per_atom);
    let mut weights = Vec::with_capacity(mu0.len() * n_per_atom);
    let mut variance = 0.0;
    for (a, (psi0, &w_atom)) in mu0.atoms().iter().zip(mu0.weights()).enumerate() {
        let base = (a * n_per_atom) as u64;
        let paths: Vec<(PureState, f64)> = (0..n_per_atom)
            .into_par_iter()
            .map(|k| {
                let mut child = rng.child(base + k as u64);
                stepper.run(psi0, &mut child)
            })
            .collect::<Result<_>>()?;
        let total: f64 = paths.iter().map(|(_, w)| w).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::ValidationFailure(format!("path weights sum to {total}")));
        }
        let mut mean = ComplexMatrix::zeros(n, n);
        for (psi, w) in &paths {
            mean += psi.projector().scale(w / total);
        }
        variance += w_atom * w_atom * ratio_variance(&paths, &mean, total);
        for (psi, w) in paths {
            atoms.push(psi);
            weights.push(w_atom * w / total);
        }
    }
    let norm: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= norm);
    Ok(EvolvedEnsemble {
        ensemble: DiscreteEnsemble::merged(atoms, weights)?,
        frobenius_stderr: variance.sqrt(),
        trajectories: mu0.len() * n_per_atom,
    })
}

/// Delta-method variance (summed over entries) of the self-normalized mean.
fn ratio_variance(paths: &[(PureState, f64)], mean: &ComplexMatrix, total: f64) -> f64 {
    let m = paths.len() as f64;
    if m < 2.0 {
        return 0.0;
    }
    let w_bar = total / m;
    let mut sum_sq = 0.0;
    for (psi, w) in paths {
        sum_sq += (psi.projector() - mean).scale(*w).norm_squared();
    }
    sum_sq / (m - 1.0) / (m * w_bar * w_bar)
}

/// `Σ w |ψ⟩⟨ψ| / Σ w` over trajectory end points.
pub fn weighted_mean(paths: &[Trajectory]) -> Result<DensityMatrix> {
    let first = paths.first().ok_or(Error::EmptyEnsemble)?;
    let n = first.final_state().dim();
    let mut mean = ComplexMatrix::zeros(n, n);
    let mut total = 0.0;
    for p in paths {
        let w = p.final_weight();
        mean += p.final_state().projector().scale(w);
        total += w;
    }
    DensityMatrix::new(hermitize(&mean.unscale(total)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::realize;
    use crate::matcore::{diag, from_rows};
    use crate::states::{haar_pure, random_hermitian, sample_faithful, trace_distance, ginibre};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn bloch(x: f64, y: f64, z: f64) -> DensityMatrix {
        DensityMatrix::new(from_rows(&[
            &[c(0.5 * (1.0 + z), 0.0), c(0.5 * x, -0.5 * y)],
            &[c(0.5 * x, 0.5 * y), c(0.5 * (1.0 - z), 0.0)],
        ]))
        .unwrap()
    }

    fn excited() -> DensityMatrix {
        DensityMatrix::new(diag(&[0.0, 1.0])).unwrap()
    }

    fn random_model(n: usize, rng: &mut RngStream) -> LindbladModel {
        let h = random_hermitian(n, rng);
        let jumps: Vec<ComplexMatrix> = (0..2).map(|_| ginibre(n, n, rng).unscale(n as f64)).collect();
        LindbladModel::new(h, jumps, vec![0.8, 0.5]).unwrap()
    }

    #[test]
    fn model_validation() {
        let h = from_rows(&[&[c(0.0, 0.0), c(1.0, 0.0)], &[c(0.0, 0.0), c(0.0, 0.0)]]);
        assert!(matches!(LindbladModel::unitary(h), Err(Error::NotHermitian { .. })));
        let z = ComplexMatrix::zeros(2, 2);
        assert!(matches!(
            LindbladModel::new(z.clone(), vec![z.clone()], vec![-1.0]),
            Err(Error::InvalidModel(_))
        ));
        assert!(matches!(
            LindbladModel::new(z.clone(), vec![ComplexMatrix::zeros(3, 3)], vec![1.0]),
            Err(Error::DimMismatch { .. })
        ));
        assert!(matches!(LindbladModel::new(z, vec![], vec![1.0]), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn superop_examples() {
        let zero = LindbladModel::unitary(ComplexMatrix::zeros(3, 3)).unwrap();
        assert_eq!(lindblad_superop(&zero), ComplexMatrix::zeros(9, 9));

        let ad = LindbladModel::amplitude_damping(1.0).unwrap();
        let l = lindblad_superop(&ad);
        let v = ComplexVector::from_column_slice(excited().matrix().as_slice());
        let out = ComplexMatrix::from_column_slice(2, 2, (&l * v).as_slice());
        assert!((out - diag(&[1.0, -1.0])).norm() < 1e-15);

        let mut rng = RngStream::new(51, 0);
        for n in 2..=4 {
            let l = lindblad_superop(&random_model(n, &mut rng));
            let vec_id = ComplexVector::from_column_slice(identity(n).as_slice());
            let row = vec_id.transpose() * l;
            assert!(row.camax() <= 1e-12);
        }
    }

    #[test]
    fn amplitude_damping_closed_form() {
        let ad = LindbladModel::amplitude_damping(1.0).unwrap();
        let out = lindblad_evolve(&ad, &excited(), 1.0).unwrap();
        let e = (-1.0f64).exp();
        assert!((out.matrix() - diag(&[1.0 - e, e])).camax() <= 1e-9);
        assert_abs_diff_eq!(out.matrix()[(0, 0)].re, 0.632121, epsilon = 1e-6);
        let same = lindblad_evolve(&ad, &excited(), 0.0).unwrap();
        assert!((same.matrix() - excited().matrix()).camax() < 1e-15);
        assert!(lindblad_evolve(&ad, &excited(), -1.0).is_err());
    }

    #[test]
    fn semigroup_property() {
        let mut rng = RngStream::new(52, 0);
        let model = random_model(3, &mut rng);
        let rho = sample_faithful(3, &mut rng);
        let direct = lindblad_evolve(&model, &rho, 0.7).unwrap();
        let mid = lindblad_evolve(&model, &rho, 0.3).unwrap();
        let composed = lindblad_evolve(&model, &mid, 0.4).unwrap();
        assert!((direct.matrix() - composed.matrix()).camax() <= 1e-9);
    }

    #[test]
    fn evolution_stays_physical() {
        let mut rng = RngStream::new(53, 0);
        for n in 2..=4 {
            let model = random_model(n, &mut rng);
            let rho = DensityMatrix::from_pure(&haar_pure(n, &mut rng));
            for t in [0.1, 1.0, 5.0, 10.0] {
                let out = lindblad_evolve(&model, &rho, t).unwrap();
                assert_abs_diff_eq!(crate::matcore::real_trace(out.matrix()), 1.0, epsilon = 1e-9);
                assert!(out.min_eigenvalue() >= -1e-9);
            }
        }
    }

    #[test]
    fn contraction_examples() {
        let times = time_grid(2.0, 20);
        let mut rng = RngStream::new(54, 0);
        let rho = sample_faithful(2, &mut rng);
        let sigma = sample_faithful(2, &mut rng);

        let deph = LindbladModel::dephasing(1.0).unwrap();
        let same = contraction_scan(&deph, &rho, &rho, &times).unwrap();
        assert!(same.iter().all(|(_, d)| d.abs() < 1e-12));

        let unitary = LindbladModel::unitary(random_hermitian(2, &mut rng)).unwrap();
        let flat = contraction_scan(&unitary, &rho, &sigma, &times).unwrap();
        for (_, d) in &flat {
            assert_abs_diff_eq!(*d, flat[0].1, epsilon = 1e-9);
        }

        let series = contraction_scan(&deph, &bloch(0.8, 0.0, 0.0), &bloch(0.0, 0.8, 0.0), &times).unwrap();
        assert!(series.windows(2).all(|w| w[1].1 < w[0].1));
        assert!(series.last().unwrap().1 < 1e-3);
        assert!(monotonicity_violations(&series, CONTRACTION_SLACK).is_empty());
    }

    #[test]
    fn contraction_reports_time_of_lost_faithfulness() {
        let ad = LindbladModel::amplitude_damping(3.0).unwrap();
        let rho = bloch(0.1, 0.0, -0.5);
        let sigma = DensityMatrix::maximally_mixed(2);
        match contraction_scan(&ad, &rho, &sigma, &time_grid(20.0, 10)) {
            Err(Error::NotFaithful { time: Some(t), .. }) => assert!(t > 0.0),
            other => panic!("unexpected {other:?}"),
        }
        assert!(contraction_scan(&ad, &rho, &sigma, &[0.5, 0.2]).is_err());
    }

    #[test]
    fn monotonicity_helper() {
        let s = vec![(0.0, 1.0), (0.1, 0.5), (0.2, 0.6), (0.3, 0.6 + 1e-8)];
        assert_eq!(monotonicity_violations(&s, 1e-7), vec![2]);
    }

    #[test]
    fn unitary_limit_keeps_norm() {
        let mut rng = RngStream::new(55, 0);
        let model = LindbladModel::unitary(random_hermitian(3, &mut rng)).unwrap();
        let psi0 = haar_pure(3, &mut rng);
        let traj = sse_trajectory(&model, &psi0, 1.0, 1e-4, &mut rng).unwrap();
        assert_eq!(traj.times.len(), 10_001);
        assert!((traj.final_weight() - 1.0).abs() <= 1e-6);
        let exact = lindblad_evolve(&model, &DensityMatrix::from_pure(&psi0), 1.0).unwrap();
        let path = DensityMatrix::from_pure(traj.final_state());
        assert!(trace_distance(&exact, &path).unwrap() <= 1e-9);
    }

    #[test]
    fn trajectories_are_reproducible_and_normalized() {
        let model = LindbladModel::amplitude_damping(1.0).unwrap();
        let psi0 = PureState::basis(2, 1);
        let a = sse_trajectory(&model, &psi0, 0.5, 1e-3, &mut RngStream::new(56, 3)).unwrap();
        let b = sse_trajectory(&model, &psi0, 0.5, 1e-3, &mut RngStream::new(56, 3)).unwrap();
        assert_eq!(a.weights, b.weights);
        for (x, y) in a.states.iter().zip(&b.states) {
            assert_eq!(x.amplitudes(), y.amplitudes());
            assert!((x.amplitudes().norm() - 1.0).abs() <= 1e-9);
        }
        assert_eq!((a.seed, a.stream_id), (56, 3));
        assert!(sse_trajectory(&model, &psi0, 1e-4, 1e-3, &mut RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn oversized_step_explodes() {
        let model = LindbladModel::amplitude_damping(10.0).unwrap();
        let err = sse_trajectory(&model, &PureState::basis(2, 1), 1.0, 0.5, &mut RngStream::new(57, 0));
        assert!(matches!(err, Err(Error::StepExplosion { .. })));
    }

    fn mean_error(n_traj: usize, seed: u64) -> f64 {
        let model = LindbladModel::amplitude_damping(1.0).unwrap();
        let psi0 = PureState::from_slice(&[c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let root = RngStream::new(seed, 0);
        let paths: Vec<Trajectory> = (0..n_traj)
            .map(|k| sse_trajectory(&model, &psi0, 1.0, 1e-2, &mut root.child(k as u64)).unwrap())
            .collect();
        let exact = lindblad_evolve(&model, &DensityMatrix::from_pure(&psi0), 1.0).unwrap();
        trace_distance(&weighted_mean(&paths).unwrap(), &exact).unwrap()
    }

    #[test]
    fn mean_error_shrinks_with_sample_size() {
        for seed in 0..3 {
            assert!(mean_error(10_000, seed) < mean_error(100, seed));
        }
    }

    #[test]
    fn evolve_ensemble_examples() {
        let mut rng = RngStream::new(58, 0);
        let h = random_hermitian(2, &mut rng);
        let unitary = LindbladModel::unitary(h).unwrap();
        let psi = haar_pure(2, &mut rng);
        let mu0 = DiscreteEnsemble::new(vec![psi.clone()], vec![1.0]).unwrap();
        let out = evolve_ensemble(&unitary, &mu0, 1.0, 1e-2, 16, &rng).unwrap();
        assert_eq!(out.ensemble.len(), 1);
        assert_abs_diff_eq!(out.ensemble.weights()[0], 1.0, epsilon = 1e-12);
        assert!(out.frobenius_stderr < 1e-12);

        let ad = LindbladModel::amplitude_damping(1.0).unwrap();
        let still = evolve_ensemble(&ad, &mu0, 0.0, 1e-2, 16, &rng).unwrap();
        assert_eq!(still.ensemble.atoms()[0].amplitudes(), psi.amplitudes());
    }

    #[test]
    fn evolve_ensemble_tracks_lindblad_flow() {
        let rho = bloch(0.3, -0.2, 0.4);
        let sigma = bloch(-0.1, 0.5, 0.1);
        let cb = crate::commonbasis::common_basis(&rho, &sigma).unwrap();
        let (mu0, _) = crate::commonbasis::cb_measures(&cb).unwrap();
        let ad = LindbladModel::amplitude_damping(1.0).unwrap();
        let out = evolve_ensemble(&ad, &mu0, 0.5, 1e-2, 2000, &RngStream::new(59, 0)).unwrap();
        let exact = lindblad_evolve(&ad, &realize(&mu0).unwrap(), 0.5).unwrap();
        let d = trace_distance(&realize(&out.ensemble).unwrap(), &exact).unwrap();
        assert!(d <= out.trace_distance_tolerance(), "{d} > {}", out.trace_distance_tolerance());
        assert!(out.trace_distance_tolerance() < 0.1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn random_flows_contract(seed in any::<u64>(), n in 2usize..=4) {
            let mut rng = RngStream::new(seed, 0);
            let model = random_model(n, &mut rng);
            let rho = sample_faithful(n, &mut rng);
            let sigma = sample_faithful(n, &mut rng);
            let series = contraction_scan(&model, &rho, &sigma, &time_grid(2.0, 20)).unwrap();
            prop_assert!(monotonicity_violations(&series, CONTRACTION_SLACK).is_empty());
        }
    }
}
