//! Density matrices, pure states, the trace and Fubini-Study metrics, and
//! the random-state samplers.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dims, Error, Result};
use crate::matcore::{
    check_square, herm_eig, herm_eig_with, hermitize, is_finite, outer, real_trace, ComplexMatrix,
    ComplexVector, SpectralDecomposition, C64,
};
use crate::tolerances::Tolerances;

/// Amplitudes with modulus below this are treated as zero when fixing the global phase.
pub const PHASE_CUTOFF: f64 = 1e-12;

/// A validated state: Hermitian, positive semidefinite, unit trace.
///
/// The stored matrix is the exact Hermitian part of the input, and the
/// spectral decomposition is cached since nearly every entropy needs it.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    spectrum: SpectralDecomposition,
    faithful_threshold: f64,
}

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerances(m, &Tolerances::default())
    }

    pub fn with_tolerances(m: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        check_square(&m)?;
        if !is_finite(&m) {
            return Err(Error::NonFinite);
        }
        let spectrum = herm_eig_with(&m, tol.herm)?;
        let matrix = hermitize(&m);
        let trace = real_trace(&matrix);
        if (trace - 1.0).abs() > tol.trace {
            return Err(Error::NotTraceOne {
                trace,
                tolerance: tol.trace,
            });
        }
        if spectrum.min_eigenvalue() < -tol.psd {
            return Err(Error::NotPsd {
                min_eigenvalue: spectrum.min_eigenvalue(),
                tolerance: tol.psd,
            });
        }
        Ok(DensityMatrix {
            matrix,
            spectrum,
            faithful_threshold: tol.faithful,
        })
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self::new(ComplexMatrix::identity(n, n).scale(1.0 / n as f64))
            .expect("I/n is a valid state")
    }

    pub fn from_pure(psi: &PureState) -> Self {
        Self::new(psi.projector()).expect("projector is a valid state")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spectrum
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.spectrum.eigenvalues
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.spectrum.min_eigenvalue()
    }

    /// Full rank: smallest eigenvalue above the faithfulness threshold.
    pub fn is_faithful(&self) -> bool {
        self.min_eigenvalue() > self.faithful_threshold
    }

    pub fn faithful_threshold(&self) -> f64 {
        self.faithful_threshold
    }

    /// `Err(NotFaithful)` naming `which` unless the state is full rank.
    pub fn require_faithful(&self, which: &str) -> Result<()> {
        if self.is_faithful() {
            Ok(())
        } else {
            Err(Error::NotFaithful {
                which: which.to_string(),
                min_eigenvalue: self.min_eigenvalue(),
                threshold: self.faithful_threshold,
                time: None,
            })
        }
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Result<Self> {
        check_dims(self.dim(), u.nrows())?;
        Self::new(u * &self.matrix * u.adjoint())
    }

    /// `t·self + (1-t)·other`.
    pub fn mix(&self, other: &Self, t: f64) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Self::new(self.matrix.scale(t) + other.matrix.scale(1.0 - t))
    }
}

pub fn validate_density(m: ComplexMatrix) -> Result<DensityMatrix> {
    DensityMatrix::new(m)
}

/// `½‖A‖₁` for a Hermitian matrix: half the sum of absolute eigenvalues.
pub fn half_trace_norm(m: &ComplexMatrix) -> Result<f64> {
    let d = herm_eig(m)?;
    Ok(0.5 * d.eigenvalues.iter().map(|l| l.abs()).sum::<f64>())
}

pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dims(rho.dim(), sigma.dim())?;
    Ok(half_trace_norm(&(rho.matrix() - sigma.matrix()))?.min(1.0))
}

/// A unit vector in `C^n`, understood as a ray.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: ComplexVector,
}

impl PureState {
    /// Accepts a vector whose norm is 1 within 1e-12.
    pub fn new(amplitudes: ComplexVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized { norm });
        }
        Ok(PureState { amplitudes })
    }

    /// Rescales any nonzero finite vector to unit norm.
    pub fn normalize(v: ComplexVector) -> Result<Self> {
        let norm = v.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NotNormalized { norm });
        }
        Ok(PureState {
            amplitudes: v.unscale(norm),
        })
    }

    pub fn from_slice(amps: &[C64]) -> Result<Self> {
        Self::new(ComplexVector::from_column_slice(amps))
    }

    /// Computational basis vector `|i⟩`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = ComplexVector::zeros(n);
        v[i] = C64::new(1.0, 0.0);
        PureState { amplitudes: v }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &ComplexVector {
        &self.amplitudes
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn projector(&self) -> ComplexMatrix {
        outer(&self.amplitudes, &self.amplitudes)
    }

    /// Representative with the first non-negligible amplitude real and positive.
    pub fn canonical(&self) -> PureState {
        let lead = self.amplitudes.iter().find(|a| a.norm() > PHASE_CUTOFF);
        match lead {
            Some(a) => {
                let phase = a.conj() / a.norm();
                PureState {
                    amplitudes: self.amplitudes.map(|z| z * phase),
                }
            }
            None => self.clone(),
        }
    }

    /// Multiplies by a global phase `e^{iθ}`.
    pub fn with_phase(&self, theta: f64) -> PureState {
        let p = C64::from_polar(1.0, theta);
        PureState {
            amplitudes: self.amplitudes.map(|z| z * p),
        }
    }
}

/// Fubini-Study distance `arccos|⟨ψ|φ⟩|` in `[0, π/2]`.
///
/// Evaluated as `atan2(‖ψψ† - φφ†‖_F/√2, |⟨ψ|φ⟩|)`: symmetric in its
/// arguments bit for bit, and accurate near zero where `arccos` loses half
/// the digits.
pub fn fubini_study(psi: &PureState, phi: &PureState) -> Result<f64> {
    check_dims(psi.dim(), phi.dim())?;
    Ok(fs_distance(psi.amplitudes(), phi.amplitudes()))
}

pub(crate) fn fs_distance(psi: &ComplexVector, phi: &ComplexVector) -> f64 {
    let overlap = psi.dotc(phi).norm();
    let n = psi.len();
    let mut sq = 0.0;
    for i in 0..n {
        for j in 0..n {
            sq += (psi[i] * psi[j].conj() - phi[i] * phi[j].conj()).norm_sqr();
        }
    }
    (sq * 0.5).sqrt().atan2(overlap)
}

/// Reproducible random stream keyed by `(seed, stream_id)`.
///
/// Backed by ChaCha20 with the stream id mapped onto the cipher's stream
/// counter, so distinct ids give independent sequences for the same seed.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Independent sub-stream for task `index`; deterministic in `(seed, stream_id, index)`.
    pub fn child(&self, index: u64) -> RngStream {
        let id = splitmix64(self.stream_id ^ splitmix64(index.wrapping_add(0xA076_1D64_78BD_642F)));
        RngStream::new(self.seed, id)
    }

    /// Complex standard normal `(x + iy)/√2`.
    pub fn complex_normal(&mut self) -> C64 {
        let re: f64 = self.sample(StandardNormal);
        let im: f64 = self.sample(StandardNormal);
        C64::new(re, im) * FRAC_1_SQRT_2
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// `rows × cols` matrix of i.i.d. complex standard normals.
pub fn ginibre(rows: usize, cols: usize, rng: &mut RngStream) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| rng.complex_normal())
}

/// GUE-distributed Hermitian matrix `(G + G†)/2`.
pub fn random_hermitian(n: usize, rng: &mut RngStream) -> ComplexMatrix {
    hermitize(&ginibre(n, n, rng))
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of `R`'s diagonal removed.
pub fn haar_unitary(n: usize, rng: &mut RngStream) -> ComplexMatrix {
    let qr = ginibre(n, n, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Haar-random pure state: normalized complex Gaussian vector.
pub fn haar_pure(n: usize, rng: &mut RngStream) -> PureState {
    assert!(n >= 1, "dimension must be positive");
    loop {
        let v = ComplexVector::from_fn(n, |_, _| rng.complex_normal());
        if let Ok(psi) = PureState::normalize(v) {
            return psi;
        }
    }
}

/// Hilbert-Schmidt random faithful state `GG†/Tr[GG†]`.
///
/// Draws whose smallest eigenvalue is at most `10·ε_faithful` are rejected
/// and redrawn.
pub fn sample_faithful(n: usize, rng: &mut RngStream) -> DensityMatrix {
    assert!(n >= 1, "dimension must be positive");
    let cutoff = 10.0 * Tolerances::default().faithful;
    loop {
        let g = ginibre(n, n, rng);
        let w = &g * g.adjoint();
        let tr = real_trace(&w);
        if !(tr > 0.0) {
            continue;
        }
        if let Ok(rho) = DensityMatrix::new(w.unscale(tr)) {
            if rho.min_eigenvalue() > cutoff {
                return rho;
            }
        }
    }
}

/// Faithful state diagonal in the basis given by the columns of `u`.
pub fn state_with_spectrum(u: &ComplexMatrix, spectrum: &[f64]) -> Result<DensityMatrix> {
    check_dims(u.nrows(), spectrum.len())?;
    let d = crate::matcore::diag(spectrum);
    DensityMatrix::new(u * d * u.adjoint())
}
