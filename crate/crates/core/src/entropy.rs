//! Quantum relative entropies, maximal f-divergences and Kraus channels.
//!
//! All values are in nats.

use std::fmt;
use std::sync::Arc;

use crate::commonbasis::{cb_measures, common_basis};
use crate::ensembles::{f_divergence, kl_divergence};
use crate::error::{check_dims, Error, Result};
use crate::matcore::{gram_eig, hermitize, identity, real_trace, ComplexMatrix};
use crate::states::{ginibre, DensityMatrix, RngStream};

type Generator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Convex generator `f` with `f(1) = 0` for an f-divergence.
///
/// `operator_convex` is trusted, not verified.
#[derive(Clone)]
pub struct DivergenceGenerator {
    name: String,
    f: Generator,
    operator_convex: bool,
}

impl fmt::Debug for DivergenceGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DivergenceGenerator")
            .field("name", &self.name)
            .field("operator_convex", &self.operator_convex)
            .finish()
    }
}

impl DivergenceGenerator {
    pub fn new<F>(name: impl Into<String>, f: F, operator_convex: bool) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let name = name.into();
        let at_one = f(1.0);
        if !(at_one.abs() <= 1e-14) {
            return Err(Error::InvalidArgument(format!(
                "generator {name} has f(1) = {at_one:e}, expected 0"
            )));
        }
        Ok(DivergenceGenerator {
            name,
            f: Arc::new(f),
            operator_convex,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_operator_convex(&self) -> bool {
        self.operator_convex
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    /// `x log x`, the generator of KL and of the BS entropy.
    pub fn x_log_x() -> Self {
        Self::new("x_log_x", |x: f64| if x == 0.0 { 0.0 } else { x * x.ln() }, true).unwrap()
    }

    /// `x² − x`, a χ²-type generator.
    pub fn x_squared_minus_x() -> Self {
        Self::new("x_squared_minus_x", |x: f64| x * x - x, true).unwrap()
    }

    /// `−log x`, the reverse-KL generator.
    pub fn neg_log() -> Self {
        Self::new("neg_log", |x: f64| -x.ln(), true).unwrap()
    }

    pub fn registry() -> Vec<Self> {
        vec![Self::x_log_x(), Self::x_squared_minus_x(), Self::neg_log()]
    }

    pub fn by_name(name: &str) -> Option<Self> {
        Self::registry().into_iter().find(|g| g.name == name)
    }
}

fn require_pair(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<()> {
    check_dims(rho.dim(), sigma.dim())?;
    rho.require_faithful("rho")?;
    sigma.require_faithful("sigma")
}

/// `Tr[ρ log ρ] − Tr[ρ log σ]`.
pub fn umegaki(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    require_pair(rho, sigma)?;
    let neg_entropy: f64 = rho.eigenvalues().iter().map(|&p| p * p.ln()).sum();
    let log_sigma = sigma.spectrum().apply(f64::ln, 0.0)?;
    let cross = real_trace(&(rho.matrix() * log_sigma));
    Ok(neg_entropy - cross)
}

/// `Tr[ρ log(√ρ σ⁻¹ √ρ)]`.
pub fn bs_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    require_pair(rho, sigma)?;
    let sqrt_rho = rho.spectrum().apply(f64::sqrt, 0.0)?;
    let sigma_inv = sigma.spectrum().apply(f64::recip, 0.0)?;
    let inner = hermitize(&(&sqrt_rho * sigma_inv * &sqrt_rho));
    let log_inner = crate::matcore::herm_eig(&inner)?.apply(f64::ln, 0.0)?;
    Ok(real_trace(&(rho.matrix() * log_inner)))
}

/// KL divergence of the common-basis measures.
pub fn unr_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    require_pair(rho, sigma)?;
    let (mu, nu) = cb_measures(&common_basis(rho, sigma)?)?;
    kl_divergence(&mu, &nu)
}

/// `Tr[σ f(σ^{-1/2} ρ σ^{-1/2})]`, evaluated in the eigenbasis of `σ`.
pub fn max_f_divergence(rho: &DensityMatrix, sigma: &DensityMatrix, f: &DivergenceGenerator) -> Result<f64> {
    require_pair(rho, sigma)?;
    if !f.operator_convex {
        return Err(Error::NotOperatorConvex(f.name.clone()));
    }
    // In σ's eigenbasis, σ^{-1/2}ρσ^{-1/2} = C†C with C = P^{1/2} W†V Λ^{-1/2},
    // and Tr[σ f(C†C)] = Σ_j f(x_j) Σ_k λ_k |z_jk|².
    let (p, w) = (rho.eigenvalues(), &rho.spectrum().eigenvectors);
    let (lam, v) = (sigma.eigenvalues(), &sigma.spectrum().eigenvectors);
    let mut c = w.adjoint() * v;
    for (i, pi) in p.iter().enumerate() {
        c.row_mut(i).scale_mut(pi.sqrt());
    }
    for (j, l) in lam.iter().enumerate() {
        c.column_mut(j).scale_mut(l.sqrt().recip());
    }
    let eig = gram_eig(&c)?;
    let mut total = 0.0;
    for (j, &x) in eig.eigenvalues.iter().enumerate() {
        let z = eig.eigenvectors.column(j);
        let weight: f64 = lam.iter().zip(z.iter()).map(|(l, zk)| l * zk.norm_sqr()).sum();
        total += weight * f.eval(x);
    }
    Ok(total)
}

/// `f_divergence(μ_CB, ν_CB, f)`; the classical side of the maximal f-divergence.
pub fn cb_f_divergence(rho: &DensityMatrix, sigma: &DensityMatrix, f: &DivergenceGenerator) -> Result<f64> {
    require_pair(rho, sigma)?;
    let (mu, nu) = cb_measures(&common_basis(rho, sigma)?)?;
    f_divergence(&mu, &nu, f)
}

/// Completely positive trace-preserving map in Kraus form.
#[derive(Debug, Clone)]
pub struct KrausMap {
    operators: Vec<ComplexMatrix>,
    input_dim: usize,
    output_dim: usize,
}

impl KrausMap {
    pub fn new(operators: Vec<ComplexMatrix>) -> Result<Self> {
        let first = operators
            .first()
            .ok_or_else(|| Error::InvalidArgument("Kraus map needs at least one operator".into()))?;
        let (output_dim, input_dim) = first.shape();
        let mut sum = ComplexMatrix::zeros(input_dim, input_dim);
        for k in &operators {
            check_dims(output_dim, k.nrows())?;
            check_dims(input_dim, k.ncols())?;
            sum += k.adjoint() * k;
        }
        let deviation = (sum - identity(input_dim)).camax();
        if !(deviation <= 1e-10) {
            return Err(Error::NotTracePreserving { deviation });
        }
        Ok(KrausMap {
            operators,
            input_dim,
            output_dim,
        })
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }
}

/// `Σ K_j ρ K_j†`.
pub fn apply_cptp(phi: &KrausMap, rho: &DensityMatrix) -> Result<DensityMatrix> {
    check_dims(phi.input_dim, rho.dim())?;
    let mut out = ComplexMatrix::zeros(phi.output_dim, phi.output_dim);
    for k in &phi.operators {
        out += k * rho.matrix() * k.adjoint();
    }
    DensityMatrix::new(hermitize(&out))
}

/// Random channel from the orthonormalized columns of `k` stacked Ginibre blocks.
pub fn random_cptp(n_in: usize, n_out: usize, k: usize, rng: &mut RngStream) -> Result<KrausMap> {
    if k == 0 || n_in == 0 || n_out == 0 {
        return Err(Error::InvalidArgument("random_cptp needs positive dimensions and k".into()));
    }
    if k * n_out < n_in {
        return Err(Error::InvalidArgument(format!(
            "k·n_out = {} is smaller than n_in = {n_in}",
            k * n_out
        )));
    }
    let stacked = ginibre(k * n_out, n_in, rng);
    let (mut q, r) = stacked.qr().unpack();
    // Fix the column phases so the draw does not depend on QR sign conventions.
    for j in 0..n_in {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            for i in 0..q.nrows() {
                q[(i, j)] *= phase;
            }
        }
    }
    let operators = (0..k).map(|j| q.rows(j * n_out, n_out).into_owned()).collect();
    KrausMap::new(operators)
}
