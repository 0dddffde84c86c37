//! Large deviations of empirical measures drawn from a basis-supported reference.
//!
//! Samples `ψ_1, …, ψ_n` are drawn i.i.d. from a reference ensemble `ν`
//! realizing `σ`. The empirical state `Λ(ν_n)` depends only on the count
//! vector, so the probability that it lands in the open trace-distance ball
//! `B_ε(ρ)` is an exact finite sum of multinomial terms. For `ν = ν_CB` the
//! decay rate approaches `D_BS(ρ‖σ)`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::factorial::ln_factorial;

use crate::commonbasis::{cb_measures, common_basis, CommonBasis};
use crate::ensembles::{realize, DiscreteEnsemble};
use crate::entropy::bs_entropy;
use crate::error::{check_dims, Error, Result};
use crate::matcore::ComplexMatrix;
use crate::states::{half_trace_norm, trace_distance, DensityMatrix, RngStream};

/// Largest number of reference atoms accepted for exact enumeration.
pub const MAX_ATOMS: usize = 4;
/// Largest sample size accepted for exact enumeration.
pub const MAX_SAMPLES: u64 = 400;
/// Distance within which `realize(ν)` must reproduce `σ`.
pub const REFERENCE_TOL: f64 = 1e-9;
/// Monte Carlo trials per independent random stream.
const MC_BLOCK: usize = 1000;

/// Multiplicities of each reference atom in a sample of size `Σ counts`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CountVector {
    counts: Vec<u64>,
}

impl CountVector {
    pub fn new(counts: Vec<u64>) -> Self {
        CountVector { counts }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Largest-remainder rounding of `n·weights`, the closest type to `weights`.
    pub fn nearest(weights: &[f64], n: u64) -> Self {
        let scaled: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
        let mut counts: Vec<u64> = scaled.iter().map(|x| x.floor() as u64).collect();
        let mut missing = n.saturating_sub(counts.iter().sum());
        let mut order: Vec<usize> = (0..weights.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = scaled[a] - scaled[a].floor();
            let rb = scaled[b] - scaled[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if missing == 0 {
                break;
            }
            counts[i] += 1;
            missing -= 1;
        }
        CountVector { counts }
    }
}

/// `log[n!/Π c_i!] + Σ c_i log w_i`.
pub fn log_multinomial(counts: &CountVector, weights: &[f64]) -> Result<f64> {
    check_dims(weights.len(), counts.counts.len())?;
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidWeights(format!("weight {w} is not strictly positive")));
    }
    let mut total = ln_factorial(counts.total());
    for (&c, &w) in counts.counts.iter().zip(weights) {
        if c > 0 {
            total += c as f64 * w.ln() - ln_factorial(c);
        }
    }
    Ok(total)
}

/// Number of count vectors with `k` cells summing to `n`: `C(n+k−1, k−1)`.
pub fn enumeration_size(k: usize, n: u64) -> u128 {
    if k == 0 {
        return u128::from(n == 0);
    }
    let mut size: u128 = 1;
    for i in 1..k as u128 {
        size = size * (n as u128 + i) / i;
    }
    size
}

#[derive(Debug, Clone)]
pub struct LdpExperiment {
    rho: DensityMatrix,
    sigma: DensityMatrix,
    cb: CommonBasis,
    reference: DiscreteEnsemble,
    projectors: Vec<ComplexMatrix>,
    epsilon: f64,
    sample_sizes: Vec<u64>,
}

impl LdpExperiment {
    /// Experiment sampling from `ν_CB`.
    pub fn new(rho: DensityMatrix, sigma: DensityMatrix, epsilon: f64, sample_sizes: Vec<u64>) -> Result<Self> {
        check_dims(rho.dim(), sigma.dim())?;
        rho.require_faithful("rho")?;
        sigma.require_faithful("sigma")?;
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon = {epsilon} must lie in (0, 1]")));
        }
        let cb = common_basis(&rho, &sigma)?;
        let (_, nu) = cb_measures(&cb)?;
        let projectors = nu.atoms().iter().map(|a| a.projector()).collect();
        Ok(LdpExperiment {
            rho,
            sigma,
            cb,
            reference: nu,
            projectors,
            epsilon,
            sample_sizes,
        })
    }

    /// Replaces the reference by another realization of `σ`.
    pub fn with_reference(mut self, reference: DiscreteEnsemble) -> Result<Self> {
        check_dims(self.sigma.dim(), reference.dim())?;
        let distance = trace_distance(&realize(&reference)?, &self.sigma)?;
        if distance > REFERENCE_TOL {
            return Err(Error::ReferenceMismatch { distance });
        }
        self.projectors = reference.atoms().iter().map(|a| a.projector()).collect();
        self.reference = reference;
        Ok(self)
    }

    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn sigma(&self) -> &DensityMatrix {
        &self.sigma
    }

    pub fn common_basis(&self) -> &CommonBasis {
        &self.cb
    }

    pub fn reference(&self) -> &DiscreteEnsemble {
        &self.reference
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn sample_sizes(&self) -> &[u64] {
        &self.sample_sizes
    }

    pub fn atoms(&self) -> usize {
        self.reference.len()
    }

    /// `D_BS(ρ‖σ)`, the limiting rate for the common-basis reference.
    pub fn d_bs(&self) -> Result<f64> {
        bs_entropy(&self.rho, &self.sigma)
    }

    /// Finite-n allowance for `|rate − D_BS|`: `2k log(n)/n + ε·spread`,
    /// where `spread` is the range of `log(ρ_i/σ_i)` over the common basis.
    pub fn tolerance_budget(&self, n: u64) -> f64 {
        let k = self.atoms() as f64;
        let n = n.max(2) as f64;
        let logs: Vec<f64> = self
            .cb
            .rho_coeffs()
            .iter()
            .zip(self.cb.sigma_coeffs())
            .map(|(r, s)| (r / s).ln())
            .collect();
        let spread = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - logs.iter().cloned().fold(f64::INFINITY, f64::min);
        2.0 * k * n.ln() / n + self.epsilon * spread
    }

    fn check_budget(&self, n: u64) -> Result<()> {
        let k = self.atoms();
        if k > MAX_ATOMS || n > MAX_SAMPLES {
            return Err(Error::BudgetExceeded {
                size: enumeration_size(k, n),
                atoms: k,
                n,
            });
        }
        Ok(())
    }

    /// Whether the empirical state of `counts` lies in the open ball.
    pub fn inside(&self, counts: &[u64]) -> Result<bool> {
        Ok(self.distance_of(counts)? < self.epsilon)
    }

    fn distance_of(&self, counts: &[u64]) -> Result<f64> {
        let n: u64 = counts.iter().sum();
        let dim = self.rho.dim();
        let mut diff = -self.rho.matrix().clone();
        if n > 0 {
            for (p, &c) in self.projectors.iter().zip(counts) {
                if c > 0 {
                    diff += p.scale(c as f64 / n as f64);
                }
            }
        }
        if dim == 2 {
            // Eigenvalues m ± r, so ½(|m+r| + |m−r|) = max(|m|, r).
            let m = 0.5 * (diff[(0, 0)].re + diff[(1, 1)].re);
            let h = 0.5 * (diff[(0, 0)].re - diff[(1, 1)].re);
            let r = (h * h + diff[(0, 1)].norm_sqr()).sqrt();
            return Ok(m.abs().max(r));
        }
        half_trace_norm(&diff)
    }
}

/// Exact ball probability at sample size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallProbability {
    pub n: u64,
    pub log_prob: f64,
    pub prob: f64,
    /// `−log(prob)/n`; `+∞` when no count vector lies in the ball.
    pub rate: f64,
    pub enumerated: u128,
    pub inside: u128,
}

/// Running `log Σ exp(x)` with count.
#[derive(Debug, Clone, Copy)]
struct LogSum {
    max: f64,
    scaled: f64,
    count: u128,
}

impl LogSum {
    const EMPTY: LogSum = LogSum {
        max: f64::NEG_INFINITY,
        scaled: 0.0,
        count: 0,
    };

    fn push(&mut self, x: f64) {
        self.count += 1;
        if x <= self.max {
            self.scaled += (x - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    fn merge(self, other: LogSum) -> LogSum {
        if other.count == 0 {
            return LogSum {
                count: self.count,
                ..self
            };
        }
        if self.count == 0 {
            return other;
        }
        let max = self.max.max(other.max);
        LogSum {
            max,
            scaled: self.scaled * (self.max - max).exp() + other.scaled * (other.max - max).exp(),
            count: self.count + other.count,
        }
    }

    fn value(&self) -> f64 {
        if self.count == 0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// Calls `visit` on every count vector with `slots.len()` cells summing to `n`.
fn for_each_composition(slots: &mut [u64], n: u64, visit: &mut dyn FnMut(&[u64]) -> Result<()>) -> Result<()> {
    fn rec(slots: &mut [u64], pos: usize, left: u64, visit: &mut dyn FnMut(&[u64]) -> Result<()>) -> Result<()> {
        if pos + 1 == slots.len() {
            slots[pos] = left;
            return visit(slots);
        }
        for c in 0..=left {
            slots[pos] = c;
            rec(slots, pos + 1, left - c, visit)?;
        }
        Ok(())
    }
    if slots.is_empty() {
        return Ok(());
    }
    rec(slots, 0, n, visit)
}

/// Sums multinomial probabilities of all count vectors inside the ball.
///
/// Work is split on the first count; partial sums are combined in order, so
/// the result does not depend on the thread count.
pub fn ball_probability_exact(exp: &LdpExperiment, n: u64) -> Result<BallProbability> {
    exp.check_budget(n)?;
    let k = exp.atoms();
    let weights = exp.reference.weights();
    let log_w: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let ln_n_fact = ln_factorial(n);
    let chunks: Vec<LogSum> = (0..=n)
        .into_par_iter()
        .map(|first| -> Result<LogSum> {
            let mut acc = LogSum::EMPTY;
            let mut slots = vec![0u64; k];
            slots[0] = first;
            let mut visit = |counts: &[u64]| -> Result<()> {
                if exp.inside(counts)? {
                    let mut lp = ln_n_fact;
                    for (&c, lw) in counts.iter().zip(&log_w) {
                        if c > 0 {
                            lp += c as f64 * lw - ln_factorial(c);
                        }
                    }
                    acc.push(lp);
                }
                Ok(())
            };
            if k == 1 {
                if first == n {
                    visit(&slots)?;
                }
            } else {
                let (head, tail) = slots.split_at_mut(1);
                let mut full = |rest: &[u64]| -> Result<()> {
                    let mut counts = Vec::with_capacity(k);
                    counts.push(head[0]);
                    counts.extend_from_slice(rest);
                    visit(&counts)
                };
                for_each_composition(tail, n - first, &mut full)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let total = chunks.into_iter().fold(LogSum::EMPTY, LogSum::merge);
    let log_prob = total.value().min(0.0);
    let rate = if total.count == 0 {
        f64::INFINITY
    } else if n == 0 {
        0.0
    } else {
        (-log_prob / n as f64).max(0.0)
    };
    Ok(BallProbability {
        n,
        log_prob,
        prob: log_prob.exp(),
        rate,
        enumerated: enumeration_size(k, n),
        inside: total.count,
    })
}

/// Monte Carlo estimate of the ball probability with its binomial standard error.
///
/// Block `b` of 1000 trials draws from `rng.child(b)`.
pub fn ball_probability_mc(exp: &LdpExperiment, n: u64, trials: usize, rng: &RngStream) -> Result<(f64, f64)> {
    if trials < MC_BLOCK {
        return Err(Error::InvalidArgument(format!("need at least {MC_BLOCK} trials, got {trials}")));
    }
    let sampler = WeightedIndex::new(exp.reference.weights())
        .map_err(|e| Error::InvalidWeights(e.to_string()))?;
    let blocks = trials.div_ceil(MC_BLOCK);
    let hits: Vec<usize> = (0..blocks)
        .into_par_iter()
        .map(|b| -> Result<usize> {
            let mut stream = rng.child(b as u64);
            let len = MC_BLOCK.min(trials - b * MC_BLOCK);
            let mut counts = vec![0u64; exp.atoms()];
            let mut hits = 0;
            for _ in 0..len {
                counts.iter_mut().for_each(|c| *c = 0);
                for _ in 0..n {
                    counts[sampler.sample(&mut stream)] += 1;
                }
                if exp.inside(&counts)? {
                    hits += 1;
                }
            }
            Ok(hits)
        })
        .collect::<Result<_>>()?;
    let p = hits.iter().sum::<usize>() as f64 / trials as f64;
    Ok((p, (p * (1.0 - p) / trials as f64).sqrt()))
}

/// One row of a rate curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint {
    pub n: u64,
    pub prob: f64,
    pub rate: f64,
    pub tolerance_budget: f64,
}

/// Exact rates at every configured sample size.
pub fn rate_curve(exp: &LdpExperiment) -> Result<Vec<RatePoint>> {
    for &n in &exp.sample_sizes {
        exp.check_budget(n)?;
    }
    exp.sample_sizes
        .iter()
        .map(|&n| {
            let b = ball_probability_exact(exp, n)?;
            Ok(RatePoint {
                n,
                prob: b.prob,
                rate: b.rate,
                tolerance_budget: exp.tolerance_budget(n),
            })
        })
        .collect()
}
