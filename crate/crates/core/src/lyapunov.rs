//! Lyapunov exponents of the tilted chain.
//!
//! For a bounded potential `f` the exponent `c(f)` is the unique root of
//! `φ(c) = 1` where
//!
//! ```text
//! φ(c) = E_{x₀} exp(Σ_{i=0}^{τ-1} f(S_i) - cτ),   τ = first return time to x₀.
//! ```
//!
//! On a finite chain `φ` is exact linear algebra on the taboo system. The
//! same exponent is also `log ρ(diag(e^f) P)` and the limit of the finite-`n`
//! Varadhan integral; both are exposed as independent routes. The quenched
//! exponent `c(β, f)` is estimated by Monte Carlo over environment fields.
//!
//! Cycle and Varadhan code sum `f` over `i = 0..n-1`; the quenched estimator
//! sums over `i = 1..n`. The two conventions differ by a boundary term of
//! order `‖f‖∞ / n`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::chain::{ChainError, ChainSpec};
use crate::levy::{EnvironmentLaw, LevyError};
use crate::numeric::{log_sum_exp, nonneg_spectral_radius};
use crate::replica::{try_map_replicas, Estimate};
use crate::transfer::{forward_checkpoints, forward_last, ReplicaPlan, TransferError};

/// Bisection stops once the bracket is this narrow.
pub const ROOT_TOLERANCE: f64 = 1e-12;
/// `ρ(M_Q)` at or above `1 - DIVERGENCE_MARGIN` means `φ` is infinite.
pub const DIVERGENCE_MARGIN: f64 = 1e-10;
const MAX_BISECTIONS: usize = 400;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LyapunovError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Levy(#[from] LevyError),
    #[error("potential has {found} entries, chain has {expected} states")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("potential entry {index} is not finite")]
    NonFinitePotential { index: usize },
    #[error("cycle generating function diverges (taboo spectral radius {spectral_radius})")]
    Divergent { spectral_radius: f64 },
    #[error("no sign change on [{lo}, {hi}]: φ(lo) = {phi_lo}, φ(hi) = {phi_hi}")]
    BracketFailure {
        lo: f64,
        hi: f64,
        phi_lo: f64,
        phi_hi: f64,
    },
    #[error("horizon must be at least 1")]
    EmptyHorizon,
}

/// A bounded function on the states.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    values: Vec<f64>,
}

impl Potential {
    pub fn new(values: Vec<f64>) -> Result<Self, LyapunovError> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(LyapunovError::NonFinitePotential { index });
        }
        Ok(Self { values })
    }

    pub fn constant(value: f64, len: usize) -> Self {
        Self {
            values: vec![value; len],
        }
    }

    pub fn zero(len: usize) -> Self {
        Self::constant(0.0, len)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `t · f`.
    pub fn scaled(&self, t: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| t * v).collect(),
        }
    }

    fn check(&self, chain: &ChainSpec) -> Result<(), LyapunovError> {
        if self.len() != chain.len() {
            return Err(LyapunovError::DimensionMismatch {
                expected: chain.len(),
                found: self.len(),
            });
        }
        Ok(())
    }
}

/// `φ(c)` for cycles from `start`.
pub fn cycle_mgf(chain: &ChainSpec, start: usize, f: &Potential, c: f64) -> Result<f64, LyapunovError> {
    f.check(chain)?;
    chain.check_state(start)?;
    let s = chain.len();
    let tilt = |x: usize, y: usize| (f.values[x] - c).exp() * chain.prob(x, y);
    let direct = tilt(start, start);
    if s == 1 {
        return Ok(direct);
    }
    let others: Vec<usize> = (0..s).filter(|&y| y != start).collect();
    let k = others.len();
    let taboo = DMatrix::from_fn(k, k, |i, j| tilt(others[i], others[j]));
    let spectral_radius = nonneg_spectral_radius(&taboo);
    if spectral_radius.is_nan() || spectral_radius >= 1.0 - DIVERGENCE_MARGIN {
        return Err(LyapunovError::Divergent { spectral_radius });
    }
    let returns = DVector::from_iterator(k, others.iter().map(|&y| tilt(y, start)));
    let system = DMatrix::identity(k, k) - taboo;
    let h = system
        .lu()
        .solve(&returns)
        .ok_or(LyapunovError::Divergent { spectral_radius })?;
    let excursions: f64 = others.iter().zip(h.iter()).map(|(&y, hy)| tilt(start, y) * hy).sum();
    Ok(direct + excursions)
}

fn phi_or_infinity(chain: &ChainSpec, start: usize, f: &Potential, c: f64) -> Result<f64, LyapunovError> {
    match cycle_mgf(chain, start, f, c) {
        Err(LyapunovError::Divergent { .. }) => Ok(f64::INFINITY),
        other => other,
    }
}

/// Result of solving `φ(c) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleSolverReport {
    pub c: f64,
    pub phi_at_root: f64,
    /// Final bisection bracket.
    pub bracket: (f64, f64),
    pub iterations: usize,
    /// `κ(x₀)/2 - ‖f‖∞`; negative when the exponential-moment hypothesis fails.
    pub domain_margin: f64,
}

/// `c(f)`: bisection for `φ(c) = 1` on `[inf f, sup f]`, where `φ` is
/// strictly decreasing.
pub fn c_of_f(chain: &ChainSpec, start: usize, f: &Potential) -> Result<CycleSolverReport, LyapunovError> {
    f.check(chain)?;
    let domain_margin = chain.kappa(start)? / 2.0 - f.sup_norm();
    if domain_margin <= 0.0 {
        log::warn!("‖f‖∞ = {} is not below κ/2; the root may still exist", f.sup_norm());
    }
    let (mut lo, mut hi) = (f.inf(), f.sup());
    let phi_lo = phi_or_infinity(chain, start, f, lo)?;
    let phi_hi = phi_or_infinity(chain, start, f, hi)?;
    if phi_lo < 1.0 - DIVERGENCE_MARGIN || phi_hi > 1.0 + DIVERGENCE_MARGIN {
        return Err(LyapunovError::BracketFailure {
            lo,
            hi,
            phi_lo,
            phi_hi,
        });
    }
    let mut iterations = 0;
    while hi - lo > ROOT_TOLERANCE && iterations < MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi_or_infinity(chain, start, f, mid)? > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let c = 0.5 * (lo + hi);
    Ok(CycleSolverReport {
        c,
        phi_at_root: cycle_mgf(chain, start, f, c)?,
        bracket: (lo, hi),
        iterations,
        domain_margin,
    })
}

/// `log ρ(diag(e^f) P)`, the Perron-root route to `c(f)`.
pub fn perron_log_root(chain: &ChainSpec, f: &Potential) -> Result<f64, LyapunovError> {
    f.check(chain)?;
    let s = chain.len();
    let tilted = DMatrix::from_fn(s, s, |x, y| f.values[x].exp() * chain.prob(x, y));
    Ok(nonneg_spectral_radius(&tilted).ln())
}

/// `(1/n) log E_{start} exp(Σ_{i=0}^{n-1} f(S_i))`, exact.
pub fn varadhan_direct(chain: &ChainSpec, start: usize, f: &Potential, n: usize) -> Result<f64, LyapunovError> {
    f.check(chain)?;
    chain.check_state(start)?;
    if n == 0 {
        return Err(LyapunovError::EmptyHorizon);
    }
    let last = forward_last(chain, start, n - 1, |_, y| f.values[y]);
    Ok((f.values[start] + log_sum_exp(last)) / n as f64)
}

/// Central difference of `t ↦ c(t f)` at 0 next to `⟨μ, f⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeCheck {
    pub finite_difference: f64,
    pub analytic: f64,
}

impl DerivativeCheck {
    pub fn gap(&self) -> f64 {
        (self.finite_difference - self.analytic).abs()
    }
}

pub fn c_derivative_at_zero(
    chain: &ChainSpec,
    start: usize,
    f: &Potential,
    h: f64,
) -> Result<DerivativeCheck, LyapunovError> {
    let up = c_of_f(chain, start, &f.scaled(h))?.c;
    let down = c_of_f(chain, start, &f.scaled(-h))?.c;
    let mu = chain.invariant_measure()?;
    Ok(DerivativeCheck {
        finite_difference: (up - down) / (2.0 * h),
        analytic: mu.dot(f.values()),
    })
}

/// Quenched exponent estimate at horizons `n` and `2n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuenchedExponent {
    pub at_n: Estimate,
    pub at_2n: Estimate,
    /// `κ(x₀) - λ(β) - 2‖f‖∞`; negative when the hypothesis fails.
    pub hypothesis_margin: f64,
}

/// `c(β, f)` as the mean over fields of
/// `(1/n) log E_{x₀} exp(Σ_{i=1}^n (β g(i, S_i) + f(S_i)))`, with no `λ(β)`
/// subtraction. Each replica draws one field of horizon `2n` and reports both
/// horizons from a single forward pass.
pub fn c_beta_f_estimate<L: EnvironmentLaw + ?Sized>(
    chain: &ChainSpec,
    law: &L,
    start: usize,
    beta: f64,
    f: &Potential,
    plan: ReplicaPlan,
) -> Result<QuenchedExponent, LyapunovError> {
    f.check(chain)?;
    chain.check_state(start)?;
    plan.validate()?;
    let hypothesis_margin = chain.kappa(start)? - law.cumulant(beta)? - 2.0 * f.sup_norm();
    if hypothesis_margin <= 0.0 {
        log::warn!("λ(β) + 2‖f‖∞ is not below κ at beta = {beta}");
    }
    let n = plan.horizon;
    let samples = try_map_replicas(plan.replicas, plan.seed, |_, rng| {
        let field = law.sample_field(2 * n, chain.len(), rng);
        let logs = forward_checkpoints(chain, start, &[n, 2 * n], |i, y| {
            beta * field.at(i, y) + f.values[y]
        });
        Ok::<_, LyapunovError>((logs[0] / n as f64, logs[1] / (2 * n) as f64))
    })?;
    let (short, long): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
    Ok(QuenchedExponent {
        at_n: Estimate::from_samples(&short),
        at_2n: Estimate::from_samples(&long),
        hypothesis_margin,
    })
}

/// Varadhan values from two starts at one horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StartGap {
    pub value_x: f64,
    pub value_y: f64,
    pub gap: f64,
}

pub fn start_independence_check(
    chain: &ChainSpec,
    f: &Potential,
    x: usize,
    y: usize,
    n: usize,
) -> Result<StartGap, LyapunovError> {
    let value_x = varadhan_direct(chain, x, f, n)?;
    let value_y = varadhan_direct(chain, y, f, n)?;
    Ok(StartGap {
        value_x,
        value_y,
        gap: (value_x - value_y).abs(),
    })
}
