//! Strong-disorder checks.
//!
//! All statistical checks are finite-`n` surrogates of asymptotic
//! statements and use 3-standard-error bands. Wherever two quantities are
//! compared they are computed on the same fields, and the band is the
//! standard error of the per-replica difference.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainError, ChainSpec};
use crate::levy::{EnvironmentLaw, LevyError, LevyTriple};
use crate::replica::{sample_sd, try_map_replicas, Estimate};
use crate::transfer::{forward_checkpoints, replica_summaries, QuenchedSummary, ReplicaPlan, TransferError};

/// Width of every statistical band, in standard errors.
pub const BAND: f64 = 3.0;
/// The small-β check accepts `p_n ≤ SMALL_BETA_SLACK · (target)`, i.e. a
/// quarter instead of a half of `β²‖μ‖²λ''(0)`.
pub const SMALL_BETA_SLACK: f64 = 0.5;
pub const DEFAULT_SMALL_BETA: f64 = 0.2;

const GRID_POINTS: usize = 101;
const GOLDEN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DisorderError {
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Levy(#[from] LevyError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("law is degenerate")]
    DegenerateLaw,
    #[error("beta must be positive, got {0}")]
    NonPositiveBeta(f64),
    #[error("beta grid must start at 0 and increase")]
    BadGrid,
    #[error("need at least {needed} horizons, got {got}")]
    TooFewHorizons { needed: usize, got: usize },
}

/// Three-way outcome of a check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Strong,
    Undetermined,
    Violated,
}

impl Verdict {
    /// `1`, `0`, `-1` for tables.
    pub fn code(self) -> i8 {
        match self {
            Verdict::Strong => 1,
            Verdict::Undetermined => 0,
            Verdict::Violated => -1,
        }
    }
}

/// Constants of the two-sided bound `-c₂/n·E⟨⟨L_n⟩⟩ ≤ p'_n(β) ≤ -c₁/n·E⟨⟨L_n⟩⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeConstants {
    pub c1: f64,
    pub c2: f64,
    pub beta: f64,
    /// `σ²β`, shared by both constants.
    pub gaussian_part: f64,
    /// `min_{a∈[0,1]} J(a)`.
    pub jump_min: f64,
    /// Where the minimum is attained.
    pub argmin: f64,
    /// Upper bound on `sup_a J(a)` entering `c₂`.
    pub jump_bound: f64,
}

/// `J(a) = Σ_k m_k u_k e^{βu_k}(e^{βu_k} - 1) / (1 + a(e^{βu_k} - 1))`.
fn jump_integrand(triple: &LevyTriple, beta: f64, a: f64) -> f64 {
    triple
        .atoms()
        .iter()
        .map(|atom| {
            let e = (beta * atom.jump).exp();
            atom.mass * atom.jump * e * (e - 1.0) / (1.0 + a * (e - 1.0))
        })
        .sum()
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > GOLDEN_TOLERANCE {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// `c₁ = σ²β + min_{a∈[0,1]} J(a)` (101-point grid refined by golden
/// section) and `c₂ = σ²β + Σ_{u>0} m u e^{βu}(e^{βu}-1) + Σ_{u<0} m|u|(1-e^{βu})`.
pub fn derivative_constants(triple: &LevyTriple, beta: f64) -> Result<DerivativeConstants, DisorderError> {
    if triple.gauss_var() == 0.0 && triple.atoms().is_empty() {
        return Err(DisorderError::DegenerateLaw);
    }
    if beta.is_nan() || beta <= 0.0 {
        return Err(DisorderError::NonPositiveBeta(beta));
    }
    let gaussian_part = triple.gauss_var() * beta;
    let (jump_min, argmin) = if triple.atoms().is_empty() {
        (0.0, 0.0)
    } else {
        let j = |a: f64| jump_integrand(triple, beta, a);
        let step = 1.0 / (GRID_POINTS - 1) as f64;
        let best = (0..GRID_POINTS)
            .map(|k| k as f64 * step)
            .map(|a| (a, j(a)))
            .fold((0.0, f64::INFINITY), |acc, p| if p.1 < acc.1 { p } else { acc });
        let lo = (best.0 - step).max(0.0);
        let hi = (best.0 + step).min(1.0);
        let (a, v) = golden_section(j, lo, hi);
        // endpoints are common minimisers; keep whichever is lowest
        [(0.0, j(0.0)), (1.0, j(1.0)), best, (a, v)]
            .into_iter()
            .fold((f64::INFINITY, 0.0), |acc, (a, v)| if v < acc.0 { (v, a) } else { acc })
    };
    let jump_bound: f64 = triple
        .atoms()
        .iter()
        .map(|atom| {
            let e = (beta * atom.jump).exp();
            if atom.jump > 0.0 {
                atom.mass * atom.jump * e * (e - 1.0)
            } else {
                atom.mass * atom.jump.abs() * (1.0 - e)
            }
        })
        .sum();
    Ok(DerivativeConstants {
        c1: gaussian_part + jump_min,
        c2: gaussian_part + jump_bound,
        beta,
        gaussian_part,
        jump_min,
        argmin,
        jump_bound,
    })
}

fn pprime(summary: &QuenchedSummary, n: f64, slope: f64) -> f64 {
    (summary.energy - n * slope) / n
}

/// Outcome of the derivative sandwich at one β.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichReport {
    pub beta: f64,
    pub constants: DerivativeConstants,
    /// `p'_n(β)` from energy expectations.
    pub pprime: Estimate,
    /// `E⟨⟨L_n⟩⟩`.
    pub overlap: Estimate,
    /// `p'_n + (c₁/n) L_n`; must be ≤ 0 within the band.
    pub upper_gap: Estimate,
    /// `p'_n + (c₂/n) L_n`; must be ≥ 0 within the band.
    pub lower_gap: Estimate,
    pub upper_ok: bool,
    pub lower_ok: bool,
}

impl SandwichReport {
    pub fn holds(&self) -> bool {
        self.upper_ok && self.lower_ok
    }

    /// When `c₁ = c₂` the sandwich is an identity; this is the test of it.
    pub fn equality_holds(&self) -> bool {
        self.upper_gap.covers(0.0, BAND)
    }
}

fn sandwich_from(
    summaries: &[QuenchedSummary],
    constants: DerivativeConstants,
    n: usize,
    slope: f64,
) -> SandwichReport {
    let nf = n as f64;
    let d: Vec<f64> = summaries.iter().map(|s| pprime(s, nf, slope)).collect();
    let l: Vec<f64> = summaries.iter().map(|s| s.overlap).collect();
    let upper: Vec<f64> = d.iter().zip(&l).map(|(d, l)| d + constants.c1 * l / nf).collect();
    let lower: Vec<f64> = d.iter().zip(&l).map(|(d, l)| d + constants.c2 * l / nf).collect();
    let upper_gap = Estimate::from_samples(&upper);
    let lower_gap = Estimate::from_samples(&lower);
    SandwichReport {
        beta: constants.beta,
        constants,
        pprime: Estimate::from_samples(&d),
        overlap: Estimate::from_samples(&l),
        upper_gap,
        lower_gap,
        upper_ok: upper_gap.mean <= BAND * upper_gap.stderr,
        lower_ok: lower_gap.mean >= -BAND * lower_gap.stderr,
    }
}

pub fn sandwich_check(
    chain: &ChainSpec,
    triple: &LevyTriple,
    beta: f64,
    plan: ReplicaPlan,
) -> Result<SandwichReport, DisorderError> {
    let constants = derivative_constants(triple, beta)?;
    let slope = triple.cumulant_derivative(beta)?;
    let per_replica = replica_summaries(chain, triple, &[beta], plan)?;
    let column: Vec<QuenchedSummary> = per_replica.iter().map(|r| r[0]).collect();
    Ok(sandwich_from(&column, constants, plan.horizon, slope))
}

/// A β-scan on common fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderScan {
    pub beta_grid: Vec<f64>,
    pub pn: Vec<Estimate>,
    pub overlap: Vec<f64>,
    pub pprime_cov: Vec<Estimate>,
    pub sandwich_ok: Vec<bool>,
    /// Grid indices `i` where `p_n(β_i) - p_n(β_{i-1})` exceeds the band.
    pub increases: Vec<usize>,
    pub verdicts: Vec<Verdict>,
}

impl DisorderScan {
    pub fn is_monotone(&self) -> bool {
        self.increases.is_empty()
    }
}

/// `p_n` over an increasing grid starting at 0, with overlap, derivative and
/// sandwich at each point. Verdicts: `Violated` on a significant increase,
/// a positive `p_n` beyond the band, or a failed sandwich; `Strong` when
/// `p_n` is significantly negative; `Undetermined` otherwise.
pub fn monotonicity_scan(
    chain: &ChainSpec,
    triple: &LevyTriple,
    beta_grid: &[f64],
    plan: ReplicaPlan,
) -> Result<DisorderScan, DisorderError> {
    if beta_grid.first() != Some(&0.0) || beta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DisorderError::BadGrid);
    }
    let n = plan.horizon as f64;
    let per_replica = replica_summaries(chain, triple, beta_grid, plan)?;
    let column = |j: usize| -> Vec<QuenchedSummary> { per_replica.iter().map(|r| r[j]).collect() };

    let mut scan = DisorderScan {
        beta_grid: beta_grid.to_vec(),
        pn: Vec::new(),
        overlap: Vec::new(),
        pprime_cov: Vec::new(),
        sandwich_ok: Vec::new(),
        increases: Vec::new(),
        verdicts: Vec::new(),
    };
    for (j, &beta) in beta_grid.iter().enumerate() {
        let col = column(j);
        let pn_samples: Vec<f64> = col.iter().map(|s| s.log_z / n).collect();
        let pn = Estimate::from_samples(&pn_samples);
        let slope = triple.cumulant_derivative(beta)?;
        let sandwich_ok = if beta > 0.0 {
            sandwich_from(&col, derivative_constants(triple, beta)?, plan.horizon, slope).holds()
        } else {
            true
        };
        let increased = j > 0 && {
            let diffs: Vec<f64> = per_replica
                .iter()
                .map(|r| (r[j].log_z - r[j - 1].log_z) / n)
                .collect();
            let d = Estimate::from_samples(&diffs);
            d.mean > BAND * d.stderr
        };
        if increased {
            scan.increases.push(j);
        }
        let verdict = if increased || !sandwich_ok || pn.mean > BAND * pn.stderr {
            Verdict::Violated
        } else if pn.mean + BAND * pn.stderr < 0.0 {
            Verdict::Strong
        } else {
            Verdict::Undetermined
        };
        let pprime_samples: Vec<f64> = col.iter().map(|s| pprime(s, n, slope)).collect();
        scan.pn.push(pn);
        scan.overlap.push(Estimate::from_samples(&col.iter().map(|s| s.overlap).collect::<Vec<_>>()).mean);
        scan.pprime_cov.push(Estimate::from_samples(&pprime_samples));
        scan.sandwich_ok.push(sandwich_ok);
        scan.verdicts.push(verdict);
    }
    Ok(scan)
}

/// Comparison of `p_n(β)` with `-½β²‖μ‖²λ''(0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallBetaReport {
    pub beta: f64,
    pub pn: Estimate,
    /// `-½ β² ‖μ‖² λ''(0)`.
    pub target: f64,
    /// `SMALL_BETA_SLACK · target`.
    pub threshold: f64,
    pub passed: bool,
}

pub fn smallbeta_bound_check(
    chain: &ChainSpec,
    triple: &LevyTriple,
    beta: f64,
    plan: ReplicaPlan,
) -> Result<SmallBetaReport, DisorderError> {
    let mu = chain.invariant_measure()?;
    let target = -0.5 * beta * beta * mu.norm_squared() * triple.variance();
    let threshold = SMALL_BETA_SLACK * target;
    let pn = crate::transfer::pn_estimate(chain, triple, beta, plan)?;
    Ok(SmallBetaReport {
        beta,
        pn,
        target,
        threshold,
        passed: pn.mean <= threshold + BAND * pn.stderr,
    })
}

/// Per-replica `log Z_n` at each horizon of `horizons` (increasing), one
/// field of the largest horizon per replica.
fn log_partitions_at<L: EnvironmentLaw + ?Sized>(
    chain: &ChainSpec,
    law: &L,
    beta: f64,
    horizons: &[usize],
    replicas: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, DisorderError> {
    let longest = *horizons.last().expect("nonempty horizons");
    ReplicaPlan::new(longest, replicas, seed).validate()?;
    let lambda = law.cumulant(beta)?;
    try_map_replicas(replicas, seed, |_, rng| {
        let field = law.sample_field(longest, chain.len(), rng);
        if beta == 0.0 {
            return Ok::<_, DisorderError>(vec![0.0; horizons.len()]);
        }
        Ok(forward_checkpoints(chain, chain.start(), horizons, |i, y| {
            beta * field.at(i, y) - lambda
        }))
    })
}

fn sorted_horizons(n_grid: &[usize], needed: usize) -> Result<Vec<usize>, DisorderError> {
    let mut h = n_grid.to_vec();
    h.sort_unstable();
    h.dedup();
    if h.len() < needed || h[0] == 0 {
        return Err(DisorderError::TooFewHorizons {
            needed,
            got: h.iter().filter(|&&n| n > 0).count(),
        });
    }
    Ok(h)
}

/// Weighted least-squares line through `E log Z_n` versus `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub horizons: Vec<usize>,
    pub mean_log_z: Vec<Estimate>,
    pub slope: Estimate,
    pub intercept: Estimate,
    /// `slope ± BAND · stderr`.
    pub ci: (f64, f64),
    pub verdict: Verdict,
}

/// Fits `E log Z_n ≈ a + b n` with weights `1/se_n²` (unit weights when all
/// standard errors vanish). The fit is a fixed linear functional of the
/// per-horizon means, so applying it to each replica's own `log Z_n` sequence
/// gives per-replica slopes whose spread yields a standard error that
/// accounts for the correlation between horizons sharing a field.
pub fn decay_fit(
    chain: &ChainSpec,
    triple: &LevyTriple,
    beta: f64,
    n_grid: &[usize],
    replicas: usize,
    seed: u64,
) -> Result<DecayFit, DisorderError> {
    let horizons = sorted_horizons(n_grid, 4)?;
    let per_replica = log_partitions_at(chain, triple, beta, &horizons, replicas, seed)?;
    let k = horizons.len();
    let mean_log_z: Vec<Estimate> = (0..k)
        .map(|j| Estimate::from_samples(&per_replica.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect();
    let weights: Vec<f64> = if mean_log_z.iter().all(|e| e.stderr > 0.0) {
        mean_log_z.iter().map(|e| 1.0 / (e.stderr * e.stderr)).collect()
    } else {
        vec![1.0; k]
    };
    let xs: Vec<f64> = horizons.iter().map(|&n| n as f64).collect();
    let sw: f64 = weights.iter().sum();
    let xbar = weights.iter().zip(&xs).map(|(w, x)| w * x).sum::<f64>() / sw;
    let sxx: f64 = weights.iter().zip(&xs).map(|(w, x)| w * (x - xbar).powi(2)).sum();
    // slope = Σ a_j y_j, intercept = Σ b_j y_j
    let a: Vec<f64> = weights.iter().zip(&xs).map(|(w, x)| w * (x - xbar) / sxx).collect();
    let b: Vec<f64> = weights.iter().zip(&a).map(|(w, aj)| w / sw - xbar * aj).collect();
    let slopes: Vec<f64> = per_replica
        .iter()
        .map(|r| r.iter().zip(&a).map(|(y, aj)| aj * y).sum())
        .collect();
    let intercepts: Vec<f64> = per_replica
        .iter()
        .map(|r| r.iter().zip(&b).map(|(y, bj)| bj * y).sum())
        .collect();
    let slope = if beta == 0.0 {
        Estimate::exact(0.0)
    } else {
        Estimate::from_samples(&slopes)
    };
    let intercept = Estimate::from_samples(&intercepts);
    let ci = (slope.mean - BAND * slope.stderr, slope.mean + BAND * slope.stderr);
    let verdict = if ci.1 < 0.0 {
        Verdict::Strong
    } else if ci.0 > 0.0 {
        Verdict::Violated
    } else {
        Verdict::Undetermined
    };
    Ok(DecayFit {
        horizons,
        mean_log_z,
        slope,
        intercept,
        ci,
        verdict,
    })
}

/// Empirical standard deviation of `(1/n) log Z_n` at each horizon.
pub fn concentration_probe(
    chain: &ChainSpec,
    triple: &LevyTriple,
    beta: f64,
    n_grid: &[usize],
    replicas: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>, DisorderError> {
    let horizons = sorted_horizons(n_grid, 1)?;
    let per_replica = log_partitions_at(chain, triple, beta, &horizons, replicas, seed)?;
    Ok(horizons
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let scaled: Vec<f64> = per_replica.iter().map(|r| r[j] / n as f64).collect();
            (n, sample_sd(&scaled))
        })
        .collect())
}

/// Least-squares slope of `log sd` against `log n`.
pub fn log_log_slope(points: &[(usize, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / k;
    let ybar = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    sxy / sxx
}
