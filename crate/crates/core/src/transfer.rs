//! Exact quenched computations for one environment realisation, and their
//! Monte Carlo aggregation over realisations.
//!
//! For a field `g` the normalised partition function is
//! `Z_n(β) = E_{x₀} exp(β Σ_{i=1}^n g(i, S_i) - nλ(β))`; `S_0` carries no
//! energy. Everything runs in the log domain: `logv_0 = 0` at the start
//! state and `-inf` elsewhere, then
//!
//! ```text
//! logv_i(y) = logsumexp_x(logv_{i-1}(x) + log P(x, y)) + βg(i, y) - λ(β)
//! ```
//!
//! Gibbs marginals come from the matching backward pass.

use thiserror::Error;

use crate::chain::ChainSpec;
use crate::levy::{EnvironmentField, EnvironmentLaw, LevyError};
use crate::numeric::log_sum_exp;
use crate::replica::{try_map_replicas, Estimate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransferError {
    #[error("field has {found} states, chain has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error("need at least 2 replicas, got {0}")]
    TooFewReplicas(usize),
    #[error(transparent)]
    Levy(#[from] LevyError),
}

/// Horizon, replica count and master seed of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplicaPlan {
    pub horizon: usize,
    pub replicas: usize,
    pub seed: u64,
}

impl ReplicaPlan {
    pub fn new(horizon: usize, replicas: usize, seed: u64) -> Self {
        Self {
            horizon,
            replicas,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), TransferError> {
        if self.horizon == 0 {
            return Err(TransferError::EmptyHorizon);
        }
        if self.replicas < 2 {
            return Err(TransferError::TooFewReplicas(self.replicas));
        }
        Ok(())
    }

    pub fn with_horizon(self, horizon: usize) -> Self {
        Self { horizon, ..self }
    }
}

/// Log-domain forward rows `0..=steps` of the weighted path sum started at
/// `start`, site weight `weight(i, y)` for `i ≥ 1`.
pub(crate) fn forward_table(
    chain: &ChainSpec,
    start: usize,
    steps: usize,
    weight: impl Fn(usize, usize) -> f64,
) -> Vec<Vec<f64>> {
    let s = chain.len();
    let mut rows = Vec::with_capacity(steps + 1);
    let mut current = vec![f64::NEG_INFINITY; s];
    current[start] = 0.0;
    rows.push(current);
    for i in 1..=steps {
        let next = forward_step(chain, &rows[i - 1], |y| weight(i, y));
        rows.push(next);
    }
    rows
}

/// Final forward row only.
pub(crate) fn forward_last(
    chain: &ChainSpec,
    start: usize,
    steps: usize,
    weight: impl Fn(usize, usize) -> f64,
) -> Vec<f64> {
    let mut current = vec![f64::NEG_INFINITY; chain.len()];
    current[start] = 0.0;
    for i in 1..=steps {
        current = forward_step(chain, &current, |y| weight(i, y));
    }
    current
}

/// `logsumexp` of the forward row at each of `checkpoints` (increasing),
/// from a single pass.
pub(crate) fn forward_checkpoints(
    chain: &ChainSpec,
    start: usize,
    checkpoints: &[usize],
    weight: impl Fn(usize, usize) -> f64,
) -> Vec<f64> {
    debug_assert!(checkpoints.windows(2).all(|w| w[0] < w[1]));
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut current = vec![f64::NEG_INFINITY; chain.len()];
    current[start] = 0.0;
    let mut step = 0;
    for &target in checkpoints {
        while step < target {
            step += 1;
            current = forward_step(chain, &current, |y| weight(step, y));
        }
        out.push(log_sum_exp(current.iter().copied()));
    }
    out
}

#[inline]
fn forward_step(chain: &ChainSpec, prev: &[f64], weight: impl Fn(usize) -> f64) -> Vec<f64> {
    let s = chain.len();
    (0..s)
        .map(|y| {
            let incoming = log_sum_exp((0..s).map(|x| prev[x] + chain.log_prob(x, y)));
            if incoming == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                incoming + weight(y)
            }
        })
        .collect()
}

fn check_dims(chain: &ChainSpec, field: &EnvironmentField) -> Result<(), TransferError> {
    if field.num_states() != chain.len() {
        return Err(TransferError::DimensionMismatch {
            expected: chain.len(),
            found: field.num_states(),
        });
    }
    if field.horizon() == 0 {
        return Err(TransferError::EmptyHorizon);
    }
    Ok(())
}

/// `log Z_n(β)` for one field. Exactly 0 at `β = 0`.
pub fn log_partition<L: EnvironmentLaw + ?Sized>(
    chain: &ChainSpec,
    field: &EnvironmentField,
    law: &L,
    beta: f64,
) -> Result<f64, TransferError> {
    check_dims(chain, field)?;
    if beta == 0.0 {
        return Ok(0.0);
    }
    let lambda = law.cumulant(beta)?;
    let last = forward_last(chain, chain.start(), field.horizon(), |i, y| {
        beta * field.at(i, y) - lambda
    });
    Ok(log_sum_exp(last))
}

/// Quenched one-time marginals `q[i][x] = ⟨1{S_i = x}⟩` for `i = 1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsMarginals {
    n: usize,
    num_states: usize,
    q: Vec<f64>,
}

impl GibbsMarginals {
    pub fn horizon(&self) -> usize {
        self.n
    }

    /// Row of time `time` in `1..=n`.
    pub fn row(&self, time: usize) -> &[f64] {
        let start = (time - 1) * self.num_states;
        &self.q[start..start + self.num_states]
    }

    pub fn at(&self, time: usize, state: usize) -> f64 {
        self.row(time)[state]
    }

    /// `Σ_{i,x} q[i][x]²`, the mean two-replica overlap `⟨⟨L_n⟩⟩`.
    pub fn overlap(&self) -> f64 {
        self.q.iter().map(|v| v * v).sum()
    }

    /// `Σ_{i,x} g(i,x) q[i][x]`.
    pub fn energy(&self, field: &EnvironmentField) -> f64 {
        self.q.iter().zip(field.values()).map(|(q, g)| q * g).sum()
    }
}

struct Marginals {
    log_z: f64,
    marginals: GibbsMarginals,
}

fn forward_backward<L: EnvironmentLaw + ?Sized>(
    chain: &ChainSpec,
    field: &EnvironmentField,
    law: &L,
    beta: f64,
) -> Result<Marginals, TransferError> {
    check_dims(chain, field)?;
    let s = chain.len();
    let n = field.horizon();
    let lambda = law.cumulant(beta)?;
    let site = |i: usize, y: usize| beta * field.at(i, y) - lambda;
    let forward = forward_table(chain, chain.start(), n, site);

    let mut q = vec![0.0; n * s];
    let mut backward = vec![0.0; s];
    for i in (1..=n).rev() {
        let row = &mut q[(i - 1) * s..i * s];
        let logs: Vec<f64> = (0..s).map(|x| forward[i][x] + backward[x]).collect();
        let norm = log_sum_exp(logs.iter().copied());
        for (x, l) in logs.iter().enumerate() {
            row[x] = (l - norm).exp();
        }
        backward = (0..s)
            .map(|x| log_sum_exp((0..s).map(|y| chain.log_prob(x, y) + site(i, y) + backward[y])))
            .collect();
    }
    let log_z = if beta == 0.0 {
        0.0
    } else {
        log_sum_exp(forward[n].iter().copied())
    };
    Ok(Marginals {
        log_z,
        marginals: GibbsMarginals {
            n,
            num_states: s,
            q,
        },
    })
}

pub fn gibbs_marginals<L: EnvironmentLaw + ?Sized>(
    chain: &ChainSpec,
    field: &EnvironmentField,
    law: &L,
    beta: f64,
) -> Result<GibbsMarginals, TransferError> {
    Ok(forward_backward(chain, field, law, beta)?.marginals)
}

/// `⟨⟨L_n(S¹, S²)⟩⟩ = Σ_{i,x} ⟨1{S_i = x}⟩²`.
pub fn replica_overlap<L: EnvironmentLaw + ?Sized>(
    chain: &ChainSpec,
    field: &EnvironmentField,
    law: &L,
    beta: f64,
) -> Result<f64, TransferError> {
    Ok(gibbs_marginals(chain, field, law, beta)?.overlap())
}

/// `⟨Σ_i g(i, S_i)⟩`.
pub fn energy_expectation<L: EnvironmentLaw + ?Sized>(
    chain: &ChainSpec,
    field: &EnvironmentField,
    law: &L,
    beta: f64,
) -> Result<f64, TransferError> {
    Ok(gibbs_marginals(chain, field, law, beta)?.energy(field))
}

/// Everything one field contributes to the disorder estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuenchedSummary {
    pub log_z: f64,
    pub overlap: f64,
    pub energy: f64,
}

pub fn quenched_summary<L: EnvironmentLaw + ?Sized>(
    chain: &ChainSpec,
    field: &EnvironmentField,
    law: &L,
    beta: f64,
) -> Result<QuenchedSummary, TransferError> {
    let fb = forward_backward(chain, field, law, beta)?;
    Ok(QuenchedSummary {
        log_z: fb.log_z,
        overlap: fb.marginals.overlap(),
        energy: fb.marginals.energy(field),
    })
}

/// Per-replica summaries at every β of `betas`, all β sharing the replica's
/// field (common random numbers). Indexed `[replica][beta]`.
pub fn replica_summaries<L: EnvironmentLaw + ?Sized>(
    chain: &ChainSpec,
    law: &L,
    betas: &[f64],
    plan: ReplicaPlan,
) -> Result<Vec<Vec<QuenchedSummary>>, TransferError> {
    plan.validate()?;
    try_map_replicas(plan.replicas, plan.seed, |_, rng| {
        let field = law.sample_field(plan.horizon, chain.len(), rng);
        betas
            .iter()
            .map(|&beta| quenched_summary(chain, &field, law, beta))
            .collect()
    })
}

/// Per-replica `log Z_n(β)` for one field per replica.
fn replica_log_partitions<L: EnvironmentLaw + ?Sized>(
    chain: &ChainSpec,
    law: &L,
    beta: f64,
    plan: ReplicaPlan,
) -> Result<Vec<f64>, TransferError> {
    plan.validate()?;
    try_map_replicas(plan.replicas, plan.seed, |_, rng| {
        let field = law.sample_field(plan.horizon, chain.len(), rng);
        log_partition(chain, &field, law, beta)
    })
}

/// `p_n(β) = E[log Z_n] / n`, estimated over independent fields.
pub fn pn_estimate<L: EnvironmentLaw + ?Sized>(
    chain: &ChainSpec,
    law: &L,
    beta: f64,
    plan: ReplicaPlan,
) -> Result<Estimate, TransferError> {
    let n = plan.horizon as f64;
    let samples: Vec<f64> = replica_log_partitions(chain, law, beta, plan)?
        .into_iter()
        .map(|l| l / n)
        .collect();
    Ok(Estimate::from_samples(&samples))
}

/// `p'_n(β) = (E⟨Σ_i g(i, S_i)⟩ - nλ'(β)) / n`.
pub fn pn_derivative_cov<L: EnvironmentLaw + ?Sized>(
    chain: &ChainSpec,
    law: &L,
    beta: f64,
    plan: ReplicaPlan,
) -> Result<Estimate, TransferError> {
    let n = plan.horizon as f64;
    let slope = law.cumulant_derivative(beta)?;
    let per_replica = replica_summaries(chain, law, &[beta], plan)?;
    let samples: Vec<f64> = per_replica
        .iter()
        .map(|s| (s[0].energy - n * slope) / n)
        .collect();
    Ok(Estimate::from_samples(&samples))
}

/// Sample mean of `Z_n(β)` itself; its expectation is 1.
pub fn martingale_mean_check<L: EnvironmentLaw + ?Sized>(
    chain: &ChainSpec,
    law: &L,
    beta: f64,
    plan: ReplicaPlan,
) -> Result<Estimate, TransferError> {
    let samples: Vec<f64> = replica_log_partitions(chain, law, beta, plan)?
        .into_iter()
        .map(f64::exp)
        .collect();
    Ok(Estimate::from_samples(&samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::LevyTriple;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn three_state() -> ChainSpec {
        ChainSpec::from_matrix(vec![
            vec![0.2, 0.5, 0.3],
            vec![0.6, 0.0, 0.4],
            vec![0.1, 0.1, 0.8],
        ])
        .unwrap()
    }

    #[test]
    fn zero_beta_is_exact() {
        let chain = three_state();
        let law = LevyTriple::gaussian(1.0).unwrap();
        let field = law.sample_field(7, 3, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(log_partition(&chain, &field, &law, 0.0).unwrap(), 0.0);
        let plan = ReplicaPlan::new(10, 5, 1);
        assert_eq!(pn_estimate(&chain, &law, 0.0, plan).unwrap(), Estimate::exact(0.0));
        assert_eq!(
            martingale_mean_check(&chain, &law, 0.0, plan).unwrap(),
            Estimate::exact(1.0)
        );
    }

    #[test]
    fn single_state_single_step() {
        let chain = ChainSpec::from_matrix(vec![vec![1.0]]).unwrap();
        let law = LevyTriple::gaussian(1.0).unwrap();
        let field = EnvironmentField::from_rows(vec![vec![0.8]]).unwrap();
        let beta = 1.3;
        let expected = beta * 0.8 - law.cumulant(beta).unwrap();
        assert!((log_partition(&chain, &field, &law, beta).unwrap() - expected).abs() < 1e-15);
        let field = law.sample_field(6, 1, &mut ChaCha8Rng::seed_from_u64(4));
        assert!((replica_overlap(&chain, &field, &law, beta).unwrap() - 6.0).abs() < 1e-14);
    }

    #[test]
    fn zero_beta_marginals_are_chain_marginals() {
        let chain = three_state();
        let law = LevyTriple::gaussian(1.0).unwrap();
        let field = law.sample_field(4, 3, &mut ChaCha8Rng::seed_from_u64(8));
        let q = gibbs_marginals(&chain, &field, &law, 0.0).unwrap();
        let mut dist = vec![1.0, 0.0, 0.0];
        let mut annealed_overlap = 0.0;
        let mut energy = 0.0;
        for i in 1..=4 {
            dist = (0..3)
                .map(|y| (0..3).map(|x| dist[x] * chain.prob(x, y)).sum())
                .collect();
            for y in 0..3 {
                assert!((q.at(i, y) - dist[y]).abs() < 1e-14);
                annealed_overlap += dist[y] * dist[y];
                energy += field.at(i, y) * dist[y];
            }
        }
        assert!((q.overlap() - annealed_overlap).abs() < 1e-13);
        assert!((energy_expectation(&chain, &field, &law, 0.0).unwrap() - energy).abs() < 1e-13);
    }

    #[test]
    fn zero_field_has_zero_energy() {
        let chain = three_state();
        let law = LevyTriple::gaussian(1.0).unwrap();
        let field = EnvironmentField::zeros(5, 3);
        assert_eq!(energy_expectation(&chain, &field, &law, 0.9).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let chain = three_state();
        let law = LevyTriple::gaussian(1.0).unwrap();
        let field = EnvironmentField::zeros(3, 2);
        assert_eq!(
            log_partition(&chain, &field, &law, 1.0),
            Err(TransferError::DimensionMismatch {
                expected: 3,
                found: 2
            })
        );
        assert_eq!(
            log_partition(&chain, &EnvironmentField::zeros(0, 3), &law, 1.0),
            Err(TransferError::EmptyHorizon)
        );
        assert_eq!(
            pn_estimate(&chain, &law, 1.0, ReplicaPlan::new(3, 1, 0)),
            Err(TransferError::TooFewReplicas(1))
        );
    }

    #[test]
    fn periodic_chain_keeps_unreachable_states_out() {
        // states not reachable at time i carry the -inf sentinel
        let chain = ChainSpec::cycle(3).unwrap();
        let law = LevyTriple::gaussian(1.0).unwrap();
        let field = law.sample_field(5, 3, &mut ChaCha8Rng::seed_from_u64(0));
        let q = gibbs_marginals(&chain, &field, &law, 1.0).unwrap();
        for i in 1..=5 {
            for x in 0..3 {
                let expected = if x == i % 3 { 1.0 } else { 0.0 };
                assert_eq!(q.at(i, x), expected);
            }
        }
        let path_energy: f64 = (1..=5).map(|i| field.at(i, i % 3)).sum();
        let lz = log_partition(&chain, &field, &law, 1.0).unwrap();
        assert!((lz - (path_energy - 5.0 * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn marginal_rows_sum_to_one() {
        let chain = three_state();
        let law = LevyTriple::new(0.0, 0.3, &[(1.5, 0.4), (-0.7, 0.9)]).unwrap().center();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for beta in [0.1, 1.0, 4.0] {
            let field = law.sample_field(50, 3, &mut rng);
            let q = gibbs_marginals(&chain, &field, &law, beta).unwrap();
            for i in 1..=50 {
                let sum: f64 = q.row(i).iter().sum();
                assert!((sum - 1.0).abs() < 1e-10);
                assert!(q.row(i).iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
        }
    }

    #[test]
    fn strong_disorder_does_not_underflow() {
        let chain = ChainSpec::symmetric_two_state(0.3).unwrap();
        let law = LevyTriple::gaussian(1.0).unwrap();
        let field = law.sample_field(5000, 2, &mut ChaCha8Rng::seed_from_u64(1));
        let lz = log_partition(&chain, &field, &law, 3.0).unwrap();
        assert!(lz.is_finite() && lz < -1000.0);
    }
}
