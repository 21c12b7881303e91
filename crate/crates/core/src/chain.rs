//! Finite irreducible Markov chains.
//!
//! A [`ChainSpec`] is validated once and immutable afterwards. Besides the
//! invariant measure it exposes the return-time quantities that govern the
//! exponential-moment condition on the reference state: the taboo matrix
//! (the kernel with the reference row and column removed), its spectral
//! radius, `kappa(x) = -log ρ(taboo)` and the return-time moment generating
//! function.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

use crate::numeric::{nonneg_spectral_radius, strongly_connected_components};

/// Allowed deviation of a row sum from 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;
/// Entries at or below this value do not count as edges when testing irreducibility.
pub const STRUCTURAL_ZERO: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("chain has no states")]
    Empty,
    #[error("transition matrix is {rows}x{cols}, expected {expected}x{expected}")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        expected: usize,
    },
    #[error("entry ({row}, {col}) = {value} is negative or not finite")]
    InvalidEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}, not 1")]
    NotStochastic { row: usize, sum: f64 },
    #[error("transition graph is not strongly connected ({components} components)")]
    NotIrreducible { components: usize },
    #[error("unknown state {0:?}")]
    UnknownState(String),
    #[error("state index {index} out of range for {len} states")]
    StateOutOfRange { index: usize, len: usize },
    #[error("duplicate state label {0:?}")]
    DuplicateLabel(String),
    #[error("linear system for the invariant measure is singular")]
    SingularSystem,
}

/// A validated finite irreducible Markov chain with a start state.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    states: Vec<String>,
    transition: DMatrix<f64>,
    log_transition: Vec<f64>,
    start: usize,
}

impl ChainSpec {
    /// Validates a dense row-major transition matrix.
    pub fn new(states: Vec<String>, matrix: Vec<Vec<f64>>, start: usize) -> Result<Self, ChainError> {
        let len = states.len();
        if len == 0 {
            return Err(ChainError::Empty);
        }
        for (i, label) in states.iter().enumerate() {
            if states[..i].contains(label) {
                return Err(ChainError::DuplicateLabel(label.clone()));
            }
        }
        let cols = matrix.iter().map(Vec::len).find(|&c| c != len).unwrap_or(len);
        if matrix.len() != len || cols != len {
            return Err(ChainError::DimensionMismatch {
                rows: matrix.len(),
                cols,
                expected: len,
            });
        }
        if start >= len {
            return Err(ChainError::StateOutOfRange { index: start, len });
        }
        for (row, values) in matrix.iter().enumerate() {
            for (col, &value) in values.iter().enumerate() {
                if !value.is_finite() || value < 0.0 {
                    return Err(ChainError::InvalidEntry { row, col, value });
                }
            }
            let sum: f64 = values.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(ChainError::NotStochastic { row, sum });
            }
        }
        let transition = DMatrix::from_fn(len, len, |i, j| matrix[i][j]);
        let components = strongly_connected_components(&transition, STRUCTURAL_ZERO).len();
        if components != 1 {
            return Err(ChainError::NotIrreducible { components });
        }
        let log_transition = transition
            .transpose()
            .iter()
            .map(|&p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
            .collect();
        Ok(Self {
            states,
            transition,
            log_transition,
            start,
        })
    }

    /// Like [`ChainSpec::new`] but with the start given by its label.
    pub fn with_labels(states: Vec<String>, matrix: Vec<Vec<f64>>, start: &str) -> Result<Self, ChainError> {
        let index = states
            .iter()
            .position(|s| s == start)
            .ok_or_else(|| ChainError::UnknownState(start.to_string()))?;
        Self::new(states, matrix, index)
    }

    /// States labelled `"0"`, `"1"`, ... and start state 0.
    pub fn from_matrix(matrix: Vec<Vec<f64>>) -> Result<Self, ChainError> {
        let states = (0..matrix.len()).map(|i| i.to_string()).collect();
        Self::new(states, matrix, 0)
    }

    /// `[[1-p, p], [p, 1-p]]`, started in state 0.
    pub fn symmetric_two_state(p: f64) -> Result<Self, ChainError> {
        Self::from_matrix(vec![vec![1.0 - p, p], vec![p, 1.0 - p]])
    }

    /// Deterministic cycle `0 -> 1 -> ... -> k-1 -> 0`.
    pub fn cycle(k: usize) -> Result<Self, ChainError> {
        let matrix = (0..k)
            .map(|i| (0..k).map(|j| if j == (i + 1) % k { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::from_matrix(matrix)
    }

    /// Every row uniform over all `k` states.
    pub fn uniform(k: usize) -> Result<Self, ChainError> {
        Self::from_matrix(vec![vec![1.0 / k as f64; k]; k])
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.transition[(from, to)]
    }

    /// `log P(from, to)`, `-inf` for forbidden transitions.
    #[inline]
    pub fn log_prob(&self, from: usize, to: usize) -> f64 {
        self.log_transition[from * self.len() + to]
    }

    pub fn state_index(&self, label: &str) -> Result<usize, ChainError> {
        self.states
            .iter()
            .position(|s| s == label)
            .ok_or_else(|| ChainError::UnknownState(label.to_string()))
    }

    /// The same chain started from `start`.
    pub fn with_start(&self, start: usize) -> Result<Self, ChainError> {
        self.check_state(start)?;
        Ok(Self {
            start,
            ..self.clone()
        })
    }

    pub(crate) fn check_state(&self, x: usize) -> Result<(), ChainError> {
        if x < self.len() {
            Ok(())
        } else {
            Err(ChainError::StateOutOfRange {
                index: x,
                len: self.len(),
            })
        }
    }

    /// The unique stationary distribution, from `(Pᵀ - I)μ = 0` with one
    /// equation replaced by the normalisation.
    pub fn invariant_measure(&self) -> Result<InvariantMeasure, ChainError> {
        let n = self.len();
        let mut a = self.transition.transpose() - DMatrix::identity(n, n);
        let mut b = DVector::zeros(n);
        a.row_mut(n - 1).fill(1.0);
        b[n - 1] = 1.0;
        let mu = a.lu().solve(&b).ok_or(ChainError::SingularSystem)?;
        if mu.iter().any(|&m| !m.is_finite() || m <= 0.0) {
            return Err(ChainError::SingularSystem);
        }
        let total = mu.sum();
        Ok(InvariantMeasure {
            mu: mu.iter().map(|m| m / total).collect(),
        })
    }

    /// `P` with the row and column of `x` removed, in the order of the
    /// remaining states.
    pub fn taboo_matrix(&self, x: usize) -> Result<DMatrix<f64>, ChainError> {
        self.check_state(x)?;
        Ok(self.transition.clone().remove_row(x).remove_column(x))
    }

    /// Spectral radius of the taboo matrix at `x`.
    pub fn taboo_radius(&self, x: usize) -> Result<f64, ChainError> {
        Ok(nonneg_spectral_radius(&self.taboo_matrix(x)?))
    }

    /// `sup{α : E_x e^{α τ(x)} < ∞} = -log ρ(taboo)`; `+inf` when the taboo
    /// matrix is empty or nilpotent.
    pub fn kappa(&self, x: usize) -> Result<f64, ChainError> {
        let rho = self.taboo_radius(x)?;
        Ok(if rho > 0.0 { -rho.ln() } else { f64::INFINITY })
    }

    /// `E_x[e^{α τ(x)}]` for the first return time `τ(x) = inf{n ≥ 1: S_n = x}`;
    /// `+inf` when `e^α ρ(taboo) ≥ 1`.
    pub fn return_time_mgf(&self, x: usize, alpha: f64) -> Result<f64, ChainError> {
        let taboo = self.taboo_matrix(x)?;
        let rho = nonneg_spectral_radius(&taboo);
        let scale = alpha.exp();
        if scale * rho >= 1.0 {
            return Ok(f64::INFINITY);
        }
        let direct = scale * self.prob(x, x);
        if taboo.nrows() == 0 {
            return Ok(direct);
        }
        let others: Vec<usize> = (0..self.len()).filter(|&y| y != x).collect();
        // h(y) = E_y e^{α T_x}, T_x the hitting time of x.
        let system = DMatrix::identity(others.len(), others.len()) - taboo * scale;
        let rhs = DVector::from_iterator(others.len(), others.iter().map(|&y| scale * self.prob(y, x)));
        let h = system.lu().solve(&rhs).ok_or(ChainError::SingularSystem)?;
        let via_others: f64 = others
            .iter()
            .zip(h.iter())
            .map(|(&y, hy)| self.prob(x, y) * hy)
            .sum();
        Ok(direct + scale * via_others)
    }

    /// Draws one next state from the row of `from`.
    pub fn step<R: Rng + ?Sized>(&self, from: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let row = self.transition.row(from);
        for (y, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return y;
            }
        }
        // rounding: fall back to the last reachable state
        row.iter().rposition(|&p| p > 0.0).unwrap_or(from)
    }

    /// `S_0 = start, S_1, ..., S_n`.
    pub fn sample_path<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        let mut path = Vec::with_capacity(n + 1);
        let mut current = self.start;
        path.push(current);
        for _ in 0..n {
            current = self.step(current, rng);
            path.push(current);
        }
        path
    }
}

/// Stationary distribution of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantMeasure {
    mu: Vec<f64>,
}

impl InvariantMeasure {
    pub fn as_slice(&self) -> &[f64] {
        &self.mu
    }

    pub fn get(&self, x: usize) -> f64 {
        self.mu[x]
    }

    /// `‖μ‖² = Σ μ(x)²`.
    pub fn norm_squared(&self) -> f64 {
        self.mu.iter().map(|m| m * m).sum()
    }

    /// `⟨μ, f⟩`.
    pub fn dot(&self, f: &[f64]) -> f64 {
        self.mu.iter().zip(f).map(|(m, v)| m * v).sum()
    }

    /// `max_y |(μᵀP)(y) - μ(y)|`.
    pub fn stationarity_residual(&self, chain: &ChainSpec) -> f64 {
        let n = chain.len();
        (0..n)
            .map(|y| {
                let pushed: f64 = (0..n).map(|x| self.mu[x] * chain.prob(x, y)).sum();
                (pushed - self.mu[y]).abs()
            })
            .fold(0.0, f64::max)
    }
}
