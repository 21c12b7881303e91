//! Infinitely divisible environment laws.
//!
//! A law is given by its Lévy triple `(c, σ², π)` with a finite atomic jump
//! measure `π = Σ m_k δ_{u_k}`; its cumulant is
//!
//! ```text
//! λ(β) = cβ + σ²β²/2 + Σ_k m_k (e^{β u_k} - 1 - 1{|u_k| ≤ 1} β u_k)
//! ```
//!
//! which is finite for every real β. Variables are realised as
//! `c + σN + Σ_k u_k Poisson(m_k) - Σ_{|u_k| ≤ 1} m_k u_k`.

mod ibp;
mod poisson;

pub use ibp::{gauss_hermite, ibp_residual, standard_test_functions, IbpCheck, TestFunction};
pub use poisson::sample_poisson;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LevyError {
    #[error("Gaussian variance must be finite and nonnegative, got {0}")]
    NegativeVariance(f64),
    #[error("invalid jump atom (u = {jump}, m = {mass}): need u != 0, m > 0, both finite")]
    InvalidAtom { jump: f64, mass: f64 },
    #[error("duplicate jump location {0}")]
    DuplicateAtom(f64),
    #[error("law is degenerate: no Gaussian part and no jumps")]
    Degenerate,
    #[error("drift must be finite, got {0}")]
    InvalidDrift(f64),
    #[error("cumulant overflows at beta = {beta}")]
    Overflow { beta: f64 },
    #[error("quadrature did not converge (last change {last_change:e} at order {order})")]
    QuadratureNotConverged { order: usize, last_change: f64 },
    #[error("field has non-finite entry at time {time}, state {state}")]
    NonFiniteField { time: usize, state: usize },
    #[error("field rows have inconsistent lengths")]
    RaggedField,
}

/// A law for the environment variables: cumulant, its derivative, and a
/// sampler. Implemented by [`LevyTriple`]; tests plug in other laws.
pub trait EnvironmentLaw: Sync {
    /// `λ(β) = log E e^{βg}`.
    fn cumulant(&self, beta: f64) -> Result<f64, LevyError>;
    /// `λ'(β)`.
    fn cumulant_derivative(&self, beta: f64) -> Result<f64, LevyError>;
    /// One draw of `g`.
    fn draw(&self, rng: &mut dyn RngCore) -> f64;

    /// `n × num_states` i.i.d. draws, filled time-major.
    fn sample_field(&self, n: usize, num_states: usize, rng: &mut dyn RngCore) -> EnvironmentField {
        let values = (0..n * num_states).map(|_| self.draw(rng)).collect();
        EnvironmentField {
            n,
            num_states,
            values,
        }
    }
}

/// One atom `m δ_u` of the jump measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub jump: f64,
    pub mass: f64,
}

impl Atom {
    fn compensated(&self) -> bool {
        self.jump.abs() <= 1.0
    }
}

/// Lévy triple with a finite atomic jump measure.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyTriple {
    drift: f64,
    gauss_var: f64,
    atoms: Vec<Atom>,
}

impl LevyTriple {
    /// `jumps` are `(u, m)` pairs.
    pub fn new(drift: f64, gauss_var: f64, jumps: &[(f64, f64)]) -> Result<Self, LevyError> {
        if !drift.is_finite() {
            return Err(LevyError::InvalidDrift(drift));
        }
        if !(gauss_var.is_finite() && gauss_var >= 0.0) {
            return Err(LevyError::NegativeVariance(gauss_var));
        }
        let mut atoms: Vec<Atom> = Vec::with_capacity(jumps.len());
        for &(jump, mass) in jumps {
            if !(jump.is_finite() && mass.is_finite()) || jump == 0.0 || mass <= 0.0 {
                return Err(LevyError::InvalidAtom { jump, mass });
            }
            if atoms.iter().any(|a| a.jump == jump) {
                return Err(LevyError::DuplicateAtom(jump));
            }
            atoms.push(Atom { jump, mass });
        }
        if gauss_var == 0.0 && atoms.is_empty() {
            return Err(LevyError::Degenerate);
        }
        Ok(Self {
            drift,
            gauss_var,
            atoms,
        })
    }

    /// Centred Gaussian with variance `sigma2`.
    pub fn gaussian(sigma2: f64) -> Result<Self, LevyError> {
        Self::new(0.0, sigma2, &[])
    }

    /// Compensated Poisson: `Poisson(rho) - rho`, i.e. the atom `(1, rho)`.
    pub fn compensated_poisson(rho: f64) -> Result<Self, LevyError> {
        Self::new(0.0, 0.0, &[(1.0, rho)])
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn gauss_var(&self) -> f64 {
        self.gauss_var
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// `λ'(0) = c + Σ_{|u_k| > 1} m_k u_k`.
    pub fn mean(&self) -> f64 {
        self.drift
            + self
                .atoms
                .iter()
                .filter(|a| !a.compensated())
                .map(|a| a.mass * a.jump)
                .sum::<f64>()
    }

    /// The same law shifted to mean zero: the drift becomes
    /// `-Σ_{|u_k| > 1} m_k u_k`.
    pub fn center(&self) -> Self {
        Self {
            drift: self.drift - self.mean(),
            ..self.clone()
        }
    }

    pub fn is_centered(&self) -> bool {
        self.mean().abs() <= 1e-12 * (1.0 + self.drift.abs())
    }

    /// `λ''(0) = σ² + Σ_k m_k u_k²`.
    pub fn variance(&self) -> f64 {
        self.gauss_var + self.atoms.iter().map(|a| a.mass * a.jump * a.jump).sum::<f64>()
    }

    fn exp_jump(beta: f64, atom: &Atom) -> Result<f64, LevyError> {
        let e = (beta * atom.jump).exp();
        if e.is_finite() {
            Ok(e)
        } else {
            Err(LevyError::Overflow { beta })
        }
    }

    /// Sum of `m_k u_k` over compensated atoms, the constant subtracted when sampling.
    fn compensator(&self) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.compensated())
            .map(|a| a.mass * a.jump)
            .sum()
    }

    /// One draw, with the Gaussian variate taken first and the atoms in order.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut g = self.drift - self.compensator();
        if self.gauss_var > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            g += self.gauss_var.sqrt() * z;
        }
        for atom in &self.atoms {
            g += atom.jump * sample_poisson(atom.mass, rng) as f64;
        }
        g
    }
}

impl EnvironmentLaw for LevyTriple {
    fn cumulant(&self, beta: f64) -> Result<f64, LevyError> {
        let mut value = self.drift * beta + 0.5 * self.gauss_var * beta * beta;
        for atom in &self.atoms {
            let comp = if atom.compensated() { beta * atom.jump } else { 0.0 };
            value += atom.mass * (Self::exp_jump(beta, atom)? - 1.0 - comp);
        }
        if value.is_finite() {
            Ok(value)
        } else {
            Err(LevyError::Overflow { beta })
        }
    }

    fn cumulant_derivative(&self, beta: f64) -> Result<f64, LevyError> {
        let mut value = self.drift + self.gauss_var * beta;
        for atom in &self.atoms {
            let comp = if atom.compensated() { 1.0 } else { 0.0 };
            value += atom.mass * atom.jump * (Self::exp_jump(beta, atom)? - comp);
        }
        if value.is_finite() {
            Ok(value)
        } else {
            Err(LevyError::Overflow { beta })
        }
    }

    fn draw(&self, rng: &mut dyn RngCore) -> f64 {
        self.sample(rng)
    }
}

/// A realisation `g(i, x)` for times `i = 1..=n` and states `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentField {
    n: usize,
    num_states: usize,
    values: Vec<f64>,
}

impl EnvironmentField {
    /// `rows[i - 1][x] = g(i, x)`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, LevyError> {
        let n = rows.len();
        let num_states = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(n * num_states);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != num_states {
                return Err(LevyError::RaggedField);
            }
            for (x, v) in row.into_iter().enumerate() {
                if !v.is_finite() {
                    return Err(LevyError::NonFiniteField { time: i + 1, state: x });
                }
                values.push(v);
            }
        }
        Ok(Self {
            n,
            num_states,
            values,
        })
    }

    pub fn zeros(n: usize, num_states: usize) -> Self {
        Self {
            n,
            num_states,
            values: vec![0.0; n * num_states],
        }
    }

    pub fn horizon(&self) -> usize {
        self.n
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// `g(time, state)` with `time` in `1..=n`.
    #[inline]
    pub fn at(&self, time: usize, state: usize) -> f64 {
        debug_assert!(time >= 1 && time <= self.n);
        self.values[(time - 1) * self.num_states + state]
    }

    /// Row of time `time` (1-based).
    pub fn row(&self, time: usize) -> &[f64] {
        let start = (time - 1) * self.num_states;
        &self.values[start..start + self.num_states]
    }

    /// The first `n` time rows.
    pub fn truncated(&self, n: usize) -> Self {
        assert!(n <= self.n);
        Self {
            n,
            num_states: self.num_states,
            values: self.values[..n * self.num_states].to_vec(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn triple_validation() {
        assert_eq!(LevyTriple::new(0.0, 0.0, &[]), Err(LevyError::Degenerate));
        assert!(matches!(
            LevyTriple::new(0.0, -1.0, &[]),
            Err(LevyError::NegativeVariance(_))
        ));
        assert!(matches!(
            LevyTriple::new(0.0, 0.0, &[(0.0, 1.0)]),
            Err(LevyError::InvalidAtom { .. })
        ));
        assert!(matches!(
            LevyTriple::new(0.0, 0.0, &[(1.0, 0.0)]),
            Err(LevyError::InvalidAtom { .. })
        ));
        assert!(matches!(
            LevyTriple::new(0.0, 0.0, &[(1.0, 1.0), (1.0, 2.0)]),
            Err(LevyError::DuplicateAtom(_))
        ));
    }

    #[test]
    fn cumulant_examples() {
        let gauss = LevyTriple::gaussian(1.0).unwrap();
        assert!((gauss.cumulant(0.7).unwrap() - 0.245).abs() < 1e-15);
        let poisson = LevyTriple::compensated_poisson(1.0).unwrap();
        for beta in [-1.3, 0.2, 2.5] {
            let expected = f64::exp(beta) - 1.0 - beta;
            assert!((poisson.cumulant(beta).unwrap() - expected).abs() < 1e-14);
        }
        let mixed = LevyTriple::new(0.3, 0.5, &[(2.0, 0.4), (-0.5, 1.2)]).unwrap();
        assert_eq!(mixed.cumulant(0.0).unwrap(), 0.0);
        assert!(matches!(
            poisson.cumulant(1000.0),
            Err(LevyError::Overflow { .. })
        ));
    }

    #[test]
    fn centering_examples() {
        let g = LevyTriple::new(3.0, 1.0, &[]).unwrap().center();
        assert_eq!(g.drift(), 0.0);
        let far = LevyTriple::new(0.0, 0.0, &[(2.0, 1.0)]).unwrap().center();
        assert_eq!(far.drift(), -2.0);
        let near = LevyTriple::new(0.0, 0.0, &[(1.0, 1.0)]).unwrap();
        assert_eq!(near.center(), near);
        assert!(near.is_centered());
    }

    #[test]
    fn variance_examples() {
        assert_eq!(LevyTriple::gaussian(1.0).unwrap().variance(), 1.0);
        let t = LevyTriple::new(0.0, 0.0, &[(1.0, 2.0), (-1.0, 3.0)]).unwrap();
        assert_eq!(t.variance(), 5.0);
    }

    #[test]
    fn variance_matches_second_difference() {
        let h = 1e-4;
        for t in [
            LevyTriple::gaussian(1.7).unwrap(),
            LevyTriple::new(0.0, 0.0, &[(1.0, 2.0), (-1.0, 3.0)]).unwrap(),
            LevyTriple::new(0.1, 0.3, &[(2.5, 0.2), (-0.4, 1.5)]).unwrap().center(),
        ] {
            let fd = (t.cumulant(h).unwrap() - 2.0 * t.cumulant(0.0).unwrap() + t.cumulant(-h).unwrap())
                / (h * h);
            assert!((fd - t.variance()).abs() <= 1e-6 * t.variance(), "{fd} vs {}", t.variance());
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let t = LevyTriple::new(0.2, 0.3, &[(2.5, 0.2), (-0.4, 1.5)]).unwrap();
        let h = 1e-6;
        for beta in [-0.7, 0.0, 0.9] {
            let fd = (t.cumulant(beta + h).unwrap() - t.cumulant(beta - h).unwrap()) / (2.0 * h);
            assert!((fd - t.cumulant_derivative(beta).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn gaussian_draws_are_standard_normal_scaled() {
        let t = LevyTriple::gaussian(1.0).unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let z: f64 = StandardNormal.sample(&mut b);
            assert_eq!(t.sample(&mut a), z);
        }
    }

    #[test]
    fn field_determinism_and_shape() {
        let t = LevyTriple::new(0.0, 0.5, &[(1.0, 0.7)]).unwrap();
        let f1 = t.sample_field(5, 3, &mut ChaCha8Rng::seed_from_u64(11));
        let f2 = t.sample_field(5, 3, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(f1, f2);
        assert_eq!(f1.values().len(), 15);
        let single = t.sample_field(1, 1, &mut ChaCha8Rng::seed_from_u64(11));
        let direct = t.sample(&mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(single.at(1, 0), direct);
        assert_eq!(f1.truncated(2).row(2), f1.row(2));
    }

    #[test]
    fn field_from_rows_rejects_bad_input() {
        assert_eq!(
            EnvironmentField::from_rows(vec![vec![1.0, 2.0], vec![1.0]]),
            Err(LevyError::RaggedField)
        );
        assert!(matches!(
            EnvironmentField::from_rows(vec![vec![f64::NAN]]),
            Err(LevyError::NonFiniteField { time: 1, state: 0 })
        ));
    }
}
