//! Deterministic check of the integration-by-parts identity
//!
//! ```text
//! E[g f(g)] = c E[f(g)] + σ² E[f'(g)] + Σ_k m_k u_k (E[f(g + u_k)] - 1{|u_k| ≤ 1} E[f(g)])
//! ```
//!
//! Expectations are computed without sampling: exact summation over the
//! Poisson counts of every atom (truncated once the remaining mass is below
//! 1e-14) composed with Gauss–Hermite quadrature for the Gaussian part.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{LevyError, LevyTriple};

const TAIL_MASS: f64 = 1e-14;
const START_ORDER: usize = 16;
const MAX_ORDER: usize = 512;
const CONVERGENCE: f64 = 1e-10;

/// A bounded smooth function with its derivative.
#[derive(Clone, Copy)]
pub struct TestFunction {
    pub name: &'static str,
    pub f: fn(f64) -> f64,
    pub df: fn(f64) -> f64,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunction").field("name", &self.name).finish()
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// sin, cos, logistic and a Gaussian bump.
pub fn standard_test_functions() -> [TestFunction; 4] {
    [
        TestFunction {
            name: "sin",
            f: f64::sin,
            df: f64::cos,
        },
        TestFunction {
            name: "cos",
            f: f64::cos,
            df: |x| -x.sin(),
        },
        TestFunction {
            name: "logistic",
            f: logistic,
            df: |x| logistic(x) * (1.0 - logistic(x)),
        },
        TestFunction {
            name: "gaussian_bump",
            f: |x| (-0.5 * x * x).exp(),
            df: |x| -x * (-0.5 * x * x).exp(),
        },
    ]
}

/// Nodes and weights of the `order`-point Gauss–Hermite rule for the
/// standard normal weight, by Golub–Welsch: the nodes are the eigenvalues of
/// the Jacobi matrix of the probabilists' Hermite polynomials, the weights
/// the squared first components of its normalised eigenvectors.
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let jacobi = DMatrix::from_fn(order, order, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = eig
        .eigenvalues
        .iter()
        .zip(eig.eigenvectors.row(0).iter())
        .map(|(&x, &v)| (x, v * v))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Support points and probabilities of `Σ_k u_k N_k`, `N_k ~ Poisson(m_k)`
/// independent, each count truncated at tail mass `TAIL_MASS / K`.
fn jump_lattice(triple: &LevyTriple) -> Vec<(f64, f64)> {
    let per_atom = TAIL_MASS / triple.atoms().len().max(1) as f64;
    let mut points = vec![(0.0, 1.0)];
    for atom in triple.atoms() {
        let m = atom.mass;
        let mut pmf = Vec::new();
        let mut k = 0usize;
        // pmf recurrence in log space; e^{-m} alone underflows for large m
        let mut log_p = -m;
        let mut p = log_p.exp();
        loop {
            pmf.push((k as f64, p));
            let ratio = m / (k + 1) as f64;
            if ratio < 1.0 && p * ratio / (1.0 - ratio) <= per_atom {
                break;
            }
            k += 1;
            log_p += m.ln() - (k as f64).ln();
            p = log_p.exp();
        }
        points = points
            .iter()
            .flat_map(|&(s, w)| pmf.iter().map(move |&(c, q)| (s + atom.jump * c, w * q)))
            .collect();
    }
    points
}

struct Oracle<'a> {
    triple: &'a LevyTriple,
    lattice: Vec<(f64, f64)>,
    rule: Option<(Vec<f64>, Vec<f64>)>,
}

impl<'a> Oracle<'a> {
    fn new(triple: &'a LevyTriple, order: Option<usize>) -> Self {
        Self {
            triple,
            lattice: jump_lattice(triple),
            rule: order.map(gauss_hermite),
        }
    }

    /// `E[h(g)]`.
    fn expect(&self, h: impl Fn(f64) -> f64) -> f64 {
        let base = self.triple.drift() - self.triple.compensator();
        let sigma = self.triple.gauss_var().sqrt();
        self.lattice
            .iter()
            .map(|&(shift, w)| {
                let centre = base + shift;
                let inner = match &self.rule {
                    Some((nodes, weights)) => nodes
                        .iter()
                        .zip(weights)
                        .map(|(x, wx)| wx * h(centre + sigma * x))
                        .sum(),
                    None => h(centre),
                };
                w * inner
            })
            .sum()
    }

    fn sides(&self, f: &dyn Fn(f64) -> f64, df: &dyn Fn(f64) -> f64) -> (f64, f64) {
        let t = self.triple;
        let lhs = self.expect(|x| x * f(x));
        let ef = self.expect(f);
        let mut rhs = t.drift() * ef;
        if t.gauss_var() > 0.0 {
            rhs += t.gauss_var() * self.expect(df);
        }
        for atom in t.atoms() {
            let shifted = self.expect(|x| f(x + atom.jump));
            let comp = if atom.jump.abs() <= 1.0 { ef } else { 0.0 };
            rhs += atom.mass * atom.jump * (shifted - comp);
        }
        (lhs, rhs)
    }
}

/// Outcome of [`ibp_residual`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbpCheck {
    pub residual: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Gauss–Hermite order used; `None` when the law has no Gaussian part.
    pub order: Option<usize>,
}

/// `|E[g f(g)] - (right-hand side)|` for the triple's law, evaluated by the
/// quadrature/summation oracle. The order is doubled from 16 until two
/// successive residuals differ by less than 1e-10.
pub fn ibp_residual(
    triple: &LevyTriple,
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
) -> Result<IbpCheck, LevyError> {
    if triple.gauss_var() == 0.0 {
        let (lhs, rhs) = Oracle::new(triple, None).sides(&f, &df);
        return Ok(IbpCheck {
            residual: (lhs - rhs).abs(),
            lhs,
            rhs,
            order: None,
        });
    }
    let (lhs, rhs) = Oracle::new(triple, Some(START_ORDER)).sides(&f, &df);
    let mut previous = (lhs - rhs).abs();
    let mut order = START_ORDER;
    let mut change = f64::INFINITY;
    while order < MAX_ORDER {
        order *= 2;
        let (lhs, rhs) = Oracle::new(triple, Some(order)).sides(&f, &df);
        let residual = (lhs - rhs).abs();
        change = (residual - previous).abs();
        if change < CONVERGENCE {
            return Ok(IbpCheck {
                residual,
                lhs,
                rhs,
                order: Some(order),
            });
        }
        previous = residual;
    }
    Err(LevyError::QuadratureNotConverged {
        order,
        last_change: change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_hermite_integrates_moments() {
        let (x, w) = gauss_hermite(10);
        let moment = |k: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum::<f64>();
        assert!((moment(0) - 1.0).abs() < 1e-13);
        assert!(moment(1).abs() < 1e-13);
        assert!((moment(2) - 1.0).abs() < 1e-12);
        assert!((moment(4) - 3.0).abs() < 1e-11);
        assert!((moment(8) - 105.0).abs() < 1e-9);
    }

    #[test]
    fn gaussian_stein_identity_with_sin() {
        let t = LevyTriple::gaussian(1.0).unwrap();
        let check = ibp_residual(&t, f64::sin, f64::cos).unwrap();
        assert!(check.residual <= 1e-8);
        // E[cos Z] = e^{-1/2}
        assert!((check.rhs - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn compensated_poisson_identity() {
        let t = LevyTriple::compensated_poisson(1.0).unwrap();
        let f = |x: f64| (0.3 * x).sin() + 0.5 * (x * x / 8.0 + 1.0).recip();
        let check = ibp_residual(&t, f, |_| 0.0).unwrap();
        assert!(check.order.is_none());
        assert!(check.residual <= 1e-8, "{check:?}");
    }

    #[test]
    fn constant_function_gives_zero() {
        for t in [
            LevyTriple::gaussian(2.0).unwrap(),
            LevyTriple::new(0.0, 0.4, &[(2.0, 0.3), (-0.5, 0.8)]).unwrap().center(),
        ] {
            let check = ibp_residual(&t, |_| 3.0, |_| 0.0).unwrap();
            assert!(check.residual <= 1e-12, "{check:?}");
        }
    }

    #[test]
    fn lattice_probabilities_sum_to_one() {
        let t = LevyTriple::new(0.0, 0.0, &[(1.0, 2.0), (-3.0, 0.5)]).unwrap();
        let total: f64 = jump_lattice(&t).iter().map(|p| p.1).sum();
        assert!((total - 1.0).abs() < 1e-13);
    }
}
