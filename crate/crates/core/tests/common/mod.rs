#![allow(dead_code)]

use nalgebra::DMatrix;
use polymer_lab::chain::ChainSpec;
use polymer_lab::lyapunov::Potential;
use polymer_lab::levy::{EnvironmentField, EnvironmentLaw, LevyError};
use polymer_lab::transfer::log_partition;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every admissible path `(S_1, ..., S_n)` from the start state with its
/// probability under the chain.
pub fn enumerate_paths(chain: &ChainSpec, n: usize) -> Vec<(Vec<usize>, f64)> {
    let mut paths = vec![(Vec::new(), 1.0)];
    for _ in 0..n {
        let mut next = Vec::new();
        for (path, p) in &paths {
            let last = *path.last().unwrap_or(&chain.start());
            for y in 0..chain.len() {
                let q = chain.prob(last, y);
                if q > 0.0 {
                    let mut extended: Vec<usize> = path.clone();
                    extended.push(y);
                    next.push((extended, p * q));
                }
            }
        }
        paths = next;
    }
    paths
}

/// Random irreducible chain: a positive cycle backbone plus random mass,
/// with some entries zeroed.
pub fn random_chain(size: usize, rng: &mut impl Rng) -> ChainSpec {
    let mut rows = Vec::with_capacity(size);
    for i in 0..size {
        let mut row: Vec<f64> = (0..size)
            .map(|_| if rng.random::<f64>() < 0.3 { 0.0 } else { rng.random::<f64>() })
            .collect();
        row[(i + 1) % size] += 0.2 + rng.random::<f64>();
        let total: f64 = row.iter().sum();
        let mut row: Vec<f64> = row.iter().map(|v| v / total).collect();
        // push rounding into the largest entry so the row sums to 1
        let sum: f64 = row.iter().sum();
        let argmax = (0..size).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        row[argmax] += 1.0 - sum;
        rows.push(row);
    }
    ChainSpec::from_matrix(rows).expect("backbone makes the chain irreducible")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Test chains with at most three states.
pub fn small_corpus() -> Vec<ChainSpec> {
    vec![
        ChainSpec::from_matrix(vec![vec![1.0]]).unwrap(),
        ChainSpec::symmetric_two_state(0.3).unwrap(),
        ChainSpec::from_matrix(vec![vec![0.3, 0.7], vec![0.5, 0.5]]).unwrap(),
        ChainSpec::cycle(2).unwrap(),
        ChainSpec::cycle(3).unwrap(),
        ChainSpec::uniform(3).unwrap(),
        ChainSpec::from_matrix(vec![
            vec![0.2, 0.5, 0.3],
            vec![0.6, 0.0, 0.4],
            vec![0.1, 0.1, 0.8],
        ])
        .unwrap(),
    ]
}

/// Brute-force quenched quantities for one field.
pub struct Brute {
    pub log_z: f64,
    pub marginals: Vec<Vec<f64>>,
    pub energy: f64,
    pub overlap: f64,
}

pub fn brute_force(chain: &ChainSpec, field: &EnvironmentField, lambda: f64, beta: f64) -> Brute {
    let n = field.horizon();
    let paths = enumerate_paths(chain, n);
    let weights: Vec<f64> = paths
        .iter()
        .map(|(path, p)| {
            let h: f64 = path.iter().enumerate().map(|(i, &x)| beta * field.at(i + 1, x) - lambda).sum();
            p * h.exp()
        })
        .collect();
    let z: f64 = weights.iter().sum();
    let mut marginals = vec![vec![0.0; chain.len()]; n];
    let mut energy = 0.0;
    for ((path, _), w) in paths.iter().zip(&weights) {
        for (i, &x) in path.iter().enumerate() {
            marginals[i][x] += w / z;
            energy += w / z * field.at(i + 1, x);
        }
    }
    // overlap from pairs of paths, independent of the marginals
    let mut overlap = 0.0;
    for ((p1, _), w1) in paths.iter().zip(&weights) {
        for ((p2, _), w2) in paths.iter().zip(&weights) {
            let shared = p1.iter().zip(p2).filter(|(a, b)| a == b).count() as f64;
            overlap += w1 * w2 / (z * z) * shared;
        }
    }
    Brute {
        log_z: z.ln(),
        marginals,
        energy,
        overlap,
    }
}

/// `g = a` with probability `p`, `g = b` otherwise.
pub struct TwoPoint {
    pub a: f64,
    pub b: f64,
    pub p: f64,
}

impl EnvironmentLaw for TwoPoint {
    fn cumulant(&self, beta: f64) -> Result<f64, LevyError> {
        Ok((self.p * (beta * self.a).exp() + (1.0 - self.p) * (beta * self.b).exp()).ln())
    }

    fn cumulant_derivative(&self, beta: f64) -> Result<f64, LevyError> {
        let ea = self.p * (beta * self.a).exp();
        let eb = (1.0 - self.p) * (beta * self.b).exp();
        Ok((self.a * ea + self.b * eb) / (ea + eb))
    }

    fn draw(&self, rng: &mut dyn RngCore) -> f64 {
        if rng.random::<f64>() < self.p {
            self.a
        } else {
            self.b
        }
    }
}

/// Exact `E Z_n` by summing over all `2^{n|Σ|}` fields.
pub fn enumerated_mean(chain: &ChainSpec, law: &TwoPoint, n: usize, beta: f64) -> f64 {
    let cells = n * chain.len();
    let mut total = 0.0;
    for mask in 0u64..(1u64 << cells) {
        let mut prob = 1.0;
        let values: Vec<f64> = (0..cells)
            .map(|k| {
                if mask >> k & 1 == 1 {
                    prob *= law.p;
                    law.a
                } else {
                    prob *= 1.0 - law.p;
                    law.b
                }
            })
            .collect();
        let rows = values.chunks(chain.len()).map(<[f64]>::to_vec).collect();
        let field = EnvironmentField::from_rows(rows).unwrap();
        total += prob * log_partition(chain, &field, law, beta).unwrap().exp();
    }
    total
}


pub fn random_potential(size: usize, scale: f64, r: &mut impl Rng) -> Potential {
    Potential::new((0..size).map(|_| scale * (2.0 * r.random::<f64>() - 1.0)).collect()).unwrap()
}

/// `log max |eigenvalue|` of `diag(e^f) P` from a Schur decomposition.
pub fn eigen_log_root(chain: &ChainSpec, f: &Potential) -> f64 {
    let s = chain.len();
    let m = DMatrix::from_fn(s, s, |x, y| f.values()[x].exp() * chain.prob(x, y));
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .ln()
}
