use rand::{Rng, RngCore};
use rand_distr::{Distribution, Poisson};

/// Means up to this value use sequential inversion.
const INVERSION_LIMIT: f64 = 30.0;

/// Poisson variate with the given mean: inversion of the CDF for small means,
/// the rejection sampler of `rand_distr` above [`INVERSION_LIMIT`].
pub fn sample_poisson<R: RngCore + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean > INVERSION_LIMIT {
        let dist = Poisson::new(mean).expect("positive finite mean");
        return dist.sample(rng) as u64;
    }
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = (-mean).exp();
    let mut cdf = p;
    // the cap only triggers when u rounds above the representable CDF
    while u > cdf && k < 1000 {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
    }
    k
}
