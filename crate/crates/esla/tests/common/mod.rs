//! Shared helpers for the integration and acceptance suites.

use esla::fitters::Interpolants;
use esla::lgm::Family;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use std::sync::OnceLock;

pub fn kit() -> &'static Interpolants {
    static KIT: OnceLock<Interpolants> = OnceLock::new();
    KIT.get_or_init(Interpolants::build)
}

/// One simulated data set: standard-normal covariate, responses drawn from
/// the true coefficients (0.5, 1.0).
pub fn simulate(family: Family, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let y: Vec<f64> = w
        .iter()
        .map(|wi| {
            let eta = 0.5 + 1.0 * wi;
            match family {
                Family::Bernoulli => {
                    let p = 1.0 / (1.0 + (-eta).exp());
                    f64::from(rng.gen::<f64>() < p)
                }
                Family::Poisson => {
                    let lam = eta.exp().clamp(1e-12, 1e6);
                    Poisson::new(lam).unwrap().sample(&mut rng)
                }
                Family::Gaussian => {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    eta + e
                }
            }
        })
        .collect();
    (y, w)
}
