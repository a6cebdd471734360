//! End-to-end behaviour of the model → Laplace → fit pipeline against the
//! quadrature and MCMC oracles.

use esla::fitters::Interpolants;
use esla::lgm::{
    default_grid, extract_taylor_coeffs, gaussian_approximation, laplace_marginal,
    marginal_by_strategy, Family, GlmModel, MarginalStrategy,
};
use esla::oracle::{
    density_distance, kernel_density, mcmc_posterior, quadrature_posterior, summarize,
    DistanceMetric, McmcConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use std::sync::OnceLock;

fn kit() -> &'static Interpolants {
    static KIT: OnceLock<Interpolants> = OnceLock::new();
    KIT.get_or_init(Interpolants::build)
}

/// Simulate one data set: standard-normal covariate, responses from the true
/// coefficients (0.5, 1.0).
fn simulate(family: Family, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
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

#[test]
fn laplace_matches_quadrature_for_one_observation() {
    // with a single observation the coefficient posterior is exactly
    // integrable; LA should sit within 1e-3 of it pointwise
    let m = GlmModel::new(Family::Bernoulli, vec![0.0], vec![1.0], 1.5).unwrap();
    let i = m.slope_index();
    let oracle = quadrature_posterior(&m, &[1]).unwrap().remove(0);
    let ga = gaussian_approximation(&m).unwrap();
    let grid = default_grid(&ga, i);
    let la = laplace_marginal(&m, i, &grid).unwrap();
    let sup = la
        .abscissa()
        .iter()
        .zip(la.density())
        .map(|(x, d)| (d - oracle.interp(*x)).abs())
        .fold(0.0, f64::max);
    assert!(sup < 1e-3, "sup {sup}");
}

#[test]
fn esla_mode_lands_closer_to_laplace_in_a_skewed_cell() {
    // single failure, positive covariate, vague prior: strongly skewed
    // coefficient marginal where the fourth-order fit should place the mode
    // better
    let m = GlmModel::new(Family::Bernoulli, vec![0.0], vec![1.0], 0.1).unwrap();
    let i = m.slope_index();
    let ga = gaussian_approximation(&m).unwrap();
    let grid = default_grid(&ga, i);
    let la = summarize(&laplace_marginal(&m, i, &grid).unwrap()).unwrap();
    let sla = marginal_by_strategy(&m, i, MarginalStrategy::Sla, &grid, kit()).unwrap();
    let esla = marginal_by_strategy(&m, i, MarginalStrategy::Esla, &grid, kit()).unwrap();
    assert!(esla.fit.as_ref().unwrap().fallback_reason.is_none());
    let s_sla = summarize(&sla.density).unwrap();
    let s_esla = summarize(&esla.density).unwrap();
    assert!(
        (s_esla.mode - la.mode).abs() < (s_sla.mode - la.mode).abs(),
        "esla {} sla {} la {}",
        s_esla.mode,
        s_sla.mode,
        la.mode
    );
}

#[test]
fn strategies_converge_for_large_samples() {
    // poisson n=100: third/fourth-order fits nearly coincide
    let (y, w) = simulate(Family::Poisson, 100, 31);
    let m = GlmModel::new(Family::Poisson, y, w, 0.01).unwrap();
    let i = m.slope_index();
    let ga = gaussian_approximation(&m).unwrap();
    let grid = default_grid(&ga, i);
    let sla = marginal_by_strategy(&m, i, MarginalStrategy::Sla, &grid, kit()).unwrap();
    let esla = marginal_by_strategy(&m, i, MarginalStrategy::Esla, &grid, kit()).unwrap();
    let peak = sla.density.density().iter().cloned().fold(0.0, f64::max);
    let sup = density_distance(&sla.density, &esla.density, DistanceMetric::Sup).unwrap();
    assert!(sup < 0.02 * peak, "sup {sup} vs peak {peak}");
}

#[test]
fn simplified_fit_approaches_laplace_as_n_grows() {
    // one data-generating process, growing nested samples: the normalized
    // sup distance between the third-order fit and LA shrinks monotonically
    let (y100, w100) = simulate(Family::Bernoulli, 100, 21);
    let mut prev = f64::INFINITY;
    for n in [1usize, 10, 50, 100] {
        let m = GlmModel::new(
            Family::Bernoulli,
            y100[..n].to_vec(),
            w100[..n].to_vec(),
            0.05,
        )
        .unwrap();
        let i = m.slope_index();
        let ga = gaussian_approximation(&m).unwrap();
        let grid = default_grid(&ga, i);
        let la = marginal_by_strategy(&m, i, MarginalStrategy::La, &grid, kit()).unwrap();
        let sla = marginal_by_strategy(&m, i, MarginalStrategy::Sla, &grid, kit()).unwrap();
        let peak = la.density.density().iter().cloned().fold(0.0, f64::max);
        let sup = density_distance(&sla.density, &la.density, DistanceMetric::Sup).unwrap() / peak;
        assert!(
            sup < prev,
            "normalized sup distance did not shrink at n={n}: {sup} vs {prev}"
        );
        prev = sup;
    }
}

#[test]
fn extraction_is_invariant_under_covariate_rescaling() {
    // rescaling the covariate by c (with the slope prior precision scaled
    // by c^2, the same model in new units) must leave the standardized
    // expansion data unchanged
    let (y, w) = simulate(Family::Poisson, 25, 5);
    let m1 = GlmModel::with_coeff_precisions(Family::Poisson, y.clone(), w.clone(), [0.5, 0.5])
        .unwrap();
    let c = 2.0;
    let m2 = GlmModel::with_coeff_precisions(
        Family::Poisson,
        y,
        w.iter().map(|v| v * c).collect(),
        [0.5, 0.5 * c * c],
    )
    .unwrap();
    let t1 = extract_taylor_coeffs(&m1, m1.slope_index()).unwrap();
    let t2 = extract_taylor_coeffs(&m2, m2.slope_index()).unwrap();
    assert!((t1.mu_tilde - t2.mu_tilde).abs() < 1e-5, "{t1:?} vs {t2:?}");
    assert!(
        (t1.gamma1_tilde - t2.gamma1_tilde).abs() < 1e-5,
        "{t1:?} vs {t2:?}"
    );
    assert!(
        (t1.gamma2_tilde.unwrap() - t2.gamma2_tilde.unwrap()).abs() < 1e-4,
        "{t1:?} vs {t2:?}"
    );
}

#[test]
fn quadrature_and_mcmc_oracles_agree() {
    // 20 randomized small models: modes within 0.05 IQR, IQR ratios within 5%
    let cfg_base = McmcConfig {
        chains: 3,
        iterations: 60_000,
        burn_in: 10_000,
        step_scale: 1.0,
        seed: 0,
    };
    for rep in 0..20u64 {
        let family = if rep % 2 == 0 {
            Family::Bernoulli
        } else {
            Family::Poisson
        };
        let n = 6 + (rep as usize % 3) * 4;
        let (y, w) = simulate(family, n, 900 + rep);
        let m = GlmModel::new(family, y, w, 0.5).unwrap();
        let qd = quadrature_posterior(&m, &[1]).unwrap().remove(0);
        let sq = summarize(&qd).unwrap();
        let cfg = McmcConfig {
            seed: 7000 + rep,
            ..cfg_base
        };
        let samples = mcmc_posterior(&m, &cfg).unwrap();
        let (kde, bw) = kernel_density(&samples.pooled_column(1), qd.abscissa()).unwrap();
        let sk = summarize(&kde).unwrap();
        // a kernel-density mode carries O(bandwidth) uncertainty, which for
        // wide skewed marginals can exceed 5% of the IQR
        let tol = (0.05 * sq.iqr).max(2.0 * bw);
        assert!(
            (sk.mode - sq.mode).abs() < tol,
            "rep {rep}: mode {} vs {} (iqr {}, bw {bw})",
            sk.mode,
            sq.mode,
            sq.iqr
        );
        assert!(
            (sk.iqr / sq.iqr - 1.0).abs() < 0.05,
            "rep {rep}: iqr {} vs {}",
            sk.iqr,
            sq.iqr
        );
    }
}
