//! Ground-truth machinery: tensor-grid quadrature posteriors over the
//! coefficient block, an adaptive random-walk Metropolis sampler, density
//! distances, and the summary statistics (mode, IQR, skewness) used in every
//! comparison.

use crate::lgm::{gaussian_approximation, GlmModel, GridDensity, LgmError};
use crate::math::{cum_integral, trapezoid, LN_2PI};
use crate::par::map_indexed;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("coefficient block dimension {0} unsupported (max 3)")]
    UnsupportedDimension(usize),
    #[error("density has no unique mode within tolerance")]
    AmbiguousMode,
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("sampler acceptance rate {rate:.3} outside [0.05, 0.95] after adaptation")]
    Diagnostics { rate: f64 },
    #[error("density grids do not match")]
    GridMismatch,
    #[error(transparent)]
    Lgm(#[from] LgmError),
}

/// Mode, interquartile range and standardized skewness of a density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    pub mode: f64,
    pub iqr: f64,
    pub skewness: f64,
}

/// Random-walk Metropolis configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct McmcConfig {
    pub chains: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub step_scale: f64,
    pub seed: u64,
}

impl McmcConfig {
    fn validate(&self) -> Result<(), OracleError> {
        if self.chains == 0 {
            return Err(OracleError::InvalidConfig("chains must be positive".into()));
        }
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(OracleError::InvalidConfig(
                "need burn_in < iterations, both sensible".into(),
            ));
        }
        if !(self.step_scale.is_finite() && self.step_scale > 0.0) {
            return Err(OracleError::InvalidConfig(
                "step_scale must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Post-burn-in samples of the coefficient pair, one block per chain.
#[derive(Debug, Clone)]
pub struct McmcSamples {
    chains: Vec<Vec<[f64; 2]>>,
    acceptance_rates: Vec<f64>,
}

impl McmcSamples {
    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }
    pub fn chain(&self, c: usize) -> &[[f64; 2]] {
        &self.chains[c]
    }
    pub fn acceptance_rates(&self) -> &[f64] {
        &self.acceptance_rates
    }
    /// All chains stacked, one coefficient column.
    pub fn pooled_column(&self, j: usize) -> Vec<f64> {
        self.chains
            .iter()
            .flat_map(|ch| ch.iter().map(move |row| row[j]))
            .collect()
    }
    /// Delimited text: chain, iteration, b0, b1.
    pub fn to_text(&self) -> String {
        let mut out = String::from("chain\titer\tb0\tb1\n");
        for (c, ch) in self.chains.iter().enumerate() {
            for (k, row) in ch.iter().enumerate() {
                out.push_str(&format!("{c}\t{k}\t{:.12e}\t{:.12e}\n", row[0], row[1]));
            }
        }
        out
    }
}

/// Tensor-grid quadrature marginals of the exact coefficient posterior
/// (η = Xβ substituted analytically). `coeff_indices` selects among the
/// coefficients (0 = intercept, 1 = slope); the block dimension here is 2.
pub fn quadrature_posterior(
    m: &GlmModel,
    coeff_indices: &[usize],
) -> Result<Vec<GridDensity>, OracleError> {
    if coeff_indices.len() > 3 {
        return Err(OracleError::UnsupportedDimension(coeff_indices.len()));
    }
    if coeff_indices.iter().any(|&j| j > 1) {
        return Err(OracleError::InvalidConfig(
            "coefficient index must be 0 or 1".into(),
        ));
    }
    let ga = gaussian_approximation(m)?;
    let (i0, i1) = (m.intercept_index(), m.slope_index());
    let (c0, c1) = (ga.mode()[i0], ga.mode()[i1]);
    let (s0, s1) = (ga.marginal_sd(i0), ga.marginal_sd(i1));

    const NPTS: usize = 801;
    const SPAN: f64 = 8.0;
    let axis = |c: f64, s: f64| -> Vec<f64> {
        (0..NPTS)
            .map(|k| c - SPAN * s + 2.0 * SPAN * s * k as f64 / (NPTS - 1) as f64)
            .collect()
    };
    let b0s = axis(c0, s0);
    let b1s = axis(c1, s1);

    // log posterior rows over b0, in parallel
    let rows: Vec<Vec<f64>> = map_indexed(NPTS, |a| {
        b1s.iter()
            .map(|b1| m.coeff_log_posterior(b0s[a], *b1))
            .collect()
    });
    let mx = rows
        .iter()
        .flat_map(|r| r.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);

    let mut out = Vec::with_capacity(coeff_indices.len());
    for &j in coeff_indices {
        let vals: Vec<f64> = if j == 0 {
            rows.iter()
                .map(|row| {
                    let dens: Vec<f64> = row.iter().map(|l| (l - mx).exp()).collect();
                    trapezoid(&b1s, &dens)
                })
                .collect()
        } else {
            (0..NPTS)
                .map(|b| {
                    let col: Vec<f64> = rows.iter().map(|row| (row[b] - mx).exp()).collect();
                    trapezoid(&b0s, &col)
                })
                .collect()
        };
        let grid = if j == 0 { b0s.clone() } else { b1s.clone() };
        out.push(GridDensity::from_unnormalized(grid, vals)?);
    }
    Ok(out)
}

/// Adaptive random-walk Metropolis over the coefficient pair. Proposals are
/// preconditioned by the Gaussian-approximation covariance; the global step
/// scale is steered toward acceptance in [0.2, 0.5] during burn-in and then
/// frozen. Streams are per-chain: (seed, chain-index).
pub fn mcmc_posterior(m: &GlmModel, cfg: &McmcConfig) -> Result<McmcSamples, OracleError> {
    cfg.validate()?;
    let ga = gaussian_approximation(m)?;
    let (i0, i1) = (m.intercept_index(), m.slope_index());
    let start = [ga.mode()[i0], ga.mode()[i1]];
    let cov2 = nalgebra::Matrix2::new(
        ga.covariance()[(i0, i0)],
        ga.covariance()[(i0, i1)],
        ga.covariance()[(i1, i0)],
        ga.covariance()[(i1, i1)],
    );
    let l = cov2
        .cholesky()
        .ok_or_else(|| OracleError::InvalidConfig("degenerate proposal covariance".into()))?
        .l();

    let chains: Vec<(Vec<[f64; 2]>, f64)> = map_indexed(cfg.chains, |c| {
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
        rng.set_stream(c as u64);
        let mut x = start;
        let mut lp = m.coeff_log_posterior(x[0], x[1]);
        let mut scale = cfg.step_scale;
        let mut kept = Vec::with_capacity(cfg.iterations - cfg.burn_in);
        let mut accepted_window = 0usize;
        let mut accepted_total = 0usize;
        for it in 0..cfg.iterations {
            let z0: f64 = StandardNormal.sample(&mut rng);
            let z1: f64 = StandardNormal.sample(&mut rng);
            let step = [
                scale * (l[(0, 0)] * z0),
                scale * (l[(1, 0)] * z0 + l[(1, 1)] * z1),
            ];
            let cand = [x[0] + step[0], x[1] + step[1]];
            let lp_cand = m.coeff_log_posterior(cand[0], cand[1]);
            let accept = lp_cand - lp >= 0.0 || rng.gen::<f64>().ln() < lp_cand - lp;
            if accept {
                x = cand;
                lp = lp_cand;
                accepted_window += 1;
                if it >= cfg.burn_in {
                    accepted_total += 1;
                }
            } else if it >= cfg.burn_in {
                // rejected moves still count toward the post-burn-in rate
            }
            // steer toward the [0.2, 0.5] acceptance band during burn-in
            if it < cfg.burn_in && (it + 1) % 50 == 0 {
                let rate = accepted_window as f64 / 50.0;
                scale = (scale * (0.66 * (rate - 0.35)).exp()).clamp(1e-3, 1e3);
                accepted_window = 0;
            }
            if it >= cfg.burn_in {
                kept.push(x);
            }
        }
        let rate = accepted_total as f64 / (cfg.iterations - cfg.burn_in) as f64;
        (kept, rate)
    });

    let mut out = McmcSamples {
        chains: Vec::with_capacity(cfg.chains),
        acceptance_rates: Vec::with_capacity(cfg.chains),
    };
    for (kept, rate) in chains {
        if !(0.05..=0.95).contains(&rate) {
            return Err(OracleError::Diagnostics { rate });
        }
        out.chains.push(kept);
        out.acceptance_rates.push(rate);
    }
    Ok(out)
}

/// Gaussian kernel density of samples on a grid, bandwidth by the normal
/// reference rule h = (4/(3n))^{1/5}·σ̂. Returns (density, bandwidth).
pub fn kernel_density(samples: &[f64], grid: &[f64]) -> Result<(GridDensity, f64), OracleError> {
    let n = samples.len();
    if n < 2 {
        return Err(OracleError::InvalidConfig("need at least 2 samples".into()));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    let h = (4.0 / (3.0 * n as f64)).powf(0.2) * var.sqrt();
    let vals = map_indexed(grid.len(), |k| {
        let x = grid[k];
        samples
            .iter()
            .map(|s| (-0.5 * ((x - s) / h).powi(2)).exp())
            .sum::<f64>()
    });
    Ok((GridDensity::from_unnormalized(grid.to_vec(), vals)?, h))
}

/// Mode (parabolic-refined argmax), IQR (high-order CDF inversion at
/// 0.25/0.75) and skewness (density moments) of a normalized grid density.
pub fn summarize(d: &GridDensity) -> Result<SummaryStats, OracleError> {
    let xs = d.abscissa();
    let ys = d.density();
    let n = xs.len();
    let (mut imax, mut ymax) = (0usize, f64::NEG_INFINITY);
    for (i, y) in ys.iter().enumerate() {
        if *y > ymax {
            ymax = *y;
            imax = i;
        }
    }
    if ymax <= 0.0 {
        return Err(OracleError::AmbiguousMode);
    }
    // a second near-maximal point far from the argmax means no unique mode
    for (i, y) in ys.iter().enumerate() {
        if *y > ymax * (1.0 - 1e-9) && i.abs_diff(imax) > 2 {
            return Err(OracleError::AmbiguousMode);
        }
    }
    let mode = if imax == 0 || imax == n - 1 {
        xs[imax]
    } else {
        let (y0, y1, y2) = (ys[imax - 1], ys[imax], ys[imax + 1]);
        let den = y0 - 2.0 * y1 + y2;
        if den.abs() < f64::EPSILON * ymax {
            xs[imax]
        } else {
            xs[imax] + 0.5 * (y0 - y2) / den * (xs[imax + 1] - xs[imax])
        }
    };

    let mut cdf = cum_integral(xs, ys);
    let total = cdf[n - 1];
    for c in cdf.iter_mut() {
        *c /= total;
    }
    let q25 = quantile_from_cdf(xs, ys, &cdf, 0.25)?;
    let q75 = quantile_from_cdf(xs, ys, &cdf, 0.75)?;

    let m1 = trapezoid(xs, &xs.iter().zip(ys).map(|(x, y)| x * y).collect::<Vec<_>>());
    let m2 = trapezoid(
        xs,
        &xs.iter()
            .zip(ys)
            .map(|(x, y)| (x - m1).powi(2) * y)
            .collect::<Vec<_>>(),
    );
    let m3 = trapezoid(
        xs,
        &xs.iter()
            .zip(ys)
            .map(|(x, y)| (x - m1).powi(3) * y)
            .collect::<Vec<_>>(),
    );
    Ok(SummaryStats {
        mode,
        iqr: q75 - q25,
        skewness: m3 / m2.powf(1.5),
    })
}

/// Invert the tabulated CDF at probability `q` using the Hermite cubic on
/// the bracketing interval (the CDF's derivative at the knots is the
/// density itself), bisected to convergence.
fn quantile_from_cdf(xs: &[f64], dens: &[f64], cdf: &[f64], q: f64) -> Result<f64, OracleError> {
    let n = xs.len();
    let k = match cdf.binary_search_by(|v| v.partial_cmp(&q).unwrap()) {
        Ok(i) => return Ok(xs[i]),
        Err(i) => i.clamp(1, n - 1) - 1,
    };
    let h = xs[k + 1] - xs[k];
    let (c0, c1) = (cdf[k], cdf[k + 1]);
    let (d0, d1) = (dens[k], dens[k + 1]);
    let eval = |t: f64| {
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * c0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * c1
            + (t3 - t2) * h * d1
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if eval(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(xs[k] + 0.5 * (lo + hi) * h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMetric {
    Kl,
    Sup,
    Tv,
}

/// Distance between two densities on a shared abscissa.
pub fn density_distance(
    a: &GridDensity,
    b: &GridDensity,
    metric: DistanceMetric,
) -> Result<f64, OracleError> {
    if a.abscissa() != b.abscissa() {
        return Err(OracleError::GridMismatch);
    }
    let xs = a.abscissa();
    match metric {
        DistanceMetric::Kl => {
            let vals: Vec<f64> = a
                .density()
                .iter()
                .zip(b.density())
                .map(|(p, q)| {
                    let p = p.max(1e-300);
                    let q = q.max(1e-300);
                    p * (p.ln() - q.ln())
                })
                .collect();
            Ok(trapezoid(xs, &vals))
        }
        DistanceMetric::Sup => Ok(a
            .density()
            .iter()
            .zip(b.density())
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max)),
        DistanceMetric::Tv => {
            let vals: Vec<f64> = a
                .density()
                .iter()
                .zip(b.density())
                .map(|(p, q)| (p - q).abs())
                .collect();
            Ok(0.5 * trapezoid(xs, &vals))
        }
    }
}

/// Check the Gaussian bound on the full conditionals of a hierarchical-t
/// model: Gaussian data y = x + ε, latent x|λ ~ N(0, Λ^{-1/2}Q⁻¹Λ^{-1/2})
/// with λᵢ ~ Gamma(dof/2, dof/2). For the drawn λ the posterior of x is
/// Gaussian, so the unnormalized marginal m(xᵢ) = Z·N(xᵢ; μᵢ, Σᵢᵢ) is exact
/// and compared pointwise against K̃·N(xᵢ; 0, prior variance).
pub fn verify_conditional_gaussian_bound(dim: usize, dof: f64, seed: u64) -> bool {
    conditional_bound_check(dim, dof, seed, 1.0)
}

/// Same check with every per-observation likelihood bound K̃ᵢ multiplied by
/// `bound_scale`; `bound_scale` = 0.5 demonstrates the check has power.
pub fn conditional_bound_check(dim: usize, dof: f64, seed: u64, bound_scale: f64) -> bool {
    assert!((1..=5).contains(&dim), "dim must be in 1..=5");
    assert!(dof > 0.0 && dof.is_finite());
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    // random SPD precision with unit prior marginal variances
    let a = DMatrix::from_fn(dim, dim, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z
    });
    let mut s = &a * a.transpose() + DMatrix::identity(dim, dim) * dim as f64;
    for i in 0..dim {
        let d = s[(i, i)].sqrt();
        for j in 0..dim {
            s[(i, j)] /= d;
            s[(j, i)] /= d;
        }
        s[(i, i)] = 1.0;
    }
    let sigma = s; // prior covariance before mixing, unit diagonal

    let gamma = Gamma::new(dof / 2.0, 2.0 / dof).expect("valid gamma parameters");
    let lambda: Vec<f64> = (0..dim).map(|_| gamma.sample(&mut rng)).collect();
    // Σ_λ = Λ^{-1/2} Σ Λ^{-1/2}
    let sigma_l = DMatrix::from_fn(dim, dim, |i, j| {
        sigma[(i, j)] / (lambda[i] * lambda[j]).sqrt()
    });

    let chol_prior = Cholesky::new(sigma_l.clone()).expect("prior covariance is SPD");
    let z = DVector::from_fn(dim, |_, _| {
        let v: f64 = StandardNormal.sample(&mut rng);
        v
    });
    let x_true = chol_prior.l() * z;
    let y = DVector::from_fn(dim, |i, _| {
        let e: f64 = StandardNormal.sample(&mut rng);
        x_true[i] + e
    });

    // posterior with unit observation noise
    let q_l = Cholesky::new(sigma_l.clone())
        .expect("SPD")
        .inverse();
    let prec_post = &q_l + DMatrix::identity(dim, dim);
    let chol_post = Cholesky::new(prec_post.clone()).expect("posterior precision SPD");
    let mu_post = chol_post.solve(&y);
    let cov_post = chol_post.inverse();

    // evidence Z = N(y; 0, Σ_λ + I)
    let sy = &sigma_l + DMatrix::identity(dim, dim);
    let chol_sy = Cholesky::new(sy).expect("SPD");
    let logdet_sy: f64 = chol_sy.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    let quad = (chol_sy.solve(&y).transpose() * &y)[(0, 0)];
    let log_z = -0.5 * (dim as f64 * LN_2PI + logdet_sy + quad);

    let log_k = (bound_scale.ln() - 0.5 * LN_2PI) * dim as f64;
    for i in 0..dim {
        let var_prior = sigma_l[(i, i)];
        let (mu_i, var_i) = (mu_post[i], cov_post[(i, i)]);
        let half = 8.0 * var_i.sqrt().max(var_prior.sqrt());
        for k in 0..401 {
            let x = mu_i - half + 2.0 * half * k as f64 / 400.0;
            let log_m = log_z - 0.5 * ((x - mu_i) * (x - mu_i) / var_i + var_i.ln() + LN_2PI);
            let log_bound =
                log_k - 0.5 * (x * x / var_prior + var_prior.ln() + LN_2PI);
            if log_m > log_bound + 1e-9 {
                return false;
            }
        }
    }
    true
}
