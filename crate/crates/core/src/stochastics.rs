//! Random-number kernels: seeded streams, univariate and multivariate
//! truncated normals, scaled inverse chi-square, multivariate normal, and the
//! Beta log-density.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::erf::{erf, erf_inv, erfc, erfc_inv};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Seeded, stream-addressable generator. Identical `(seed, stream)` pairs
/// reproduce the exact draw sequence; distinct streams never overlap by the
/// generator's stream construction.
pub type RngStream = ChaCha12Rng;

pub fn rng_stream(seed: u64, stream_id: u64) -> RngStream {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Per-coordinate truncation bounds, extended reals allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl TruncRegion {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::LengthMismatch {
                left: lower.len(),
                right: upper.len(),
            });
        }
        for (&lo, &hi) in lower.iter().zip(&upper) {
            if !(lo < hi) {
                return Err(Error::DegenerateRegion(format!("bounds [{lo}, {hi}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn unbounded(dim: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&v, (&lo, &hi))| v >= lo && v <= hi)
    }
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail probability, accurate for large x.
fn std_normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

fn std_normal_quantile(p: f64) -> f64 {
    std::f64::consts::SQRT_2 * erf_inv(2.0 * p - 1.0)
}

/// Quantile expressed through the upper-tail probability, stable when q is
/// tiny.
fn std_normal_isf(q: f64) -> f64 {
    std::f64::consts::SQRT_2 * erfc_inv(2.0 * q)
}

/// Standardized bound beyond which the inverse-CDF loses precision and the
/// exponential-proposal rejection sampler takes over.
const TAIL_SWITCH: f64 = 5.0;
const MAX_REJECTIONS: usize = 100_000;

/// One-sided exponential rejection sampler for the standard normal restricted
/// to [a, b) with a >= 0 (possibly b = inf).
fn robert_tail<R: Rng>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    for _ in 0..MAX_REJECTIONS {
        let u: f64 = rng.random();
        let x = a - (1.0 - u).ln() / lambda;
        if x >= b {
            continue;
        }
        let accept = (-(x - lambda) * (x - lambda) / 2.0).exp();
        let v: f64 = rng.random();
        if v <= accept {
            return Ok(x);
        }
    }
    Err(Error::DegenerateRegion(format!(
        "tail region [{a}, {b}) rejected {MAX_REJECTIONS} proposals"
    )))
}

/// Draw from N(mu, sd^2) conditioned to (lower, upper). Inverse-CDF in the
/// central regime, exponential rejection in far tails; the result always lies
/// strictly inside the region.
pub fn rtruncnorm1<R: Rng>(mu: f64, sd: f64, lower: f64, upper: f64, rng: &mut R) -> Result<f64> {
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::DomainError(format!("sd = {sd} must be positive")));
    }
    if !(lower < upper) {
        return Err(Error::DegenerateRegion(format!("bounds [{lower}, {upper}]")));
    }
    let a = (lower - mu) / sd;
    let b = (upper - mu) / sd;

    let z = if a == f64::NEG_INFINITY && b == f64::INFINITY {
        StandardNormal.sample(rng)
    } else if a >= TAIL_SWITCH {
        robert_tail(a, b, rng)?
    } else if b <= -TAIL_SWITCH {
        -robert_tail(-b, -a, rng)?
    } else if a >= 0.0 {
        // Work in upper-tail probabilities for precision.
        let qa = std_normal_sf(a);
        let qb = std_normal_sf(b);
        let u: f64 = rng.random();
        let q = qb + u * (qa - qb);
        if !(q > 0.0) {
            return Err(Error::DegenerateRegion(format!(
                "interval mass underflow on [{lower}, {upper}]"
            )));
        }
        std_normal_isf(q)
    } else if b <= 0.0 {
        let qa = std_normal_sf(-b);
        let qb = std_normal_sf(-a);
        let u: f64 = rng.random();
        let q = qb + u * (qa - qb);
        if !(q > 0.0) {
            return Err(Error::DegenerateRegion(format!(
                "interval mass underflow on [{lower}, {upper}]"
            )));
        }
        -std_normal_isf(q)
    } else {
        let pa = std_normal_cdf(a);
        let pb = std_normal_cdf(b);
        if !(pb > pa) {
            return Err(Error::DegenerateRegion(format!(
                "interval mass underflow on [{lower}, {upper}]"
            )));
        }
        let u: f64 = rng.random();
        std_normal_quantile(pa + u * (pb - pa))
    };

    let mut x = mu + sd * z;
    if x <= lower {
        x = next_up(lower);
    }
    if x >= upper {
        x = next_down(upper);
    }
    Ok(x)
}

fn next_up(v: f64) -> f64 {
    if v == f64::NEG_INFINITY {
        f64::MIN
    } else {
        v.next_up()
    }
}

fn next_down(v: f64) -> f64 {
    if v == f64::INFINITY {
        f64::MAX
    } else {
        v.next_down()
    }
}

/// One pass of coordinate-wise Gibbs for a truncated multivariate normal
/// parameterized by its precision matrix; `x` is updated in place and must
/// start inside the region.
pub fn tmvn_gibbs_sweep_prec<R: Rng>(
    mean: &DVector<f64>,
    prec: &DMatrix<f64>,
    region: &TruncRegion,
    x: &mut DVector<f64>,
    rng: &mut R,
) -> Result<()> {
    let d = mean.len();
    for i in 0..d {
        let pii = prec[(i, i)];
        if !(pii > 0.0) {
            return Err(Error::NotSpd(format!("conditional precision {pii} at {i}")));
        }
        let mut s = 0.0;
        for j in 0..d {
            if j != i {
                s += prec[(i, j)] * (x[j] - mean[j]);
            }
        }
        let cond_mean = mean[i] - s / pii;
        let cond_sd = (1.0 / pii).sqrt();
        x[i] = rtruncnorm1(cond_mean, cond_sd, region.lower[i], region.upper[i], rng)?;
    }
    Ok(())
}

/// Clamp a point into the open truncation region, using per-coordinate scale
/// hints for the push-off from infinite or violated bounds.
pub fn clamp_into_region(mu: &DVector<f64>, sd: &[f64], region: &TruncRegion) -> DVector<f64> {
    let mut x = mu.clone();
    for i in 0..mu.len() {
        let (lo, hi) = (region.lower[i], region.upper[i]);
        if x[i] > lo && x[i] < hi {
            continue;
        }
        let s = sd[i].max(1e-12);
        x[i] = if lo.is_finite() && hi.is_finite() {
            0.5 * (lo + hi)
        } else if lo.is_finite() {
            lo + 0.5 * s
        } else if hi.is_finite() {
            hi - 0.5 * s
        } else {
            x[i]
        };
    }
    x
}

/// Coordinate-Gibbs state after `sweeps` passes over a truncated MVN with
/// the given covariance, started from the clamped mean.
pub fn rtmvn_gibbs<R: Rng>(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    region: &TruncRegion,
    sweeps: usize,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if mu.len() != region.len() || sigma.nrows() != mu.len() || sigma.ncols() != mu.len() {
        return Err(Error::DimensionMismatch(format!(
            "mu {}, sigma {}x{}, region {}",
            mu.len(),
            sigma.nrows(),
            sigma.ncols(),
            region.len()
        )));
    }
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotSpd("truncated MVN covariance".into()))?;
    let prec = chol.inverse();
    let sds: Vec<f64> = (0..mu.len()).map(|i| sigma[(i, i)].sqrt()).collect();
    let mut x = clamp_into_region(mu, &sds, region);
    for _ in 0..sweeps {
        tmvn_gibbs_sweep_prec(mu, &prec, region, &mut x, rng)?;
    }
    Ok(x)
}

/// Scaled inverse chi-square draw: `df * scale / g` with `g ~ chi2(df)`.
pub fn rscaled_inv_chisq<R: Rng>(df: f64, scale: f64, rng: &mut R) -> Result<f64> {
    if !(df > 0.0) || !(scale > 0.0) {
        return Err(Error::DomainError(format!(
            "scaled inverse chi-square needs df > 0 and scale > 0, got ({df}, {scale})"
        )));
    }
    let chi = ChiSquared::new(df)
        .map_err(|e| Error::DomainError(format!("chi-square parameter: {e}")))?;
    loop {
        let g: f64 = chi.sample(rng);
        if g > 0.0 {
            return Ok(df * scale / g);
        }
    }
}

/// Multivariate normal draw `mu + L z` from a precomputed lower-triangular
/// covariance factor.
pub fn rmvn_factor<R: Rng>(mu: &DVector<f64>, l: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let z = DVector::from_fn(mu.len(), |_, _| StandardNormal.sample(rng));
    mu + l * z
}

/// Multivariate normal draw from a dense covariance; errors when the
/// covariance is not SPD.
pub fn rmvn<R: Rng>(mu: &DVector<f64>, sigma: &DMatrix<f64>, rng: &mut R) -> Result<DVector<f64>> {
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotSpd("multivariate normal covariance".into()))?;
    Ok(rmvn_factor(mu, &chol.l(), rng))
}

/// Beta(a, b) log-density with its exact normalizing constant.
pub fn beta_logpdf(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::DomainError(format!("beta shapes ({a}, {b})")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::DomainError(format!("beta argument {x} outside [0, 1]")));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    Ok((a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta)
}

/// Normal log-density.
pub fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + d * d / var)
}

/// Standard normal CDF (exposed for diagnostics and tests).
pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * (1.0 + erf((x - mean) / (sd * std::f64::consts::SQRT_2)))
}
