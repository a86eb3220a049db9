//! AR(p) temporal structure: stationarity, Yule-Walker correlations, and the
//! banded innovation pair whose inverse precision reproduces the Toeplitz
//! correlation exactly.

use nalgebra::{DMatrix, DVector};

use crate::correlation::InnovationPair;
use crate::error::{Error, Result};

/// AR(p) coefficients together with the panel length.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalSpec {
    gamma: Vec<f64>,
    t: usize,
}

impl TemporalSpec {
    /// Validates stationarity (all roots of `1 - sum(gamma_i z^i)` outside the
    /// unit circle) and `p < T`.
    pub fn new(gamma: Vec<f64>, t: usize) -> Result<Self> {
        if t == 0 {
            return Err(Error::ConfigError("need at least one time point".into()));
        }
        if gamma.len() >= t {
            return Err(Error::ConfigError(format!(
                "AR order {} must be smaller than T = {}",
                gamma.len(),
                t
            )));
        }
        let radius = companion_spectral_radius(&gamma);
        if radius >= 1.0 - 1e-12 {
            return Err(Error::NonStationary(radius));
        }
        Ok(Self { gamma, t })
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn order(&self) -> usize {
        self.gamma.len()
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn with_t(&self, t: usize) -> Result<Self> {
        Self::new(self.gamma.clone(), t)
    }
}

/// Spectral radius of the AR companion matrix; the process is stationary iff
/// this is strictly below one (companion eigenvalues are the reciprocal roots
/// of the characteristic polynomial).
fn companion_spectral_radius(gamma: &[f64]) -> f64 {
    let p = gamma.len();
    if p == 0 {
        return 0.0;
    }
    if p == 1 {
        return gamma[0].abs();
    }
    let mut c = DMatrix::zeros(p, p);
    for (j, &g) in gamma.iter().enumerate() {
        c[(0, j)] = g;
    }
    for i in 1..p {
        c[(i, i - 1)] = 1.0;
    }
    c.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn is_stationary(gamma: &[f64]) -> bool {
    companion_spectral_radius(gamma) < 1.0 - 1e-12
}

/// Lag-k autocorrelations `phi_0..phi_{max_lag}` from the Yule-Walker
/// equations: the first p lags solve a linear system, later lags follow the
/// recursion `phi_k = sum_j gamma_j phi_{k-j}`.
pub fn autocorrelations(gamma: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let p = gamma.len();
    let mut phi = vec![0.0; max_lag + 1];
    phi[0] = 1.0;
    if p == 0 || max_lag == 0 {
        return Ok(phi);
    }
    let head = p.min(max_lag);
    // phi_k = sum_j gamma_j phi_{|k-j|} for k = 1..p, with phi_0 = 1.
    let mut a = DMatrix::zeros(p, p);
    let mut b = DVector::zeros(p);
    for k in 1..=p {
        a[(k - 1, k - 1)] += 1.0;
        for (j, &g) in gamma.iter().enumerate() {
            let j = j + 1;
            let lag = k.abs_diff(j);
            if lag == 0 {
                b[k - 1] += g;
            } else {
                a[(k - 1, lag - 1)] -= g;
            }
        }
    }
    let solved = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::NumericalFailure("Yule-Walker system is singular".into()))?;
    for k in 1..=head {
        phi[k] = solved[k - 1];
    }
    for k in (p + 1)..=max_lag {
        phi[k] = gamma.iter().enumerate().map(|(j, &g)| g * phi[k - 1 - j]).sum();
    }
    Ok(phi)
}

/// T x T symmetric Toeplitz correlation matrix of the stationary AR(p).
pub fn ar_correlation(spec: &TemporalSpec) -> Result<DMatrix<f64>> {
    let t = spec.t();
    let phi = autocorrelations(spec.gamma(), t.saturating_sub(1))?;
    Ok(DMatrix::from_fn(t, t, |i, j| phi[i.abs_diff(j)]))
}

/// Banded innovation pair (B_T, F_T) for the stationary AR(p) at unit
/// marginal variance. Rows beyond the AR order carry the AR coefficients
/// themselves; the first p rows carry the Levinson-Durbin partial regression
/// coefficients so that `[(I-B)' F (I-B)]^{-1}` equals the Toeplitz
/// correlation exactly, mirroring the parentless-root convention of the
/// spatial construction.
pub fn ar_innovation(spec: &TemporalSpec) -> Result<InnovationPair> {
    let t = spec.t();
    let p = spec.order();
    let phi = autocorrelations(spec.gamma(), p)?;

    // Levinson-Durbin: coefficient vectors per order and prediction variances.
    let mut coeffs: Vec<Vec<f64>> = Vec::with_capacity(p + 1);
    coeffs.push(Vec::new());
    let mut vars = vec![1.0];
    for m in 1..=p {
        let prev = &coeffs[m - 1];
        let mut acc = phi[m];
        for (j, &c) in prev.iter().enumerate() {
            acc -= c * phi[m - 1 - j];
        }
        let v_prev = vars[m - 1];
        if v_prev <= 0.0 {
            return Err(Error::NumericalFailure(
                "prediction variance collapsed in Levinson-Durbin".into(),
            ));
        }
        let kappa = acc / v_prev;
        let mut next = Vec::with_capacity(m);
        for j in 0..m - 1 {
            next.push(prev[j] - kappa * prev[m - 2 - j]);
        }
        next.push(kappa);
        vars.push(v_prev * (1.0 - kappa * kappa));
        coeffs.push(next);
    }

    let mut b = DMatrix::zeros(t, t);
    let mut f = DVector::zeros(t);
    for row in 0..t {
        let m = row.min(p);
        for (k, &c) in coeffs[m].iter().enumerate() {
            b[(row, row - 1 - k)] = c;
        }
        let v = vars[m];
        if v <= 0.0 {
            return Err(Error::NumericalFailure(
                "non-positive innovation variance".into(),
            ));
        }
        f[row] = 1.0 / v;
    }
    InnovationPair::new(b, f)
}
