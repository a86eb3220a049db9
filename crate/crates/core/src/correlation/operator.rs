//! Spectral backend for the separable precision `Q = Q_s (x) Q_t`.
//!
//! Both factors are small, so one symmetric eigendecomposition each gives
//! exact solves and log-determinants for every matrix in the family
//! `Sigma_psi = Q^{-1} + psi I` without forming anything of size N x N.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigendecomposition of a separable precision over an `n x t` panel.
/// Cells are indexed site-major with time fastest: `(i, j) -> i * t + j`.
#[derive(Debug, Clone)]
pub struct SeparableOperator {
    n: usize,
    t: usize,
    u_s: DMatrix<f64>,
    u_t: DMatrix<f64>,
    eig_s: DVector<f64>,
    eig_t: DVector<f64>,
    logdet_q_unit: f64,
}

impl SeparableOperator {
    /// Builds the operator from the two small symmetric positive definite
    /// precision factors.
    pub fn new(q_s: &DMatrix<f64>, q_t: &DMatrix<f64>) -> Result<Self> {
        let (u_s, eig_s) = sym_eigen(q_s)?;
        let (u_t, eig_t) = sym_eigen(q_t)?;
        let n = q_s.nrows();
        let t = q_t.nrows();
        let logdet_q_unit = (t as f64) * eig_s.iter().map(|v| v.ln()).sum::<f64>()
            + (n as f64) * eig_t.iter().map(|v| v.ln()).sum::<f64>();
        Ok(Self {
            n,
            t,
            u_s,
            u_t,
            eig_s,
            eig_t,
            logdet_q_unit,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn len(&self) -> usize {
        self.n * self.t
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// log det of the unit-scale precision `Q_s (x) Q_t`.
    pub fn logdet_q_unit(&self) -> f64 {
        self.logdet_q_unit
    }

    /// Eigenvalue of `Q_s (x) Q_t` at flat eigen-index `(k, l)`.
    #[inline]
    fn q_eig(&self, k: usize, l: usize) -> f64 {
        self.eig_s[k] * self.eig_t[l]
    }

    /// log |Sigma_psi| with `Sigma_psi = Q^{-1} + psi I` at unit scale.
    pub fn logdet_sigma_psi(&self, psi: f64) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.n {
            for l in 0..self.t {
                acc += (1.0 + psi * self.q_eig(k, l)).ln();
            }
        }
        acc - self.logdet_q_unit
    }

    /// Eigenvalues of `Sigma_psi^{-1}`, ordered to match the cell layout.
    pub fn sigma_psi_inv_eigs(&self, psi: f64) -> DVector<f64> {
        let mut d = DVector::zeros(self.len());
        for k in 0..self.n {
            for l in 0..self.t {
                let q = self.q_eig(k, l);
                d[k * self.t + l] = q / (1.0 + psi * q);
            }
        }
        d
    }

    /// `(U_s (x) U_t)^T x` for a stack of column vectors.
    pub fn apply_ut(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.kron_apply(&self.u_s.transpose(), &self.u_t.transpose(), x)
    }

    /// `(U_s (x) U_t) x` for a stack of column vectors.
    pub fn apply_u(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.kron_apply(&self.u_s, &self.u_t, x)
    }

    fn kron_apply(&self, a: &DMatrix<f64>, b: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.len());
        let mut out = DMatrix::zeros(self.len(), x.ncols());
        for c in 0..x.ncols() {
            let m = DMatrix::from_column_slice(self.t, self.n, x.column(c).as_slice());
            let y = b * m * a.transpose();
            out.column_mut(c).copy_from_slice(y.as_slice());
        }
        out
    }

    /// `Sigma_psi^{-1} x` at unit scale, column-wise.
    pub fn solve_sigma_psi(&self, psi: f64, x: &DMatrix<f64>) -> DMatrix<f64> {
        let d = self.sigma_psi_inv_eigs(psi);
        let mut z = self.apply_ut(x);
        for c in 0..z.ncols() {
            for r in 0..z.nrows() {
                z[(r, c)] *= d[r];
            }
        }
        self.apply_u(&z)
    }

    /// Rows of `U_s (x) U_t` for the given cells, as a dense
    /// `cells.len() x N` matrix.
    pub fn rows_u(&self, cells: &[(usize, usize)]) -> DMatrix<f64> {
        let mut e = DMatrix::zeros(cells.len(), self.len());
        for (r, &(i, j)) in cells.iter().enumerate() {
            for k in 0..self.n {
                let us = self.u_s[(i, k)];
                for l in 0..self.t {
                    e[(r, k * self.t + l)] = us * self.u_t[(j, l)];
                }
            }
        }
        e
    }

    /// Dense block `[Sigma_psi^{-1}]_{cells, cells}` at unit scale, built as
    /// `F F^T` with `F = E sqrt(D)`.
    pub fn sigma_psi_inv_block(&self, psi: f64, cells: &[(usize, usize)]) -> DMatrix<f64> {
        let d = self.sigma_psi_inv_eigs(psi);
        let mut f = self.rows_u(cells);
        for c in 0..f.ncols() {
            let s = d[c].sqrt();
            for r in 0..f.nrows() {
                f[(r, c)] *= s;
            }
        }
        let mut block = &f * f.transpose();
        // enforce exact symmetry
        for i in 0..block.nrows() {
            for j in 0..i {
                let v = 0.5 * (block[(i, j)] + block[(j, i)]);
                block[(i, j)] = v;
                block[(j, i)] = v;
            }
        }
        block
    }

    /// Exact draw from `N(0, sigma2 * Q_unit^{-1})` using the spectral factor.
    pub fn sample_effect<R: rand::Rng>(&self, sigma2: f64, rng: &mut R) -> DVector<f64> {
        use rand_distr::{Distribution, StandardNormal};
        let mut z = DMatrix::zeros(self.len(), 1);
        for k in 0..self.n {
            for l in 0..self.t {
                let scale = (sigma2 / self.q_eig(k, l)).sqrt();
                let g: f64 = StandardNormal.sample(rng);
                z[(k * self.t + l, 0)] = scale * g;
            }
        }
        let out = self.apply_u(&z);
        DVector::from_column_slice(out.column(0).as_slice())
    }
}

fn sym_eigen(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} precision factor is not square",
            m.nrows(),
            m.ncols()
        )));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !min.is_finite() || min <= 1e-12 {
        return Err(Error::NumericalFailure(format!(
            "precision factor not positive definite (min eigenvalue {min:e})"
        )));
    }
    Ok((eig.eigenvectors, eig.eigenvalues))
}
