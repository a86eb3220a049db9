//! Spatial, temporal, and assembled spatiotemporal correlation structures in
//! innovation form.

pub mod operator;
pub mod spatial;
pub mod temporal;

use nalgebra::{DMatrix, DVector};
use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};

pub use operator::SeparableOperator;
pub use spatial::{dagar_innovation, sar_innovation, spatial_innovation, SpatialKind, SpatialSpec};
pub use temporal::{ar_correlation, ar_innovation, autocorrelations, is_stationary, TemporalSpec};

/// Innovation pair `(B, F)`: the covariance it induces is
/// `[(I - B)' diag(F) (I - B)]^{-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationPair {
    b: DMatrix<f64>,
    f: DVector<f64>,
}

impl InnovationPair {
    pub fn new(b: DMatrix<f64>, f: DVector<f64>) -> Result<Self> {
        if b.nrows() != b.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "coefficient matrix is {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        if f.len() != b.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} innovation precisions for {} rows",
                f.len(),
                b.nrows()
            )));
        }
        if f.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::NumericalFailure(
                "innovation precisions must be positive and finite".into(),
            ));
        }
        Ok(Self { b, f })
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn f(&self) -> &DVector<f64> {
        &self.f
    }

    /// `(I - B)' diag(F) (I - B)` as a dense matrix.
    pub fn precision(&self) -> DMatrix<f64> {
        let n = self.dim();
        let i_minus_b = DMatrix::identity(n, n) - &self.b;
        let mut scaled = i_minus_b.clone();
        for r in 0..n {
            for c in 0..n {
                scaled[(r, c)] *= self.f[r];
            }
        }
        i_minus_b.transpose() * scaled
    }

    /// Dense inverse of the precision; errors if `(I - B)` is singular.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        self.precision()
            .try_inverse()
            .ok_or_else(|| Error::NumericalFailure("innovation precision is singular".into()))
    }

    /// `log det` of the precision: `sum ln F + 2 ln |det(I - B)|`.
    pub fn logdet_precision(&self) -> Result<f64> {
        let n = self.dim();
        let det = (DMatrix::identity(n, n) - &self.b).lu().determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::NumericalFailure(
                "(I - B) is singular; precision determinant undefined".into(),
            ));
        }
        Ok(self.f.iter().map(|v| v.ln()).sum::<f64>() + 2.0 * det.abs().ln())
    }
}

fn dense_to_sparse(m: &DMatrix<f64>) -> CsMat<f64> {
    let mut tri = TriMat::new((m.nrows(), m.ncols()));
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let v = m[(r, c)];
            if v != 0.0 {
                tri.add_triplet(r, c, v);
            }
        }
    }
    tri.to_csr()
}

fn sparse_identity(n: usize) -> CsMat<f64> {
    CsMat::eye(n)
}

/// Sparse-to-dense helper used by assembly consumers and tests.
pub fn sparse_to_dense(m: &CsMat<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.rows(), m.cols());
    for (&v, (r, c)) in m.iter() {
        out[(r, c)] = v;
    }
    out
}

/// Assembled spatiotemporal innovation structure and its sparse precision.
/// `q` carries the full `1/sigma2` scaling so that `q = [sigma2 (Gamma (x)
/// Phi)]^{-1}` exactly.
#[derive(Debug, Clone)]
pub struct PrecisionFactors {
    pub n: usize,
    pub t: usize,
    pub sigma2: f64,
    pub b_st: CsMat<f64>,
    pub f_diag: DVector<f64>,
    pub q: CsMat<f64>,
    pub logdet_q: f64,
}

/// Builds `B_nT = I (x) B_T + B_n (x) I - B_n (x) B_T`, the diagonal
/// `F_nT = F_n (x) (F_T / sigma2)`, and the sparse precision
/// `Q = (I - B_nT)' F_nT (I - B_nT)` via its Kronecker form.
pub fn assemble_precision(
    spatial: &InnovationPair,
    temporal: &InnovationPair,
    sigma2: f64,
) -> Result<PrecisionFactors> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::DomainError(format!("sigma2 = {sigma2} must be positive")));
    }
    let n = spatial.dim();
    let t = temporal.dim();
    if n == 0 || t == 0 {
        return Err(Error::DimensionMismatch("empty factor".into()));
    }

    let b_s = dense_to_sparse(spatial.b());
    let b_t = dense_to_sparse(temporal.b());
    let b_st = &(&sprs::kronecker_product(sparse_identity(n).view(), b_t.view())
        + &sprs::kronecker_product(b_s.view(), sparse_identity(t).view()))
        - &sprs::kronecker_product(b_s.view(), b_t.view());

    let mut f_diag = DVector::zeros(n * t);
    for i in 0..n {
        for j in 0..t {
            f_diag[i * t + j] = spatial.f()[i] * temporal.f()[j] / sigma2;
        }
    }

    let q_s = dense_to_sparse(&spatial.precision());
    let q_t = dense_to_sparse(&temporal.precision());
    let q = sprs::kronecker_product(q_s.view(), q_t.view()).map(|v| v / sigma2);

    let logdet_q = -(n as f64) * (t as f64) * sigma2.ln()
        + (t as f64) * spatial.logdet_precision()?
        + (n as f64) * temporal.logdet_precision()?;

    Ok(PrecisionFactors {
        n,
        t,
        sigma2,
        b_st,
        f_diag,
        q,
        logdet_q,
    })
}

/// Dependence class of a spatiotemporal coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefClass {
    /// Same site, earlier time: the AR coefficient.
    Temporal,
    /// Same time, neighboring site: the spatial coefficient.
    Spatial,
    /// Neighboring site and earlier time: minus the product of the two.
    Cross,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StCoefficient {
    pub site: usize,
    pub time: usize,
    pub nbr_site: usize,
    pub nbr_time: usize,
    pub value: f64,
    pub class: CoefClass,
}

/// Nonzero coefficients of `B_nT` grouped into the temporal / spatial / cross
/// classes. Reconstructing a matrix from the table reproduces `B_nT`
/// entrywise.
pub fn st_coefficients(spatial: &InnovationPair, temporal: &InnovationPair) -> Vec<StCoefficient> {
    let n = spatial.dim();
    let t = temporal.dim();
    let b_s = spatial.b();
    let b_t = temporal.b();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..t {
            for l in 0..t {
                let v = b_t[(j, l)];
                if v != 0.0 {
                    out.push(StCoefficient {
                        site: i,
                        time: j,
                        nbr_site: i,
                        nbr_time: l,
                        value: v,
                        class: CoefClass::Temporal,
                    });
                }
            }
            for k in 0..n {
                let s = b_s[(i, k)];
                if s == 0.0 {
                    continue;
                }
                out.push(StCoefficient {
                    site: i,
                    time: j,
                    nbr_site: k,
                    nbr_time: j,
                    value: s,
                    class: CoefClass::Spatial,
                });
                for l in 0..t {
                    let v = b_t[(j, l)];
                    if v != 0.0 {
                        out.push(StCoefficient {
                            site: i,
                            time: j,
                            nbr_site: k,
                            nbr_time: l,
                            value: -s * v,
                            class: CoefClass::Cross,
                        });
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{grid_graph, Ordering, SpatialGraph};
    use approx::assert_abs_diff_eq;

    fn path_graph(n: usize) -> SpatialGraph {
        SpatialGraph::new(n, (0..n - 1).map(|i| (i, i + 1))).unwrap()
    }

    fn dense_target(spatial: &InnovationPair, temporal_spec: &TemporalSpec, sigma2: f64) -> DMatrix<f64> {
        let gamma = spatial.covariance().unwrap();
        let phi = ar_correlation(temporal_spec).unwrap();
        gamma.kronecker(&phi) * sigma2
    }

    #[test]
    fn all_independence_assembles_to_identity() {
        let sp = InnovationPair::new(DMatrix::zeros(2, 2), DVector::from_element(2, 1.0)).unwrap();
        let tp = InnovationPair::new(DMatrix::zeros(3, 3), DVector::from_element(3, 1.0)).unwrap();
        let fac = assemble_precision(&sp, &tp, 1.0).unwrap();
        let q = sparse_to_dense(&fac.q);
        assert!((q - DMatrix::identity(6, 6)).abs().max() < 1e-15);
        assert_abs_diff_eq!(fac.logdet_q, 0.0, epsilon = 1e-14);
        assert_eq!(sparse_to_dense(&fac.b_st).amax(), 0.0);
    }

    #[test]
    fn dagar_ar1_assembly_inverts_dense_kronecker() {
        // Dense Kronecker + dense inversion oracle on the 4x4 system.
        let g = path_graph(2);
        let sp = dagar_innovation(&g, &Ordering::natural(2), &SpatialSpec::dagar(0.5)).unwrap();
        let ts = TemporalSpec::new(vec![0.7], 2).unwrap();
        let tp = ar_innovation(&ts).unwrap();
        let sigma2 = 2.0;
        let fac = assemble_precision(&sp, &tp, sigma2).unwrap();
        let q = sparse_to_dense(&fac.q);
        let prod = &q * dense_target(&sp, &ts, sigma2);
        let err = (prod - DMatrix::identity(4, 4)).abs().max();
        assert!(err < 1e-10, "max abs deviation {err}");
    }

    #[test]
    fn sar_ar2_assembly_inverts_dense_kronecker() {
        let g = path_graph(3);
        let sp = sar_innovation(&g, &SpatialSpec::sar(0.4)).unwrap();
        let ts = TemporalSpec::new(vec![0.5, 0.2], 3).unwrap();
        let tp = ar_innovation(&ts).unwrap();
        let fac = assemble_precision(&sp, &tp, 1.0).unwrap();
        let q = sparse_to_dense(&fac.q);
        let prod = &q * dense_target(&sp, &ts, 1.0);
        let err = (prod - DMatrix::identity(9, 9)).abs().max();
        assert!(err < 1e-10, "max abs deviation {err}");
    }

    #[test]
    fn assembled_q_is_symmetric_spd_and_matches_innovation_form() {
        let g = grid_graph(2);
        let sp = dagar_innovation(&g, &Ordering::natural(4), &SpatialSpec::dagar(0.7)).unwrap();
        let ts = TemporalSpec::new(vec![0.4, 0.3], 4).unwrap();
        let tp = ar_innovation(&ts).unwrap();
        let sigma2 = 1.3;
        let fac = assemble_precision(&sp, &tp, sigma2).unwrap();
        let q = sparse_to_dense(&fac.q);
        assert!((q.clone() - q.transpose()).abs().max() < 1e-12);
        assert!(q.clone().cholesky().is_some(), "assembled precision must be SPD");

        // (I - B_nT)' F_nT (I - B_nT) route agrees with the Kronecker route.
        let nt = fac.n * fac.t;
        let i_minus_b = DMatrix::identity(nt, nt) - sparse_to_dense(&fac.b_st);
        let mut scaled = i_minus_b.clone();
        for r in 0..nt {
            for c in 0..nt {
                scaled[(r, c)] *= fac.f_diag[r];
            }
        }
        let q_inn = i_minus_b.transpose() * scaled;
        assert!((q - q_inn).abs().max() < 1e-12);
    }

    #[test]
    fn logdet_matches_dense_on_small_instances() {
        let g = path_graph(3);
        let sp = sar_innovation(&g, &SpatialSpec::sar(-0.5)).unwrap();
        let ts = TemporalSpec::new(vec![0.6], 3).unwrap();
        let tp = ar_innovation(&ts).unwrap();
        let fac = assemble_precision(&sp, &tp, 2.5).unwrap();
        let dense = sparse_to_dense(&fac.q);
        let expected = dense.lu().determinant().ln();
        assert_abs_diff_eq!(fac.logdet_q, expected, epsilon = 1e-8);
    }

    #[test]
    fn zero_sigma_rejected() {
        let sp = InnovationPair::new(DMatrix::zeros(2, 2), DVector::from_element(2, 1.0)).unwrap();
        let tp = InnovationPair::new(DMatrix::zeros(2, 2), DVector::from_element(2, 1.0)).unwrap();
        assert!(assemble_precision(&sp, &tp, 0.0).is_err());
    }

    #[test]
    fn coefficient_table_reconstructs_b_st() {
        let g = path_graph(3);
        let sp = dagar_innovation(&g, &Ordering::natural(3), &SpatialSpec::dagar(0.5)).unwrap();
        let ts = TemporalSpec::new(vec![0.5, 0.2], 4).unwrap();
        let tp = ar_innovation(&ts).unwrap();
        let fac = assemble_precision(&sp, &tp, 1.0).unwrap();
        let table = st_coefficients(&sp, &tp);
        let nt = fac.n * fac.t;
        let mut rebuilt = DMatrix::zeros(nt, nt);
        for c in &table {
            rebuilt[(c.site * fac.t + c.time, c.nbr_site * fac.t + c.nbr_time)] += c.value;
        }
        assert!((rebuilt - sparse_to_dense(&fac.b_st)).abs().max() < 1e-14);
    }

    #[test]
    fn coefficient_classes_on_two_node_ar1() {
        // Cross entries are minus the product of spatial and temporal
        // coefficients, for both spatial structures.
        let g = path_graph(2);
        let ts = TemporalSpec::new(vec![0.7], 2).unwrap();
        let tp = ar_innovation(&ts).unwrap();

        let sp = dagar_innovation(&g, &Ordering::natural(2), &SpatialSpec::dagar(0.5)).unwrap();
        let table = st_coefficients(&sp, &tp);
        let spatial: Vec<_> = table.iter().filter(|c| c.class == CoefClass::Spatial).collect();
        let cross: Vec<_> = table.iter().filter(|c| c.class == CoefClass::Cross).collect();
        assert!(spatial.iter().all(|c| (c.value - 0.5).abs() < 1e-14));
        assert!(cross.iter().all(|c| (c.value + 0.35).abs() < 1e-14));

        let sp = sar_innovation(&g, &SpatialSpec::sar(0.5)).unwrap();
        let table = st_coefficients(&sp, &tp);
        let spatial: Vec<_> = table.iter().filter(|c| c.class == CoefClass::Spatial).collect();
        let cross: Vec<_> = table.iter().filter(|c| c.class == CoefClass::Cross).collect();
        assert!(spatial.iter().all(|c| (c.value - 0.5).abs() < 1e-14));
        assert!(cross.iter().all(|c| (c.value + 0.35).abs() < 1e-14));
    }

    #[test]
    fn independence_limit_has_only_temporal_class() {
        let g = path_graph(2);
        let sp = dagar_innovation(&g, &Ordering::natural(2), &SpatialSpec::dagar(0.0)).unwrap();
        let ts = TemporalSpec::new(vec![0.7], 3).unwrap();
        let tp = ar_innovation(&ts).unwrap();
        let table = st_coefficients(&sp, &tp);
        assert!(!table.is_empty());
        assert!(table.iter().all(|c| c.class == CoefClass::Temporal));
    }
}
