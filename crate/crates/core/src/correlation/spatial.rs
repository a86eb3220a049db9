//! Spatial innovation pairs: SAR over the row-stochastic proximity matrix
//! (or the raw adjacency behind a switch) and DAGAR over ordered directed
//! neighborhoods.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::correlation::InnovationPair;
use crate::error::{Error, Result};
use crate::graph::{directed_neighbors, Ordering, SpatialGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpatialKind {
    Dagar,
    Sar,
}

/// Spatial structure choice plus its dependence parameter. The innovation
/// precision scale kappa is fixed at one.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialSpec {
    pub kind: SpatialKind,
    pub rho: f64,
    /// SAR only: use the raw 0/1 adjacency with the eigenvalue-interval
    /// support instead of the row-stochastic matrix with (-1, 1).
    pub raw_adjacency: bool,
}

impl SpatialSpec {
    pub fn dagar(rho: f64) -> Self {
        Self {
            kind: SpatialKind::Dagar,
            rho,
            raw_adjacency: false,
        }
    }

    pub fn sar(alpha: f64) -> Self {
        Self {
            kind: SpatialKind::Sar,
            rho: alpha,
            raw_adjacency: false,
        }
    }
}

/// DAGAR innovation pair under the given ordering. `rho = 0` is admitted as
/// the exact independence limit; parentless regions get unit innovation
/// precision so their marginal variance is one.
pub fn dagar_innovation(
    g: &SpatialGraph,
    ord: &Ordering,
    spec: &SpatialSpec,
) -> Result<InnovationPair> {
    debug_assert_eq!(spec.kind, SpatialKind::Dagar);
    let rho = spec.rho;
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::RhoOutOfRange {
            value: rho,
            interval: "[0, 1)",
        });
    }
    let nbrs = directed_neighbors(g, ord)?;
    let n = g.n();
    let mut b = DMatrix::zeros(n, n);
    let mut f = DVector::zeros(n);
    for i in 0..n {
        let parents = nbrs.parents(i);
        let k = parents.len() as f64;
        let denom = 1.0 + (k - 1.0) * rho * rho;
        if !parents.is_empty() {
            let coef = rho / denom;
            for &p in parents {
                b[(i, p)] = coef;
            }
        }
        f[i] = if parents.is_empty() {
            1.0
        } else {
            denom / (1.0 - rho * rho)
        };
    }
    InnovationPair::new(b, f)
}

/// SAR innovation pair: `B = alpha * A_tilde` with identity innovation
/// precision. With `raw_adjacency` the support comes from the adjacency
/// eigenvalue interval instead of (-1, 1).
pub fn sar_innovation(g: &SpatialGraph, spec: &SpatialSpec) -> Result<InnovationPair> {
    debug_assert_eq!(spec.kind, SpatialKind::Sar);
    let n = g.n();
    let b = if spec.raw_adjacency {
        let a = g.adjacency_matrix();
        let (lo, hi) = sar_raw_interval(&a)?;
        if spec.rho <= lo || spec.rho >= hi {
            return Err(Error::RhoOutOfRange {
                value: spec.rho,
                interval: "(1/lambda_min, 1/lambda_max)",
            });
        }
        a * spec.rho
    } else {
        if spec.rho <= -1.0 || spec.rho >= 1.0 {
            return Err(Error::RhoOutOfRange {
                value: spec.rho,
                interval: "(-1, 1)",
            });
        }
        g.row_stochastic()? * spec.rho
    };
    InnovationPair::new(b, DVector::from_element(n, 1.0))
}

/// Valid dependence interval for the raw-adjacency SAR parameterization,
/// computed once per graph from the adjacency spectrum.
pub fn sar_raw_interval(adjacency: &DMatrix<f64>) -> Result<(f64, f64)> {
    let eig = adjacency.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min >= 0.0 || max <= 0.0 {
        return Err(Error::NumericalFailure(
            "adjacency spectrum does not straddle zero".into(),
        ));
    }
    Ok((1.0 / min, 1.0 / max))
}

/// Innovation pair for either spatial kind, default ordering for DAGAR.
pub fn spatial_innovation(
    g: &SpatialGraph,
    ord: &Ordering,
    spec: &SpatialSpec,
) -> Result<InnovationPair> {
    match spec.kind {
        SpatialKind::Dagar => dagar_innovation(g, ord, spec),
        SpatialKind::Sar => sar_innovation(g, spec),
    }
}
