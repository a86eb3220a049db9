//! Posterior predictive draws for future time points at existing sites, by
//! composition over the stored posterior draws.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::correlation::SeparableOperator;
use crate::data::{partition, CensoredDataset};
use crate::error::{Error, Result};
use crate::inference::{ChainResult, ModelStructures, ParameterState};
use crate::stats::{quantile_sorted, sample_variance};

/// Forward-in-time prediction request. Covariate rows are site-major with
/// the horizon step fastest: row `s * horizon + k` is site `sites[s]` at
/// step `k + 1` past the panel end.
#[derive(Debug, Clone)]
pub struct PredictionTask {
    pub horizon: usize,
    pub x_pred: DMatrix<f64>,
    pub sites: Vec<usize>,
}

impl PredictionTask {
    pub fn all_sites(n: usize, horizon: usize, x_pred: DMatrix<f64>) -> Self {
        Self {
            horizon,
            x_pred,
            sites: (0..n).collect(),
        }
    }

    pub fn n_cells(&self) -> usize {
        self.sites.len() * self.horizon
    }

    fn validate(&self, n_sites: usize, p: usize) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::ConfigError("prediction horizon must be >= 1".into()));
        }
        if self.sites.is_empty() {
            return Err(Error::ConfigError("no prediction sites".into()));
        }
        let mut seen = vec![false; n_sites];
        for &s in &self.sites {
            if s >= n_sites {
                return Err(Error::ConfigError(format!("site {} out of range", s + 1)));
            }
            if seen[s] {
                return Err(Error::ConfigError(format!("site {} repeated", s + 1)));
            }
            seen[s] = true;
        }
        if self.x_pred.nrows() != self.n_cells() {
            return Err(Error::DimensionMismatch(format!(
                "{} prediction covariate rows for {} cells",
                self.x_pred.nrows(),
                self.n_cells()
            )));
        }
        if self.x_pred.ncols() != p {
            return Err(Error::DimensionMismatch(format!(
                "prediction covariates have {} columns, model has {p}",
                self.x_pred.ncols()
            )));
        }
        Ok(())
    }
}

/// Correlation structure extended over the panel plus `horizon` future time
/// points, with the future cells identified.
pub struct ExtendedStructures {
    pub op: SeparableOperator,
    pub t_obs: usize,
    pub horizon: usize,
    /// All future cells (every site), site-major, horizon fastest.
    pub pred_cells: Vec<(usize, usize)>,
}

/// Builds the extended operator at one parameter draw. The AR correlation is
/// continued to `T + horizon` lags; the observed/predicted partition is by
/// time index.
pub fn extend_structures(
    structures: &ModelStructures,
    rho: f64,
    gamma: &[f64],
    horizon: usize,
) -> Result<ExtendedStructures> {
    if horizon == 0 {
        return Err(Error::ConfigError("prediction horizon must be >= 1".into()));
    }
    let t_obs = structures.t;
    let t_full = t_obs + horizon;
    let op = structures.operator_with_t(rho, gamma, t_full)?;
    let n = structures.graph.n();
    let mut pred_cells = Vec::with_capacity(n * horizon);
    for site in 0..n {
        for k in 0..horizon {
            pred_cells.push((site, t_obs + k));
        }
    }
    Ok(ExtendedStructures {
        op,
        t_obs,
        horizon,
        pred_cells,
    })
}

/// Per-draw predictive moments and sampled values at the requested cells.
#[derive(Debug, Clone)]
pub struct PredictiveDraws {
    /// (site, step) per requested cell; step counts from 1 past the panel end.
    pub cells: Vec<(usize, usize)>,
    /// draws[(d, c)] = sampled response for posterior draw d at cell c.
    pub draws: DMatrix<f64>,
    /// Conditional predictive mean per draw and cell.
    pub means: DMatrix<f64>,
    /// Conditional predictive variance per draw and cell.
    pub vars: DMatrix<f64>,
}

/// Per-cell summary across the predictive draws.
#[derive(Debug, Clone)]
pub struct PredictiveSummary {
    pub cells: Vec<(usize, usize)>,
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    pub q025: Vec<f64>,
    pub q975: Vec<f64>,
}

fn pooled_draws(chains: &[ChainResult]) -> Vec<&ParameterState> {
    chains.iter().flat_map(|c| c.draws.iter()).collect()
}

/// Composition sampling: for each stored posterior draw, one exact draw of
/// the future cells from their Gaussian conditional given the panel (with
/// that draw's imputations plugged in).
pub fn predictive_draws<R: Rng>(
    chains: &[ChainResult],
    structures: &ModelStructures,
    ds: &CensoredDataset,
    task: &PredictionTask,
    rng: &mut R,
) -> Result<(PredictiveDraws, PredictiveSummary)> {
    predictive_core(chains, structures, ds, task, Some(rng))
}

/// Per-draw conditional means and variances only; no sampling, fully
/// deterministic (used by the predictive-density criteria).
pub fn predictive_moments(
    chains: &[ChainResult],
    structures: &ModelStructures,
    ds: &CensoredDataset,
    task: &PredictionTask,
) -> Result<PredictiveDraws> {
    let (pd, _) = predictive_core::<crate::stochastics::RngStream>(chains, structures, ds, task, None)?;
    Ok(pd)
}

fn predictive_core<R: Rng>(
    chains: &[ChainResult],
    structures: &ModelStructures,
    ds: &CensoredDataset,
    task: &PredictionTask,
    mut rng: Option<&mut R>,
) -> Result<(PredictiveDraws, PredictiveSummary)> {
    let posterior = pooled_draws(chains);
    if posterior.is_empty() {
        return Err(Error::ConfigError("no posterior draws to predict from".into()));
    }
    task.validate(ds.n_sites(), ds.n_covariates())?;
    if ds.n_times() != structures.t {
        return Err(Error::DimensionMismatch(format!(
            "dataset has T = {}, structures T = {}",
            ds.n_times(),
            structures.t
        )));
    }

    let part = partition(ds);
    let n_cells = task.n_cells();
    let n_draws = posterior.len();
    let n_sites = ds.n_sites();
    let horizon = task.horizon;

    // Position of each requested cell inside the all-sites pred block.
    let request_pos: Vec<usize> = task
        .sites
        .iter()
        .flat_map(|&s| (0..horizon).map(move |k| s * horizon + k))
        .collect();

    let mut draws = DMatrix::zeros(n_draws, n_cells);
    let mut means = DMatrix::zeros(n_draws, n_cells);
    let mut vars = DMatrix::zeros(n_draws, n_cells);

    let n_ext = n_sites * (structures.t + horizon);
    let mut y_resid = DVector::zeros(n_ext);

    for (d_ix, draw) in posterior.iter().enumerate() {
        if draw.y_cen.len() != part.n_cen() {
            return Err(Error::DimensionMismatch(format!(
                "draw carries {} imputed values, dataset has {} censored cells",
                draw.y_cen.len(),
                part.n_cen()
            )));
        }
        let ext = extend_structures(structures, draw.rho, &draw.gamma, horizon)?;
        let beta = DVector::from_column_slice(&draw.beta);

        // Residual over the extended panel: observed/imputed minus the
        // regression surface, zero on the future cells.
        y_resid.fill(0.0);
        let t_full = structures.t + horizon;
        for (i, status) in ds.statuses().iter().enumerate() {
            let (site, time) = ds.cell_coords(i);
            let ext_ix = site * t_full + time;
            let fit = ds.x().row(i).transpose().dot(&beta);
            match status {
                crate::data::CensorStatus::Observed(v) => y_resid[ext_ix] = v - fit,
                _ => y_resid[ext_ix] = 0.0,
            }
        }
        for (k, &i) in part.cen_idx.iter().enumerate() {
            let (site, time) = ds.cell_coords(i);
            let fit = ds.x().row(i).transpose().dot(&beta);
            y_resid[site * t_full + time] = draw.y_cen[k] - fit;
        }

        let lam_pp = ext.op.sigma_psi_inv_block(draw.psi, &ext.pred_cells);
        let chol = lam_pp
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotSpd("predictive-block precision".into()))?;

        let w_full = ext.op.solve_sigma_psi(
            draw.psi,
            &DMatrix::from_column_slice(n_ext, 1, y_resid.as_slice()),
        );
        let mut w_p = DVector::zeros(ext.pred_cells.len());
        for (k, &(site, time)) in ext.pred_cells.iter().enumerate() {
            w_p[k] = w_full[(site * t_full + time, 0)];
        }
        let u = chol.solve(&w_p);

        // Zero-mean perturbation with the exact conditional covariance
        // sigma2 * lam_pp^{-1}; requested cells take its marginal.
        let eps = match rng.as_deref_mut() {
            Some(r) => {
                let z = DVector::from_fn(ext.pred_cells.len(), |_, _| StandardNormal.sample(r));
                chol.l()
                    .transpose()
                    .solve_upper_triangular(&z)
                    .ok_or_else(|| Error::NumericalFailure("triangular solve failed".into()))?
            }
            None => DVector::zeros(ext.pred_cells.len()),
        };
        let sigma = draw.sigma2.sqrt();

        // Diagonal of the conditional covariance at the requested cells.
        let inv_cols = {
            let mut rhs = DMatrix::zeros(ext.pred_cells.len(), n_cells);
            for (c, &pos) in request_pos.iter().enumerate() {
                rhs[(pos, c)] = 1.0;
            }
            chol.solve(&rhs)
        };

        for (c, &pos) in request_pos.iter().enumerate() {
            let x_row = task.x_pred.row(c).transpose();
            let m = x_row.dot(&beta) - u[pos];
            means[(d_ix, c)] = m;
            vars[(d_ix, c)] = draw.sigma2 * inv_cols[(pos, c)];
            draws[(d_ix, c)] = m + sigma * eps[pos];
        }
    }

    let cells: Vec<(usize, usize)> = task
        .sites
        .iter()
        .flat_map(|&s| (1..=horizon).map(move |k| (s, k)))
        .collect();

    let mut mean = Vec::with_capacity(n_cells);
    let mut median = Vec::with_capacity(n_cells);
    let mut q025 = Vec::with_capacity(n_cells);
    let mut q975 = Vec::with_capacity(n_cells);
    for c in 0..n_cells {
        let mut col: Vec<f64> = (0..n_draws).map(|d| draws[(d, c)]).collect();
        col.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
        mean.push(col.iter().sum::<f64>() / n_draws as f64);
        median.push(quantile_sorted(&col, 0.5));
        q025.push(quantile_sorted(&col, 0.025));
        q975.push(quantile_sorted(&col, 0.975));
        debug_assert!(q025[c] <= median[c] && median[c] <= q975[c]);
    }

    Ok((
        PredictiveDraws {
            cells: cells.clone(),
            draws,
            means,
            vars,
        },
        PredictiveSummary {
            cells,
            mean,
            median,
            q025,
            q975,
        },
    ))
}

/// Empirical predictive variance must dominate the average conditional
/// variance (law of total variance); exposed for tests and diagnostics.
pub fn total_variance_gap(pd: &PredictiveDraws, cell: usize) -> (f64, f64) {
    let col: Vec<f64> = (0..pd.draws.nrows()).map(|d| pd.draws[(d, cell)]).collect();
    let total = sample_variance(&col);
    let mean_cond =
        (0..pd.vars.nrows()).map(|d| pd.vars[(d, cell)]).sum::<f64>() / pd.vars.nrows() as f64;
    (total, mean_cond)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::SpatialKind;
    use crate::data::CensorStatus;
    use crate::graph::{grid_graph, SpatialGraph};
    use crate::inference::{ChainMeta, Theta};
    use crate::stochastics::rng_stream;

    fn chain_of(draws: Vec<ParameterState>) -> ChainResult {
        ChainResult {
            accepted: 0,
            proposed: draws.len(),
            meta: ChainMeta {
                chain_id: 0,
                seed: 0,
                iters: draws.len(),
                burnin: 0,
                thin: 1,
                model_hash: String::new(),
            },
            draws,
        }
    }

    fn fixed_draw(rho: f64, psi: f64, gamma: Vec<f64>, beta: Vec<f64>, sigma2: f64) -> ParameterState {
        ParameterState {
            iter: 0,
            beta,
            sigma2,
            tau2: sigma2 * psi,
            psi,
            rho,
            gamma,
            log_post: 0.0,
            accepted: true,
            y_cen: vec![],
        }
    }

    fn observed_panel(n: usize, t: usize, values: impl Fn(usize) -> f64) -> CensoredDataset {
        let x = DMatrix::from_element(n * t, 1, 1.0);
        let statuses = (0..n * t).map(|i| CensorStatus::Observed(values(i))).collect();
        CensoredDataset::new(n, t, statuses, x).unwrap()
    }

    #[test]
    fn rejects_zero_horizon() {
        let structures = ModelStructures::new(grid_graph(2), SpatialKind::Dagar, false, 3);
        assert!(extend_structures(&structures, 0.5, &[0.3], 0).is_err());
    }

    #[test]
    fn temporal_independence_gives_marginal_moments() {
        // gamma = 0: future cells are independent of the panel, so the
        // conditional mean is the regression surface and the variance is
        // sigma2 (Gamma_ii + psi).
        let g = grid_graph(2);
        let structures = ModelStructures::new(g.clone(), SpatialKind::Dagar, false, 4);
        let ds = observed_panel(4, 4, |i| (i % 5) as f64 - 2.0);
        let rho = 0.6;
        let psi = 0.3;
        let sigma2 = 1.9;
        let beta = vec![0.7];
        let draw = fixed_draw(rho, psi, vec![0.0], beta, sigma2);
        let chains = [chain_of(vec![draw])];
        let task = PredictionTask::all_sites(4, 2, DMatrix::from_element(8, 1, 1.0));
        let mut rng = rng_stream(1, 0);
        let (pd, _) = predictive_draws(&chains, &structures, &ds, &task, &mut rng).unwrap();

        let gamma_s = structures.spatial_pair(rho).unwrap().covariance().unwrap();
        for (c, &(site, _step)) in pd.cells.iter().enumerate() {
            assert!((pd.means[(0, c)] - 0.7).abs() < 1e-9, "mean at {c}");
            let expect = sigma2 * (gamma_s[(site, site)] + psi);
            assert!(
                (pd.vars[(0, c)] - expect).abs() < 1e-9,
                "var {} vs {expect}",
                pd.vars[(0, c)]
            );
        }
    }

    #[test]
    fn single_site_ar1_matches_dense_conditioning() {
        // Dense oracle on T <= 6: build the joint covariance over T + 1
        // cells, condition the last on the rest with the Schur formula.
        let g = SpatialGraph::new(1, []).unwrap();
        let t = 5;
        let structures = ModelStructures::new(g, SpatialKind::Dagar, false, t);
        let ys = [0.3, -0.7, 1.2, 0.4, -0.2];
        let ds = observed_panel(1, t, |i| ys[i]);
        let rho = 0.0;
        let psi = 0.25;
        let sigma2 = 1.4;
        let gamma1 = 0.65;
        let beta = 0.5;
        let draw = fixed_draw(rho, psi, vec![gamma1], vec![beta], sigma2);
        let chains = [chain_of(vec![draw])];
        let task = PredictionTask::all_sites(1, 1, DMatrix::from_element(1, 1, 1.0));
        let mut rng = rng_stream(2, 0);
        let (pd, _) = predictive_draws(&chains, &structures, &ds, &task, &mut rng).unwrap();

        // dense joint over t+1 times
        let spec = crate::correlation::TemporalSpec::new(vec![gamma1], t + 1).unwrap();
        let phi = crate::correlation::ar_correlation(&spec).unwrap();
        let mut cov = phi.clone();
        for i in 0..=t {
            cov[(i, i)] += psi;
        }
        cov *= sigma2;
        let s_oo = cov.view((0, 0), (t, t)).into_owned();
        let s_po = cov.view((t, 0), (1, t)).into_owned();
        let s_pp = cov[(t, t)];
        let resid = DVector::from_fn(t, |i, _| ys[i] - beta);
        let oo_inv = s_oo.try_inverse().unwrap();
        let mu = beta + (&s_po * &oo_inv * resid)[(0, 0)];
        let var = s_pp - (&s_po * &oo_inv * s_po.transpose())[(0, 0)];
        assert!((pd.means[(0, 0)] - mu).abs() < 1e-9, "{} vs {mu}", pd.means[(0, 0)]);
        assert!((pd.vars[(0, 0)] - var).abs() < 1e-9, "{} vs {var}", pd.vars[(0, 0)]);
    }

    #[test]
    fn vanishing_scale_collapses_draws_to_the_mean() {
        let g = grid_graph(2);
        let structures = ModelStructures::new(g, SpatialKind::Dagar, false, 3);
        let ds = observed_panel(4, 3, |i| (i as f64) * 0.1);
        let draw = fixed_draw(0.5, 0.2, vec![0.4], vec![1.0], 1e-20);
        let chains = [chain_of(vec![draw.clone(), draw])];
        let task = PredictionTask::all_sites(4, 2, DMatrix::from_element(8, 1, 1.0));
        let mut rng = rng_stream(3, 0);
        let (pd, summary) = predictive_draws(&chains, &structures, &ds, &task, &mut rng).unwrap();
        for c in 0..pd.cells.len() {
            assert!((pd.draws[(0, c)] - pd.means[(0, c)]).abs() < 1e-8);
            assert!((pd.draws[(1, c)] - pd.means[(1, c)]).abs() < 1e-8);
            assert!(summary.q025[c] <= summary.median[c] && summary.median[c] <= summary.q975[c]);
        }
    }

    #[test]
    fn site_subset_matches_full_marginal_moments() {
        let g = grid_graph(2);
        let structures = ModelStructures::new(g, SpatialKind::Dagar, false, 4);
        let ds = observed_panel(4, 4, |i| ((i * 7) % 5) as f64 * 0.3 - 0.5);
        let draw = fixed_draw(0.55, 0.35, vec![0.5], vec![0.2], 2.2);
        let chains = [chain_of(vec![draw])];
        let mut rng = rng_stream(4, 0);

        let full = PredictionTask::all_sites(4, 2, DMatrix::from_element(8, 1, 1.0));
        let (pd_full, _) = predictive_draws(&chains, &structures, &ds, &full, &mut rng).unwrap();
        let sub = PredictionTask {
            horizon: 2,
            x_pred: DMatrix::from_element(4, 1, 1.0),
            sites: vec![1, 3],
        };
        let (pd_sub, _) = predictive_draws(&chains, &structures, &ds, &sub, &mut rng).unwrap();
        // Marginal means/vars at shared cells agree (site 1 steps 1..2 are
        // full-cells 2,3; site 3 steps are full-cells 6,7).
        for (sub_c, full_c) in [(0usize, 2usize), (1, 3), (2, 6), (3, 7)] {
            assert!((pd_sub.means[(0, sub_c)] - pd_full.means[(0, full_c)]).abs() < 1e-10);
            assert!((pd_sub.vars[(0, sub_c)] - pd_full.vars[(0, full_c)]).abs() < 1e-10);
        }
    }

    #[test]
    fn predictive_mean_of_trailing_missing_equals_imputation_mean() {
        // Predicting one step past a fully observed T-1 panel must agree
        // with imputing a missing final column in the full panel.
        let g = grid_graph(2);
        let t = 4;
        let vals = |i: usize| ((i * 3) % 7) as f64 * 0.25 - 0.6;
        let full = {
            let x = DMatrix::from_element(4 * t, 1, 1.0);
            let statuses: Vec<CensorStatus> = (0..4 * t)
                .map(|i| {
                    let (_site, time) = (i / t, i % t);
                    if time == t - 1 {
                        CensorStatus::Missing
                    } else {
                        CensorStatus::Observed(vals(i))
                    }
                })
                .collect();
            CensoredDataset::new(4, t, statuses, x).unwrap()
        };
        let train = {
            let x = DMatrix::from_element(4 * (t - 1), 1, 1.0);
            let statuses: Vec<CensorStatus> = (0..4)
                .flat_map(|site| (0..t - 1).map(move |time| CensorStatus::Observed(vals(site * t + time))))
                .collect();
            CensoredDataset::new(4, t - 1, statuses, x).unwrap()
        };

        let theta = Theta {
            rho: 0.5,
            psi: 0.3,
            gamma: vec![0.6],
        };
        let beta = DVector::from_vec(vec![0.4]);
        let sigma2 = 1.1;

        let structures_full = ModelStructures::new(g.clone(), SpatialKind::Dagar, false, t);
        let part = partition(&full);
        let (mu_imp, _) = crate::inference::conditional_blocks(
            &structures_full,
            &theta,
            sigma2,
            &beta,
            &full,
            &part,
        )
        .unwrap();

        let structures_train = ModelStructures::new(g, SpatialKind::Dagar, false, t - 1);
        let draw = fixed_draw(theta.rho, theta.psi, theta.gamma.clone(), vec![0.4], sigma2);
        let chains = [chain_of(vec![draw])];
        let task = PredictionTask::all_sites(4, 1, DMatrix::from_element(4, 1, 1.0));
        let mut rng = rng_stream(5, 0);
        let (pd, _) = predictive_draws(&chains, &structures_train, &train, &task, &mut rng).unwrap();

        for site in 0..4 {
            assert!(
                (pd.means[(0, site)] - mu_imp[site]).abs() < 1e-9,
                "site {site}: {} vs {}",
                pd.means[(0, site)],
                mu_imp[site]
            );
        }
    }

    #[test]
    fn law_of_total_variance_holds_empirically() {
        let g = grid_graph(2);
        let structures = ModelStructures::new(g, SpatialKind::Dagar, false, 4);
        let ds = observed_panel(4, 4, |i| ((i * 11) % 9) as f64 * 0.2);
        // Two distinct parameter draws give the mean component spread.
        let draws = vec![
            fixed_draw(0.3, 0.2, vec![0.5], vec![0.1], 1.0),
            fixed_draw(0.7, 0.4, vec![0.2], vec![0.8], 2.0),
        ];
        let many: Vec<ParameterState> = (0..400).map(|i| draws[i % 2].clone()).collect();
        let chains = [chain_of(many)];
        let task = PredictionTask::all_sites(4, 1, DMatrix::from_element(4, 1, 1.0));
        let mut rng = rng_stream(6, 0);
        let (pd, _) = predictive_draws(&chains, &structures, &ds, &task, &mut rng).unwrap();
        for c in 0..pd.cells.len() {
            let (total, mean_cond) = total_variance_gap(&pd, c);
            assert!(
                total > mean_cond - 0.35 * mean_cond,
                "cell {c}: total {total} vs mean conditional {mean_cond}"
            );
        }
    }
}
