//! Four-step posterior sampler: an independence Metropolis move on
//! `(rho, psi, gamma)` against the collapsed posterior, conjugate draws of
//! `sigma2` and `beta`, and a truncated-MVN refresh of the censored cells.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::correlation::{is_stationary, SeparableOperator};
use crate::data::{censored_region, partition, CensoredDataset, Partition};
use crate::error::{Error, Result};
use crate::graph::SpatialGraph;
use crate::inference::{
    collapsed_log_posterior, model_hash, ChainMeta, ChainResult, CollapsedEval, ModelConfig,
    ModelStructures, ParameterState, RunConfig,
};
use crate::stochastics::{
    beta_logpdf, rng_stream, rscaled_inv_chisq, tmvn_gibbs_sweep_prec, TruncRegion,
};

/// The Metropolis block of the parameter state.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta {
    pub rho: f64,
    pub psi: f64,
    pub gamma: Vec<f64>,
}

/// One Beta density, optionally rescaled onto an interval.
#[derive(Debug, Clone, Copy)]
struct BlockDist {
    a: f64,
    b: f64,
    interval: Option<(f64, f64)>,
}

impl BlockDist {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = BetaDist::new(self.a, self.b)
            .expect("hyperparameters validated at config time")
            .sample(rng);
        match self.interval {
            Some((lo, hi)) => lo + (hi - lo) * u,
            None => u,
        }
    }

    fn logpdf(&self, x: f64) -> f64 {
        let (u, jac) = match self.interval {
            Some((lo, hi)) => ((x - lo) / (hi - lo), -(hi - lo).ln()),
            None => (x, 0.0),
        };
        if !(0.0..=1.0).contains(&u) {
            return f64::NEG_INFINITY;
        }
        beta_logpdf(u, self.a, self.b).map_or(f64::NEG_INFINITY, |v| v + jac)
    }
}

/// Priors, proposals, and pinned values for the Metropolis block.
#[derive(Debug, Clone)]
pub struct ThetaDists {
    rho_prior: BlockDist,
    psi_prior: BlockDist,
    gamma_prior: BlockDist,
    rho_prop: BlockDist,
    psi_prop: BlockDist,
    gamma_prop: BlockDist,
    fixed_rho: Option<f64>,
    fixed_psi: Option<f64>,
    fixed_gamma: Option<Vec<f64>>,
    p_ar: usize,
}

impl ThetaDists {
    pub fn from_config(model: &ModelConfig) -> Self {
        let block = |(a, b): (f64, f64), interval: Option<(f64, f64)>| BlockDist { a, b, interval };
        Self {
            rho_prior: block(model.priors.rho, model.rho_interval),
            psi_prior: block(model.priors.psi, None),
            gamma_prior: block(model.priors.gamma, model.gamma_interval),
            rho_prop: block(model.proposals.rho, model.rho_interval),
            psi_prop: block(model.proposals.psi, None),
            gamma_prop: block(model.proposals.gamma, model.gamma_interval),
            fixed_rho: model.fixed.rho,
            fixed_psi: model.fixed.psi,
            fixed_gamma: model.fixed.gamma.clone(),
            p_ar: model.p_ar,
        }
    }

    pub fn all_fixed(&self) -> bool {
        self.fixed_rho.is_some() && self.fixed_psi.is_some() && self.fixed_gamma.is_some()
    }

    pub fn initial(&self) -> Theta {
        Theta {
            rho: self.fixed_rho.unwrap_or(0.5),
            psi: self.fixed_psi.unwrap_or(0.5),
            gamma: self
                .fixed_gamma
                .clone()
                .unwrap_or_else(|| vec![0.5; self.p_ar]),
        }
    }

    /// Log prior over the non-fixed blocks (pinned blocks contribute a
    /// constant).
    pub fn log_prior(&self, th: &Theta) -> f64 {
        let mut lp = 0.0;
        if self.fixed_rho.is_none() {
            lp += self.rho_prior.logpdf(th.rho);
        }
        if self.fixed_psi.is_none() {
            lp += self.psi_prior.logpdf(th.psi);
        }
        if self.fixed_gamma.is_none() {
            for &g in &th.gamma {
                lp += self.gamma_prior.logpdf(g);
            }
        }
        lp
    }

    fn log_proposal(&self, th: &Theta) -> f64 {
        let mut lq = 0.0;
        if self.fixed_rho.is_none() {
            lq += self.rho_prop.logpdf(th.rho);
        }
        if self.fixed_psi.is_none() {
            lq += self.psi_prop.logpdf(th.psi);
        }
        if self.fixed_gamma.is_none() {
            for &g in &th.gamma {
                lq += self.gamma_prop.logpdf(g);
            }
        }
        lq
    }

    fn propose<R: Rng>(&self, rng: &mut R) -> Theta {
        Theta {
            rho: self.fixed_rho.unwrap_or_else(|| self.rho_prop.sample(rng)),
            psi: self.fixed_psi.unwrap_or_else(|| self.psi_prop.sample(rng)),
            gamma: self.fixed_gamma.clone().unwrap_or_else(|| {
                (0..self.p_ar).map(|_| self.gamma_prop.sample(rng)).collect()
            }),
        }
    }

    /// Moment-matches the proposal Beta shapes to pilot draws, leaving the
    /// priors untouched. Spreads are inflated and floored so a sticky pilot
    /// cannot produce an over-confident proposal.
    fn retuned(&self, draws: &[ParameterState], accepted_moves: usize) -> Self {
        let sd_floor = if accepted_moves < 5 { 0.15 } else { 0.06 };
        let fit = |values: Vec<f64>, interval: Option<(f64, f64)>| -> Option<BlockDist> {
            if values.is_empty() {
                return None;
            }
            let to_unit = |x: f64| match interval {
                Some((lo, hi)) => (x - lo) / (hi - lo),
                None => x,
            };
            let unit: Vec<f64> = values.into_iter().map(to_unit).collect();
            let m = crate::stats::mean(&unit).clamp(0.03, 0.97);
            let s = (crate::stats::sample_variance(&unit).sqrt() * 1.5)
                .max(sd_floor)
                .min(0.25);
            let nu = m * (1.0 - m) / (s * s) - 1.0;
            if !(nu > 0.2) {
                return None;
            }
            Some(BlockDist {
                a: (m * nu).clamp(0.8, 100.0),
                b: ((1.0 - m) * nu).clamp(0.8, 100.0),
                interval,
            })
        };
        let mut tuned = self.clone();
        if self.fixed_rho.is_none() {
            if let Some(d) = fit(draws.iter().map(|d| d.rho).collect(), self.rho_prop.interval) {
                tuned.rho_prop = d;
            }
        }
        if self.fixed_psi.is_none() {
            if let Some(d) = fit(draws.iter().map(|d| d.psi).collect(), None) {
                tuned.psi_prop = d;
            }
        }
        if self.fixed_gamma.is_none() && self.p_ar > 0 {
            // one shared shape across the AR components
            let pooled: Vec<f64> = draws.iter().flat_map(|d| d.gamma.iter().copied()).collect();
            if let Some(d) = fit(pooled, self.gamma_prop.interval) {
                tuned.gamma_prop = d;
            }
        }
        tuned
    }
}

pub struct MetropolisOutcome<P> {
    pub theta: Theta,
    pub payload: Option<P>,
    pub accepted: bool,
}

/// One independence Metropolis move. The candidate evaluator returns the
/// candidate's log posterior with an arbitrary payload; evaluation failures
/// and non-stationary AR candidates count as rejections.
pub fn metropolis_update<P, R, F>(
    current: &Theta,
    current_log_post: f64,
    dists: &ThetaDists,
    eval: F,
    rng: &mut R,
) -> MetropolisOutcome<P>
where
    R: Rng,
    F: FnOnce(&Theta) -> Option<(f64, P)>,
{
    let candidate = dists.propose(rng);
    if !is_stationary(&candidate.gamma) {
        return MetropolisOutcome {
            theta: current.clone(),
            payload: None,
            accepted: false,
        };
    }
    let Some((cand_log_post, payload)) = eval(&candidate) else {
        return MetropolisOutcome {
            theta: current.clone(),
            payload: None,
            accepted: false,
        };
    };
    if !cand_log_post.is_finite() {
        return MetropolisOutcome {
            theta: current.clone(),
            payload: None,
            accepted: false,
        };
    }
    let log_m = cand_log_post - current_log_post + dists.log_proposal(current)
        - dists.log_proposal(&candidate);
    let u: f64 = rng.random();
    if u.ln() < log_m {
        MetropolisOutcome {
            theta: candidate,
            payload: Some(payload),
            accepted: true,
        }
    } else {
        MetropolisOutcome {
            theta: current.clone(),
            payload: None,
            accepted: false,
        }
    }
}

/// Inputs shared by every chain of a fit.
struct FitContext {
    structures: ModelStructures,
    x: DMatrix<f64>,
    part: Partition,
    region: TruncRegion,
    cen_cells: Vec<(usize, usize)>,
    x_cen: DMatrix<f64>,
    y_obs_full: DVector<f64>,
    y_cen_init: Vec<f64>,
    dof: f64,
}

/// Runs the full sampler; one `ChainResult` per chain, chains on distinct
/// RNG streams and run in parallel.
pub fn gibbs_fit(
    ds: &CensoredDataset,
    graph: &SpatialGraph,
    model: &ModelConfig,
    run: &RunConfig,
) -> Result<Vec<ChainResult>> {
    model.validate()?;
    run.validate()?;
    if graph.n() != ds.n_sites() {
        return Err(Error::DimensionMismatch(format!(
            "graph has {} regions, dataset {}",
            graph.n(),
            ds.n_sites()
        )));
    }
    let n_total = ds.len();
    let p = ds.n_covariates();
    if p == 0 {
        return Err(Error::ConfigError("design matrix has no columns".into()));
    }
    if n_total <= p {
        return Err(Error::ConfigError(format!(
            "N = {n_total} must exceed p = {p} for the collapse"
        )));
    }
    if ds.n_observed() < p + 1 {
        return Err(Error::ConfigError(format!(
            "need at least p + 1 = {} observed cells, found {}",
            p + 1,
            ds.n_observed()
        )));
    }
    if model.p_ar >= ds.n_times() {
        return Err(Error::ConfigError(format!(
            "AR order {} needs T > {}",
            model.p_ar,
            model.p_ar
        )));
    }
    if model.kind == crate::correlation::SpatialKind::Sar && !model.raw_adjacency {
        graph.row_stochastic()?;
    }

    let structures = ModelStructures::new(graph.clone(), model.kind, model.raw_adjacency, ds.n_times());
    let part = partition(ds);
    let region = censored_region(ds, &part);
    let cen_cells: Vec<(usize, usize)> = part.cen_idx.iter().map(|&i| ds.cell_coords(i)).collect();
    let x = ds.x().clone();
    let mut x_cen = DMatrix::zeros(part.n_cen(), p);
    for (r, &i) in part.cen_idx.iter().enumerate() {
        for c in 0..p {
            x_cen[(r, c)] = x[(i, c)];
        }
    }

    // Initialization: OLS with mean-imputed gaps.
    let observed = ds.observed_values();
    let obs_mean = observed.iter().map(|(_, v)| v).sum::<f64>() / observed.len() as f64;
    let mut y_init = DVector::from_element(n_total, obs_mean);
    for &(i, v) in &observed {
        y_init[i] = v;
    }
    let xtx = x.transpose() * &x;
    let beta_ols = match xtx.cholesky() {
        Some(ch) => ch.solve(&(x.transpose() * &y_init)),
        None => {
            return Err(Error::NumericalFailure(
                "design matrix is rank deficient".into(),
            ))
        }
    };
    let resid = &y_init - &x * &beta_ols;
    let dof_ols = (n_total - p).max(1) as f64;
    let sd_ols = (resid.dot(&resid) / dof_ols).sqrt().max(1e-8);

    let mut y_cen_init = Vec::with_capacity(part.n_cen());
    for (k, &i) in part.cen_idx.iter().enumerate() {
        let (lo, hi) = (region.lower[k], region.upper[k]);
        let v = if lo.is_finite() && hi.is_finite() {
            0.5 * (lo + hi)
        } else if hi.is_finite() {
            hi - sd_ols
        } else if lo.is_finite() {
            lo + sd_ols
        } else {
            x.row(i).transpose().dot(&beta_ols)
        };
        y_cen_init.push(v);
    }

    let ctx = FitContext {
        structures,
        x,
        part,
        region,
        cen_cells,
        x_cen,
        y_obs_full: y_init,
        y_cen_init,
        dof: (n_total - p) as f64,
    };
    let hash = model_hash(model, run);
    let base_dists = ThetaDists::from_config(model);

    // Optional pilot: one short chain on its own stream, then a static
    // moment-matched retune of the independence proposals.
    let dists = if run.pilot_iters > 0 && !base_dists.all_fixed() {
        let pilot_run = RunConfig {
            chains: 1,
            iters: run.pilot_iters,
            burnin: run.pilot_iters / 3,
            thin: 1,
            ..run.clone()
        };
        match run_chain(&ctx, &base_dists, &pilot_run, PILOT_STREAM, &hash) {
            Ok(pilot) => base_dists.retuned(&pilot.draws, pilot.accepted),
            Err(_) => base_dists,
        }
    } else {
        base_dists
    };

    (0..run.chains)
        .into_par_iter()
        .map(|chain_id| run_chain(&ctx, &dists, run, chain_id, &hash))
        .collect()
}

/// RNG stream reserved for the pilot chain, far away from chain ids.
const PILOT_STREAM: usize = 999_983;

fn run_chain(
    ctx: &FitContext,
    dists: &ThetaDists,
    run: &RunConfig,
    chain_id: usize,
    hash: &str,
) -> Result<ChainResult> {
    let mut rng = rng_stream(run.seed, chain_id as u64);
    let p = ctx.x.ncols();
    let n_cen = ctx.part.n_cen();

    let mut theta = dists.initial();
    let mut op = ctx.structures.operator(theta.rho, &theta.gamma)?;
    let mut y_cen = ctx.y_cen_init.clone();
    let mut y_full = ctx.y_obs_full.clone();
    for (k, &i) in ctx.part.cen_idx.iter().enumerate() {
        y_full[i] = y_cen[k];
    }
    let mut eval =
        collapsed_log_posterior(&op, theta.psi, &ctx.x, &y_full, dists.log_prior(&theta))?;

    let mut impute_cache: Option<(DMatrix<f64>, nalgebra::Cholesky<f64, nalgebra::Dyn>)> = None;
    let mut cache_dirty = true;
    let all_fixed = dists.all_fixed();

    let mut draws = Vec::with_capacity(run.n_draws());
    let mut accepted_count = 0usize;
    let mut proposed_count = 0usize;

    for s in 0..run.iters {
        if s > 0 && n_cen > 0 {
            // Imputation moved y, so the collapsed posterior at the current
            // parameters must be refreshed before the next Metropolis ratio.
            eval = collapsed_log_posterior(
                &op,
                theta.psi,
                &ctx.x,
                &y_full,
                dists.log_prior(&theta),
            )?;
        }

        let mut accepted_this = false;
        if !all_fixed {
            proposed_count += 1;
            let outcome = metropolis_update(
                &theta,
                eval.log_post,
                &dists,
                |cand: &Theta| -> Option<(f64, (SeparableOperator, CollapsedEval))> {
                    let op_c = ctx.structures.operator(cand.rho, &cand.gamma).ok()?;
                    let ev = collapsed_log_posterior(
                        &op_c,
                        cand.psi,
                        &ctx.x,
                        &y_full,
                        dists.log_prior(cand),
                    )
                    .ok()?;
                    Some((ev.log_post, (op_c, ev)))
                },
                &mut rng,
            );
            if outcome.accepted {
                accepted_count += 1;
                accepted_this = true;
                theta = outcome.theta;
                let (op_c, ev) = outcome.payload.expect("accepted move carries its evaluation");
                op = op_c;
                eval = ev;
                cache_dirty = true;
            }
        }

        // Step 2: scale draw, then recover tau2.
        let sigma2 = rscaled_inv_chisq(ctx.dof, eval.s2, &mut rng)?;
        let tau2 = sigma2 * theta.psi;

        // Step 3: regression coefficients from the conditional normal.
        let z = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
        let w = eval
            .m_factor
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::NumericalFailure("triangular solve failed".into()))?;
        let beta = &eval.beta_hat + w * sigma2.sqrt();

        // Step 4: censored/missing cells from their truncated conditional.
        if n_cen > 0 {
            if cache_dirty || impute_cache.is_none() {
                let lam = op.sigma_psi_inv_block(theta.psi, &ctx.cen_cells);
                let chol = lam
                    .clone()
                    .cholesky()
                    .ok_or_else(|| Error::NotSpd("censored-block precision".into()))?;
                impute_cache = Some((lam, chol));
                cache_dirty = false;
            }
            let (lam, chol) = impute_cache.as_ref().expect("cache rebuilt above");

            let mut resid = &y_full - &ctx.x * &beta;
            for &i in &ctx.part.cen_idx {
                resid[i] = 0.0;
            }
            let w_full = op.solve_sigma_psi(
                theta.psi,
                &DMatrix::from_column_slice(resid.len(), 1, resid.as_slice()),
            );
            let mut w_c = DVector::zeros(n_cen);
            for (k, &i) in ctx.part.cen_idx.iter().enumerate() {
                w_c[k] = w_full[(i, 0)];
            }
            let mean_c = &ctx.x_cen * &beta - chol.solve(&w_c);

            let prec = lam / sigma2;
            let mut state = DVector::from_column_slice(&y_cen);
            for _ in 0..run.tmvn_sweeps {
                tmvn_gibbs_sweep_prec(&mean_c, &prec, &ctx.region, &mut state, &mut rng)?;
            }
            if !ctx.region.contains(state.as_slice()) {
                return Err(Error::NumericalFailure(
                    "imputed values escaped their truncation region".into(),
                ));
            }
            y_cen.copy_from_slice(state.as_slice());
            for (k, &i) in ctx.part.cen_idx.iter().enumerate() {
                y_full[i] = y_cen[k];
            }
        }

        if s >= run.burnin && (s - run.burnin) % run.thin == 0 {
            draws.push(ParameterState {
                iter: s,
                beta: beta.iter().copied().collect(),
                sigma2,
                tau2,
                psi: theta.psi,
                rho: theta.rho,
                gamma: theta.gamma.clone(),
                log_post: eval.log_post,
                accepted: accepted_this,
                y_cen: y_cen.clone(),
            });
        }
    }

    Ok(ChainResult {
        draws,
        accepted: accepted_count,
        proposed: proposed_count,
        meta: ChainMeta {
            chain_id,
            seed: run.seed,
            iters: run.iters,
            burnin: run.burnin,
            thin: run.thin,
            model_hash: hash.to_string(),
        },
    })
}

/// Conditional mean and covariance of the censored block given the observed
/// values, through the full-precision identity `Sigma^{c|o} = Lambda_cc^{-1}`.
pub fn conditional_blocks(
    structures: &ModelStructures,
    theta: &Theta,
    sigma2: f64,
    beta: &DVector<f64>,
    ds: &CensoredDataset,
    part: &Partition,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if part.n_cen() == 0 {
        return Err(Error::ConfigError("no censored cells to condition".into()));
    }
    let op = structures.operator(theta.rho, &theta.gamma)?;
    let cen_cells: Vec<(usize, usize)> = part.cen_idx.iter().map(|&i| ds.cell_coords(i)).collect();
    let lam = op.sigma_psi_inv_block(theta.psi, &cen_cells);
    let chol = lam
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotSpd("censored-block precision".into()))?;

    let n = ds.len();
    let mut resid = DVector::zeros(n);
    for (i, s) in ds.statuses().iter().enumerate() {
        if let crate::data::CensorStatus::Observed(v) = s {
            resid[i] = v - ds.x().row(i).transpose().dot(beta);
        }
    }
    let w_full = op.solve_sigma_psi(theta.psi, &DMatrix::from_column_slice(n, 1, resid.as_slice()));
    let mut w_c = DVector::zeros(part.n_cen());
    let mut mu_c = DVector::zeros(part.n_cen());
    for (k, &i) in part.cen_idx.iter().enumerate() {
        w_c[k] = w_full[(i, 0)];
        mu_c[k] = ds.x().row(i).transpose().dot(beta);
    }
    let mu = mu_c - chol.solve(&w_c);
    let sigma_cgo = chol.inverse() * sigma2;
    Ok((mu, sigma_cgo))
}
