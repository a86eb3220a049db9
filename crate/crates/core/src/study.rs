//! Simulation-study harness: data generation at a known truth, left
//! censoring at an empirical detection limit plus random missingness,
//! detection-limit imputation baselines, and the coverage / interval-length /
//! prediction-error metrics.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::SpatialKind;
use crate::data::{apply_detection_limit, CensorSide, CensorStatus, CensoredDataset, HoldoutSet};
use crate::error::{Error, Result};
use crate::graph::{grid_graph, SpatialGraph};
use crate::inference::{gibbs_fit, ChainResult, ModelConfig, ModelStructures, RunConfig};
use crate::prediction::{predictive_draws, PredictionTask};
use crate::stats::{mean, quantile};
use crate::stochastics::{normal_logpdf, rng_stream};

/// Ground-truth parameter values used by the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truth {
    pub beta: Vec<f64>,
    pub sigma2: f64,
    pub rho: f64,
    pub gamma: Vec<f64>,
    pub tau2: f64,
}

impl Truth {
    pub fn psi(&self) -> f64 {
        self.tau2 / self.sigma2
    }
}

/// Study design: estimation studies fit the full panel; prediction studies
/// reserve `t_holdout` future time points and score forecasts against them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyDesign {
    pub grid_side: usize,
    /// Simulated time points, including any holdout.
    pub t: usize,
    #[serde(default)]
    pub t_holdout: usize,
    pub censor_pct: f64,
    pub missing_pct: f64,
    pub replicates: usize,
    pub truth: Truth,
    pub kind: SpatialKind,
    pub seed: u64,
    #[serde(default)]
    pub horizons: Vec<usize>,
    pub model: ModelConfig,
    pub run: RunConfig,
}

impl StudyDesign {
    pub fn validate(&self) -> Result<()> {
        if self.grid_side == 0 {
            return Err(Error::ConfigError("grid side must be positive".into()));
        }
        if !(0.0..100.0).contains(&self.censor_pct) || !(0.0..100.0).contains(&self.missing_pct) {
            return Err(Error::ConfigError("percentages must lie in [0, 100)".into()));
        }
        if self.replicates == 0 {
            return Err(Error::ConfigError("need at least one replicate".into()));
        }
        if self.t_holdout >= self.t {
            return Err(Error::ConfigError(format!(
                "holdout {} must be below T = {}",
                self.t_holdout, self.t
            )));
        }
        if !(self.truth.sigma2 > 0.0) || self.truth.tau2 < 0.0 {
            return Err(Error::ConfigError("truth scales must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.truth.psi()) {
            return Err(Error::ConfigError(format!(
                "truth psi = tau2/sigma2 = {} outside [0, 1)",
                self.truth.psi()
            )));
        }
        if !crate::correlation::is_stationary(&self.truth.gamma) {
            return Err(Error::ConfigError("truth gamma is non-stationary".into()));
        }
        if self.model.kind != self.kind {
            return Err(Error::ConfigError("fit model kind differs from the design kind".into()));
        }
        if self.model.p_ar != self.truth.gamma.len() {
            return Err(Error::ConfigError(
                "fit model AR order differs from the truth".into(),
            ));
        }
        for &h in &self.horizons {
            if h == 0 || h > self.t_holdout {
                return Err(Error::ConfigError(format!(
                    "horizon {h} outside 1..={}",
                    self.t_holdout
                )));
            }
        }
        self.model.validate()?;
        self.run.validate()
    }

    pub fn n_sites(&self) -> usize {
        self.grid_side * self.grid_side
    }

    pub fn n_train(&self) -> usize {
        self.n_sites() * (self.t - self.t_holdout)
    }
}

/// One simulated replicate: the censored training panel, the uncensored
/// training responses, and (for prediction studies) the clean holdout.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub graph: SpatialGraph,
    pub train: CensoredDataset,
    pub truth_train: Vec<f64>,
    pub holdout: Option<HoldoutSet>,
}

/// Draws covariates `(1, x1 ~ N(0,1), x2 ~ N(1, 3^2))`, the response from
/// its exact Gaussian law, then injects left censoring at the empirical
/// `censor_pct` quantile and missingness over the surviving cells.
pub fn simulate_dataset<R: Rng>(design: &StudyDesign, rng: &mut R) -> Result<SimulatedData> {
    let graph = grid_graph(design.grid_side);
    let n_sites = design.n_sites();
    let t_full = design.t;
    let n_full = n_sites * t_full;

    let std_norm = Normal::new(0.0, 1.0).expect("unit normal");
    let x2_norm = Normal::new(1.0, 3.0).expect("shifted normal");
    let mut x = DMatrix::zeros(n_full, 3);
    for r in 0..n_full {
        x[(r, 0)] = 1.0;
        x[(r, 1)] = std_norm.sample(rng);
        x[(r, 2)] = x2_norm.sample(rng);
    }

    let structures = ModelStructures::new(graph.clone(), design.kind, false, t_full);
    let op = structures.operator(design.truth.rho, &design.truth.gamma)?;
    let beta = DVector::from_column_slice(&design.truth.beta);
    if beta.len() != 3 {
        return Err(Error::ConfigError("truth beta must have three components".into()));
    }
    let effect = op.sample_effect(design.truth.sigma2, rng);
    let noise_sd = design.truth.tau2.sqrt();
    let mut y = &x * &beta + effect;
    for v in y.iter_mut() {
        let e: f64 = std_norm.sample(rng);
        *v += noise_sd * e;
    }

    // Full panel with every response observed.
    let statuses: Vec<CensorStatus> = y.iter().map(|&v| CensorStatus::Observed(v)).collect();
    let full = CensoredDataset::new(n_sites, t_full, statuses, x)?;

    let (clean_train, holdout) = if design.t_holdout > 0 {
        let (train, hold) = full.split_holdout(design.t_holdout)?;
        (train, Some(hold))
    } else {
        (full, None)
    };

    let truth_train: Vec<f64> = clean_train
        .statuses()
        .iter()
        .map(|s| match s {
            CensorStatus::Observed(v) => *v,
            _ => unreachable!("clean panel is fully observed"),
        })
        .collect();

    let train = inject_partial_information(&clean_train, design.censor_pct, design.missing_pct, rng)?;

    Ok(SimulatedData {
        graph,
        train,
        truth_train,
        holdout,
    })
}

/// Left-censors the lowest `floor(delta N / 100)` values at the empirical
/// detection limit, then marks `floor(miss (N - censored) / 100)` of the
/// remaining observed cells missing, uniformly at random.
pub fn inject_partial_information<R: Rng>(
    ds: &CensoredDataset,
    censor_pct: f64,
    missing_pct: f64,
    rng: &mut R,
) -> Result<CensoredDataset> {
    let n = ds.len();
    let m_cens = (censor_pct * n as f64 / 100.0).floor() as usize;
    let mut out = if m_cens > 0 {
        let mut values: Vec<f64> = ds
            .statuses()
            .iter()
            .filter_map(|s| match s {
                CensorStatus::Observed(v) => Some(*v),
                _ => None,
            })
            .collect();
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite responses"));
        let lod = values[m_cens - 1];
        apply_detection_limit(ds, lod, CensorSide::Left)?
    } else {
        ds.clone()
    };

    let observed_after: Vec<usize> = out
        .statuses()
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.is_observed().then_some(i))
        .collect();
    let m_miss = (missing_pct * (n - (n - observed_after.len())) as f64 / 100.0).floor() as usize;
    if m_miss > 0 {
        let mut idx = observed_after;
        idx.shuffle(rng);
        for &i in idx.iter().take(m_miss) {
            out.set_status(i, CensorStatus::Missing)?;
        }
    }
    Ok(out)
}

/// Imputation baselines: censored cells to the detection limit (or half of
/// it), missing cells to the mean of the observed cells only. Every cell in
/// the result is observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImputeMethod {
    Lod,
    Lod2,
    Mean,
}

pub fn baseline_impute(ds: &CensoredDataset, method: ImputeMethod) -> Result<CensoredDataset> {
    let observed_mean = {
        let obs = ds.observed_values();
        if obs.is_empty() {
            return Err(Error::ConfigError("nothing observed to impute from".into()));
        }
        obs.iter().map(|(_, v)| v).sum::<f64>() / obs.len() as f64
    };
    let mut out = ds.clone();
    for i in 0..out.len() {
        let replacement = match out.status(i) {
            CensorStatus::Observed(_) => continue,
            CensorStatus::Missing => observed_mean,
            CensorStatus::Left { .. } => match method {
                ImputeMethod::Mean => observed_mean,
                ImputeMethod::Lod => ds.lod().ok_or(Error::NoLodRecorded)?,
                ImputeMethod::Lod2 => 0.5 * ds.lod().ok_or(Error::NoLodRecorded)?,
            },
            other => {
                return Err(Error::ConfigError(format!(
                    "baseline imputation is defined for left-censored data, found {other:?}"
                )))
            }
        };
        out.set_status(i, CensorStatus::Observed(replacement))?;
    }
    Ok(out)
}

/// `sqrt(mean((pred - truth)^2))` over paired cells.
pub fn sqrt_mspe(pred_means: &[f64], truth_values: &[f64]) -> Result<f64> {
    if pred_means.len() != truth_values.len() {
        return Err(Error::LengthMismatch {
            left: pred_means.len(),
            right: truth_values.len(),
        });
    }
    if pred_means.is_empty() {
        return Err(Error::LengthMismatch { left: 0, right: 0 });
    }
    let acc: f64 = pred_means
        .iter()
        .zip(truth_values)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok((acc / pred_means.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    NstClg,
    Lod,
    LodHalf,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::NstClg, Method::Lod, Method::LodHalf];

    pub fn label(&self) -> &'static str {
        match self {
            Method::NstClg => "NST-CLG",
            Method::Lod => "LOD",
            Method::LodHalf => "LOD/2",
        }
    }
}

/// Per-parameter interval metrics across replicates.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ParamMetric {
    pub lengths: Vec<f64>,
    pub covered: Vec<bool>,
}

impl ParamMetric {
    pub fn coverage(&self) -> f64 {
        if self.covered.is_empty() {
            f64::NAN
        } else {
            self.covered.iter().filter(|c| **c).count() as f64 / self.covered.len() as f64
        }
    }

    pub fn mean_length(&self) -> f64 {
        mean(&self.lengths)
    }
}

/// Per-horizon predictive metrics across replicates.
#[derive(Debug, Clone, Serialize)]
pub struct HorizonMetric {
    pub horizon: usize,
    pub sqrt_mspe: Vec<f64>,
    pub mean_length: Vec<f64>,
    pub coverage: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyMetrics {
    pub n: usize,
    pub parameter_names: Vec<String>,
    /// `params[method][parameter]`, methods in `Method::ALL` order.
    pub params: Vec<Vec<ParamMetric>>,
    /// `predictive[method][horizon index]`.
    pub predictive: Vec<Vec<HorizonMetric>>,
    /// Expected log predictive density per replicate (max horizon), by method.
    pub elpd: Vec<Vec<f64>>,
    pub failures: usize,
    pub replicates_used: usize,
}

struct ReplicateOutcome {
    param: Vec<Vec<(f64, bool)>>,
    predictive: Vec<Vec<(f64, f64, f64)>>,
    elpd: Vec<f64>,
}

fn derive_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 round over the salted seed
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn credible_interval(draws: &[f64]) -> (f64, f64) {
    (quantile(draws, 0.025), quantile(draws, 0.975))
}

fn parameter_names(truth: &Truth) -> Vec<String> {
    let mut names: Vec<String> = (0..truth.beta.len()).map(|i| format!("beta_{i}")).collect();
    names.push("sigma2".into());
    names.push("rho".into());
    names.push("tau2".into());
    names.extend((1..=truth.gamma.len()).map(|i| format!("gamma_{i}")));
    names
}

fn truth_value(truth: &Truth, name: &str) -> f64 {
    if let Some(ix) = name.strip_prefix("beta_") {
        return truth.beta[ix.parse::<usize>().expect("parameter index")];
    }
    if let Some(ix) = name.strip_prefix("gamma_") {
        return truth.gamma[ix.parse::<usize>().expect("parameter index") - 1];
    }
    match name {
        "sigma2" => truth.sigma2,
        "rho" => truth.rho,
        "tau2" => truth.tau2,
        other => panic!("no truth value for {other}"),
    }
}

fn pooled_series(chains: &[ChainResult], name: &str) -> Vec<f64> {
    chains
        .iter()
        .flat_map(|c| c.series(name).expect("known parameter name"))
        .collect()
}

/// Runs one study end to end: per replicate, fit the censored panel with the
/// full model and the LOD / LOD/2 completions with the same sampler, then
/// aggregate interval and prediction metrics. Per-replicate failures are
/// excluded; more than 5% of them aborts the study.
pub fn run_study(design: &StudyDesign) -> Result<StudyMetrics> {
    design.validate()?;
    let names = parameter_names(&design.truth);

    let outcomes: Vec<Result<ReplicateOutcome>> = (0..design.replicates)
        .into_par_iter()
        .map(|r| run_replicate(design, r, &names))
        .collect();

    let mut params = vec![vec![ParamMetric::default(); names.len()]; Method::ALL.len()];
    let mut predictive: Vec<Vec<HorizonMetric>> = Method::ALL
        .iter()
        .map(|_| {
            design
                .horizons
                .iter()
                .map(|&h| HorizonMetric {
                    horizon: h,
                    sqrt_mspe: Vec::new(),
                    mean_length: Vec::new(),
                    coverage: Vec::new(),
                })
                .collect()
        })
        .collect();
    let mut elpd = vec![Vec::new(); Method::ALL.len()];
    let mut failures = 0usize;

    for outcome in outcomes {
        match outcome {
            Ok(rep) => {
                for m in 0..Method::ALL.len() {
                    for (j, &(len, cov)) in rep.param[m].iter().enumerate() {
                        params[m][j].lengths.push(len);
                        params[m][j].covered.push(cov);
                    }
                    for (h, &(rmspe, len, cov)) in rep.predictive[m].iter().enumerate() {
                        predictive[m][h].sqrt_mspe.push(rmspe);
                        predictive[m][h].mean_length.push(len);
                        predictive[m][h].coverage.push(cov);
                    }
                    if !rep.elpd.is_empty() {
                        elpd[m].push(rep.elpd[m]);
                    }
                }
            }
            Err(_) => failures += 1,
        }
    }

    if failures * 20 >= design.replicates.max(1) && failures > 0 {
        return Err(Error::NumericalFailure(format!(
            "{failures} of {} replicates failed (5% budget exceeded)",
            design.replicates
        )));
    }

    Ok(StudyMetrics {
        n: design.n_train(),
        parameter_names: names,
        params,
        predictive,
        elpd,
        failures,
        replicates_used: design.replicates - failures,
    })
}

fn run_replicate(design: &StudyDesign, r: usize, names: &[String]) -> Result<ReplicateOutcome> {
    let mut sim_rng = rng_stream(design.seed, 10_000 + r as u64);
    let sim = simulate_dataset(design, &mut sim_rng)?;
    let fit_seed = derive_seed(design.seed, (r + 1) as u64);
    let run = RunConfig {
        seed: fit_seed,
        ..design.run.clone()
    };

    let mut param = Vec::with_capacity(Method::ALL.len());
    let mut predictive = Vec::with_capacity(Method::ALL.len());
    let mut elpds = Vec::new();

    for (m_ix, method) in Method::ALL.iter().enumerate() {
        let data = match method {
            Method::NstClg => sim.train.clone(),
            Method::Lod => baseline_impute(&sim.train, ImputeMethod::Lod)?,
            Method::LodHalf => baseline_impute(&sim.train, ImputeMethod::Lod2)?,
        };
        let chains = gibbs_fit(&data, &sim.graph, &design.model, &run)?;

        let mut per_param = Vec::with_capacity(names.len());
        for name in names {
            let series = pooled_series(&chains, name);
            let (lo, hi) = credible_interval(&series);
            let truth = truth_value(&design.truth, name);
            per_param.push((hi - lo, truth >= lo && truth <= hi));
        }
        param.push(per_param);

        if let Some(holdout) = &sim.holdout {
            let structures =
                ModelStructures::new(sim.graph.clone(), design.kind, false, data.n_times());
            let task = PredictionTask::all_sites(holdout.n, holdout.horizon, holdout.x.clone());
            let mut pred_rng = rng_stream(design.seed, 20_000 + (r * Method::ALL.len() + m_ix) as u64);
            let (pd, summary) = predictive_draws(&chains, &structures, &data, &task, &mut pred_rng)?;

            let truths: Vec<f64> = holdout
                .status
                .iter()
                .map(|s| match s {
                    CensorStatus::Observed(v) => *v,
                    _ => f64::NAN,
                })
                .collect();

            let mut per_horizon = Vec::with_capacity(design.horizons.len());
            for &h in &design.horizons {
                let cells: Vec<usize> = (0..pd.cells.len())
                    .filter(|&c| pd.cells[c].1 <= h)
                    .collect();
                let means: Vec<f64> = cells.iter().map(|&c| summary.mean[c]).collect();
                let tv: Vec<f64> = cells.iter().map(|&c| truths[c]).collect();
                let rmspe = sqrt_mspe(&means, &tv)?;
                let mut len_acc = 0.0;
                let mut cov_acc = 0.0;
                for &c in &cells {
                    len_acc += summary.q975[c] - summary.q025[c];
                    if tv.is_empty() {
                        continue;
                    }
                    let t = truths[c];
                    if t >= summary.q025[c] && t <= summary.q975[c] {
                        cov_acc += 1.0;
                    }
                }
                per_horizon.push((
                    rmspe,
                    len_acc / cells.len() as f64,
                    cov_acc / cells.len() as f64,
                ));
            }
            predictive.push(per_horizon);

            // Pointwise predictive density at the truth over all holdout
            // cells (log mean over draws).
            let n_draws = pd.means.nrows();
            let mut acc = 0.0;
            for (c, &t) in truths.iter().enumerate() {
                let logs: Vec<f64> = (0..n_draws)
                    .map(|d| normal_logpdf(t, pd.means[(d, c)], pd.vars[(d, c)]))
                    .collect();
                let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                acc += max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
                    - (n_draws as f64).ln();
            }
            elpds.push(acc);
        } else {
            predictive.push(Vec::new());
        }
    }

    Ok(ReplicateOutcome {
        param,
        predictive,
        elpd: elpds,
    })
}

/// Coverage table in the paper-style layout: one row per parameter, one
/// column per method.
pub fn coverage_table_csv(metrics: &StudyMetrics) -> String {
    let mut out = String::from("N,parameter");
    for m in Method::ALL {
        out.push(',');
        out.push_str(m.label());
    }
    out.push('\n');
    for (j, name) in metrics.parameter_names.iter().enumerate() {
        out.push_str(&format!("{},{}", metrics.n, name));
        for m in 0..Method::ALL.len() {
            out.push_str(&format!(",{:.3}", metrics.params[m][j].coverage()));
        }
        out.push('\n');
    }
    out
}

/// Mean credible-interval lengths, same layout as the coverage table.
pub fn length_table_csv(metrics: &StudyMetrics) -> String {
    let mut out = String::from("N,parameter");
    for m in Method::ALL {
        out.push(',');
        out.push_str(m.label());
    }
    out.push('\n');
    for (j, name) in metrics.parameter_names.iter().enumerate() {
        out.push_str(&format!("{},{}", metrics.n, name));
        for m in 0..Method::ALL.len() {
            out.push_str(&format!(",{:.4}", metrics.params[m][j].mean_length()));
        }
        out.push('\n');
    }
    out
}

/// Predictive metrics per horizon and method.
pub fn predictive_table_csv(metrics: &StudyMetrics) -> String {
    let mut out = String::from("N,horizon,method,sqrt_mspe,mean_interval_length,mean_coverage\n");
    for (m_ix, m) in Method::ALL.iter().enumerate() {
        for hm in &metrics.predictive[m_ix] {
            out.push_str(&format!(
                "{},{},{},{:.4},{:.4},{:.3}\n",
                metrics.n,
                hm.horizon,
                m.label(),
                mean(&hm.sqrt_mspe),
                mean(&hm.mean_length),
                mean(&hm.coverage),
            ));
        }
    }
    out
}

/// Named designs so the flagship runs are one command each.
pub mod presets {
    use super::*;
    use crate::inference::PriorSpec;

    pub const ESTIMATION_DESK: &str = "table4.1-desk";
    pub const PREDICTION_DESK: &str = "table4.4-desk";
    pub const BEIJING: &str = "beijing";

    fn paper_truth() -> Truth {
        Truth {
            beta: vec![1.0, 2.0, 2.5],
            sigma2: 2.0,
            rho: 0.8,
            gamma: vec![0.7],
            tau2: 0.6,
        }
    }

    /// Desk-scale estimation study: 3 x 3 grid, T = 9, 15% censoring, 5%
    /// missingness, 50 replicates.
    pub fn estimation_desk(seed: u64) -> StudyDesign {
        StudyDesign {
            grid_side: 3,
            t: 9,
            t_holdout: 0,
            censor_pct: 15.0,
            missing_pct: 5.0,
            replicates: 50,
            truth: paper_truth(),
            kind: SpatialKind::Dagar,
            seed,
            horizons: vec![],
            model: ModelConfig {
                kind: SpatialKind::Dagar,
                p_ar: 1,
                ..Default::default()
            },
            run: RunConfig {
                chains: 1,
                iters: 4000,
                burnin: 1000,
                thin: 3,
                seed: 0,
                tmvn_sweeps: 5,
                store_imputed: false,
                pilot_iters: 400,
            },
        }
    }

    /// Desk-scale prediction study: N = 500 design (5 x 5 grid, 20 training
    /// times plus a 7-step holdout), 35% censoring, 30 replicates.
    pub fn prediction_desk(seed: u64) -> StudyDesign {
        StudyDesign {
            grid_side: 5,
            t: 27,
            t_holdout: 7,
            censor_pct: 35.0,
            missing_pct: 5.0,
            replicates: 30,
            truth: paper_truth(),
            kind: SpatialKind::Dagar,
            seed,
            horizons: vec![1, 3, 7],
            model: ModelConfig {
                kind: SpatialKind::Dagar,
                p_ar: 1,
                ..Default::default()
            },
            run: RunConfig {
                chains: 1,
                iters: 4000,
                burnin: 1000,
                thin: 3,
                seed: 0,
                tmvn_sweeps: 5,
                store_imputed: false,
                pilot_iters: 600,
            },
        }
    }

    pub fn study_design(name: &str, seed: u64) -> Option<StudyDesign> {
        match name {
            ESTIMATION_DESK => Some(estimation_desk(seed)),
            PREDICTION_DESK => Some(prediction_desk(seed)),
            _ => None,
        }
    }

    /// Truth used by the synthetic stand-in for the flagship station panel.
    pub fn beijing_truth() -> Truth {
        Truth {
            beta: vec![7.05, -0.037, -0.226, -5.588],
            sigma2: 0.524,
            rho: 0.679,
            gamma: vec![0.529],
            tau2: 0.149,
        }
    }

    /// Fit configuration tuned for station-panel scale: pilot-informed
    /// independence proposals keep the acceptance rate workable.
    pub fn beijing_model() -> (ModelConfig, RunConfig) {
        let model = ModelConfig {
            kind: SpatialKind::Dagar,
            p_ar: 1,
            priors: PriorSpec::default(),
            ..Default::default()
        };
        let run = RunConfig {
            chains: 3,
            iters: 6000,
            burnin: 1500,
            thin: 5,
            seed: 0,
            tmvn_sweeps: 5,
            store_imputed: true,
            pilot_iters: 800,
        };
        (model, run)
    }

    /// Synthetic station panel: 12 regions on a 3 x 4 rook lattice, 190 time
    /// points, three centered meteorology-like covariates, 55 missing cells.
    pub fn simulate_beijing(seed: u64) -> Result<(CensoredDataset, SpatialGraph)> {
        let rows = 3usize;
        let cols = 4usize;
        let n_sites = rows * cols;
        let t = 190usize;
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let v = r * cols + c;
                if c + 1 < cols {
                    edges.push((v, v + 1));
                }
                if r + 1 < rows {
                    edges.push((v, v + cols));
                }
            }
        }
        let graph = SpatialGraph::new(n_sites, edges)?;
        let truth = beijing_truth();
        let mut rng = rng_stream(seed, 0);
        let temp = Normal::new(0.0, 4.0).expect("normal");
        let wsp = Normal::new(0.0, 1.2).expect("normal");
        let pres = Normal::new(0.0, 0.06).expect("normal");
        let n = n_sites * t;
        let mut x = DMatrix::zeros(n, 3);
        for r in 0..n {
            x[(r, 0)] = temp.sample(&mut rng);
            x[(r, 1)] = wsp.sample(&mut rng);
            x[(r, 2)] = pres.sample(&mut rng);
        }
        let structures = ModelStructures::new(graph.clone(), SpatialKind::Dagar, false, t);
        let op = structures.operator(truth.rho, &truth.gamma)?;
        let effect = op.sample_effect(truth.sigma2, &mut rng);
        let noise = Normal::new(0.0, truth.tau2.sqrt()).expect("normal");
        let slopes = DVector::from_column_slice(&truth.beta[1..]);
        let mut statuses = Vec::with_capacity(n);
        for r in 0..n {
            let e: f64 = noise.sample(&mut rng);
            let y = truth.beta[0] + x.row(r).transpose().dot(&slopes) + effect[r] + e;
            statuses.push(CensorStatus::Observed(y));
        }
        let mut ds = CensoredDataset::new(n_sites, t, statuses, x)?;
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        for &i in idx.iter().take(55) {
            ds.set_status(i, CensorStatus::Missing)?;
        }
        Ok((ds, graph))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::ar_correlation;
    use crate::correlation::TemporalSpec;
    use crate::inference::{FixedParams, PriorSpec, ProposalSpec};

    fn toy_design(censor: f64, missing: f64, replicates: usize) -> StudyDesign {
        StudyDesign {
            grid_side: 3,
            t: 9,
            t_holdout: 0,
            censor_pct: censor,
            missing_pct: missing,
            replicates,
            truth: Truth {
                beta: vec![1.0, 2.0, 2.5],
                sigma2: 2.0,
                rho: 0.8,
                gamma: vec![0.7],
                tau2: 0.6,
            },
            kind: SpatialKind::Dagar,
            seed: 42,
            horizons: vec![],
            model: ModelConfig {
                kind: SpatialKind::Dagar,
                p_ar: 1,
                priors: PriorSpec::default(),
                proposals: ProposalSpec::default(),
                fixed: FixedParams::default(),
                raw_adjacency: false,
                rho_interval: None,
                gamma_interval: None,
            },
            run: RunConfig {
                chains: 1,
                iters: 60,
                burnin: 20,
                thin: 2,
                seed: 0,
                tmvn_sweeps: 3,
                store_imputed: false,
                pilot_iters: 0,
            },
        }
    }

    #[test]
    fn no_injection_keeps_panel_fully_observed() {
        let design = toy_design(0.0, 0.0, 1);
        let mut rng = rng_stream(1, 0);
        let sim = simulate_dataset(&design, &mut rng).unwrap();
        assert_eq!(sim.train.n_censored(), 0);
        assert_eq!(sim.train.len(), 81);
    }

    #[test]
    fn censoring_and_missing_counts_follow_floor_rule() {
        let design = toy_design(15.0, 5.0, 1);
        let mut rng = rng_stream(2, 0);
        let sim = simulate_dataset(&design, &mut rng).unwrap();
        let n = sim.train.len();
        assert_eq!(n, 81);
        let censored = sim
            .train
            .statuses()
            .iter()
            .filter(|s| matches!(s, CensorStatus::Left { .. }))
            .count();
        let missing = sim.train.n_missing();
        assert_eq!(censored, 12); // floor(81 * 0.15)
        assert_eq!(missing, 3); // floor(0.05 * (81 - 12))
        // censoring never overlaps missingness by construction
        assert_eq!(sim.train.n_censored(), censored + missing);
    }

    #[test]
    fn simulated_covariance_matches_target() {
        // Monte Carlo covariance oracle on a small panel.
        let mut design = toy_design(0.0, 0.0, 1);
        design.grid_side = 2;
        design.t = 2;
        let n = 8;
        let mut rng = rng_stream(3, 0);
        let reps = 2000;
        let mut acc = DMatrix::zeros(n, n);
        for _ in 0..reps {
            let sim = simulate_dataset(&design, &mut rng).unwrap();
            let beta = DVector::from_column_slice(&design.truth.beta);
            let resid = DVector::from_column_slice(&sim.truth_train) - sim.train.x() * beta;
            acc += &resid * resid.transpose();
        }
        acc /= reps as f64;

        let structures = ModelStructures::new(grid_graph(2), SpatialKind::Dagar, false, 2);
        let sp = structures.spatial_pair(design.truth.rho).unwrap();
        let phi = ar_correlation(&TemporalSpec::new(design.truth.gamma.clone(), 2).unwrap()).unwrap();
        let mut target = sp.covariance().unwrap().kronecker(&phi) * design.truth.sigma2;
        for i in 0..n {
            target[(i, i)] += design.truth.tau2;
        }
        // 3 MC standard errors on each covariance entry, approximated by
        // 3 * sqrt((C_ii C_jj + C_ij^2) / reps) <= 3 * 2 * maxdiag / sqrt(reps).
        let tol = 3.0 * 2.0 * 2.6 / (reps as f64).sqrt();
        assert!(
            (acc - target).abs().max() < tol,
            "max deviation {}",
            0.0
        );
    }

    #[test]
    fn baseline_impute_values() {
        let x = DMatrix::from_element(4, 1, 1.0);
        let statuses = vec![
            CensorStatus::Observed(3.0),
            CensorStatus::Left { upper: 2.0 },
            CensorStatus::Missing,
            CensorStatus::Observed(5.0),
        ];
        let mut ds = CensoredDataset::new(2, 2, statuses, x).unwrap();
        ds.set_lod(2.0);

        let lod = baseline_impute(&ds, ImputeMethod::Lod).unwrap();
        assert_eq!(lod.status(1), CensorStatus::Observed(2.0));
        let lod2 = baseline_impute(&ds, ImputeMethod::Lod2).unwrap();
        assert_eq!(lod2.status(1), CensorStatus::Observed(1.0));
        // mean over observed cells only: (3 + 5) / 2
        assert_eq!(lod.status(2), CensorStatus::Observed(4.0));
        assert_eq!(lod.n_censored(), 0);

        // identity when nothing is censored or missing
        let clean = baseline_impute(&lod, ImputeMethod::Lod).unwrap();
        assert_eq!(clean.statuses(), lod.statuses());
    }

    #[test]
    fn baseline_impute_requires_recorded_lod() {
        let x = DMatrix::from_element(2, 1, 1.0);
        let statuses = vec![CensorStatus::Observed(1.0), CensorStatus::Left { upper: 0.0 }];
        let ds = CensoredDataset::new(1, 2, statuses, x).unwrap();
        assert!(matches!(
            baseline_impute(&ds, ImputeMethod::Lod),
            Err(Error::NoLodRecorded)
        ));
    }

    #[test]
    fn sqrt_mspe_values() {
        assert_eq!(sqrt_mspe(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(sqrt_mspe(&[3.0, 1.0], &[2.0, 0.0]).unwrap(), 1.0);
        let v = sqrt_mspe(&[1.0, 2.0], &[0.0, 0.0]).unwrap();
        assert!((v - (2.5_f64).sqrt()).abs() < 1e-15);
        assert!(matches!(
            sqrt_mspe(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn study_reruns_are_bitwise_identical() {
        let design = toy_design(10.0, 5.0, 2);
        let a = run_study(&design).unwrap();
        let b = run_study(&design).unwrap();
        assert_eq!(a.parameter_names, b.parameter_names);
        for m in 0..Method::ALL.len() {
            for j in 0..a.parameter_names.len() {
                assert_eq!(a.params[m][j].lengths, b.params[m][j].lengths);
                assert_eq!(a.params[m][j].covered, b.params[m][j].covered);
            }
        }
        assert_eq!(coverage_table_csv(&a), coverage_table_csv(&b));
    }

    #[test]
    fn zero_injection_makes_methods_coincide() {
        let design = toy_design(0.0, 0.0, 1);
        let metrics = run_study(&design).unwrap();
        for j in 0..metrics.parameter_names.len() {
            let l0 = &metrics.params[0][j].lengths;
            let l1 = &metrics.params[1][j].lengths;
            let l2 = &metrics.params[2][j].lengths;
            assert_eq!(l0, l1);
            assert_eq!(l1, l2);
        }
    }

    #[test]
    fn prediction_study_produces_horizon_metrics() {
        let mut design = toy_design(10.0, 5.0, 1);
        design.t = 12;
        design.t_holdout = 3;
        design.horizons = vec![1, 3];
        let metrics = run_study(&design).unwrap();
        for m in 0..Method::ALL.len() {
            assert_eq!(metrics.predictive[m].len(), 2);
            for hm in &metrics.predictive[m] {
                assert_eq!(hm.sqrt_mspe.len(), 1);
                assert!(hm.sqrt_mspe[0].is_finite() && hm.sqrt_mspe[0] > 0.0);
                assert!(hm.coverage[0] >= 0.0 && hm.coverage[0] <= 1.0);
            }
            assert_eq!(metrics.elpd[m].len(), 1);
        }
        let table = predictive_table_csv(&metrics);
        assert!(table.contains("NST-CLG"));
        assert!(table.contains("LOD/2"));
    }
}
