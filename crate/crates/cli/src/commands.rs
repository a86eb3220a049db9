use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nstclg::correlation::SpatialKind;
use nstclg::data::{
    load_dataset, partition, write_dataset_path, CensorStatus, CensoredDataset, HoldoutSet,
};
use nstclg::diagnostics::{acf_pacf, convergence_report, deviance_criteria, elpd_holdout, morans_i};
use nstclg::error::{Error, Result};
use nstclg::graph::SpatialGraph;
use nstclg::inference::{
    gibbs_fit, model_hash, ChainMeta, ChainResult, ModelConfig, ModelStructures, RunConfig,
};
use nstclg::prediction::{predictive_draws, PredictionTask};
use nstclg::stats::quantile;
use nstclg::stochastics::rng_stream;
use nstclg::study::{
    self, coverage_table_csv, length_table_csv, predictive_table_csv, presets, run_study,
    simulate_dataset, Method, StudyDesign,
};

use crate::args::{DiagnoseArgs, FitArgs, PredictArgs, SimulateArgs, StudyArgs};

/// JSON config accepted by `fit --config`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitFileConfig {
    pub model: ModelConfig,
    pub run: RunConfig,
}

/// Preprocessing applied between loading and fitting; recorded so that
/// `predict` and `diagnose` can reproduce the exact training panel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Preprocessing {
    pub log_response: bool,
    pub center_covariates: bool,
    pub center_offsets: Vec<f64>,
    pub intercept: bool,
    pub holdout_last: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainFileRecord {
    pub id: usize,
    pub file: String,
    pub imputed_file: Option<String>,
    pub accept_rate: f64,
    pub draws: usize,
}

/// Sidecar written next to the chain files; the single source of truth for
/// everything a later `predict`/`diagnose` needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: ModelConfig,
    pub run: RunConfig,
    pub data_path: String,
    pub graph_path: String,
    pub preprocessing: Preprocessing,
    pub n_sites: usize,
    pub t_train: usize,
    pub t_full: usize,
    pub p: usize,
    pub n_obs: usize,
    pub n_cen: usize,
    pub model_hash: String,
    pub params: Vec<String>,
    pub chains: Vec<ChainFileRecord>,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    fs::create_dir_all(&args.out)?;
    if args.preset.as_deref() == Some(presets::BEIJING) {
        let (ds, graph) = presets::simulate_beijing(args.seed)?;
        write_outputs(&args.out, &ds, &graph, None)?;
        let truth = serde_json::json!({
            "preset": presets::BEIJING,
            "seed": args.seed,
            "truth": presets::beijing_truth(),
        });
        write_text(&args.out.join("truth.json"), &pretty(&truth))?;
        return Ok(());
    }

    let design = resolve_design(args.preset.as_deref(), args.design.as_deref(), Some(args.seed), None)?;
    if args.replicate >= design.replicates {
        return Err(Error::ConfigError(format!(
            "replicate {} outside 0..{}",
            args.replicate, design.replicates
        )));
    }
    let mut rng = rng_stream(design.seed, 10_000 + args.replicate as u64);
    let sim = simulate_dataset(&design, &mut rng)?;
    write_outputs(&args.out, &sim.train, &sim.graph, sim.holdout.as_ref())?;
    let truth = serde_json::json!({
        "design": design,
        "replicate": args.replicate,
        "lod": sim.train.lod(),
        "truth": design.truth,
    });
    write_text(&args.out.join("truth.json"), &pretty(&truth))?;
    Ok(())
}

fn write_outputs(
    out: &Path,
    ds: &CensoredDataset,
    graph: &SpatialGraph,
    holdout: Option<&HoldoutSet>,
) -> Result<()> {
    write_dataset_path(ds, &out.join("data.csv"))?;
    let file = fs::File::create(out.join("graph.txt"))?;
    graph.write_edge_list(BufWriter::new(file))?;
    if let Some(hold) = holdout {
        let mut w = BufWriter::new(fs::File::create(out.join("holdout.csv"))?);
        let p = hold.x.ncols();
        let mut header = String::from("station,time_index,y,status,lower,upper");
        for c in 0..p {
            header.push_str(&format!(",x{}", c + 1));
        }
        writeln!(w, "{header}")?;
        for site in 0..hold.n {
            for k in 0..hold.horizon {
                let r = site * hold.horizon + k;
                let y = match hold.status[r] {
                    CensorStatus::Observed(v) => format!("{v}"),
                    _ => String::new(),
                };
                write!(
                    w,
                    "{},{},{},obs,,",
                    site + 1,
                    ds.n_times() + k + 1,
                    y
                )?;
                for c in 0..p {
                    write!(w, ",{}", hold.x[(r, c)])?;
                }
                writeln!(w)?;
            }
        }
    }
    Ok(())
}

fn resolve_design(
    preset: Option<&str>,
    design_path: Option<&Path>,
    seed: Option<u64>,
    replicates: Option<usize>,
) -> Result<StudyDesign> {
    let mut design = if let Some(name) = preset {
        presets::study_design(name, seed.unwrap_or(1)).ok_or_else(|| {
            Error::ConfigError(format!(
                "unknown study preset `{name}` (expected `{}` or `{}`)",
                presets::ESTIMATION_DESK,
                presets::PREDICTION_DESK
            ))
        })?
    } else if let Some(path) = design_path {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::ConfigError(format!("design JSON: {e}")))?
    } else {
        return Err(Error::ConfigError("need --preset or --design".into()));
    };
    if let Some(seed) = seed {
        design.seed = seed;
    }
    if let Some(reps) = replicates {
        design.replicates = reps;
    }
    design.validate()?;
    Ok(design)
}

fn resolve_fit_config(args: &FitArgs) -> Result<(ModelConfig, RunConfig)> {
    let (mut model, mut run) = if args.preset.as_deref() == Some(presets::BEIJING) {
        presets::beijing_model()
    } else if let Some(name) = args.preset.as_deref() {
        return Err(Error::ConfigError(format!("unknown fit preset `{name}`")));
    } else if let Some(path) = &args.config {
        let text = fs::read_to_string(path)?;
        let cfg: FitFileConfig =
            serde_json::from_str(&text).map_err(|e| Error::ConfigError(format!("fit config JSON: {e}")))?;
        (cfg.model, cfg.run)
    } else {
        (ModelConfig::default(), RunConfig::default())
    };
    if let Some(kind) = &args.model {
        model.kind = match kind.as_str() {
            "dagar" => SpatialKind::Dagar,
            "sar" => SpatialKind::Sar,
            other => return Err(Error::ConfigError(format!("unknown model kind `{other}`"))),
        };
    }
    if let Some(p) = args.p {
        model.p_ar = p;
    }
    if let Some(v) = args.chains {
        run.chains = v;
    }
    if let Some(v) = args.iters {
        run.iters = v;
    }
    if let Some(v) = args.burnin {
        run.burnin = v;
    }
    if let Some(v) = args.thin {
        run.thin = v;
    }
    if let Some(v) = args.seed {
        run.seed = v;
    }
    if let Some(v) = args.sweeps {
        run.tmvn_sweeps = v;
    }
    if args.save_imputed {
        run.store_imputed = true;
    }
    Ok((model, run))
}

/// Loads, preprocesses, and splits the panel exactly as `fit` does; reused
/// by `predict` and `diagnose` through the recorded preprocessing.
fn prepare_dataset(
    data_path: &Path,
    graph_path: &Path,
    prep: &mut Preprocessing,
    offsets_known: bool,
) -> Result<(CensoredDataset, Option<HoldoutSet>, SpatialGraph, usize)> {
    let (mut ds, graph) = load_dataset(data_path, graph_path)?;
    let t_full = ds.n_times();
    if prep.log_response {
        ds.log_response()?;
    }
    if prep.center_covariates {
        if offsets_known {
            ds.center_with_offsets(&prep.center_offsets)?;
        } else {
            prep.center_offsets = ds.center_covariates_recording();
        }
    }
    if prep.intercept {
        ds.add_intercept();
    }
    let (train, holdout) = if prep.holdout_last > 0 {
        let (train, hold) = ds.split_holdout(prep.holdout_last)?;
        (train, Some(hold))
    } else {
        (ds, None)
    };
    Ok((train, holdout, graph, t_full))
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let (model, run) = resolve_fit_config(args)?;
    let mut prep = Preprocessing {
        log_response: args.log_response,
        center_covariates: args.center_covariates,
        center_offsets: Vec::new(),
        intercept: !args.no_intercept,
        holdout_last: args.holdout_last.unwrap_or(0),
    };
    let (train, _holdout, graph, t_full) = prepare_dataset(&args.data, &args.graph, &mut prep, false)?;

    let chains = gibbs_fit(&train, &graph, &model, &run)?;

    fs::create_dir_all(&args.out)?;
    let part = partition(&train);
    let cen_cells: Vec<(usize, usize)> = part.cen_idx.iter().map(|&i| train.cell_coords(i)).collect();
    let mut records = Vec::with_capacity(chains.len());
    for chain in &chains {
        let file = format!("chain_{}.csv", chain.meta.chain_id);
        let f = fs::File::create(args.out.join(&file))?;
        chain.write_csv(BufWriter::new(f))?;
        let imputed_file = if run.store_imputed && !cen_cells.is_empty() {
            let name = format!("imputed_{}.csv", chain.meta.chain_id);
            let f = fs::File::create(args.out.join(&name))?;
            chain.write_imputed_csv(&cen_cells, BufWriter::new(f))?;
            Some(name)
        } else {
            None
        };
        records.push(ChainFileRecord {
            id: chain.meta.chain_id,
            file,
            imputed_file,
            accept_rate: chain.accept_rate(),
            draws: chain.draws.len(),
        });
    }

    let params = ChainResult::param_names(train.n_covariates(), model.p_ar);
    write_summary(&args.out.join("summary.csv"), &chains, &params)?;

    let record = RunRecord {
        model_hash: model_hash(&model, &run),
        model,
        run,
        data_path: args.data.display().to_string(),
        graph_path: args.graph.display().to_string(),
        preprocessing: prep,
        n_sites: train.n_sites(),
        t_train: train.n_times(),
        t_full,
        p: train.n_covariates(),
        n_obs: part.n_obs(),
        n_cen: part.n_cen(),
        params,
        chains: records,
    };
    write_text(
        &args.out.join("run.json"),
        &pretty(&serde_json::to_value(&record).expect("serializable record")),
    )?;
    Ok(())
}

fn write_summary(path: &Path, chains: &[ChainResult], params: &[String]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "parameter,mean,q025,q975")?;
    for name in params {
        let pooled: Vec<f64> = chains
            .iter()
            .flat_map(|c| c.series(name).expect("known parameter"))
            .collect();
        let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
        writeln!(
            w,
            "{name},{mean},{},{}",
            quantile(&pooled, 0.025),
            quantile(&pooled, 0.975)
        )?;
    }
    Ok(())
}

fn read_run_record(run_dir: &Path) -> Result<RunRecord> {
    let text = fs::read_to_string(run_dir.join("run.json"))?;
    serde_json::from_str(&text).map_err(|e| Error::ConfigError(format!("run.json: {e}")))
}

fn load_chains(run_dir: &Path, record: &RunRecord, need_imputed: bool) -> Result<Vec<ChainResult>> {
    let mut chains = Vec::with_capacity(record.chains.len());
    for rec in &record.chains {
        let meta = ChainMeta {
            chain_id: rec.id,
            seed: record.run.seed,
            iters: record.run.iters,
            burnin: record.run.burnin,
            thin: record.run.thin,
            model_hash: record.model_hash.clone(),
        };
        let f = fs::File::open(run_dir.join(&rec.file))?;
        let mut chain = ChainResult::read_csv(BufReader::new(f), meta)?;
        if record.n_cen > 0 {
            match &rec.imputed_file {
                Some(name) => {
                    let f = fs::File::open(run_dir.join(name))?;
                    chain.attach_imputed_csv(BufReader::new(f))?;
                }
                None if need_imputed => {
                    return Err(Error::ConfigError(
                        "this run has censored cells but no stored imputations; refit with --save-imputed"
                            .into(),
                    ))
                }
                None => {}
            }
        }
        chains.push(chain);
    }
    Ok(chains)
}

pub fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let record = read_run_record(&args.run_dir)?;
    let mut prep = record.preprocessing.clone();
    let (train, _holdout, graph, _tf) = prepare_dataset(
        Path::new(&record.data_path),
        Path::new(&record.graph_path),
        &mut prep,
        true,
    )?;
    let chains = load_chains(&args.run_dir, &record, true)?;

    let sites: Vec<usize> = match &args.sites {
        None => (0..train.n_sites()).collect(),
        Some(spec) => spec
            .split(',')
            .map(|tok| -> Result<usize> {
                let v: usize = tok
                    .trim()
                    .parse()
                    .map_err(|_| Error::ConfigError(format!("invalid site `{tok}`")))?;
                if v == 0 || v > train.n_sites() {
                    return Err(Error::ConfigError(format!("site {v} out of range")));
                }
                Ok(v - 1)
            })
            .collect::<Result<_>>()?,
    };

    let (x_pred, horizon) = read_xpred(&args.xpred, &record, &prep, &sites, train.n_times())?;
    let task = PredictionTask {
        horizon,
        x_pred,
        sites: sites.clone(),
    };
    let structures = ModelStructures::new(
        graph,
        record.model.kind,
        record.model.raw_adjacency,
        train.n_times(),
    );
    let mut rng = rng_stream(args.seed, 0);
    let (pd, summary) = predictive_draws(&chains, &structures, &train, &task, &mut rng)?;

    let mut w = BufWriter::new(fs::File::create(&args.out)?);
    writeln!(w, "site,time_index,mean,median,q025,q975")?;
    for (c, &(site, step)) in summary.cells.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            site + 1,
            train.n_times() + step,
            summary.mean[c],
            summary.median[c],
            summary.q025[c],
            summary.q975[c]
        )?;
    }

    if let Some(path) = &args.draws_out {
        let mut w = BufWriter::new(fs::File::create(path)?);
        let mut header = String::from("draw");
        for &(site, step) in &pd.cells {
            header.push_str(&format!(",cell_{}_{}", site + 1, train.n_times() + step));
        }
        writeln!(w, "{header}")?;
        for d in 0..pd.draws.nrows() {
            write!(w, "{d}")?;
            for c in 0..pd.draws.ncols() {
                write!(w, ",{}", pd.draws[(d, c)])?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Parses the prediction covariates CSV and assembles the design block in
/// task order (site-major, step fastest), applying the recorded centering
/// and intercept.
fn read_xpred(
    path: &Path,
    record: &RunRecord,
    prep: &Preprocessing,
    sites: &[usize],
    t_train: usize,
) -> Result<(nalgebra::DMatrix<f64>, usize)> {
    let text = fs::read_to_string(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::ParseError {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    if headers.len() < 2 || &headers[0] != "station" || &headers[1] != "time_index" {
        return Err(Error::ParseError {
            line: 1,
            msg: "header must start with `station,time_index`".into(),
        });
    }
    let p_raw = headers.len() - 2;
    let p_model = record.p - usize::from(prep.intercept);
    if p_raw != p_model {
        return Err(Error::DimensionMismatch(format!(
            "{p_raw} prediction covariates for a model with {p_model}"
        )));
    }

    let mut rows: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    let mut max_step = 0usize;
    for (ix, rec) in rdr.records().enumerate() {
        let line = ix + 2;
        let rec = rec.map_err(|e| Error::ParseError {
            line,
            msg: e.to_string(),
        })?;
        let station: usize = rec[0].parse().map_err(|_| Error::UnknownStation(rec[0].to_string()))?;
        if station == 0 || station > record.n_sites {
            return Err(Error::UnknownStation(rec[0].to_string()));
        }
        let time: usize = rec[1].parse().map_err(|_| Error::ParseError {
            line,
            msg: format!("invalid time_index `{}`", &rec[1]),
        })?;
        if time <= t_train {
            return Err(Error::ParseError {
                line,
                msg: format!("time_index {time} is not past the panel end {t_train}"),
            });
        }
        let step = time - t_train;
        max_step = max_step.max(step);
        let mut covs = Vec::with_capacity(p_raw);
        for c in 0..p_raw {
            covs.push(rec[2 + c].parse().map_err(|_| Error::ParseError {
                line,
                msg: format!("invalid covariate `{}`", &rec[2 + c]),
            })?);
        }
        rows.push((station - 1, step, covs));
    }
    if max_step == 0 {
        return Err(Error::ParseError {
            line: 1,
            msg: "no prediction rows".into(),
        });
    }

    let horizon = max_step;
    let n_cells = sites.len() * horizon;
    let mut filled = vec![false; n_cells];
    let mut x = nalgebra::DMatrix::zeros(n_cells, record.p);
    for (site, step, covs) in rows {
        let Some(s_ix) = sites.iter().position(|&s| s == site) else {
            continue;
        };
        let r = s_ix * horizon + (step - 1);
        if filled[r] {
            return Err(Error::DuplicateCell {
                station: (site + 1).to_string(),
                time: t_train + step,
            });
        }
        filled[r] = true;
        let mut col = 0usize;
        if prep.intercept {
            x[(r, 0)] = 1.0;
            col = 1;
        }
        for (c, v) in covs.iter().enumerate() {
            let offset = if prep.center_covariates {
                prep.center_offsets.get(c).copied().unwrap_or(0.0)
            } else {
                0.0
            };
            x[(r, col + c)] = v - offset;
        }
    }
    if let Some(missing) = filled.iter().position(|f| !f) {
        let site = sites[missing / horizon];
        let step = missing % horizon + 1;
        return Err(Error::ParseError {
            line: 1,
            msg: format!(
                "prediction covariates missing for station {} at time {}",
                site + 1,
                t_train + step
            ),
        });
    }
    Ok((x, horizon))
}

pub fn cmd_diagnose(args: &DiagnoseArgs) -> Result<()> {
    let record = read_run_record(&args.run_dir)?;
    fs::create_dir_all(&args.out)?;
    let need_imputed = record.n_cen > 0;
    let chains = load_chains(&args.run_dir, &record, false)?;
    let have_imputed = !need_imputed
        || record.chains.iter().all(|c| c.imputed_file.is_some());

    let convergence = if chains.len() >= 2 {
        Some(convergence_report(&chains, &record.params, args.acf_lags)?)
    } else {
        None
    };

    // Chain ACF table (plot-ready).
    {
        let mut w = BufWriter::new(fs::File::create(args.out.join("chain_acf.csv"))?);
        writeln!(w, "parameter,chain,lag,acf")?;
        for name in &record.params {
            for chain in &chains {
                let series = chain.series(name).ok_or_else(|| {
                    Error::ConfigError(format!("chain file lacks parameter `{name}`"))
                })?;
                let lags = args.acf_lags.min(series.len().saturating_sub(1));
                for (k, v) in nstclg::diagnostics::acf(&series, lags).iter().enumerate() {
                    writeln!(w, "{name},{},{},{v}", chain.meta.chain_id, k + 1)?;
                }
            }
        }
    }

    // Criteria and exploratory statistics need the dataset back.
    let mut prep = record.preprocessing.clone();
    let (train, holdout, graph, _tf) = prepare_dataset(
        Path::new(&record.data_path),
        Path::new(&record.graph_path),
        &mut prep,
        true,
    )?;
    let structures = ModelStructures::new(
        graph.clone(),
        record.model.kind,
        record.model.raw_adjacency,
        train.n_times(),
    );

    let criteria = if have_imputed {
        let chains_full = load_chains(&args.run_dir, &record, true)?;
        let mut report = deviance_criteria(&chains_full, &train, &structures)?;
        if let Some(hold) = &holdout {
            report.elpd = Some(elpd_holdout(&chains_full, &structures, &train, hold)?);
        }
        Some(report)
    } else {
        None
    };

    // Response ACF/PACF per site with per-site mean imputation of gaps.
    {
        let mut wa = BufWriter::new(fs::File::create(args.out.join("response_acf.csv"))?);
        let mut wp = BufWriter::new(fs::File::create(args.out.join("response_pacf.csv"))?);
        writeln!(wa, "site,lag,acf")?;
        writeln!(wp, "site,lag,pacf")?;
        let lags = args.acf_lags.min(train.n_times().saturating_sub(1));
        for site in 0..train.n_sites() {
            let series = site_series_mean_imputed(&train, site);
            if lags == 0 {
                continue;
            }
            let (a, p) = acf_pacf(&series, lags);
            for k in 0..lags {
                writeln!(wa, "{},{},{}", site + 1, k + 1, a[k])?;
                writeln!(wp, "{},{},{}", site + 1, k + 1, p[k])?;
            }
        }
    }

    // Moran's I per time point over the adjacency.
    {
        let mut w = BufWriter::new(fs::File::create(args.out.join("moran.csv"))?);
        writeln!(w, "time_index,morans_i,p_value")?;
        let a = graph.adjacency_matrix();
        let mut rng = rng_stream(args.seed, 0);
        let site_means: Vec<f64> = (0..train.n_sites())
            .map(|s| {
                let series = site_series_mean_imputed(&train, s);
                series.iter().sum::<f64>() / series.len() as f64
            })
            .collect();
        if train.n_sites() >= 3 {
            for time in 0..train.n_times() {
                let values: Vec<f64> = (0..train.n_sites())
                    .map(|site| match train.status(train.cell_index(site, time)) {
                        CensorStatus::Observed(v) => v,
                        _ => site_means[site],
                    })
                    .collect();
                match morans_i(&values, &a, args.moran_permutations, &mut rng) {
                    Ok((stat, p)) => writeln!(w, "{},{},{}", time + 1, stat, p)?,
                    Err(Error::ZeroVariance) => continue,
                    Err(e) => return Err(e),
                }
            }
        }
    }

    let report = serde_json::json!({
        "run_dir": args.run_dir.display().to_string(),
        "model_hash": record.model_hash,
        "accept_rates": chains.iter().map(|c| c.accept_rate()).collect::<Vec<_>>(),
        "convergence": convergence,
        "criteria": criteria,
        "criteria_note": if have_imputed { serde_json::Value::Null } else {
            serde_json::Value::String(
                "criteria skipped: censored cells present but imputed draws were not stored".into(),
            )
        },
    });
    write_text(&args.out.join("report.json"), &pretty(&report))?;
    Ok(())
}

fn site_series_mean_imputed(ds: &CensoredDataset, site: usize) -> Vec<f64> {
    let mut observed = Vec::new();
    for time in 0..ds.n_times() {
        if let CensorStatus::Observed(v) = ds.status(ds.cell_index(site, time)) {
            observed.push(v);
        }
    }
    let m = if observed.is_empty() {
        0.0
    } else {
        observed.iter().sum::<f64>() / observed.len() as f64
    };
    (0..ds.n_times())
        .map(|time| match ds.status(ds.cell_index(site, time)) {
            CensorStatus::Observed(v) => v,
            _ => m,
        })
        .collect()
}

pub fn cmd_study(args: &StudyArgs) -> Result<()> {
    let design = resolve_design(
        args.preset.as_deref(),
        args.design.as_deref(),
        args.seed,
        args.replicates,
    )?;
    let metrics = run_study(&design)?;
    fs::create_dir_all(&args.out)?;
    write_text(&args.out.join("coverage.csv"), &coverage_table_csv(&metrics))?;
    write_text(&args.out.join("lengths.csv"), &length_table_csv(&metrics))?;
    if !design.horizons.is_empty() {
        write_text(&args.out.join("predictive.csv"), &predictive_table_csv(&metrics))?;
        let mut elpd = String::from("replicate");
        for m in Method::ALL {
            elpd.push(',');
            elpd.push_str(m.label());
        }
        elpd.push('\n');
        for r in 0..metrics.elpd[0].len() {
            elpd.push_str(&r.to_string());
            for m in 0..Method::ALL.len() {
                elpd.push_str(&format!(",{}", metrics.elpd[m][r]));
            }
            elpd.push('\n');
        }
        write_text(&args.out.join("elpd.csv"), &elpd)?;
    }
    let meta = serde_json::json!({
        "design": design,
        "n": metrics.n,
        "replicates_used": metrics.replicates_used,
        "failures": metrics.failures,
    });
    write_text(&args.out.join("study.json"), &pretty(&meta))?;
    Ok(())
}

fn pretty(value: &serde_json::Value) -> String {
    serde_json::to_string_pretty(value).expect("serializable value")
}

fn write_text(path: &PathBuf, text: &str) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        f.write_all(b"\n")?;
    }
    Ok(())
}

pub use study::presets as study_presets;
