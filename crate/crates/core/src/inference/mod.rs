//! Collapsed posterior evaluation and the Gibbs/Metropolis sampler over
//! `(beta, sigma2, tau2, rho, psi, gamma, y_cen)`.

pub mod collapsed;
pub mod sampler;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::correlation::{
    ar_innovation, spatial_innovation, InnovationPair, SeparableOperator, SpatialKind,
    SpatialSpec, TemporalSpec,
};
use crate::error::{Error, Result};
use crate::graph::{Ordering, SpatialGraph};

pub use collapsed::{collapsed_log_posterior, CollapsedEval};
pub use sampler::{conditional_blocks, gibbs_fit, metropolis_update, MetropolisOutcome, Theta};

fn beta_one() -> (f64, f64) {
    (1.0, 1.0)
}

fn beta_two() -> (f64, f64) {
    (2.0, 2.0)
}

/// Beta hyperparameters for the independent priors on rho, psi, and each
/// AR coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorSpec {
    pub rho: (f64, f64),
    pub psi: (f64, f64),
    pub gamma: (f64, f64),
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            rho: beta_one(),
            psi: beta_one(),
            gamma: beta_one(),
        }
    }
}

/// Beta hyperparameters for the independence proposals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProposalSpec {
    pub rho: (f64, f64),
    pub psi: (f64, f64),
    pub gamma: (f64, f64),
}

impl Default for ProposalSpec {
    fn default() -> Self {
        Self {
            rho: beta_two(),
            psi: beta_two(),
            gamma: beta_two(),
        }
    }
}

/// Parameters pinned to a fixed value (never proposed).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixedParams {
    pub rho: Option<f64>,
    pub psi: Option<f64>,
    pub gamma: Option<Vec<f64>>,
}

/// Model structure and sampling configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: SpatialKind,
    pub p_ar: usize,
    pub priors: PriorSpec,
    pub proposals: ProposalSpec,
    pub fixed: FixedParams,
    /// SAR only: raw-adjacency parameterization with the eigenvalue interval.
    pub raw_adjacency: bool,
    /// Rescales the Beta draw for rho onto this interval (SAR escape hatch).
    pub rho_interval: Option<(f64, f64)>,
    /// Rescales the Beta draws for the AR coefficients onto this interval.
    pub gamma_interval: Option<(f64, f64)>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: SpatialKind::Dagar,
            p_ar: 1,
            priors: PriorSpec::default(),
            proposals: ProposalSpec::default(),
            fixed: FixedParams::default(),
            raw_adjacency: false,
            rho_interval: None,
            gamma_interval: None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, (a, b): (f64, f64)| -> Result<()> {
            if !(a > 0.0) || !(b > 0.0) {
                return Err(Error::ConfigError(format!(
                    "{name} Beta hyperparameters ({a}, {b}) must be positive"
                )));
            }
            Ok(())
        };
        check("rho prior", self.priors.rho)?;
        check("psi prior", self.priors.psi)?;
        check("gamma prior", self.priors.gamma)?;
        check("rho proposal", self.proposals.rho)?;
        check("psi proposal", self.proposals.psi)?;
        check("gamma proposal", self.proposals.gamma)?;
        for interval in [self.rho_interval, self.gamma_interval].into_iter().flatten() {
            if !(interval.0 < interval.1) {
                return Err(Error::ConfigError(format!(
                    "rescale interval ({}, {}) is empty",
                    interval.0, interval.1
                )));
            }
        }
        if let Some(gamma) = &self.fixed.gamma {
            if gamma.len() != self.p_ar {
                return Err(Error::ConfigError(format!(
                    "fixed gamma has {} components for AR order {}",
                    gamma.len(),
                    self.p_ar
                )));
            }
            if !crate::correlation::is_stationary(gamma) {
                return Err(Error::ConfigError("fixed gamma is non-stationary".into()));
            }
        }
        if let Some(psi) = self.fixed.psi {
            if !(0.0..1.0).contains(&psi) {
                return Err(Error::ConfigError(format!("fixed psi {psi} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

/// Run-shape configuration. The default mirrors the flagship analyses: three
/// chains of 40,000 iterations, burn-in 10,000, thinning 50.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub chains: usize,
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub tmvn_sweeps: usize,
    pub store_imputed: bool,
    /// When positive, a pilot chain of this length runs first and the Beta
    /// proposals are moment-matched to its draws (one static retune, then
    /// the ordinary independence sampler).
    pub pilot_iters: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            chains: 3,
            iters: 40_000,
            burnin: 10_000,
            thin: 50,
            seed: 1,
            tmvn_sweeps: 5,
            store_imputed: false,
            pilot_iters: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::ConfigError("need at least one chain".into()));
        }
        if self.iters == 0 || self.burnin >= self.iters {
            return Err(Error::ConfigError(format!(
                "iters {} must exceed burn-in {}",
                self.iters, self.burnin
            )));
        }
        if self.thin == 0 {
            return Err(Error::ConfigError("thinning must be at least 1".into()));
        }
        if self.tmvn_sweeps == 0 {
            return Err(Error::ConfigError("need at least one interior sweep".into()));
        }
        Ok(())
    }

    pub fn n_draws(&self) -> usize {
        (self.iters - self.burnin).div_ceil(self.thin)
    }
}

/// One stored MCMC draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterState {
    pub iter: usize,
    pub beta: Vec<f64>,
    pub sigma2: f64,
    pub tau2: f64,
    pub psi: f64,
    pub rho: f64,
    pub gamma: Vec<f64>,
    pub log_post: f64,
    pub accepted: bool,
    pub y_cen: Vec<f64>,
}

/// Stored chain draws with acceptance statistics and seed metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    pub draws: Vec<ParameterState>,
    pub accepted: usize,
    pub proposed: usize,
    pub meta: ChainMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub chain_id: usize,
    pub seed: u64,
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub model_hash: String,
}

impl ChainResult {
    pub fn accept_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    /// Values of a named scalar parameter across the stored draws.
    pub fn series(&self, param: &str) -> Option<Vec<f64>> {
        let get: Box<dyn Fn(&ParameterState) -> Option<f64>> = if param == "sigma2" {
            Box::new(|d| Some(d.sigma2))
        } else if param == "tau2" {
            Box::new(|d| Some(d.tau2))
        } else if param == "psi" {
            Box::new(|d| Some(d.psi))
        } else if param == "rho" {
            Box::new(|d| Some(d.rho))
        } else if param == "logpost" {
            Box::new(|d| Some(d.log_post))
        } else if let Some(ix) = param.strip_prefix("beta_") {
            let ix: usize = ix.parse().ok()?;
            Box::new(move |d| d.beta.get(ix).copied())
        } else if let Some(ix) = param.strip_prefix("gamma_") {
            let ix: usize = ix.parse().ok()?;
            if ix == 0 {
                return None;
            }
            Box::new(move |d| d.gamma.get(ix - 1).copied())
        } else {
            return None;
        };
        self.draws.iter().map(|d| get(d)).collect()
    }

    /// Column names matching the chain CSV layout.
    pub fn param_names(p: usize, p_ar: usize) -> Vec<String> {
        let mut names: Vec<String> = (0..p).map(|i| format!("beta_{i}")).collect();
        names.extend(["sigma2", "tau2", "psi", "rho"].map(String::from));
        names.extend((1..=p_ar).map(|i| format!("gamma_{i}")));
        names
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let p = self.draws.first().map_or(0, |d| d.beta.len());
        let p_ar = self.draws.first().map_or(0, |d| d.gamma.len());
        let mut header = String::from("iter");
        for name in Self::param_names(p, p_ar) {
            header.push(',');
            header.push_str(&name);
        }
        header.push_str(",logpost,accepted");
        writeln!(w, "{header}")?;
        for d in &self.draws {
            write!(w, "{}", d.iter)?;
            for b in &d.beta {
                write!(w, ",{b}")?;
            }
            write!(w, ",{},{},{},{}", d.sigma2, d.tau2, d.psi, d.rho)?;
            for g in &d.gamma {
                write!(w, ",{g}")?;
            }
            writeln!(w, ",{},{}", d.log_post, u8::from(d.accepted))?;
        }
        Ok(())
    }

    /// Wide CSV of the imputed censored-cell draws, one row per stored draw.
    pub fn write_imputed_csv<W: std::io::Write>(
        &self,
        cells: &[(usize, usize)],
        mut w: W,
    ) -> Result<()> {
        let mut header = String::from("iter");
        for &(site, time) in cells {
            header.push_str(&format!(",cell_{}_{}", site + 1, time + 1));
        }
        writeln!(w, "{header}")?;
        for d in &self.draws {
            if d.y_cen.len() != cells.len() {
                return Err(Error::DimensionMismatch(format!(
                    "draw has {} imputed values for {} cells",
                    d.y_cen.len(),
                    cells.len()
                )));
            }
            write!(w, "{}", d.iter)?;
            for v in &d.y_cen {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Re-attaches imputed draws persisted by `write_imputed_csv`, matching
    /// rows to stored draws in order.
    pub fn attach_imputed_csv<R: std::io::BufRead>(&mut self, reader: R) -> Result<()> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::ParseError {
                line: 1,
                msg: "empty imputed file".into(),
            })?
            .map_err(Error::Io)?;
        let n_cells = header.split(',').count().saturating_sub(1);
        let mut row = 0usize;
        for line in lines {
            let line = line.map_err(Error::Io)?;
            if line.trim().is_empty() {
                continue;
            }
            let draw = self.draws.get_mut(row).ok_or_else(|| Error::ParseError {
                line: row + 2,
                msg: "more imputed rows than stored draws".into(),
            })?;
            let mut vals = Vec::with_capacity(n_cells);
            for tok in line.split(',').skip(1) {
                vals.push(tok.parse().map_err(|_| Error::ParseError {
                    line: row + 2,
                    msg: format!("invalid number `{tok}`"),
                })?);
            }
            if vals.len() != n_cells {
                return Err(Error::ParseError {
                    line: row + 2,
                    msg: format!("expected {n_cells} values, found {}", vals.len()),
                });
            }
            draw.y_cen = vals;
            row += 1;
        }
        if row != self.draws.len() {
            return Err(Error::ParseError {
                line: row + 2,
                msg: format!("{row} imputed rows for {} draws", self.draws.len()),
            });
        }
        Ok(())
    }

    /// Reads a chain CSV back; metadata comes from the caller (sidecar).
    pub fn read_csv<R: std::io::BufRead>(reader: R, meta: ChainMeta) -> Result<ChainResult> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::ParseError {
                line: 1,
                msg: "empty chain file".into(),
            })?
            .map_err(Error::Io)?;
        let cols: Vec<String> = header.split(',').map(str::to_string).collect();
        let p = cols.iter().filter(|c| c.starts_with("beta_")).count();
        let p_ar = cols.iter().filter(|c| c.starts_with("gamma_")).count();
        let expect = 1 + p + 4 + p_ar + 2;
        if cols.len() != expect {
            return Err(Error::ParseError {
                line: 1,
                msg: format!("expected {expect} columns, found {}", cols.len()),
            });
        }
        let mut draws = Vec::new();
        let mut accepted_total = 0usize;
        for (ln, line) in lines.enumerate() {
            let line = line.map_err(Error::Io)?;
            if line.trim().is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split(',').collect();
            if toks.len() != expect {
                return Err(Error::ParseError {
                    line: ln + 2,
                    msg: format!("expected {expect} fields, found {}", toks.len()),
                });
            }
            let mut k = 0usize;
            let mut next = || {
                let t = toks[k];
                k += 1;
                t
            };
            let parse_f = |t: &str, ln: usize| -> Result<f64> {
                t.parse().map_err(|_| Error::ParseError {
                    line: ln + 2,
                    msg: format!("invalid number `{t}`"),
                })
            };
            let iter: usize = next().parse().map_err(|_| Error::ParseError {
                line: ln + 2,
                msg: "invalid iteration index".into(),
            })?;
            let mut beta = Vec::with_capacity(p);
            for _ in 0..p {
                beta.push(parse_f(next(), ln)?);
            }
            let sigma2 = parse_f(next(), ln)?;
            let tau2 = parse_f(next(), ln)?;
            let psi = parse_f(next(), ln)?;
            let rho = parse_f(next(), ln)?;
            let mut gamma = Vec::with_capacity(p_ar);
            for _ in 0..p_ar {
                gamma.push(parse_f(next(), ln)?);
            }
            let log_post = parse_f(next(), ln)?;
            let accepted = next() == "1";
            if accepted {
                accepted_total += 1;
            }
            draws.push(ParameterState {
                iter,
                beta,
                sigma2,
                tau2,
                psi,
                rho,
                gamma,
                log_post,
                accepted,
                y_cen: Vec::new(),
            });
        }
        let proposed = draws.len();
        Ok(ChainResult {
            draws,
            accepted: accepted_total,
            proposed,
            meta,
        })
    }
}

/// Immutable model structure shared by evaluation, sampling, and prediction.
#[derive(Debug, Clone)]
pub struct ModelStructures {
    pub graph: SpatialGraph,
    pub ordering: Ordering,
    pub kind: SpatialKind,
    pub raw_adjacency: bool,
    pub t: usize,
}

impl ModelStructures {
    pub fn new(graph: SpatialGraph, kind: SpatialKind, raw_adjacency: bool, t: usize) -> Self {
        let ordering = Ordering::natural(graph.n());
        Self {
            graph,
            ordering,
            kind,
            raw_adjacency,
            t,
        }
    }

    pub fn spatial_pair(&self, rho: f64) -> Result<InnovationPair> {
        let spec = SpatialSpec {
            kind: self.kind,
            rho,
            raw_adjacency: self.raw_adjacency,
        };
        spatial_innovation(&self.graph, &self.ordering, &spec)
    }

    pub fn temporal_pair(&self, gamma: &[f64], t: usize) -> Result<InnovationPair> {
        let spec = TemporalSpec::new(gamma.to_vec(), t)?;
        ar_innovation(&spec)
    }

    /// Spectral operator for the unit-scale precision at `(rho, gamma)`.
    pub fn operator(&self, rho: f64, gamma: &[f64]) -> Result<SeparableOperator> {
        self.operator_with_t(rho, gamma, self.t)
    }

    pub fn operator_with_t(&self, rho: f64, gamma: &[f64], t: usize) -> Result<SeparableOperator> {
        let sp = self.spatial_pair(rho)?;
        let tp = self.temporal_pair(gamma, t)?;
        SeparableOperator::new(&sp.precision(), &tp.precision())
    }

    /// Dense `sigma2 (Gamma (x) Phi + psi I)`; desk-scale fallback used by
    /// tests and small-N utilities.
    pub fn dense_covariance(&self, rho: f64, gamma: &[f64], sigma2: f64, psi: f64) -> Result<DMatrix<f64>> {
        let sp = self.spatial_pair(rho)?;
        let spec = TemporalSpec::new(gamma.to_vec(), self.t)?;
        let phi = crate::correlation::ar_correlation(&spec)?;
        let gamma_s = sp.covariance()?;
        let mut c = gamma_s.kronecker(&phi);
        for i in 0..c.nrows() {
            c[(i, i)] += psi;
        }
        Ok(c * sigma2)
    }
}

/// Hex SHA-256 of the canonical JSON encoding of the model and run configs.
pub fn model_hash(model: &ModelConfig, run: &RunConfig) -> String {
    let payload = serde_json::json!({ "model": model, "run": run });
    let mut hasher = Sha256::new();
    hasher.update(payload.to_string().as_bytes());
    let digest = hasher.finalize();
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_config_validation() {
        let mut run = RunConfig::default();
        assert!(run.validate().is_ok());
        run.burnin = run.iters;
        assert!(run.validate().is_err());
        run = RunConfig {
            thin: 0,
            ..Default::default()
        };
        assert!(run.validate().is_err());
    }

    #[test]
    fn draw_count_matches_run_shape() {
        let run = RunConfig {
            iters: 100,
            burnin: 10,
            thin: 5,
            ..Default::default()
        };
        assert_eq!(run.n_draws(), 18);
    }

    #[test]
    fn model_validation_rejects_bad_hyperparameters() {
        let mut model = ModelConfig::default();
        assert!(model.validate().is_ok());
        model.priors.rho = (0.0, 1.0);
        assert!(model.validate().is_err());
        model = ModelConfig {
            fixed: FixedParams {
                gamma: Some(vec![1.2]),
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(model.validate().is_err());
    }

    #[test]
    fn chain_csv_round_trip() {
        let meta = ChainMeta {
            chain_id: 0,
            seed: 7,
            iters: 4,
            burnin: 0,
            thin: 1,
            model_hash: "abc".into(),
        };
        let chain = ChainResult {
            draws: vec![
                ParameterState {
                    iter: 0,
                    beta: vec![0.25, -1.5],
                    sigma2: 2.0,
                    tau2: 0.5,
                    psi: 0.25,
                    rho: 0.7,
                    gamma: vec![0.4],
                    log_post: -12.5,
                    accepted: true,
                    y_cen: vec![],
                },
                ParameterState {
                    iter: 1,
                    beta: vec![0.5, -1.25],
                    sigma2: 1.8,
                    tau2: 0.9,
                    psi: 0.5,
                    rho: 0.72,
                    gamma: vec![0.41],
                    log_post: -11.0,
                    accepted: false,
                    y_cen: vec![],
                },
            ],
            accepted: 1,
            proposed: 2,
            meta: meta.clone(),
        };
        let mut buf = Vec::new();
        chain.write_csv(&mut buf).unwrap();
        let back = ChainResult::read_csv(buf.as_slice(), meta).unwrap();
        assert_eq!(back.draws.len(), 2);
        assert_eq!(back.draws[0].beta, chain.draws[0].beta);
        assert_eq!(back.draws[1].rho, chain.draws[1].rho);
        assert_eq!(back.accepted, 1);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let model = ModelConfig::default();
        let run = RunConfig::default();
        let h1 = model_hash(&model, &run);
        let h2 = model_hash(&model, &run);
        assert_eq!(h1, h2);
        let run2 = RunConfig {
            seed: 99,
            ..Default::default()
        };
        assert_ne!(h1, model_hash(&model, &run2));
    }
}
