//! Censored/missing response panels, covariates, the observed/censored
//! partition, and the long-format CSV ingestion.
//!
//! Cells are laid out site-major with time fastest: `(site, time) -> site * T
//! + time`, matching the Kronecker convention of the correlation structures.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::SpatialGraph;
use crate::stochastics::TruncRegion;

/// Interval knowledge about one response cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CensorStatus {
    /// Fully observed value.
    Observed(f64),
    /// Known only to lie at or below the bound.
    Left { upper: f64 },
    /// Known only to lie at or above the bound.
    Right { lower: f64 },
    /// Known to lie in a finite interval.
    Interval { lower: f64, upper: f64 },
    /// No information.
    Missing,
}

impl CensorStatus {
    pub fn is_observed(&self) -> bool {
        matches!(self, CensorStatus::Observed(_))
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, CensorStatus::Missing)
    }

    /// Lower/upper interval bounds, extended reals.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            CensorStatus::Observed(v) => (v, v),
            CensorStatus::Left { upper } => (f64::NEG_INFINITY, upper),
            CensorStatus::Right { lower } => (lower, f64::INFINITY),
            CensorStatus::Interval { lower, upper } => (lower, upper),
            CensorStatus::Missing => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            CensorStatus::Observed(v) if !v.is_finite() => {
                Err(Error::DomainError(format!("observed value {v} not finite")))
            }
            CensorStatus::Left { upper } if !upper.is_finite() => {
                Err(Error::DomainError(format!("left bound {upper} not finite")))
            }
            CensorStatus::Right { lower } if !lower.is_finite() => {
                Err(Error::DomainError(format!("right bound {lower} not finite")))
            }
            CensorStatus::Interval { lower, upper } if !(lower < upper) || !lower.is_finite() || !upper.is_finite() => {
                Err(Error::DomainError(format!("interval bounds [{lower}, {upper}]")))
            }
            _ => Ok(()),
        }
    }
}

/// Balanced panel of responses with per-cell censoring state and covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoredDataset {
    n: usize,
    t: usize,
    status: Vec<CensorStatus>,
    x: DMatrix<f64>,
    site_labels: Vec<String>,
    time_labels: Vec<String>,
    lod: Option<f64>,
}

impl CensoredDataset {
    pub fn new(n: usize, t: usize, status: Vec<CensorStatus>, x: DMatrix<f64>) -> Result<Self> {
        let total = n * t;
        if status.len() != total {
            return Err(Error::DimensionMismatch(format!(
                "{} statuses for an {n} x {t} panel",
                status.len()
            )));
        }
        if x.nrows() != total {
            return Err(Error::DimensionMismatch(format!(
                "design matrix has {} rows for N = {total}",
                x.nrows()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::DomainError("design matrix has non-finite entries".into()));
        }
        for s in &status {
            s.validate()?;
        }
        Ok(Self {
            n,
            t,
            status,
            x,
            site_labels: (1..=n).map(|i| i.to_string()).collect(),
            time_labels: (1..=t).map(|i| i.to_string()).collect(),
            lod: None,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn n_times(&self) -> usize {
        self.t
    }

    pub fn len(&self) -> usize {
        self.n * self.t
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_covariates(&self) -> usize {
        self.x.ncols()
    }

    #[inline]
    pub fn cell_index(&self, site: usize, time: usize) -> usize {
        site * self.t + time
    }

    #[inline]
    pub fn cell_coords(&self, idx: usize) -> (usize, usize) {
        (idx / self.t, idx % self.t)
    }

    pub fn status(&self, idx: usize) -> CensorStatus {
        self.status[idx]
    }

    pub fn statuses(&self) -> &[CensorStatus] {
        &self.status
    }

    pub fn set_status(&mut self, idx: usize, status: CensorStatus) -> Result<()> {
        status.validate()?;
        self.status[idx] = status;
        Ok(())
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn lod(&self) -> Option<f64> {
        self.lod
    }

    pub fn set_lod(&mut self, lod: f64) {
        self.lod = Some(lod);
    }

    pub fn site_labels(&self) -> &[String] {
        &self.site_labels
    }

    pub fn set_site_labels(&mut self, labels: Vec<String>) -> Result<()> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch("site label count".into()));
        }
        self.site_labels = labels;
        Ok(())
    }

    pub fn n_observed(&self) -> usize {
        self.status.iter().filter(|s| s.is_observed()).count()
    }

    pub fn n_censored(&self) -> usize {
        self.len() - self.n_observed()
    }

    pub fn n_missing(&self) -> usize {
        self.status.iter().filter(|s| s.is_missing()).count()
    }

    /// Observed values in scan order alongside their cell indices.
    pub fn observed_values(&self) -> Vec<(usize, f64)> {
        self.status
            .iter()
            .enumerate()
            .filter_map(|(i, s)| match s {
                CensorStatus::Observed(v) => Some((i, *v)),
                _ => None,
            })
            .collect()
    }

    /// Prepends a column of ones.
    pub fn add_intercept(&mut self) {
        let p = self.x.ncols();
        let mut x = DMatrix::zeros(self.len(), p + 1);
        for r in 0..self.len() {
            x[(r, 0)] = 1.0;
            for c in 0..p {
                x[(r, c + 1)] = self.x[(r, c)];
            }
        }
        self.x = x;
    }

    /// Centers every non-constant covariate column at zero.
    pub fn center_covariates(&mut self) {
        self.center_covariates_recording();
    }

    /// Centers non-constant columns and returns the per-column offsets
    /// (zero for untouched columns), so later covariates can be shifted
    /// consistently.
    pub fn center_covariates_recording(&mut self) -> Vec<f64> {
        let mut offsets = vec![0.0; self.x.ncols()];
        for c in 0..self.x.ncols() {
            let col = self.x.column(c);
            let (min, max) = col
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            if max > min {
                let mean = col.sum() / col.len() as f64;
                offsets[c] = mean;
                for r in 0..self.x.nrows() {
                    self.x[(r, c)] -= mean;
                }
            }
        }
        offsets
    }

    /// Applies previously recorded centering offsets.
    pub fn center_with_offsets(&mut self, offsets: &[f64]) -> Result<()> {
        if offsets.len() != self.x.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} offsets for {} covariates",
                offsets.len(),
                self.x.ncols()
            )));
        }
        for c in 0..self.x.ncols() {
            for r in 0..self.x.nrows() {
                self.x[(r, c)] -= offsets[c];
            }
        }
        Ok(())
    }

    /// Log-transforms observed values and censoring bounds; every touched
    /// quantity must be strictly positive.
    pub fn log_response(&mut self) -> Result<()> {
        let ln = |v: f64, what: &str| -> Result<f64> {
            if v <= 0.0 {
                return Err(Error::DomainError(format!(
                    "log transform needs positive {what}, got {v}"
                )));
            }
            Ok(v.ln())
        };
        for s in &mut self.status {
            *s = match *s {
                CensorStatus::Observed(v) => CensorStatus::Observed(ln(v, "response")?),
                CensorStatus::Left { upper } => CensorStatus::Left {
                    upper: ln(upper, "bound")?,
                },
                CensorStatus::Right { lower } => CensorStatus::Right {
                    lower: ln(lower, "bound")?,
                },
                CensorStatus::Interval { lower, upper } => CensorStatus::Interval {
                    lower: ln(lower, "bound")?,
                    upper: ln(upper, "bound")?,
                },
                CensorStatus::Missing => CensorStatus::Missing,
            };
        }
        if let Some(lod) = self.lod {
            self.lod = Some(ln(lod, "detection limit")?);
        }
        Ok(())
    }

    /// Splits off the final `k` time points per site: the training panel
    /// keeps `T - k` times, the holdout carries the reserved cells.
    pub fn split_holdout(&self, k: usize) -> Result<(CensoredDataset, HoldoutSet)> {
        if k == 0 || k >= self.t {
            return Err(Error::ConfigError(format!(
                "holdout of {k} time points from T = {}",
                self.t
            )));
        }
        let t_train = self.t - k;
        let mut status = Vec::with_capacity(self.n * t_train);
        let mut x_train = DMatrix::zeros(self.n * t_train, self.x.ncols());
        let mut hold_status = Vec::with_capacity(self.n * k);
        let mut x_hold = DMatrix::zeros(self.n * k, self.x.ncols());
        for site in 0..self.n {
            for time in 0..self.t {
                let src = self.cell_index(site, time);
                if time < t_train {
                    let dst = site * t_train + time;
                    status.push(self.status[src]);
                    for c in 0..self.x.ncols() {
                        x_train[(dst, c)] = self.x[(src, c)];
                    }
                } else {
                    let dst = site * k + (time - t_train);
                    hold_status.push(self.status[src]);
                    for c in 0..self.x.ncols() {
                        x_hold[(dst, c)] = self.x[(src, c)];
                    }
                }
            }
        }
        let mut train = CensoredDataset::new(self.n, t_train, status, x_train)?;
        train.site_labels = self.site_labels.clone();
        train.time_labels = self.time_labels[..t_train].to_vec();
        train.lod = self.lod;
        let holdout = HoldoutSet {
            n: self.n,
            horizon: k,
            status: hold_status,
            x: x_hold,
        };
        Ok((train, holdout))
    }
}

/// Reserved future cells: statuses and covariates, site-major with the
/// holdout horizon fastest.
#[derive(Debug, Clone)]
pub struct HoldoutSet {
    pub n: usize,
    pub horizon: usize,
    pub status: Vec<CensorStatus>,
    pub x: DMatrix<f64>,
}

impl HoldoutSet {
    pub fn len(&self) -> usize {
        self.n * self.horizon
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Index split of the cells into observed and censored/missing positions, in
/// scan order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub obs_idx: Vec<usize>,
    pub cen_idx: Vec<usize>,
}

impl Partition {
    pub fn n_obs(&self) -> usize {
        self.obs_idx.len()
    }

    pub fn n_cen(&self) -> usize {
        self.cen_idx.len()
    }
}

/// Observed indices first (scan order), censored/missing after.
pub fn partition(ds: &CensoredDataset) -> Partition {
    let mut obs_idx = Vec::new();
    let mut cen_idx = Vec::new();
    for (i, s) in ds.statuses().iter().enumerate() {
        if s.is_observed() {
            obs_idx.push(i);
        } else {
            cen_idx.push(i);
        }
    }
    Partition { obs_idx, cen_idx }
}

/// Truncation region for the censored cells, in partition order.
pub fn censored_region(ds: &CensoredDataset, part: &Partition) -> TruncRegion {
    let mut lower = Vec::with_capacity(part.n_cen());
    let mut upper = Vec::with_capacity(part.n_cen());
    for &i in &part.cen_idx {
        let (lo, hi) = ds.status(i).bounds();
        lower.push(lo);
        upper.push(hi);
    }
    TruncRegion { lower, upper }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CensorSide {
    Left,
    Right,
}

/// Marks observed entries at or beyond the detection limit as censored and
/// records the limit on the dataset. Missing cells are never touched.
pub fn apply_detection_limit(ds: &CensoredDataset, lod: f64, side: CensorSide) -> Result<CensoredDataset> {
    if lod.is_nan() {
        return Err(Error::DomainError("detection limit is NaN".into()));
    }
    let mut out = ds.clone();
    for i in 0..out.len() {
        if let CensorStatus::Observed(v) = out.status(i) {
            match side {
                CensorSide::Left if v <= lod => {
                    out.set_status(i, CensorStatus::Left { upper: lod.min(f64::MAX) })?;
                }
                CensorSide::Right if v >= lod => {
                    out.set_status(i, CensorStatus::Right { lower: lod.max(f64::MIN) })?;
                }
                _ => {}
            }
        }
    }
    if lod.is_finite() {
        out.set_lod(lod);
    }
    Ok(out)
}

const FIXED_COLUMNS: [&str; 6] = ["station", "time_index", "y", "status", "lower", "upper"];

/// Loads the long-format data CSV against a graph edge list. Columns beyond
/// the fixed six are covariates, in file order. Rows absent from the file
/// become Missing cells with zero covariates.
pub fn load_dataset(data_path: &Path, graph_path: &Path) -> Result<(CensoredDataset, SpatialGraph)> {
    let graph = SpatialGraph::read_edge_list_path(graph_path)?;
    let file = std::fs::File::open(data_path)?;
    let ds = read_dataset(std::io::BufReader::new(file), graph.n())?;
    Ok((ds, graph))
}

/// CSV body of `load_dataset`, parameterized by the region count.
pub fn read_dataset<R: BufRead>(reader: R, n: usize) -> Result<CensoredDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);

    let headers = rdr
        .headers()
        .map_err(|e| Error::ParseError {
            line: 1,
            msg: format!("header: {e}"),
        })?
        .clone();
    let names: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    if names.len() < FIXED_COLUMNS.len()
        || names[..FIXED_COLUMNS.len()]
            .iter()
            .zip(FIXED_COLUMNS)
            .any(|(a, b)| a != b)
    {
        return Err(Error::ParseError {
            line: 1,
            msg: format!(
                "header must start with `{}`, got `{}`",
                FIXED_COLUMNS.join(","),
                names.join(",")
            ),
        });
    }
    let p = names.len() - FIXED_COLUMNS.len();

    struct RawCell {
        station: usize,
        time: usize,
        status: CensorStatus,
        covs: Vec<f64>,
    }
    let mut rows: Vec<RawCell> = Vec::new();
    let mut t_max = 0usize;

    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| Error::ParseError {
            line,
            msg: e.to_string(),
        })?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let station_raw = field(0);
        let station: usize = station_raw.parse().map_err(|_| Error::UnknownStation(station_raw.to_string()))?;
        if station == 0 || station > n {
            return Err(Error::UnknownStation(station_raw.to_string()));
        }
        let time: usize = field(1).parse().map_err(|_| Error::ParseError {
            line,
            msg: format!("invalid time_index `{}`", field(1)),
        })?;
        if time == 0 {
            return Err(Error::ParseError {
                line,
                msg: "time_index is 1-based".into(),
            });
        }

        let parse_real = |tok: &str, what: &str, default: f64| -> Result<f64> {
            let tok = tok.trim();
            if tok.is_empty() {
                return Ok(default);
            }
            match tok {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                _ => tok.parse().map_err(|_| Error::ParseError {
                    line,
                    msg: format!("invalid {what} `{tok}`"),
                }),
            }
        };

        let status_tok = field(3);
        let status = match status_tok {
            "obs" => {
                let y = parse_real(field(2), "y", f64::NAN)?;
                if !y.is_finite() {
                    return Err(Error::ParseError {
                        line,
                        msg: "observed row needs a finite y".into(),
                    });
                }
                CensorStatus::Observed(y)
            }
            "left" => CensorStatus::Left {
                upper: parse_real(field(5), "upper bound", f64::NAN)?,
            },
            "right" => CensorStatus::Right {
                lower: parse_real(field(4), "lower bound", f64::NAN)?,
            },
            "interval" => CensorStatus::Interval {
                lower: parse_real(field(4), "lower bound", f64::NAN)?,
                upper: parse_real(field(5), "upper bound", f64::NAN)?,
            },
            "missing" => CensorStatus::Missing,
            other => {
                return Err(Error::ParseError {
                    line,
                    msg: format!("unknown status `{other}`"),
                })
            }
        };
        status.validate().map_err(|e| Error::ParseError {
            line,
            msg: e.to_string(),
        })?;

        let mut covs = Vec::with_capacity(p);
        for c in 0..p {
            covs.push(parse_real(field(FIXED_COLUMNS.len() + c), "covariate", f64::NAN)?);
        }
        if covs.iter().any(|v| !v.is_finite()) {
            return Err(Error::ParseError {
                line,
                msg: "covariates must be finite".into(),
            });
        }

        t_max = t_max.max(time);
        rows.push(RawCell {
            station: station - 1,
            time: time - 1,
            status,
            covs,
        });
    }

    if t_max == 0 {
        return Err(Error::ParseError {
            line: 1,
            msg: "no data rows".into(),
        });
    }

    let total = n * t_max;
    let mut status = vec![CensorStatus::Missing; total];
    let mut seen = vec![false; total];
    let mut x = DMatrix::zeros(total, p);
    for row in rows {
        let flat = row.station * t_max + row.time;
        if seen[flat] {
            return Err(Error::DuplicateCell {
                station: (row.station + 1).to_string(),
                time: row.time + 1,
            });
        }
        seen[flat] = true;
        status[flat] = row.status;
        for c in 0..p {
            x[(flat, c)] = row.covs[c];
        }
    }
    CensoredDataset::new(n, t_max, status, x)
}

/// Writes the long-format CSV with every cell materialized, so that
/// `read_dataset(write_dataset(ds))` reproduces the semantic content exactly.
pub fn write_dataset<W: Write>(ds: &CensoredDataset, mut w: W) -> Result<()> {
    let p = ds.n_covariates();
    let mut header = FIXED_COLUMNS.join(",");
    for c in 0..p {
        header.push_str(&format!(",x{}", c + 1));
    }
    writeln!(w, "{header}")?;
    let fmt_bound = |v: f64| -> String {
        if v.is_finite() {
            format!("{v}")
        } else {
            String::new()
        }
    };
    for site in 0..ds.n_sites() {
        for time in 0..ds.n_times() {
            let idx = ds.cell_index(site, time);
            let (status_tok, y, lo, hi) = match ds.status(idx) {
                CensorStatus::Observed(v) => ("obs", format!("{v}"), String::new(), String::new()),
                CensorStatus::Left { upper } => ("left", String::new(), String::new(), fmt_bound(upper)),
                CensorStatus::Right { lower } => ("right", String::new(), fmt_bound(lower), String::new()),
                CensorStatus::Interval { lower, upper } => {
                    ("interval", String::new(), fmt_bound(lower), fmt_bound(upper))
                }
                CensorStatus::Missing => ("missing", String::new(), String::new(), String::new()),
            };
            write!(w, "{},{},{},{},{},{}", site + 1, time + 1, y, status_tok, lo, hi)?;
            for c in 0..p {
                write!(w, ",{}", ds.x()[(idx, c)])?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

pub fn write_dataset_path(ds: &CensoredDataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_dataset(ds, std::io::BufWriter::new(file))
}
