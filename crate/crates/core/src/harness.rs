//! Seeded sweeps over `(n, k, trial)`, constant calibration, verification of
//! the probability floor, and CSV persistence.
//!
//! Every random quantity is drawn from a stream keyed by the master seed and
//! the cell coordinates, and parallel results are gathered in a fixed order,
//! so the output is a pure function of the [`SweepConfig`].

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::bodies::{BodyKind, BodySpec, ConvexBody};
use crate::bounds::{
    default_type2_constant, fixed_point_r, fixed_point_rho, quantile, BoundVariant, DEFAULT_Q,
};
use crate::diameter::{
    crosspolytope_section_ascent, crosspolytope_section_diameter_exact, direction_sampling_diameter,
    ellipsoid_section_diameter, enumeration_size, DiameterKind, DiameterResult, ENUMERATION_BUDGET,
};
use crate::ensembles::{estimate_small_ball, Ensemble, EnsembleKind};
use crate::error::{Error, Result};
use crate::kernels::{kernel_basis, DEFAULT_REL_TOL};
use crate::rng::RngStream;
use crate::widths::{
    mc_mean_width, row_sum_width, support_second_moment, WidthEstimate, WidthKind, SWEEP_SAMPLES,
};

/// Sweep CSV header.
pub const SWEEP_HEADER: [&str; 15] = [
    "trial", "n", "k", "seed", "diam", "diam_kind", "gw", "gw_se", "rw", "rw_se", "lambda", "C", "bound",
    "ratio", "ms",
];
/// Verification CSV header.
pub const VERIFY_HEADER: [&str; 5] = ["n", "k", "trials", "fraction", "median_diam_sqrtk"];
/// Relative margin added to the calibrated percentile.
pub const CALIBRATION_MARGIN: f64 = 0.10;
/// Percentile of `diam / base` used for calibration.
pub const CALIBRATION_QUANTILE: f64 = 0.75;
/// Default probability floor of [`verify_theorem`].
pub const DEFAULT_FLOOR: f64 = 0.75;
/// Coordinate starts of the linearization ascent for large cross-polytope instances.
pub const ASCENT_STARTS: usize = 64;
/// Round cap of the linearization ascent.
pub const ASCENT_ROUNDS: usize = 50;
/// Default hill-climbing steps of direction sampling.
pub const DEFAULT_REFINE: usize = 500;
/// Small-ball failure probability used for `λ̂`.
pub const SMALL_BALL_EPSILON: f64 = 1.0 / 600.0;
/// Draws and random directions of the `λ̂` estimate.
pub const LAMBDA_SAMPLES: usize = 2000;
pub const LAMBDA_DIRECTIONS: usize = 16;
/// Failure probability `δ` of the fixed-point variant.
pub const FIXED_POINT_DELTA: f64 = 0.25;
/// Lower end of the fixed-point bracket, relative to the Euclidean radius.
pub const FIXED_POINT_BRACKET: f64 = 1e-3;

const TAG_TRIAL: u64 = 0;
const TAG_GW: u64 = 1;
const TAG_RW: u64 = 2;
const TAG_LAMBDA: u64 = 3;
const TAG_FIXED: u64 = 4;

/// How the diameter of each trial is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiameterMethod {
    /// Exact where available (cross-polytope within budget, ellipsoids,
    /// Euclidean balls), the linearization ascent for larger cross-polytope
    /// instances, direction sampling otherwise.
    Auto,
    Exact,
    Sample,
    Ascent,
}

impl fmt::Display for DiameterMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiameterMethod::Auto => "auto",
            DiameterMethod::Exact => "exact",
            DiameterMethod::Sample => "sample",
            DiameterMethod::Ascent => "ascent",
        })
    }
}

impl FromStr for DiameterMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(DiameterMethod::Auto),
            "exact" => Ok(DiameterMethod::Exact),
            "sample" => Ok(DiameterMethod::Sample),
            "ascent" => Ok(DiameterMethod::Ascent),
            other => Err(Error::input(format!("unknown diameter method `{other}`"))),
        }
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub body_spec: String,
    pub ensemble_spec: String,
    pub n_list: Vec<usize>,
    pub k_list: Vec<usize>,
    pub trials: usize,
    pub width_samples: usize,
    /// Random directions for direction sampling.
    pub dirs: usize,
    /// Fixed constant; calibrated from the data when absent.
    pub constant_C: Option<f64>,
    pub master_seed: u64,
    pub output_path: String,
    pub variant: BoundVariant,
    pub method: DiameterMethod,
    /// Hill-climbing steps for direction sampling.
    pub refine: usize,
    /// Type-2 constant override for the `type2` variant.
    pub r2: Option<f64>,
    /// Record wall-clock milliseconds; off by default so output bytes are reproducible.
    pub timing: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            body_spec: "l1".into(),
            ensemble_spec: "gaussian".into(),
            n_list: vec![64],
            k_list: vec![8],
            trials: 20,
            width_samples: SWEEP_SAMPLES,
            dirs: 10_000,
            constant_C: None,
            master_seed: 0,
            output_path: "sweep.csv".into(),
            variant: BoundVariant::TheoremMain,
            method: DiameterMethod::Auto,
            refine: DEFAULT_REFINE,
            r2: None,
            timing: false,
        }
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    let inner = value
        .trim()
        .strip_prefix('[')
        .and_then(|v| v.strip_suffix(']'))
        .unwrap_or(value);
    inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| Error::input(format!("bad integer `{s}` in `{key}`"))))
        .collect()
}

fn parse_scalar<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::input(format!("bad value `{value}` for `{key}`")))
}

fn parse_optional(key: &str, value: &str) -> Result<Option<f64>> {
    match value.trim() {
        "" | "none" | "auto" => Ok(None),
        v => parse_scalar(key, v).map(Some),
    }
}

fn unquote(value: &str) -> &str {
    let v = value.trim();
    v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v)
}

impl SweepConfig {
    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = unquote(value);
        match key.trim() {
            "body_spec" => self.body_spec = value.to_string(),
            "ensemble_spec" => self.ensemble_spec = value.to_string(),
            "n_list" => self.n_list = parse_list(key, value)?,
            "k_list" => self.k_list = parse_list(key, value)?,
            "trials" => self.trials = parse_scalar(key, value)?,
            "width_samples" => self.width_samples = parse_scalar(key, value)?,
            "dirs" => self.dirs = parse_scalar(key, value)?,
            "constant_C" => self.constant_C = parse_optional(key, value)?,
            "master_seed" => self.master_seed = parse_scalar(key, value)?,
            "output_path" => self.output_path = value.to_string(),
            "variant" => self.variant = value.parse()?,
            "method" => self.method = value.parse()?,
            "refine" => self.refine = parse_scalar(key, value)?,
            "r2" => self.r2 = parse_optional(key, value)?,
            "timing" => self.timing = parse_scalar(key, value)?,
            other => return Err(Error::input(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::input(format!("line {}: expected `key = value`", i + 1)))?;
            self.set(key, value)
                .map_err(|e| Error::input(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SweepConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Checks the invariants and returns warnings for cells whose kernel is
    /// trivial for every `n`.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.n_list.is_empty() || self.k_list.is_empty() {
            return Err(Error::input("n_list and k_list must be nonempty"));
        }
        if self.trials < 1 {
            return Err(Error::input("trials must be at least 1"));
        }
        if self.n_list.contains(&0) || self.k_list.contains(&0) {
            return Err(Error::input("n and k must be positive"));
        }
        if self.width_samples < 2 {
            return Err(Error::input("width_samples must be at least 2"));
        }
        if self.dirs < 1 {
            return Err(Error::input("dirs must be at least 1"));
        }
        if let Some(c) = self.constant_C {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::input(format!("constant_C must be positive, got {c}")));
            }
        }
        if let Some(r2) = self.r2 {
            if !(r2 > 0.0) || !r2.is_finite() {
                return Err(Error::input(format!("r2 must be positive, got {r2}")));
            }
        }
        self.body_spec.parse::<BodySpec>()?;
        self.ensemble_spec.parse::<EnsembleKind>()?;
        let max_n = *self.n_list.iter().max().expect("nonempty");
        Ok(self
            .k_list
            .iter()
            .filter(|&&k| k >= max_n)
            .map(|k| format!("k = {k} leaves a trivial kernel for every n"))
            .collect())
    }
}

/// One trial of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub n: usize,
    pub k: usize,
    /// Stream index of the trial's substream.
    pub seed: u64,
    pub diam_value: Option<f64>,
    pub diam_kind: Option<DiameterKind>,
    pub gaussian_width: f64,
    pub gaussian_width_se: f64,
    pub rowsum_width: f64,
    pub rowsum_width_se: f64,
    pub lambda_hat: f64,
    pub constant: f64,
    pub bound_value: f64,
    /// `diam / bound` when the bound is positive.
    pub ratio: Option<f64>,
    pub wallclock_ms: u64,
    pub error: Option<String>,
}

/// Cached per-cell quantities.
#[derive(Debug, Clone, Copy)]
struct CellWidths {
    gw: WidthEstimate<f64>,
    rw: WidthEstimate<f64>,
    /// Bound with `C = 1`.
    base: f64,
}

fn cell_stream(cfg: &SweepConfig, tags: &[u64]) -> RngStream {
    RngStream::new(cfg.master_seed, 0).substream_of(tags)
}

/// Stream of trial `(n, k, trial)`.
pub fn trial_stream(master_seed: u64, n: usize, k: usize, trial: usize) -> RngStream {
    RngStream::new(master_seed, 0).substream_of(&[TAG_TRIAL, n as u64, k as u64, trial as u64])
}

fn cell_widths(
    cfg: &SweepConfig,
    body: &ConvexBody<f64>,
    ens: &Ensemble,
    n: usize,
    k: usize,
    gw: WidthEstimate<f64>,
) -> Result<CellWidths> {
    let sqrt_k = (k as f64).sqrt();
    match cfg.variant {
        BoundVariant::TheoremMain => {
            let rw = row_sum_width(body, ens, k, cfg.width_samples, &cell_stream(cfg, &[TAG_RW, n as u64, k as u64]))?;
            Ok(CellWidths { gw, rw, base: gw.mean.max(rw.mean) / sqrt_k })
        }
        BoundVariant::Type2 => {
            let r2 = match cfg.r2 {
                Some(v) => v,
                None => default_type2_constant(body)
                    .ok_or_else(|| Error::input("this body has no default type-2 constant; set r2"))?,
            };
            let m = support_second_moment(body, ens, cfg.width_samples, &cell_stream(cfg, &[TAG_RW, n as u64]))?;
            let root = m.mean.max(0.0).sqrt();
            let rw = WidthEstimate {
                mean: r2 * root,
                stderr: if root > 0.0 { r2 * m.stderr() / (2.0 * root) } else { 0.0 },
                samples: m.count,
                kind: WidthKind::Type2Moment,
                unconverged: 0,
            };
            Ok(CellWidths { gw, rw, base: gw.mean.max(rw.mean) / sqrt_k })
        }
        BoundVariant::FixedPoint => {
            let rw = row_sum_width(body, ens, k, cfg.width_samples, &cell_stream(cfg, &[TAG_RW, n as u64, k as u64]))?;
            let radius = body.euclidean_radius();
            let (lo, hi) = (FIXED_POINT_BRACKET * radius, radius);
            let s = cell_stream(cfg, &[TAG_FIXED, n as u64, k as u64]);
            let r = fixed_point_r(body, k, DEFAULT_Q, cfg.width_samples, lo, hi, &s.substream(0))?;
            let rho = fixed_point_rho(
                body,
                ens,
                k,
                FIXED_POINT_DELTA,
                DEFAULT_Q,
                cfg.width_samples,
                lo,
                hi,
                &s.substream(1),
            )?;
            // radius bound max(r_k, ρ_k) doubled into a diameter
            Ok(CellWidths { gw, rw, base: 2.0 * r.value.max(rho.value) })
        }
    }
}

/// Diameter of `T ∩ ker Γ` by `method`; see [`DiameterMethod::Auto`] for the
/// automatic choice. `dirs` and `refine` configure direction sampling.
pub fn section_diameter(
    body: &ConvexBody<f64>,
    gamma: &DMatrix<f64>,
    method: DiameterMethod,
    dirs: usize,
    refine: usize,
    stream: &RngStream,
) -> Result<DiameterResult<f64>> {
    let (k, n) = gamma.shape();
    crate::error::check_dim(body.dim(), n)?;
    let ellipsoid_shape = match body.kind() {
        BodyKind::Ellipsoid(e) => Some(e.shape.clone()),
        _ if body.is_euclidean_ball() => Some(DMatrix::identity(n, n)),
        _ => None,
    };
    let cross = body.is_cross_polytope();
    let within_budget = enumeration_size(n, k) <= ENUMERATION_BUDGET;
    let method = match method {
        DiameterMethod::Auto if ellipsoid_shape.is_some() => DiameterMethod::Exact,
        DiameterMethod::Auto if cross && within_budget => DiameterMethod::Exact,
        DiameterMethod::Auto if cross => DiameterMethod::Ascent,
        DiameterMethod::Auto => DiameterMethod::Sample,
        m => m,
    };
    match method {
        DiameterMethod::Exact if cross => crosspolytope_section_diameter_exact(gamma, DEFAULT_REL_TOL),
        DiameterMethod::Exact => match ellipsoid_shape {
            Some(shape) => {
                let kb = kernel_basis(gamma, DEFAULT_REL_TOL)?;
                ellipsoid_section_diameter(&shape, &kb)
            }
            None => Err(Error::input("no exact diameter method for this body")),
        },
        DiameterMethod::Ascent if cross => {
            if k >= n && kernel_basis(gamma, DEFAULT_REL_TOL)?.dim() == 0 {
                return crosspolytope_section_diameter_exact(gamma, DEFAULT_REL_TOL);
            }
            crosspolytope_section_ascent(gamma, ASCENT_STARTS, ASCENT_ROUNDS, stream)
        }
        DiameterMethod::Ascent => Err(Error::input("the ascent method needs body l1")),
        _ => {
            let kb = kernel_basis(gamma, DEFAULT_REL_TOL)?;
            direction_sampling_diameter(body, &kb, dirs, refine, stream)
        }
    }
}

/// Runs every `(n, k, trial)` of the configuration.
///
/// Widths are estimated once per cell; the diameter of each trial uses its own
/// stream. Errors inside a trial become error records and the sweep goes on.
/// When `constant_C` is absent, `C` is `(1 + CALIBRATION_MARGIN)` times the
/// `CALIBRATION_QUANTILE` of `diam / base` over all trials at the smallest
/// `k`, pooled across `n`, where `base` is the bound with `C = 1`.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let spec: BodySpec = cfg.body_spec.parse()?;
    let kind: EnsembleKind = cfg.ensemble_spec.parse()?;
    let mut cells: Vec<(usize, usize)> = Vec::new();
    for &n in &cfg.n_list {
        for &k in &cfg.k_list {
            if !cells.contains(&(n, k)) {
                cells.push((n, k));
            }
        }
    }
    cells.sort_unstable();

    let mut records: Vec<(TrialRecord, f64)> = Vec::new();
    let mut per_n: BTreeMap<usize, (ConvexBody<f64>, Ensemble, WidthEstimate<f64>, f64)> = BTreeMap::new();
    for &(n, k) in &cells {
        if let std::collections::btree_map::Entry::Vacant(slot) = per_n.entry(n) {
            let body: ConvexBody<f64> = spec.build(n)?;
            let ens = Ensemble::new(kind, n)?;
            let gw = mc_mean_width(&body, cfg.width_samples, &cell_stream(cfg, &[TAG_GW, n as u64]))?;
            let lambda = estimate_small_ball(
                &ens,
                LAMBDA_DIRECTIONS,
                LAMBDA_SAMPLES,
                1.0 - SMALL_BALL_EPSILON,
                &cell_stream(cfg, &[TAG_LAMBDA, n as u64]),
            )?;
            slot.insert((body, ens, gw, lambda));
        }
        let (body, ens, gw, lambda) = &per_n[&n];
        let widths = cell_widths(cfg, body, ens, n, k, *gw)?;
        let trials: Vec<(TrialRecord, f64)> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let stream = trial_stream(cfg.master_seed, n, k, t);
                let start = Instant::now();
                let outcome = ens
                    .sample_matrix::<f64>(k, &stream.substream(0))
                    .and_then(|g| section_diameter(body, &g, cfg.method, cfg.dirs, cfg.refine, &stream.substream(1)));
                let ms = if cfg.timing { start.elapsed().as_millis() as u64 } else { 0 };
                let (diam_value, diam_kind, error) = match outcome {
                    Ok(d) => (Some(d.value), Some(d.kind), None),
                    Err(e) => (None, None, Some(e.to_string())),
                };
                let rec = TrialRecord {
                    trial: t,
                    n,
                    k,
                    seed: stream.stream_index,
                    diam_value,
                    diam_kind,
                    gaussian_width: widths.gw.mean,
                    gaussian_width_se: widths.gw.stderr,
                    rowsum_width: widths.rw.mean,
                    rowsum_width_se: widths.rw.stderr,
                    lambda_hat: *lambda,
                    constant: f64::NAN,
                    bound_value: f64::NAN,
                    ratio: None,
                    wallclock_ms: ms,
                    error,
                };
                (rec, widths.base)
            })
            .collect();
        records.extend(trials);
    }

    let constant = match cfg.constant_C {
        Some(c) => c,
        None => calibrate(&records),
    };
    Ok(records
        .into_iter()
        .map(|(mut rec, base)| {
            rec.constant = constant;
            rec.bound_value = constant * base;
            rec.ratio = match rec.diam_value {
                Some(d) if rec.bound_value > 0.0 => Some(d / rec.bound_value),
                _ => None,
            };
            rec
        })
        .collect())
}

fn calibrate(records: &[(TrialRecord, f64)]) -> f64 {
    let Some(k0) = records.iter().map(|(r, _)| r.k).min() else {
        return 1.0;
    };
    let mut ratios: Vec<f64> = records
        .iter()
        .filter(|(r, base)| r.k == k0 && *base > 0.0 && base.is_finite())
        .filter_map(|(r, base)| r.diam_value.map(|d| d / base))
        .collect();
    if ratios.is_empty() {
        return 1.0;
    }
    ratios.sort_by(f64::total_cmp);
    let c = (1.0 + CALIBRATION_MARGIN) * quantile(&ratios, CALIBRATION_QUANTILE);
    if c > 0.0 {
        c
    } else {
        1.0
    }
}

/// Verification summary of one `(n, k)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub n: usize,
    pub k: usize,
    /// Trials without errors.
    pub trials: usize,
    /// Fraction of those with `diam ≤ bound`.
    pub fraction: f64,
    pub median_diam_sqrtk: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub cells: Vec<CellSummary>,
    pub floor: f64,
    pub passed: bool,
}

fn median(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    if m == 0 {
        return f64::NAN;
    }
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        (sorted[m / 2 - 1] + sorted[m / 2]) / 2.0
    }
}

/// Per-cell fraction of trials with `diam ≤ bound`; passes when every cell
/// reaches `floor`. Error records are excluded from the counts.
pub fn verify_theorem(records: &[TrialRecord], floor: f64) -> Result<VerifyReport> {
    if records.is_empty() {
        return Err(Error::input("no records to verify"));
    }
    if !(0.0..=1.0).contains(&floor) {
        return Err(Error::input(format!("floor must lie in [0,1], got {floor}")));
    }
    let mut cells: BTreeMap<(usize, usize), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        cells.entry((r.n, r.k)).or_default().push(r);
    }
    let mut out = Vec::new();
    let mut passed = true;
    for ((n, k), recs) in cells {
        let valid: Vec<(f64, f64)> = recs
            .iter()
            .filter_map(|r| r.diam_value.map(|d| (d, r.bound_value)))
            .collect();
        let hits = valid.iter().filter(|(d, b)| d <= b).count();
        let fraction = if valid.is_empty() { 0.0 } else { hits as f64 / valid.len() as f64 };
        let mut scaled: Vec<f64> = valid.iter().map(|(d, _)| d * (k as f64).sqrt()).collect();
        scaled.sort_by(f64::total_cmp);
        passed &= !valid.is_empty() && fraction >= floor;
        out.push(CellSummary { n, k, trials: valid.len(), fraction, median_diam_sqrtk: median(&scaled) });
    }
    Ok(VerifyReport { cells: out, floor, passed })
}

/// 17 significant digits, so that parsing recovers the value exactly.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn parse_float(s: &str) -> Result<f64> {
    match s {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse().map_err(|_| Error::input(format!("bad number `{s}`"))),
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::input(format!("csv: {e}"))
}

/// Writes records in `(n, k, trial)` order under [`SWEEP_HEADER`]. Error
/// records have an empty `diam` and `diam_kind = error`.
pub fn write_sweep_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut sorted: Vec<&TrialRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.n, r.k, r.trial));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER).map_err(csv_error)?;
    for r in sorted {
        let opt = |v: Option<f64>| v.map(format_float).unwrap_or_default();
        w.write_record([
            r.trial.to_string(),
            r.n.to_string(),
            r.k.to_string(),
            r.seed.to_string(),
            opt(r.diam_value),
            r.diam_kind.map(|d| d.as_str().to_string()).unwrap_or_else(|| "error".into()),
            format_float(r.gaussian_width),
            format_float(r.gaussian_width_se),
            format_float(r.rowsum_width),
            format_float(r.rowsum_width_se),
            format_float(r.lambda_hat),
            format_float(r.constant),
            format_float(r.bound_value),
            opt(r.ratio),
            r.wallclock_ms.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::input(format!("write failed: {e}")))?;
    Ok(())
}

/// Reads a file produced by [`write_sweep_csv`].
pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<TrialRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(csv_error)?.clone();
    if header.iter().ne(SWEEP_HEADER.iter().copied()) {
        return Err(Error::input("unexpected sweep CSV header"));
    }
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row.map_err(csv_error)?;
        let f = |i: usize| row.get(i).unwrap_or("");
        let int = |i: usize| -> Result<u64> {
            f(i).parse().map_err(|_| Error::input(format!("bad integer `{}`", f(i))))
        };
        let opt = |i: usize| -> Result<Option<f64>> {
            if f(i).is_empty() { Ok(None) } else { parse_float(f(i)).map(Some) }
        };
        let diam_kind = match f(5) {
            "exact" => Some(DiameterKind::Exact),
            "lower_bound" => Some(DiameterKind::LowerBound),
            "error" => None,
            other => return Err(Error::input(format!("bad diam_kind `{other}`"))),
        };
        out.push(TrialRecord {
            trial: int(0)? as usize,
            n: int(1)? as usize,
            k: int(2)? as usize,
            seed: int(3)?,
            diam_value: opt(4)?,
            diam_kind,
            gaussian_width: parse_float(f(6))?,
            gaussian_width_se: parse_float(f(7))?,
            rowsum_width: parse_float(f(8))?,
            rowsum_width_se: parse_float(f(9))?,
            lambda_hat: parse_float(f(10))?,
            constant: parse_float(f(11))?,
            bound_value: parse_float(f(12))?,
            ratio: opt(13)?,
            wallclock_ms: int(14)?,
            error: diam_kind.is_none().then(|| "error record".to_string()),
        });
    }
    Ok(out)
}

/// Writes the per-cell summary under [`VERIFY_HEADER`].
pub fn write_verify_csv<W: Write>(report: &VerifyReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(VERIFY_HEADER).map_err(csv_error)?;
    for c in &report.cells {
        w.write_record([
            c.n.to_string(),
            c.k.to_string(),
            c.trials.to_string(),
            format_float(c.fraction),
            format_float(c.median_diam_sqrtk),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::input(format!("write failed: {e}")))?;
    Ok(())
}

/// Sweep CSV as bytes.
pub fn sweep_csv_bytes(records: &[TrialRecord]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_sweep_csv(records, &mut buf)?;
    Ok(buf)
}
