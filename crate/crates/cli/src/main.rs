//! `sectlab`: command line front end for random kernel section experiments.
//!
//! Exit codes: 0 success, 1 input error, 2 budget or size error,
//! 3 verification failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sectlab::bodies::BodySpec;
use sectlab::bounds::{
    default_type2_constant, fixed_point_r, fixed_point_rho, theorem_bound, type2_bound, BoundVariant,
    FixedPoint, DEFAULT_Q,
};
use sectlab::ensembles::{estimate_small_ball, Ensemble, EnsembleKind};
use sectlab::harness::{
    format_float, read_sweep_csv, run_sweep, section_diameter, verify_theorem, write_sweep_csv, write_verify_csv,
    DiameterMethod, SweepConfig, DEFAULT_FLOOR, DEFAULT_REFINE, LAMBDA_DIRECTIONS, LAMBDA_SAMPLES, SMALL_BALL_EPSILON,
};
use sectlab::proofkit::{
    binomial_tail_bound, corollary_sim, empirical_oscillation, lemma_smallball_sim, premise_lambda, separated_net,
    OscillationConfig, SimOutcome, DEFAULT_DELTA, DEFAULT_EPSILON,
};
use sectlab::widths::{localized_mean_width, mc_mean_width, row_sum_width, SWEEP_SAMPLES};
use sectlab::{ConvexBody, Error, RngStream};

const EXIT_VERIFY: u8 = 3;
/// Draws used to locate the scalar small-ball level when `--lambda` is absent.
const PREMISE_SAMPLES: usize = 200_000;

#[derive(Parser, Debug)]
#[command(name = "sectlab", version, about = "Diameters of random kernel sections of convex bodies")]
struct Cli {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo width estimate.
    Width(WidthArgs),
    /// Diameter of one random section.
    Diameter(DiameterArgs),
    /// Width-based diameter bound.
    Bound(BoundArgs),
    /// Seeded sweep over (n, k, trial), written as CSV.
    Sweep(SweepArgs),
    /// Per-cell probability check of a sweep CSV.
    Verify(VerifyArgs),
    /// Simulation checks of the proof devices.
    #[command(subcommand)]
    Proofkit(ProofkitCommand),
    /// Localized fixed points.
    #[command(subcommand, name = "fixed-point")]
    FixedPoint(FixedPointCommand),
}

#[derive(Args, Debug)]
struct BodyArgs {
    /// l1, l2, linf, lp:<p>, ellipsoid:<a1,...,an> or hull:<file>.
    #[arg(long, default_value = "l1")]
    body: String,
    #[arg(long)]
    n: usize,
}

impl BodyArgs {
    fn build(&self) -> Result<ConvexBody, Error> {
        self.body.parse::<BodySpec>()?.build(self.n)
    }
}

#[derive(Args, Debug)]
struct WidthArgs {
    #[command(flatten)]
    body: BodyArgs,
    #[arg(long, default_value_t = SWEEP_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Localization radius: estimate the width of T ∩ rB₂.
    #[arg(long)]
    r: Option<f64>,
    /// Estimate the row-sum width for this ensemble (needs --k).
    #[arg(long)]
    ensemble: Option<String>,
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args, Debug)]
struct DiameterArgs {
    #[command(flatten)]
    body: BodyArgs,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value = "gaussian")]
    ensemble: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// exact, sample, ascent or auto.
    #[arg(long, default_value = "auto")]
    method: String,
    #[arg(long, default_value_t = 100_000)]
    dirs: usize,
    #[arg(long, default_value_t = DEFAULT_REFINE)]
    refine: usize,
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[command(flatten)]
    body: BodyArgs,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value = "gaussian")]
    ensemble: String,
    /// theorem, fixed-point or type2.
    #[arg(long, default_value = "theorem")]
    variant: String,
    #[arg(long = "C", default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = SWEEP_SAMPLES)]
    samples: usize,
    /// Type-2 constant; defaults to the table value of the body.
    #[arg(long)]
    r2: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_Q)]
    q1: f64,
    #[arg(long, default_value_t = DEFAULT_Q)]
    q2: f64,
    #[arg(long, default_value_t = 0.25)]
    delta: f64,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Config file of `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    body: Option<String>,
    #[arg(long)]
    ensemble: Option<String>,
    /// Comma separated list.
    #[arg(long)]
    n: Option<String>,
    /// Comma separated list.
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    width_samples: Option<usize>,
    #[arg(long)]
    dirs: Option<usize>,
    #[arg(long = "C")]
    c: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path, `-` for standard output.
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    refine: Option<usize>,
    #[arg(long)]
    r2: Option<f64>,
    /// Record wall-clock milliseconds in the `ms` column.
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Sweep CSV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FLOOR)]
    floor: f64,
    /// Output path, `-` for standard output.
    #[arg(long, default_value = "-")]
    output: String,
}

#[derive(Subcommand, Debug)]
enum ProofkitCommand {
    /// Binomial small-ball estimate and its simulation.
    Lemma(LemmaArgs),
    /// Union of the small-ball estimate over N vectors.
    Corollary(CorollaryArgs),
    /// Greedy ρ-separated net of T ∩ rS.
    Net(NetArgs),
    /// Sampled oscillation term against its width bound.
    Oscillation(OscillationArgs),
}

#[derive(Args, Debug)]
struct SmallBallArgs {
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Small-ball level; defaults to the empirical ε-quantile of |ζ|.
    #[arg(long)]
    lambda: Option<f64>,
    /// Scalar law of the coordinates.
    #[arg(long, default_value = "gaussian")]
    ensemble: String,
}

#[derive(Args, Debug)]
struct LemmaArgs {
    #[command(flatten)]
    common: SmallBallArgs,
}

#[derive(Args, Debug)]
struct CorollaryArgs {
    #[command(flatten)]
    common: SmallBallArgs,
    /// Number of vectors (at most 2^(3εk)).
    #[arg(long = "N")]
    count: usize,
}

#[derive(Args, Debug)]
struct NetArgs {
    #[command(flatten)]
    body: BodyArgs,
    #[arg(long)]
    r: f64,
    #[arg(long)]
    rho: f64,
    #[arg(long, default_value_t = 1000)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the net points, one per line, to this file.
    #[arg(long)]
    points: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OscillationArgs {
    #[command(flatten)]
    body: BodyArgs,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    r: f64,
    #[arg(long)]
    rho: f64,
    #[arg(long, default_value = "gaussian")]
    ensemble: String,
    #[arg(long, default_value_t = 1000)]
    budget: usize,
    #[arg(long, default_value_t = 200)]
    draws: usize,
    #[arg(long, default_value_t = 64)]
    probes: usize,
    #[arg(long, default_value_t = SWEEP_SAMPLES)]
    width_samples: usize,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
enum FixedPointCommand {
    /// r_k(Q₂) from the localized Gaussian width.
    R(FixedRArgs),
    /// ρ_k(δ, Q₁) from the localized row-sum quantile.
    Rho(FixedRhoArgs),
}

#[derive(Args, Debug)]
struct FixedRArgs {
    #[command(flatten)]
    body: BodyArgs,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_Q)]
    q2: f64,
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long, default_value_t = 1e-3)]
    lo: f64,
    #[arg(long, default_value_t = 1.0)]
    hi: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct FixedRhoArgs {
    #[command(flatten)]
    body: BodyArgs,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value = "gaussian")]
    ensemble: String,
    #[arg(long, default_value_t = 0.25)]
    delta: f64,
    #[arg(long, default_value_t = DEFAULT_Q)]
    q1: f64,
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long, default_value_t = 1e-3)]
    lo: f64,
    #[arg(long, default_value_t = 1.0)]
    hi: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Failure of a command: a library error or a failed verification.
enum Failure {
    Lib(Error),
    Io(String),
    Verify(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn ensemble(spec: &str, n: usize) -> Result<Ensemble, Error> {
    Ensemble::new(spec.parse::<EnsembleKind>()?, n)
}

fn emit(header: &str, row: &[String]) {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let _ = writeln!(out, "{header}");
    let _ = writeln!(out, "{}", row.join(","));
}

fn open_output(path: &str) -> io::Result<Box<dyn Write>> {
    if path == "-" {
        Ok(Box::new(io::stdout()))
    } else {
        Ok(Box::new(io::BufWriter::new(fs::File::create(path)?)))
    }
}

fn cmd_width(a: &WidthArgs) -> CmdResult {
    let body = a.body.build()?;
    let stream = RngStream::new(a.seed, 0);
    let est = match (&a.ensemble, a.k, a.r) {
        (Some(_), _, Some(_)) => return Err(Error::Input("--r and --ensemble are exclusive".into()).into()),
        (Some(e), Some(k), None) => row_sum_width(&body, &ensemble(e, a.body.n)?, k, a.samples, &stream)?,
        (Some(_), None, None) => return Err(Error::Input("--ensemble needs --k".into()).into()),
        (None, _, Some(r)) => localized_mean_width(&body, r, a.samples, &stream)?,
        (None, _, None) => mc_mean_width(&body, a.samples, &stream)?,
    };
    let kind = match est.kind {
        sectlab::widths::WidthKind::GaussianWidth => "gaussian_width",
        sectlab::widths::WidthKind::RowSumWidth => "row_sum_width",
        sectlab::widths::WidthKind::LocalizedGaussianWidth => "localized_gaussian_width",
        sectlab::widths::WidthKind::Type2Moment => "type2_moment",
    };
    emit(
        "kind,mean,stderr,samples,unconverged",
        &[
            kind.into(),
            format_float(est.mean),
            format_float(est.stderr),
            est.samples.to_string(),
            est.unconverged.to_string(),
        ],
    );
    Ok(())
}

fn cmd_diameter(a: &DiameterArgs) -> CmdResult {
    let body = a.body.build()?;
    let n = a.body.n;
    let ens = ensemble(&a.ensemble, n)?;
    let root = RngStream::new(a.seed, 0);
    let gamma = ens.sample_matrix::<f64>(a.k, &root.substream(0))?;
    let method: DiameterMethod = a.method.parse()?;
    let res = section_diameter(&body, &gamma, method, a.dirs, a.refine, &root.substream(1))?;
    emit(
        "value,kind,evaluations",
        &[format_float(res.value), res.kind.as_str().into(), res.evaluations.to_string()],
    );
    Ok(())
}

fn fixed_point_row(f: &FixedPoint<f64>) -> Vec<String> {
    vec![
        format_float(f.value),
        format_float(f.violated_at),
        f.saturated.to_string(),
        f.steps.to_string(),
    ]
}

fn cmd_bound(a: &BoundArgs) -> CmdResult {
    let body = a.body.build()?;
    let n = a.body.n;
    let ens = ensemble(&a.ensemble, n)?;
    let root = RngStream::new(a.seed, 0);
    let variant: BoundVariant = a.variant.parse()?;
    let lambda = estimate_small_ball(&ens, LAMBDA_DIRECTIONS, LAMBDA_SAMPLES, 1.0 - SMALL_BALL_EPSILON, &root.substream(3))?;
    let header = "variant,n,k,C,gw,gw_se,rw,rw_se,lambda,bound";
    let mut report = match variant {
        BoundVariant::TheoremMain => {
            let gw = mc_mean_width(&body, a.samples, &root.substream(0))?;
            let rw = row_sum_width(&body, &ens, a.k, a.samples, &root.substream(1))?;
            theorem_bound(gw, rw, a.k, a.c)?
        }
        BoundVariant::Type2 => {
            let r2 = match a.r2 {
                Some(v) => v,
                None => default_type2_constant(&body)
                    .ok_or_else(|| Error::Input("this body has no default type-2 constant; pass --r2".into()))?,
            };
            type2_bound(&body, &ens, a.k, a.samples, r2, a.c, &root.substream(2))?
        }
        BoundVariant::FixedPoint => {
            let hi = body.euclidean_radius();
            let lo = 1e-3 * hi;
            let r = fixed_point_r(&body, a.k, a.q2, a.samples, lo, hi, &root.substream(4))?;
            let rho = fixed_point_rho(&body, &ens, a.k, a.delta, a.q1, a.samples, lo, hi, &root.substream(5))?;
            let gw = mc_mean_width(&body, a.samples, &root.substream(0))?;
            let rw = row_sum_width(&body, &ens, a.k, a.samples, &root.substream(1))?;
            let mut rep = theorem_bound(gw, rw, a.k, a.c)?;
            rep.variant = BoundVariant::FixedPoint;
            rep.bound_value = a.c * 2.0 * r.value.max(rho.value);
            let mut row = report_row(&rep, n, lambda);
            row.extend([format_float(r.value), format_float(rho.value), (r.saturated || rho.saturated).to_string()]);
            emit(&format!("{header},r_k,rho_k,saturated"), &row);
            return Ok(());
        }
    };
    report.lambda_hat = Some(lambda);
    emit(header, &report_row(&report, n, lambda));
    Ok(())
}

fn report_row(r: &sectlab::BoundReport, n: usize, lambda: f64) -> Vec<String> {
    vec![
        r.variant.as_str().into(),
        n.to_string(),
        r.k.to_string(),
        format_float(r.constant),
        format_float(r.gaussian_width.mean),
        format_float(r.gaussian_width.stderr),
        format_float(r.rowsum_width.mean),
        format_float(r.rowsum_width.stderr),
        format_float(lambda),
        format_float(r.bound_value),
    ]
}

fn sweep_config(a: &SweepArgs) -> Result<SweepConfig, Failure> {
    let mut cfg = SweepConfig::default();
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    let overrides: [(&str, Option<String>); 14] = [
        ("body_spec", a.body.clone()),
        ("ensemble_spec", a.ensemble.clone()),
        ("n_list", a.n.clone()),
        ("k_list", a.k.clone()),
        ("trials", a.trials.map(|v| v.to_string())),
        ("width_samples", a.width_samples.map(|v| v.to_string())),
        ("dirs", a.dirs.map(|v| v.to_string())),
        ("constant_C", a.c.map(|v| v.to_string())),
        ("master_seed", a.seed.map(|v| v.to_string())),
        ("output_path", a.output.clone()),
        ("variant", a.variant.clone()),
        ("method", a.method.clone()),
        ("refine", a.refine.map(|v| v.to_string())),
        ("r2", a.r2.map(|v| v.to_string())),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    if a.timing {
        cfg.timing = true;
    }
    Ok(cfg)
}

fn cmd_sweep(a: &SweepArgs) -> CmdResult {
    let cfg = sweep_config(a)?;
    for w in cfg.validate()? {
        eprintln!("warning: {w}");
    }
    let records = run_sweep(&cfg)?;
    write_sweep_csv(&records, open_output(&cfg.output_path)?)?;
    let mut size_error = None;
    for r in &records {
        if let Some(e) = &r.error {
            eprintln!("trial {} (n={}, k={}): {e}", r.trial, r.n, r.k);
            if let Some(msg) = e.strip_prefix("size error: ") {
                size_error.get_or_insert_with(|| msg.to_string());
            }
        }
    }
    match size_error {
        Some(e) => Err(Error::Size(e).into()),
        None => Ok(()),
    }
}

fn cmd_verify(a: &VerifyArgs) -> CmdResult {
    let file = fs::File::open(&a.input)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", a.input.display())))?;
    let records = read_sweep_csv(io::BufReader::new(file))?;
    let report = verify_theorem(&records, a.floor)?;
    write_verify_csv(&report, open_output(&a.output)?)?;
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Verify(format!("some cell is below the floor {}", a.floor)))
    }
}

fn premise(c: &SmallBallArgs) -> Result<(EnsembleKind, f64), Error> {
    let kind: EnsembleKind = c.ensemble.parse()?;
    let lambda = match c.lambda {
        Some(l) => l,
        None => premise_lambda(&kind, c.eps, PREMISE_SAMPLES, &RngStream::new(c.seed, 1))?,
    };
    Ok((kind, lambda))
}

fn sim_row(s: &SimOutcome, lambda: f64) -> Vec<String> {
    vec![
        format_float(lambda),
        s.failures.to_string(),
        s.trials.to_string(),
        format_float(s.failure_rate),
        format_float(s.bound),
        format_float(s.wilson_width),
    ]
}

fn check_sim(s: &SimOutcome) -> CmdResult {
    if s.consistent(3.0) {
        Ok(())
    } else {
        Err(Failure::Verify(format!(
            "failure rate {} exceeds bound {} by more than 3 Wilson widths",
            s.failure_rate, s.bound
        )))
    }
}

fn cmd_proofkit(cmd: &ProofkitCommand) -> CmdResult {
    match cmd {
        ProofkitCommand::Lemma(a) => {
            let c = &a.common;
            let tail = binomial_tail_bound(c.eps, c.k)?;
            let (kind, lambda) = premise(c)?;
            let s = lemma_smallball_sim(&kind, lambda, c.eps, c.k, c.trials, &RngStream::new(c.seed, 0))?;
            let mut row = sim_row(&s, lambda);
            row.extend([format_float(tail.analytic()), format_float(tail.target())]);
            emit("lambda,failures,trials,failure_rate,bound,wilson_width,analytic,target", &row);
            if !tail.holds() {
                return Err(Failure::Verify("analytic binomial estimate exceeds its target".into()));
            }
            check_sim(&s)
        }
        ProofkitCommand::Corollary(a) => {
            let c = &a.common;
            let (kind, lambda) = premise(c)?;
            let s = corollary_sim(a.count, &kind, lambda, c.eps, c.k, c.trials, &RngStream::new(c.seed, 0))?;
            let mut row = vec![a.count.to_string()];
            row.extend(sim_row(&s, lambda));
            emit("N,lambda,failures,trials,failure_rate,bound,wilson_width", &row);
            check_sim(&s)
        }
        ProofkitCommand::Net(a) => {
            let body = a.body.build()?;
            let net = separated_net(&body, a.r, a.rho, a.budget, &RngStream::new(a.seed, 0))?;
            emit(
                "cardinality,r,rho,budget_exhausted,candidates",
                &[
                    net.cardinality.to_string(),
                    format_float(net.r),
                    format_float(net.rho),
                    net.budget_exhausted.to_string(),
                    net.candidates.to_string(),
                ],
            );
            if let Some(path) = &a.points {
                let mut out = io::BufWriter::new(fs::File::create(path)?);
                for p in &net.points {
                    let coords: Vec<String> = p.iter().map(|v| format_float(*v)).collect();
                    writeln!(out, "{}", coords.join(","))?;
                }
                out.flush()?;
            }
            if net.verify(&body, 1e-9)? {
                Ok(())
            } else {
                Err(Failure::Verify("net violates separation or membership".into()))
            }
        }
        ProofkitCommand::Oscillation(a) => {
            let body = a.body.build()?;
            let ens = ensemble(&a.ensemble, a.body.n)?;
            let root = RngStream::new(a.seed, 0);
            let net = separated_net(&body, a.r, a.rho, a.budget, &root.substream(0))?;
            let cfg = OscillationConfig {
                draws: a.draws,
                probe_points: a.probes,
                width_samples: a.width_samples,
                delta: a.delta,
                epsilon: a.eps,
            };
            let rep = empirical_oscillation(&body, &net, &ens, a.k, &cfg, &root.substream(1))?;
            emit(
                "cardinality,a_hat,rhs,rearrangement_ok,fraction_below_rhs",
                &[
                    net.cardinality.to_string(),
                    format_float(rep.a_hat),
                    format_float(rep.rhs),
                    rep.rearrangement_ok.to_string(),
                    format_float(rep.fraction_below_rhs),
                ],
            );
            if rep.a_hat <= rep.rhs && rep.rearrangement_ok {
                Ok(())
            } else {
                Err(Failure::Verify("sampled oscillation exceeds its bound".into()))
            }
        }
    }
}

fn cmd_fixed_point(cmd: &FixedPointCommand) -> CmdResult {
    let header = "value,violated_at,saturated,steps";
    match cmd {
        FixedPointCommand::R(a) => {
            let body = a.body.build()?;
            let f = fixed_point_r(&body, a.k, a.q2, a.samples, a.lo, a.hi, &RngStream::new(a.seed, 0))?;
            emit(header, &fixed_point_row(&f));
        }
        FixedPointCommand::Rho(a) => {
            let body = a.body.build()?;
            let ens = ensemble(&a.ensemble, a.body.n)?;
            let f = fixed_point_rho(&body, &ens, a.k, a.delta, a.q1, a.samples, a.lo, a.hi, &RngStream::new(a.seed, 0))?;
            emit(header, &fixed_point_row(&f));
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Width(a) => cmd_width(a),
        Command::Diameter(a) => cmd_diameter(a),
        Command::Bound(a) => cmd_bound(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Proofkit(c) => cmd_proofkit(c),
        Command::FixedPoint(c) => cmd_fixed_point(c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let outcome = match cli.workers {
        Some(0) => Err(Failure::Lib(Error::Input("--workers must be at least 1".into()))),
        Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => Err(Failure::Io(e.to_string())),
        },
        None => run(&cli),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Verify(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(EXIT_VERIFY)
        }
    }
}
