//! Command-line front end: config loading, subcommands and report writers.
//!
//! Precedence: built-in defaults < config file < command-line flags.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{analyze, case_from_d, regime_d, AsymptoticLaw, TailAnalysis};
use crate::error::{Error, Result};
use crate::implicit::{CaseTag, ImplicitMap};
use crate::oracle::{
    coeffs_closed_noqueue_with, coeffs_contour_with, ratio_report, sci_string, CoefficientTable, OracleConfig, RatioReport,
    Target, DEFAULT_DIGITS,
};
use crate::params::{ModelParams, RetrialRate};
use crate::service::{ServiceKind, ServiceModel};
use crate::sim::{simulate_replications, EmpiricalDist, SimConfig};
use crate::validate::validate_suite;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Points with |D| below this are not scored by the regime map.
pub const REGIME_BAND: f64 = 1e-6;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub service: Option<ServiceKind>,
    pub params: Option<ParamsSpec>,
    #[serde(default)]
    pub options: Options,
    pub grid: Option<GridSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub lambda1: f64,
    pub lambda2: f64,
    pub nu: RetrialRate,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    pub n_max: Option<usize>,
    pub digits: Option<u32>,
    pub target: Option<Target>,
    pub radius_factor: Option<f64>,
    pub points: Option<usize>,
    /// Use the closed form instead of the contour (λ1 = 0, exponential only).
    pub closed_form: Option<bool>,
    /// Emit only n and the coefficient rounded to this many significant digits.
    pub round_digits: Option<usize>,
    pub seed: Option<u64>,
    pub warmup_events: Option<u64>,
    pub measure_events: Option<u64>,
    pub batches: Option<usize>,
    pub replications: Option<usize>,
    pub n_cap: Option<usize>,
}

/// Grid of (λ1, λ2) points: `steps` interior points per axis of each open range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lambda1: [f64; 2],
    pub lambda2: [f64; 2],
    pub steps: usize,
    #[serde(default = "one")]
    pub mu: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lambda1: [0.0, 1.0],
            lambda2: [0.0, 1.0],
            steps: 50,
            mu: 1.0,
        }
    }
}

impl GridSpec {
    /// `STEPS` or `L1LO,L1HI,L2LO,L2HI,STEPS`.
    pub fn parse_flag(s: &str, base: GridSpec) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("--grid expects STEPS or L1LO,L1HI,L2LO,L2HI,STEPS, got {s:?}"));
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        match parts.as_slice() {
            [steps] => Ok(Self { steps: steps.parse().map_err(|_| bad())?, ..base }),
            [a, b, c, d, steps] => {
                let f = |x: &str| x.parse::<f64>().map_err(|_| bad());
                Ok(Self {
                    lambda1: [f(a)?, f(b)?],
                    lambda2: [f(c)?, f(d)?],
                    steps: steps.parse().map_err(|_| bad())?,
                    mu: base.mu,
                })
            }
            _ => Err(bad()),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] >= 0.0 && r[0] < r[1];
        if !ok(self.lambda1) || !ok(self.lambda2) {
            return Err(Error::InvalidParameter("grid ranges must satisfy 0 <= lo < hi".into()));
        }
        if self.steps == 0 {
            return Err(Error::InvalidParameter("grid steps must be positive".into()));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {}", self.mu)));
        }
        Ok(())
    }

    fn axis(range: [f64; 2], steps: usize, i: usize) -> f64 {
        range[0] + (range[1] - range[0]) * (i + 1) as f64 / (steps + 1) as f64
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Validated service model and parameters.
    pub fn model_and_params(&self) -> Result<(ServiceModel, ModelParams)> {
        let kind = self
            .service
            .clone()
            .ok_or_else(|| Error::InvalidParameter("config: missing field `service`".into()))?;
        let model = ServiceModel::new(kind)?;
        let p = self
            .params
            .ok_or_else(|| Error::InvalidParameter("config: missing field `params`".into()))?;
        let params = ModelParams::new(p.lambda1, p.lambda2, p.nu, &model)?;
        Ok((model, params))
    }
}

#[derive(Debug, Parser)]
#[command(name = "retrial-tails", version, about = "Orbit-size tail asymptotics for two-class priority retrial queues")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Singularity profile and asymptotic laws as a JSON report.
    Analyze(CommonArgs),
    /// Reference coefficients with a ratio report against the laws.
    Coeffs(CoeffsArgs),
    /// Discrete-event simulation of the orbit distribution.
    Simulate(SimArgs),
    /// Regime partition of the (λ1, λ2) plane for exponential service.
    RegimeMap(RegimeArgs),
    /// Built-in scenario suite (dual oracle, normalization, law ratios).
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    pub config: PathBuf,
    /// Output directory; without it the main artifact goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CoeffsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub digits: Option<u32>,
    /// Q, R or P2.
    #[arg(long)]
    pub target: Option<Target>,
    #[arg(long)]
    pub closed_form: bool,
    #[arg(long)]
    pub round_digits: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub measure_events: Option<u64>,
    #[arg(long)]
    pub replications: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RegimeArgs {
    /// Optional JSON configuration holding a `grid` section.
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// STEPS or L1LO,L1HI,L2LO,L2HI,STEPS.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Scenario names; all built-in scenarios when omitted.
    pub scenarios: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// An error tagged with the operation that raised it.
#[derive(Debug)]
pub struct CliError {
    pub op: &'static str,
    pub err: Error,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        if self.err.is_validation() {
            EXIT_VALIDATION
        } else {
            EXIT_NUMERICAL
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} failed: {}", self.op, self.err)
    }
}

trait Op<T> {
    fn op(self, op: &'static str) -> std::result::Result<T, CliError>;
}

impl<T> Op<T> for Result<T> {
    fn op(self, op: &'static str) -> std::result::Result<T, CliError> {
        self.map_err(|err| CliError { op, err })
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// JSON with every float written to 17 significant digits.
pub fn to_json<T: Serialize>(value: &T) -> String {
    struct Fmt17<'a>(serde_json::ser::PrettyFormatter<'a>);
    macro_rules! delegate {
        ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
            $(fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.0.$name(w $(, $arg)*)
            })*
        };
    }
    impl serde_json::ser::Formatter for Fmt17<'_> {
        fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
            write!(w, "{v:.16e}")
        }
        delegate! {
            begin_array();
            end_array();
            begin_array_value(first: bool);
            end_array_value();
            begin_object();
            end_object();
            begin_object_key(first: bool);
            begin_object_value();
            end_object_value();
        }
    }
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Fmt17(serde_json::ser::PrettyFormatter::new()));
    value.serialize(&mut ser).expect("report types serialize infallibly");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub command: &'static str,
    pub service: ServiceKind,
    pub regime: CaseTag,
    pub decay_rate: f64,
    #[serde(flatten)]
    pub analysis: TailAnalysis,
}

pub fn analyze_report(model: &ServiceModel, params: &ModelParams) -> Result<AnalyzeReport> {
    let analysis = analyze(params, model)?;
    Ok(AnalyzeReport {
        command: "analyze",
        service: model.kind().clone(),
        regime: analysis.profile.case_tag,
        decay_rate: analysis.laws.p2.decay_rate,
        analysis,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CoeffsSummary {
    pub command: &'static str,
    pub method: &'static str,
    pub target: Target,
    pub n_max: usize,
    pub digits: u32,
    pub radius: f64,
    pub points: usize,
    pub reach: Option<usize>,
    pub first_unusable: Option<usize>,
    pub est_abs_error: f64,
    pub law: Option<AsymptoticLaw>,
    pub tail_max_deviation: Option<f64>,
    /// Σ coefficients as a decimal string.
    pub sum: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimSummary {
    pub command: &'static str,
    pub seeds: Vec<u64>,
    pub rho: f64,
    pub utilization: f64,
    pub utilization_hw: f64,
    pub blocked_fraction: f64,
    pub blocked_hw: f64,
    pub overflow: f64,
    pub batches: usize,
    pub measured_events: u64,
    pub measured_time: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeRow {
    pub i: usize,
    pub j: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub d: f64,
    pub case_from_d: CaseTag,
    pub case_tag: CaseTag,
    /// "agree", "disagree", or "band" when |D| is within the tie band.
    pub agreement: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeMeta {
    pub command: &'static str,
    pub grid: GridSpec,
    pub stability_border: String,
    pub points: usize,
    pub scored: usize,
    pub agree: usize,
    pub band: f64,
}

/// One regime-map point; `None` outside the stability region.
pub fn regime_point(l1: f64, l2: f64, mu: f64) -> Result<Option<(f64, CaseTag, CaseTag)>> {
    if l1 + l2 >= mu {
        return Ok(None);
    }
    let model = ServiceModel::exponential(mu)?;
    let params = ModelParams::new(l1, l2, RetrialRate::Finite(1.0), &model)?;
    let d = regime_d(&params, mu);
    let profile = ImplicitMap::new(&params, &model)?.build_profile()?;
    Ok(Some((d, case_from_d(d, REGIME_BAND), profile.case_tag)))
}

/// Grid rows ordered by (i, j) regardless of evaluation order.
pub fn regime_map(grid: &GridSpec) -> Result<(Vec<RegimeRow>, RegimeMeta)> {
    grid.validate()?;
    let idx: Vec<(usize, usize)> = (0..grid.steps).flat_map(|i| (0..grid.steps).map(move |j| (i, j))).collect();
    let rows: Vec<Option<RegimeRow>> = idx
        .par_iter()
        .map(|&(i, j)| {
            let l1 = GridSpec::axis(grid.lambda1, grid.steps, i);
            let l2 = GridSpec::axis(grid.lambda2, grid.steps, j);
            Ok(regime_point(l1, l2, grid.mu)?.map(|(d, from_d, tag)| RegimeRow {
                i,
                j,
                lambda1: l1,
                lambda2: l2,
                d,
                case_from_d: from_d,
                case_tag: tag,
                agreement: if d.abs() <= REGIME_BAND {
                    "band"
                } else if from_d == tag {
                    "agree"
                } else {
                    "disagree"
                },
            }))
        })
        .collect::<Result<_>>()?;
    let rows: Vec<RegimeRow> = rows.into_iter().flatten().collect();
    let scored = rows.iter().filter(|r| r.agreement != "band").count();
    let agree = rows.iter().filter(|r| r.agreement == "agree").count();
    let meta = RegimeMeta {
        command: "regime-map",
        grid: *grid,
        stability_border: format!("lambda1 + lambda2 = {}", grid.mu),
        points: rows.len(),
        scored,
        agree,
        band: REGIME_BAND,
    };
    Ok((rows, meta))
}

pub fn write_regime_csv<W: Write>(rows: &[RegimeRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::InvalidParameter(format!("CSV write failed: {e}"));
    wr.write_record(["i", "j", "lambda1", "lambda2", "D", "case_from_D", "case_tag", "agreement"]).map_err(err)?;
    for r in rows {
        wr.write_record([
            r.i.to_string(),
            r.j.to_string(),
            format!("{:.16e}", r.lambda1),
            format!("{:.16e}", r.lambda2),
            format!("{:.16e}", r.d),
            r.case_from_d.to_string(),
            r.case_tag.to_string(),
            r.agreement.to_string(),
        ])
        .map_err(err)?;
    }
    wr.flush().map_err(|e| Error::InvalidParameter(format!("CSV write failed: {e}")))?;
    Ok(())
}

/// CSV of n and f(n) rounded to `digits` significant digits, for comparing tables.
pub fn write_rounded_csv<W: Write>(table: &CoefficientTable, digits: usize, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::InvalidParameter(format!("CSV write failed: {e}"));
    wr.write_record(["n", "coeff"]).map_err(err)?;
    for n in 0..=table.n_max {
        wr.write_record([n.to_string(), sci_string(&table.coeffs[n], digits)]).map_err(err)?;
    }
    wr.flush().map_err(|e| Error::InvalidParameter(format!("CSV write failed: {e}")))?;
    Ok(())
}

pub fn write_ratio_csv<W: Write>(rep: &RatioReport, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::InvalidParameter(format!("CSV write failed: {e}"));
    wr.write_record(["n", "coeff", "law", "ratio", "usable"]).map_err(err)?;
    for r in &rep.rows {
        wr.write_record([r.n.to_string(), r.coeff.clone(), r.law.clone(), format!("{:.16e}", r.ratio), r.usable.to_string()])
            .map_err(err)?;
    }
    wr.flush().map_err(|e| Error::InvalidParameter(format!("CSV write failed: {e}")))?;
    Ok(())
}

/// Where artifacts go: files in `--out`, or the main one on stdout and
/// side reports on stderr.
struct Sink<'a> {
    dir: Option<PathBuf>,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl Sink<'_> {
    fn new<'a>(dir: Option<PathBuf>, stdout: &'a mut dyn Write, stderr: &'a mut dyn Write) -> CliResult<Sink<'a>> {
        if let Some(d) = &dir {
            fs::create_dir_all(d)
                .map_err(|e| Error::InvalidParameter(format!("cannot create {}: {e}", d.display())))
                .op("output")?;
        }
        Ok(Sink { dir, stdout, stderr })
    }

    fn emit(&mut self, name: &str, main: bool, bytes: &[u8]) -> CliResult<()> {
        let res = match &self.dir {
            Some(d) => fs::write(d.join(name), bytes),
            None if main => self.stdout.write_all(bytes),
            None => self.stderr.write_all(bytes),
        };
        res.map_err(|e| Error::InvalidParameter(format!("cannot write {name}: {e}"))).op("output")
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf).op("output")?;
    Ok(buf)
}

fn cmd_analyze(args: CommonArgs, sink: &mut Sink) -> CliResult<()> {
    let cfg = RunConfig::load(&args.config).op("load_config")?;
    let (model, params) = cfg.model_and_params().op("validate_config")?;
    let report = analyze_report(&model, &params).op("analyze")?;
    sink.emit("analyze.json", true, to_json(&report).as_bytes())
}

fn cmd_coeffs(args: CoeffsArgs, sink: &mut Sink) -> CliResult<()> {
    let cfg = RunConfig::load(&args.common.config).op("load_config")?;
    let (model, params) = cfg.model_and_params().op("validate_config")?;
    let o = &cfg.options;
    let n_max = args.n_max.or(o.n_max).unwrap_or(100);
    let digits = args.digits.or(o.digits).unwrap_or(DEFAULT_DIGITS);
    let target = args.target.or(o.target).unwrap_or(Target::P2);
    let closed = args.closed_form || o.closed_form.unwrap_or(false);
    let round = args.round_digits.or(o.round_digits);

    let table = if closed {
        coeffs_closed_noqueue_with(&params, &model, target, n_max, digits).op("coeffs_closed_noqueue")?
    } else {
        let mut oc = OracleConfig::new(n_max, digits);
        if let Some(r) = o.radius_factor {
            oc.radius_factor = r;
        }
        oc.points = o.points;
        coeffs_contour_with(&params, &model, target, oc).op("coeffs_contour")?
    };

    // the law is optional: a failed analysis still leaves usable coefficients
    let law = match analyze(&params, &model) {
        Ok(a) => match target {
            Target::Q => a.laws.q,
            Target::R => Some(a.laws.r),
            Target::P2 => Some(a.laws.p2),
        },
        Err(e) => {
            let _ = writeln!(sink.stderr, "warning: no asymptotic law for the ratio report: {e}");
            None
        }
    };
    let ratio = law.as_ref().map(|l| ratio_report(&table, l));

    let name = format!("coeffs_{target}.csv");
    let bytes = match round {
        Some(d) => csv_bytes(|b| write_rounded_csv(&table, d, b))?,
        None => csv_bytes(|b| table.write_csv(b))?,
    };
    sink.emit(&name, true, &bytes)?;
    if let Some(rep) = &ratio {
        if sink.dir.is_some() {
            let bytes = csv_bytes(|b| write_ratio_csv(rep, b))?;
            sink.emit(&format!("ratio_{target}.csv"), false, &bytes)?;
        }
    }
    let summary = CoeffsSummary {
        command: "coeffs",
        method: if closed { "closed_form" } else { "contour" },
        target,
        n_max,
        digits,
        radius: table.radius,
        points: table.points,
        reach: table.reach(),
        first_unusable: table.first_unusable(),
        est_abs_error: table.est_abs_error(),
        law,
        tail_max_deviation: ratio.as_ref().and_then(|r| r.tail_max_deviation),
        sum: sci_string(&table.sum().0, 20),
    };
    sink.emit(&format!("coeffs_{target}.json"), false, to_json(&summary).as_bytes())
}

fn cmd_simulate(args: SimArgs, sink: &mut Sink) -> CliResult<()> {
    let cfg = RunConfig::load(&args.common.config).op("load_config")?;
    let (model, params) = cfg.model_and_params().op("validate_config")?;
    let o = &cfg.options;
    let seed = args.seed.or(o.seed).unwrap_or(1);
    let mut sc = SimConfig::new(params, model, seed);
    if let Some(w) = o.warmup_events {
        sc.warmup_events = w;
    }
    if let Some(m) = args.measure_events.or(o.measure_events) {
        sc.measure_events = m;
    }
    if let Some(b) = o.batches {
        sc.batches = b;
    }
    if let Some(c) = o.n_cap {
        sc.n_cap = c;
    }
    let reps = args.replications.or(o.replications).unwrap_or(1).max(1);
    let seeds: Vec<u64> = (0..reps as u64).map(|k| seed.wrapping_add(k)).collect();
    let dist: EmpiricalDist = simulate_replications(&sc, &seeds).op("simulate")?;
    let bytes = csv_bytes(|b| dist.write_csv(b))?;
    sink.emit("simulate.csv", true, &bytes)?;
    let summary = SimSummary {
        command: "simulate",
        seeds,
        rho: params.rho(),
        utilization: dist.utilization,
        utilization_hw: dist.utilization_hw,
        blocked_fraction: dist.blocked_fraction,
        blocked_hw: dist.blocked_hw,
        overflow: dist.overflow,
        batches: dist.batches,
        measured_events: dist.measured_events,
        measured_time: dist.measured_time,
        warnings: dist.warnings.clone(),
    };
    sink.emit("simulate.json", false, to_json(&summary).as_bytes())
}

fn cmd_regime_map(args: RegimeArgs, sink: &mut Sink) -> CliResult<()> {
    let mut grid = GridSpec::default();
    if let Some(path) = &args.config {
        let cfg = RunConfig::load(path).op("load_config")?;
        if let Some(g) = cfg.grid {
            grid = g;
        }
        if let Some(kind) = cfg.service {
            match kind {
                ServiceKind::Exponential { mu } => grid.mu = mu,
                other => {
                    return Err(Error::UnsupportedKind(format!("regime map needs exponential service, got {other:?}")))
                        .op("validate_config")
                }
            }
        }
    }
    if let Some(mu) = args.mu {
        grid.mu = mu;
    }
    if let Some(g) = &args.grid {
        grid = GridSpec::parse_flag(g, grid).op("validate_config")?;
    }
    let run = || regime_map(&grid);
    let (rows, meta) = match args.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))
            .op("regime_map")?
            .install(run),
        None => run(),
    }
    .op("regime_map")?;
    let bytes = csv_bytes(|b| write_regime_csv(&rows, b))?;
    sink.emit("regime_map.csv", true, &bytes)?;
    sink.emit("regime_map.json", false, to_json(&meta).as_bytes())
}

fn cmd_validate(args: ValidateArgs, sink: &mut Sink) -> CliResult<()> {
    let report = validate_suite(&args.scenarios).op("validate")?;
    sink.emit("validate.json", true, to_json(&report).as_bytes())?;
    if !report.pass {
        let failed: Vec<String> = report
            .scenarios
            .iter()
            .filter(|s| !s.pass)
            .map(|s| {
                let checks: Vec<&str> = s.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
                format!("{} ({})", s.name, checks.join(", "))
            })
            .collect();
        return Err(Error::NoConvergence(format!("failing scenarios: {}", failed.join("; ")))).op("validate");
    }
    Ok(())
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(stderr, "{e}") } else { write!(stdout, "{e}") };
            return code;
        }
    };
    let res = (|| {
        let out = match &cli.command {
            Command::Analyze(a) => a.out.clone(),
            Command::Coeffs(a) => a.common.out.clone(),
            Command::Simulate(a) => a.common.out.clone(),
            Command::RegimeMap(a) => a.out.clone(),
            Command::Validate(a) => a.out.clone(),
        };
        let mut sink = Sink::new(out, &mut *stdout, &mut *stderr)?;
        match cli.command {
            Command::Analyze(a) => cmd_analyze(a, &mut sink),
            Command::Coeffs(a) => cmd_coeffs(a, &mut sink),
            Command::Simulate(a) => cmd_simulate(a, &mut sink),
            Command::RegimeMap(a) => cmd_regime_map(a, &mut sink),
            Command::Validate(a) => cmd_validate(a, &mut sink),
        }
    })();
    match res {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
