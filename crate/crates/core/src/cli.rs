//! Command-line front end. Every report is wrapped in an envelope carrying the
//! tool name, version and the resolved configuration.

use crate::arith::{invariant_suite, InvariantCheck};
use crate::enumerate::{
    dyadic_counts, find_solutions, hit_profile, is_restricted, restricted_sum_ratio, FormPair,
    SearchOptions,
};
use crate::error::{Error, Result};
use crate::forms::{
    delta_window, dyadic_checkpoints, hausdorff_sum_partial, lebesgue_sum_partial, regime_report,
    serialize_height, ApproxFunction, DimensionFunction, Exponents, Height, RegimeReport,
    TabulatedPsi,
};
use crate::fractal::{critical_exponent_from_sums, estimate_dimension};
use crate::geometry::{
    c_interval_length, c_range, quasi_independence_ratio, strip_union_ball_measure, Ball,
};
use crate::pde::{scan_obstruction, solubility_advisory, Period, WaveOperatorSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

pub const TOOL: &str = "metric-forms";
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;
pub const EXIT_INTERNAL: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = TOOL, version, about = "Metric approximation by a^n x + b^m y - c^p")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads (0 = all cores); never changes results.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Regime, convergence class and dimension of (e, psi).
    Classify(ClassifyArgs),
    /// Lebesgue or Hausdorff partial sums at dyadic heights.
    Sums(SumsArgs),
    /// Solutions at a point, or the hit profile over dyadic heights.
    Solutions(SolutionsArgs),
    /// Dyadic class counts and the restricted-to-full sum ratio.
    Restricted(RestrictedArgs),
    /// Strip geometry in a ball: one pair, or the quasi-independence ratio.
    Strips(StripsArgs),
    /// Box-counting slope and the sum-based critical exponent.
    Boxdim(BoxdimArgs),
    /// Resonance scan for the wave-type operator.
    Pde(PdeArgs),
    /// Invariant suites of the arithmetic tables.
    ArithCheck(ArithArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FormArgs {
    #[arg(long, default_value_t = 1)]
    pub n: u32,
    #[arg(long, default_value_t = 1)]
    pub m: u32,
    #[arg(long, default_value_t = 1)]
    pub p: u32,
    /// Exponent of psi(r) = r^-tau.
    #[arg(long, default_value_t = 2.0)]
    pub tau: f64,
    /// `power` or `table:FILE` (two-column CSV of height, psi).
    #[arg(long, default_value = "power")]
    pub psi: String,
}

impl FormArgs {
    fn exponents(&self) -> Result<Exponents> {
        Exponents::new(self.n, self.m, self.p)
    }

    fn approx(&self) -> Result<ApproxFunction> {
        match self.psi.as_str() {
            "power" => ApproxFunction::power_law(self.tau),
            s => match s.strip_prefix("table:") {
                Some(path) => Ok(ApproxFunction::Tabulated(TabulatedPsi::from_csv_path(path.as_ref())?)),
                None => Err(Error::invalid(format!("--psi must be 'power' or 'table:FILE', got '{s}'"))),
            },
        }
    }
}

fn parse_height(s: &str) -> std::result::Result<Height, String> {
    let bad = || format!("'{s}' is not a height (use an integer or base^exp)");
    match s.split_once('^') {
        Some((base, exp)) => {
            let base: u128 = base.trim().parse().map_err(|_| bad())?;
            let exp: u32 = exp.trim().parse().map_err(|_| bad())?;
            base.checked_pow(exp).ok_or_else(|| format!("'{s}' overflows"))
        }
        None => s.trim().parse().map_err(|_| bad()),
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BallArg {
    pub x0: f64,
    pub y0: f64,
    pub r: f64,
    pub eps: f64,
}

fn parse_ball(s: &str) -> std::result::Result<BallArg, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| format!("'{s}' is not x0,y0,r,eps"))?;
    match v[..] {
        [x0, y0, r, eps] => Ok(BallArg { x0, y0, r, eps }),
        _ => Err(format!("'{s}' must have four comma-separated numbers")),
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClassifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub form: FormArgs,
    /// Dyadic exponents used to estimate the lower order of a tabulated psi.
    #[arg(long, default_value_t = 32)]
    pub r_max: u32,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SumsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub form: FormArgs,
    #[arg(long = "H", value_parser = parse_height, default_value = "2^16")]
    #[serde(rename = "H", serialize_with = "serialize_height")]
    pub h: Height,
    /// Dimension exponent; selects the Hausdorff sum when given.
    #[arg(long)]
    pub s: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolutionsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub form: FormArgs,
    #[arg(long = "H", value_parser = parse_height, default_value = "2^10")]
    #[serde(rename = "H", serialize_with = "serialize_height")]
    pub h: Height,
    #[arg(long, allow_hyphen_values = true)]
    pub x: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub y: f64,
    /// Only pairs in the restricted cone.
    #[arg(long)]
    pub restricted: bool,
    /// Drop solutions with c = 0.
    #[arg(long)]
    pub exclude_zero_c: bool,
    /// Report solution counts at dyadic heights instead of the solutions.
    #[arg(long)]
    pub profile: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RestrictedArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub form: FormArgs,
    #[arg(long = "H", value_parser = parse_height, default_value = "2^16")]
    #[serde(rename = "H", serialize_with = "serialize_height")]
    pub h: Height,
    /// Largest dyadic class index.
    #[arg(long, default_value_t = 12)]
    pub t_max: u32,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StripsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub form: FormArgs,
    #[arg(long = "H", value_parser = parse_height, default_value = "2^6")]
    #[serde(rename = "H", serialize_with = "serialize_height")]
    pub h: Height,
    #[arg(long, value_parser = parse_ball, default_value = "0.5,0.5,0.2,0.25")]
    pub ball: BallArg,
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// With --b, report the strips of this one pair.
    #[arg(long, requires = "b")]
    pub a: Option<u64>,
    #[arg(long, requires = "a")]
    pub b: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BoxdimArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub form: FormArgs,
    /// Finest box scale 2^-j.
    #[arg(long, default_value_t = 12)]
    pub j_max: u32,
    /// Height bound of the Hausdorff sums.
    #[arg(long = "H", value_parser = parse_height, default_value = "2^20")]
    #[serde(rename = "H", serialize_with = "serialize_height")]
    pub h: Height,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PdeArgs {
    /// n = m = p = 2.
    #[arg(long)]
    pub classical: bool,
    #[arg(long, default_value_t = 2)]
    pub n: u32,
    #[arg(long, default_value_t = 2)]
    pub m: u32,
    #[arg(long, default_value_t = 2)]
    pub p: u32,
    /// Periods, as decimals, fractions or sqrt:X.
    #[arg(long, requires_all = ["beta", "gamma"], conflicts_with_all = ["u", "v"])]
    pub alpha: Option<String>,
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    /// Ratios given directly.
    #[arg(long, requires = "v")]
    pub u: Option<String>,
    #[arg(long)]
    pub v: Option<String>,
    #[arg(long = "H", default_value_t = 100)]
    #[serde(rename = "H")]
    pub h: u64,
    /// Hit thresholds max(|a|,|b|)^-tau; the first also drives the advisory.
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    pub tau: Vec<f64>,
}

impl PdeArgs {
    fn spec(&self) -> Result<WaveOperatorSpec> {
        let e = if self.classical {
            Exponents::new(2, 2, 2)?
        } else {
            Exponents::new(self.n, self.m, self.p)?
        };
        let get = |v: &Option<String>| v.as_deref().map(Period::parse).transpose();
        match (get(&self.alpha)?, get(&self.beta)?, get(&self.gamma)?, get(&self.u)?, get(&self.v)?) {
            (Some(a), Some(b), Some(g), None, None) => WaveOperatorSpec::from_periods(e, a, b, g),
            (None, None, None, Some(u), Some(v)) => Ok(WaveOperatorSpec::from_ratios(e, u, v)),
            _ => Err(Error::invalid("give either --alpha --beta --gamma or --u --v")),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ArithArgs {
    /// Sieve table size.
    #[arg(long, default_value_t = 1_000_000)]
    pub limit: usize,
}

#[derive(Serialize)]
struct Envelope<'a> {
    tool: &'static str,
    version: &'static str,
    config: Value,
    result: &'a Value,
}

/// A serialized report and, for series, its CSV rendering.
struct Report {
    json: Value,
    csv: Option<Vec<Vec<String>>>,
}

impl Report {
    fn json<T: Serialize>(v: &T) -> Result<Self> {
        Ok(Self {
            json: to_value(v)?,
            csv: None,
        })
    }

    fn with_csv(mut self, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Self {
        let mut all = vec![header.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
        all.extend(rows);
        self.csv = Some(all);
        self
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Internal(format!("serialisation: {e}")))
}

fn ball_of(b: &BallArg) -> Result<Ball> {
    Ball::new(b.x0, b.y0, b.r, b.eps)
}

#[derive(Serialize)]
struct ClassifyResult {
    #[serde(flatten)]
    report: RegimeReport,
    delta_window: Option<f64>,
}

#[derive(Serialize)]
struct PairStrips {
    pair: FormPair,
    width: f64,
    c_range: crate::geometry::CRange,
    c_interval_length: f64,
    union_measure: f64,
    ball_area: f64,
}

#[derive(Serialize)]
struct SolutionProfile {
    #[serde(serialize_with = "serialize_height")]
    h: Height,
    solutions: u64,
}

#[derive(Serialize)]
struct ArithResult {
    all_passed: bool,
    checks: Vec<InvariantCheck>,
}

fn run_command(cmd: &Command) -> Result<Report> {
    match cmd {
        Command::Classify(a) => {
            let e = a.form.exponents()?;
            let report = regime_report(&e, &a.form.approx()?, a.r_max)?;
            Report::json(&ClassifyResult {
                report,
                delta_window: delta_window(&e).ok(),
            })
        }
        Command::Sums(a) => {
            let (e, psi) = (a.form.exponents()?, a.form.approx()?);
            let series = match a.s {
                Some(s) => hausdorff_sum_partial(&e, &psi, &DimensionFunction::new(s)?, a.h)?,
                None => lebesgue_sum_partial(&e, &psi, a.h)?,
            };
            let rows = series
                .heights
                .iter()
                .zip(series.partial_sums.iter().zip(&series.blocks))
                .map(|(h, (s, b))| vec![h.to_string(), s.to_string(), b.to_string()])
                .collect::<Vec<_>>();
            Ok(Report::json(&series)?.with_csv(&["h", "partial_sum", "block"], rows))
        }
        Command::Solutions(a) => {
            let (e, psi) = (a.form.exponents()?, a.form.approx()?);
            let opts = SearchOptions {
                restricted_only: a.restricted,
                exclude_zero_c: a.exclude_zero_c,
            };
            if a.profile {
                let profile: Vec<SolutionProfile> =
                    hit_profile(a.x, a.y, &e, &psi, &dyadic_checkpoints(a.h), &opts)?
                        .into_iter()
                        .map(|(h, solutions)| SolutionProfile { h, solutions })
                        .collect();
                let rows = profile
                    .iter()
                    .map(|p| vec![p.h.to_string(), p.solutions.to_string()])
                    .collect::<Vec<_>>();
                Ok(Report::json(&profile)?.with_csv(&["h", "solutions"], rows))
            } else {
                let sols = find_solutions(a.x, a.y, &e, &psi, a.h, &opts)?;
                let rows = sols
                    .iter()
                    .map(|s| {
                        vec![
                            s.a.to_string(),
                            s.b.to_string(),
                            s.c.to_string(),
                            s.h.to_string(),
                            s.residual.to_string(),
                            s.bound.to_string(),
                        ]
                    })
                    .collect::<Vec<_>>();
                Ok(Report::json(&sols)?.with_csv(&["a", "b", "c", "h", "residual", "bound"], rows))
            }
        }
        Command::Restricted(a) => {
            let (e, psi) = (a.form.exponents()?, a.form.approx()?);
            let counts = (1..=a.t_max).map(|t| dyadic_counts(&e, t)).collect::<Result<Vec<_>>>()?;
            let ratio = restricted_sum_ratio(&e, &psi, a.h)?;
            let rows = counts
                .iter()
                .map(|c| vec![c.t.to_string(), c.alpha.to_string(), c.beta.to_string()])
                .collect::<Vec<_>>();
            let ratio: Vec<Value> = ratio
                .iter()
                .map(|(h, r)| serde_json::json!({ "h": height_value(*h), "ratio": r }))
                .collect();
            Ok(Report::json(&serde_json::json!({ "dyadic_counts": counts, "sum_ratio": ratio }))?
                .with_csv(&["t", "alpha", "beta"], rows))
        }
        Command::Strips(a) => {
            let (e, psi) = (a.form.exponents()?, a.form.approx()?);
            let ball = ball_of(&a.ball)?;
            match (a.a, a.b) {
                (Some(pa), Some(pb)) => {
                    if pa == 0 || pb == 0 {
                        return Err(Error::invalid("a and b must be positive"));
                    }
                    let pair = FormPair {
                        a: pa,
                        b: pb,
                        h: e.height(pa, pb)?,
                        restricted: is_restricted(pa, pb, &e)?,
                    };
                    let width = psi.value(pair.h)?;
                    Report::json(&PairStrips {
                        pair,
                        width,
                        c_range: c_range(&pair, &e, &ball, width)?,
                        c_interval_length: c_interval_length(&pair, &e, &ball)?,
                        union_measure: strip_union_ball_measure(&pair, &e, &psi, &ball)?,
                        ball_area: ball.area(),
                    })
                }
                _ => Report::json(&quasi_independence_ratio(&e, &psi, &ball, a.h, a.samples, a.seed)?),
            }
        }
        Command::Boxdim(a) => {
            let e = a.form.exponents()?;
            let boxes = estimate_dimension(&e, a.form.tau, a.j_max)?;
            let crit = critical_exponent_from_sums(&e, &a.form.approx()?, a.h)?;
            let rows = boxes
                .scales
                .iter()
                .zip(&boxes.counts)
                .map(|(j, n)| vec![j.to_string(), n.to_string()])
                .collect::<Vec<_>>();
            Ok(Report::json(&serde_json::json!({ "box_count": boxes, "critical_exponent": crit }))?
                .with_csv(&["j", "count"], rows))
        }
        Command::Pde(a) => {
            let spec = a.spec()?;
            let scan = scan_obstruction(&spec, a.h, &a.tau)?;
            let advisory = solubility_advisory(&spec, a.h, a.tau[0])?;
            let rows = scan
                .hits
                .iter()
                .map(|h| vec![h.tau.to_string(), h.count.to_string(), h.top_band.to_string()])
                .collect::<Vec<_>>();
            Ok(Report::json(&serde_json::json!({ "scan": scan, "advisory": advisory }))?
                .with_csv(&["tau", "count", "top_band"], rows))
        }
        Command::ArithCheck(a) => {
            let checks = invariant_suite(a.limit)?;
            let rows = checks
                .iter()
                .map(|c| {
                    vec![
                        c.name.to_string(),
                        c.cases.to_string(),
                        c.violations.to_string(),
                        c.worst.to_string(),
                    ]
                })
                .collect::<Vec<_>>();
            Ok(Report::json(&ArithResult {
                all_passed: checks.iter().all(InvariantCheck::passed),
                checks,
            })?
            .with_csv(&["check", "cases", "violations", "worst"], rows))
        }
    }
}

fn height_value(h: Height) -> Value {
    to_value(&HeightCell(h)).unwrap_or(Value::Null)
}

#[derive(Serialize)]
struct HeightCell(#[serde(serialize_with = "serialize_height")] Height);

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Resource(_) | Error::Range(_) => EXIT_RESOURCE,
        Error::Internal(_) => EXIT_INTERNAL,
        _ => EXIT_VALIDATION,
    }
}

fn render(cli: &Cli, report: &Report) -> Result<Vec<u8>> {
    match cli.format {
        Format::Json => {
            let envelope = Envelope {
                tool: TOOL,
                version: env!("CARGO_PKG_VERSION"),
                config: to_value(&cli.command)?,
                result: &report.json,
            };
            let mut out = serde_json::to_vec_pretty(&envelope)
                .map_err(|e| Error::Internal(format!("serialisation: {e}")))?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let rows = report
                .csv
                .as_ref()
                .ok_or_else(|| Error::invalid("csv output is only available for series reports"))?;
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in rows {
                w.write_record(row).map_err(|e| Error::Io(e.to_string()))?;
            }
            w.into_inner().map_err(|e| Error::Io(e.to_string()))
        }
    }
}

fn execute(cli: &Cli) -> Result<Vec<u8>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Error::Resource(format!("thread pool: {e}")))?;
    let report = pool.install(|| run_command(&cli.command))?;
    render(cli, &report)
}

/// Parses `args`, runs the command and writes the report; returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let bytes = match execute(&cli) {
        Ok(b) => b,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return exit_code(&e);
        }
    };
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &bytes).map_err(|e| e.to_string()),
        None => stdout.write_all(&bytes).map_err(|e| e.to_string()),
    };
    match written {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: cannot write report: {e}");
            EXIT_RESOURCE
        }
    }
}
