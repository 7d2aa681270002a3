//! Command-line front end.
//!
//! Loads a scenario description from JSON, applies flag overrides, and
//! dispatches to the formula engine, the transform inversion, or the
//! Monte Carlo simulator. Results are written as CSV with a header row
//! and values printed to 12 significant digits. Exit codes: 0 success,
//! 2 invalid scenario or flags, 3 numerical failure, 4 verify-suite
//! failure.

use std::fs;
use std::io::Write as IoWrite;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::engine::{Engine, TwoBarrierQuery};
use crate::error::Error;
use crate::inversion::{kappa_cdf_on_grid, InversionSpec};
use crate::model::{build_model, DiffusionModel, ModelParams, Sign};
use crate::montecarlo::{estimate, simulate, Functional, SimConfig, SimScenario};
use crate::numerics::ToleranceSpec;

const EXIT_OK: i32 = 0;
const EXIT_USAGE: i32 = 2;
const EXIT_NUMERICAL: i32 = 3;
const EXIT_VERIFY: i32 = 4;

#[derive(Parser)]
#[command(
    name = "parisian",
    version,
    about = "Parisian stopping time distributions for one-dimensional diffusions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Two-barrier transform with position weights, with its factors.
    Transform(CommonArgs),
    /// Joint Laplace transform of the ordered pair of Parisian times.
    Pair(CommonArgs),
    /// Pair transform with both windows attached to one barrier.
    OneBarrier(CommonArgs),
    /// Probability that the upper Parisian time comes first.
    OrderProb(CommonArgs),
    /// Probability that the lower Parisian time is finite.
    Ruin(CommonArgs),
    /// Meander endpoint expectations at the Parisian times.
    Meander(CommonArgs),
    /// Distribution function of the lower Parisian time on a time grid.
    InvertCdf(CommonArgs),
    /// Monte Carlo estimates for the scenario.
    Simulate(CommonArgs),
    /// Formula-versus-simulation comparison table for the scenario.
    Verify(CommonArgs),
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::Transform(a)
            | Command::Pair(a)
            | Command::OneBarrier(a)
            | Command::OrderProb(a)
            | Command::Ruin(a)
            | Command::Meander(a)
            | Command::InvertCdf(a)
            | Command::Simulate(a)
            | Command::Verify(a) => a,
        }
    }
}

#[derive(Args, Clone, Debug, Default)]
struct CommonArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Rate attached to the lower Parisian time.
    #[arg(long)]
    gamma: Option<f64>,
    /// Rate attached to the upper Parisian time.
    #[arg(long)]
    lambda: Option<f64>,
    /// Lower barrier.
    #[arg(long)]
    a: Option<f64>,
    /// Upper barrier.
    #[arg(long)]
    b: Option<f64>,
    /// Starting point.
    #[arg(long)]
    x: Option<f64>,
    /// Window below the lower barrier.
    #[arg(long)]
    u: Option<f64>,
    /// Window above the upper barrier.
    #[arg(long)]
    v: Option<f64>,
    /// Simulator seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of simulated paths.
    #[arg(long = "n-paths")]
    n_paths: Option<usize>,
    /// Simulator time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Named weight functions applied to the position at a Parisian time.
/// Restricted to a built-in set so every weight is bounded or continuous
/// by construction.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    One,
    /// |z - level|.
    IdentityDistance,
    /// 1 when z is below the threshold.
    IndicatorBelowThreshold { threshold: f64 },
    /// |z - level|^exponent, exponent >= 0.
    Power { exponent: f64 },
}

impl WeightSpec {
    pub fn function(&self, level: f64) -> Box<dyn Fn(f64) -> f64 + Sync + '_> {
        match self {
            WeightSpec::One => Box::new(|_| 1.0),
            WeightSpec::IdentityDistance => Box::new(move |z| (z - level).abs()),
            WeightSpec::IndicatorBelowThreshold { threshold } => {
                let th = *threshold;
                Box::new(move |z| if z < th { 1.0 } else { 0.0 })
            }
            WeightSpec::Power { exponent } => {
                let p = *exponent;
                Box::new(move |z| (z - level).abs().powf(p))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuerySection {
    a: Option<f64>,
    b: Option<f64>,
    x: Option<f64>,
    u: Option<f64>,
    v: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimSection {
    n_paths: Option<usize>,
    dt: Option<f64>,
    horizon: Option<f64>,
    seed: Option<u64>,
    bridge: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    model: ModelParams,
    #[serde(default)]
    query: QuerySection,
    gamma: Option<f64>,
    lambda: Option<f64>,
    alpha: Option<WeightSpec>,
    beta: Option<WeightSpec>,
    t_grid: Option<Vec<f64>>,
    node_count: Option<usize>,
    sim: Option<SimSection>,
}

/// Scenario after merging the file with flag overrides; field-level
/// requirements are checked per subcommand.
struct Scenario {
    model: DiffusionModel,
    a: Option<f64>,
    b: Option<f64>,
    x: Option<f64>,
    u: Option<f64>,
    v: Option<f64>,
    gamma: Option<f64>,
    lambda: Option<f64>,
    alpha: WeightSpec,
    beta: WeightSpec,
    t_grid: Option<Vec<f64>>,
    node_count: usize,
    sim: SimConfig,
}

/// A scenario or flag problem: reported with the offending field and
/// mapped to exit code 2.
struct UsageError(String);

impl Scenario {
    fn load(args: &CommonArgs) -> Result<Self, UsageError> {
        let path = args
            .scenario
            .as_ref()
            .ok_or_else(|| UsageError("--scenario <path> is required".into()))?;
        let text = fs::read_to_string(path)
            .map_err(|e| UsageError(format!("scenario file {}: {e}", path.display())))?;
        let file: ScenarioFile = serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("scenario file {}: {e}", path.display())))?;
        let model = build_model(file.model)
            .map_err(|e| UsageError(format!("scenario field model: {e}")))?;
        let sim = file.sim.as_ref();
        let sim = SimConfig {
            n_paths: args
                .n_paths
                .or(sim.and_then(|s| s.n_paths))
                .unwrap_or(10_000),
            dt: args.dt.or(sim.and_then(|s| s.dt)).unwrap_or(1e-3),
            horizon: sim.and_then(|s| s.horizon).unwrap_or(1e3),
            seed: args.seed.or(sim.and_then(|s| s.seed)).unwrap_or(0),
            bridge: sim.and_then(|s| s.bridge).unwrap_or(true),
        };
        Ok(Scenario {
            model,
            a: args.a.or(file.query.a),
            b: args.b.or(file.query.b),
            x: args.x.or(file.query.x),
            u: args.u.or(file.query.u),
            v: args.v.or(file.query.v),
            gamma: args.gamma.or(file.gamma),
            lambda: args.lambda.or(file.lambda),
            alpha: file.alpha.unwrap_or(WeightSpec::One),
            beta: file.beta.unwrap_or(WeightSpec::One),
            t_grid: file.t_grid,
            node_count: file.node_count.unwrap_or(32),
            sim,
        })
    }

    fn need(&self, field: &str) -> Result<f64, UsageError> {
        let value = match field {
            "a" => self.a,
            "b" => self.b,
            "x" => self.x,
            "u" => self.u,
            "v" => self.v,
            "gamma" => self.gamma,
            "lambda" => self.lambda,
            _ => unreachable!(),
        };
        value.ok_or_else(|| {
            UsageError(format!(
                "field {field} is required (set it in the scenario file or pass --{field})"
            ))
        })
    }

    fn two_barrier(&self) -> Result<TwoBarrierQuery, UsageError> {
        let q = TwoBarrierQuery::new(
            &self.model,
            self.need("a")?,
            self.need("b")?,
            self.need("x")?,
            self.need("u")?,
            self.need("v")?,
        );
        q.map_err(|e| UsageError(format!("query: {e}")))
    }

    fn t_grid(&self) -> Result<&[f64], UsageError> {
        self.t_grid
            .as_deref()
            .ok_or_else(|| UsageError("field t_grid is required in the scenario file".into()))
    }
}

/// Formats a value with 12 significant digits, fixed-point where that
/// stays readable and scientific otherwise.
pub fn fmt12(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0.000000000000".into();
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        format!("{:.*}", (11 - exp).max(12) as usize, v)
    } else {
        format!("{:.11e}", v)
    }
}

struct Table {
    header: &'static str,
    rows: Vec<String>,
}

impl Table {
    fn new(header: &'static str) -> Self {
        Table { header, rows: Vec::new() }
    }

    fn value(&mut self, quantity: &str, value: f64) {
        self.rows.push(format!("{quantity},{},", fmt12(value)));
    }

    fn value_with_error(&mut self, quantity: &str, value: f64, std_error: f64) {
        self.rows
            .push(format!("{quantity},{},{}", fmt12(value), fmt12(std_error)));
    }

    fn write(&self, out: Option<&Path>) -> Result<(), UsageError> {
        let mut text = String::from(self.header);
        text.push('\n');
        for row in &self.rows {
            text.push_str(row);
            text.push('\n');
        }
        match out {
            Some(path) => fs::write(path, text)
                .map_err(|e| UsageError(format!("output file {}: {e}", path.display()))),
            None => {
                print!("{text}");
                std::io::stdout()
                    .flush()
                    .map_err(|e| UsageError(format!("stdout: {e}")))
            }
        }
    }
}

fn numerical_exit(e: &Error) -> i32 {
    match e {
        Error::Domain(_) => EXIT_USAGE,
        _ => EXIT_NUMERICAL,
    }
}

/// Entry point; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    let scenario = match Scenario::load(cli.command.args()) {
        Ok(s) => s,
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };
    let out = cli.command.args().out.clone();
    let result = match &cli.command {
        Command::Transform(_) => cmd_transform(&scenario),
        Command::Pair(_) => cmd_pair(&scenario),
        Command::OneBarrier(_) => cmd_one_barrier(&scenario),
        Command::OrderProb(_) => cmd_order_prob(&scenario),
        Command::Ruin(_) => cmd_ruin(&scenario),
        Command::Meander(_) => cmd_meander(&scenario),
        Command::InvertCdf(_) => cmd_invert_cdf(&scenario),
        Command::Simulate(_) => cmd_simulate(&scenario),
        Command::Verify(_) => cmd_verify(&scenario),
    };
    match result {
        Ok((table, code)) => match table.write(out.as_deref()) {
            Ok(()) => code,
            Err(UsageError(msg)) => {
                eprintln!("error: {msg}");
                EXIT_USAGE
            }
        },
        Err(CmdError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CmdError::Numerical(e)) => {
            eprintln!("error: {e}");
            numerical_exit(&e)
        }
    }
}

/// Caps the simulator worker pool; 0 or unset means all cores.
fn configure_threads() {
    if let Ok(raw) = std::env::var("PARISIAN_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            if n > 0 {
                // Ignored if a global pool already exists.
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

enum CmdError {
    Usage(String),
    Numerical(Error),
}

impl From<UsageError> for CmdError {
    fn from(e: UsageError) -> Self {
        CmdError::Usage(e.0)
    }
}

impl From<Error> for CmdError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(msg) => CmdError::Usage(msg),
            other => CmdError::Numerical(other),
        }
    }
}

type CmdResult = Result<(Table, i32), CmdError>;

fn engine(sc: &Scenario) -> Engine<'_> {
    Engine::new(&sc.model, ToleranceSpec::default())
}

fn cmd_transform(sc: &Scenario) -> CmdResult {
    let q = sc.two_barrier()?;
    let (gamma, lambda) = (sc.need("gamma")?, sc.need("lambda")?);
    let alpha = sc.alpha.function(q.a);
    let beta = sc.beta.function(q.b);
    let tv = engine(sc).quadruple_transform(&q, gamma, lambda, &*alpha, &*beta)?;
    let mut t = Table::new("quantity,value,std_error");
    t.value("quadruple_transform", tv.value);
    t.value("prefactor", tv.breakdown.prefactor);
    t.value("wronskian_ratio", tv.breakdown.wronskian_ratio);
    t.value("plus_tail", tv.breakdown.plus_tail);
    t.value("kappa_transform", tv.breakdown.kappa);
    t.value("denominator", tv.breakdown.denominator);
    t.value("meander_minus", tv.breakdown.meander_minus);
    t.value("meander_plus", tv.breakdown.meander_plus);
    t.value("bracket", tv.breakdown.bracket);
    Ok((t, EXIT_OK))
}

fn cmd_pair(sc: &Scenario) -> CmdResult {
    let q = sc.two_barrier()?;
    let value = engine(sc).pair_laplace(&q, sc.need("gamma")?, sc.need("lambda")?)?;
    let mut t = Table::new("quantity,value,std_error");
    t.value("pair_laplace", value);
    Ok((t, EXIT_OK))
}

fn cmd_one_barrier(sc: &Scenario) -> CmdResult {
    let value = engine(sc).one_barrier_pair_laplace(
        sc.need("b")?,
        sc.need("u")?,
        sc.need("v")?,
        sc.need("gamma")?,
        sc.need("lambda")?,
    )?;
    let mut t = Table::new("quantity,value,std_error");
    t.value("one_barrier_laplace", value);
    Ok((t, EXIT_OK))
}

fn cmd_order_prob(sc: &Scenario) -> CmdResult {
    let q = sc.two_barrier()?;
    let value = engine(sc).order_probability(&q)?;
    let mut t = Table::new("quantity,value,std_error");
    t.value("order_probability", value);
    Ok((t, EXIT_OK))
}

fn cmd_ruin(sc: &Scenario) -> CmdResult {
    let a = sc.need("a")?;
    let x = sc.x.unwrap_or(a);
    let value = engine(sc).ruin_probability(x, a, sc.need("u")?)?;
    let mut t = Table::new("quantity,value,std_error");
    t.value("ruin_probability", value);
    Ok((t, EXIT_OK))
}

fn cmd_meander(sc: &Scenario) -> CmdResult {
    let e = engine(sc);
    let mut t = Table::new("quantity,value,std_error");
    let minus = sc.a.zip(sc.u);
    let plus = sc.b.zip(sc.v);
    if minus.is_none() && plus.is_none() {
        return Err(CmdError::Usage(
            "meander needs fields a and u (down meander) or b and v (up meander)".into(),
        ));
    }
    if let Some((a, u)) = minus {
        let alpha = sc.alpha.function(a);
        t.value(
            "meander_minus_expectation",
            e.meander_expectation(Sign::Minus, a, u, &*alpha)?,
        );
    }
    if let Some((b, v)) = plus {
        let beta = sc.beta.function(b);
        t.value(
            "meander_plus_expectation",
            e.meander_expectation(Sign::Plus, b, v, &*beta)?,
        );
    }
    Ok((t, EXIT_OK))
}

fn cmd_invert_cdf(sc: &Scenario) -> CmdResult {
    let a = sc.need("a")?;
    let x = sc.x.unwrap_or(a);
    let u = sc.need("u")?;
    let spec = InversionSpec::new(sc.node_count, sc.t_grid()?.to_vec())?;
    let e = engine(sc);
    let grid = kappa_cdf_on_grid(&e, x, a, u, &spec)?;
    if grid.max_excursion > 1e-6 {
        eprintln!(
            "warning: inverted distribution left [0, 1] by {:.3e} before clamping",
            grid.max_excursion
        );
    }
    let mut t = Table::new("t,cdf");
    for (time, cdf) in grid.points {
        t.rows.push(format!("{},{}", fmt12(time), fmt12(cdf)));
    }
    Ok((t, EXIT_OK))
}

fn sim_scenario(sc: &Scenario) -> Result<SimScenario, UsageError> {
    let a = sc.need("a")?;
    let b = sc.need("b")?;
    Ok(SimScenario {
        a,
        b,
        start: sc.need("x")?,
        u: sc.need("u")?,
        v: sc.need("v")?,
    })
}

fn cmd_simulate(sc: &Scenario) -> CmdResult {
    let scenario = sim_scenario(sc)?;
    let report = simulate(&sc.model, &scenario, &sc.sim)?;
    if report.floor_hit_fraction > 1e-3 {
        eprintln!(
            "warning: positivity floor hit on {:.3e} of steps; near-boundary bias likely",
            report.floor_hit_fraction
        );
    }
    let mut t = Table::new("quantity,value,std_error");
    let order = estimate(&report.samples, &Functional::OrderProbability)?;
    t.value_with_error("order_probability", order.mean, order.std_error);
    t.value("censored_fraction", order.censored_fraction);
    if let (Some(gamma), Some(lambda)) = (sc.gamma, sc.lambda) {
        let pair = estimate(&report.samples, &Functional::PairLaplace { gamma, lambda })?;
        t.value_with_error("pair_laplace", pair.mean, pair.std_error);
    }
    if let Some(grid) = sc.t_grid.as_deref() {
        for &time in grid {
            let cdf = estimate(&report.samples, &Functional::KappaCdf { t: time })?;
            t.value_with_error(&format!("kappa_cdf(t={time})"), cdf.mean, cdf.std_error);
        }
    }
    Ok((t, EXIT_OK))
}

fn cmd_verify(sc: &Scenario) -> CmdResult {
    let q = sc.two_barrier()?;
    let (gamma, lambda) = (sc.need("gamma")?, sc.need("lambda")?);
    let e = engine(sc);
    let scenario = sim_scenario(sc)?;
    let report = simulate(&sc.model, &scenario, &sc.sim)?;
    // O(sqrt(dt)) discretization bias budget, calibrated so that
    // dt = 1e-4 is allowed 0.005 on probabilities.
    let bias = 0.5 * sc.sim.dt.sqrt();

    let mut t = Table::new("check,reference,estimate,tolerance,status");
    let mut all_ok = true;
    let mut push = |t: &mut Table, name: &str, reference: f64, est: f64, tol: f64| {
        let ok = (reference - est).abs() <= tol;
        all_ok &= ok;
        t.rows.push(format!(
            "{name},{},{},{},{}",
            fmt12(reference),
            fmt12(est),
            fmt12(tol),
            if ok { "pass" } else { "FAIL" }
        ));
    };

    let order_ref = e.order_probability(&q)?;
    let order = estimate(&report.samples, &Functional::OrderProbability)?;
    push(
        &mut t,
        "order_probability",
        order_ref,
        order.mean,
        3.0 * order.std_error + bias,
    );

    let pair_ref = e.pair_laplace(&q, gamma, lambda)?;
    let pair = estimate(&report.samples, &Functional::PairLaplace { gamma, lambda })?;
    push(
        &mut t,
        "pair_laplace",
        pair_ref,
        pair.mean,
        3.0 * pair.std_error + bias * pair_ref,
    );

    // On the ordered event the upper time and the final position below a
    // are independent, so this covariance is a z-test against zero.
    let weight = |z: f64| (z - q.a).abs();
    let cov = estimate(
        &report.samples,
        &Functional::IndependenceCovariance { rate: 1.0, weight: &weight },
    )?;
    push(
        &mut t,
        "independence_covariance",
        0.0,
        cov.mean,
        3.0 * cov.std_error,
    );

    let grid: Vec<f64> = sc
        .t_grid
        .clone()
        .unwrap_or_else(|| vec![2.0, 5.0, 10.0])
        .into_iter()
        .filter(|&time| time > q.u)
        .collect();
    if !grid.is_empty() {
        let spec = InversionSpec::new(sc.node_count, grid)?;
        let cdf_grid = kappa_cdf_on_grid(&e, q.x, q.a, q.u, &spec)?;
        for (time, cdf_ref) in cdf_grid.points {
            let cdf = estimate(&report.samples, &Functional::KappaCdf { t: time })?;
            push(
                &mut t,
                &format!("kappa_cdf(t={time})"),
                cdf_ref,
                cdf.mean,
                (3.0 * cdf.std_error).max(0.01),
            );
        }
    }

    Ok((t, if all_ok { EXIT_OK } else { EXIT_VERIFY }))
}
