//! Batch front door: config ingestion, command dispatch to the pricing
//! routes, and machine-readable CSV/JSON output.
//!
//! Exit codes are stable contracts: 0 success, 2 configuration or
//! validation failure, 3 simulation failure, 4 validity-window violation.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use delayed_claims::closedform;
use delayed_claims::mc::{price_claims_mc, McConfig};
use delayed_claims::model::{
    ClaimKind, DebtContract, FirmModel, HistoryPath, MarketParams, Method,
};
use delayed_claims::pde::{
    convergence_report, heat_value, realized_sigma, solve_claim_pde, PdeGrid,
};
use delayed_claims::riskstructure::{
    additional_debt_impact, premium_curve, write_impact_csv, write_premium_csv, CurveRequest,
};
use delayed_claims::sdde::{risk_neutral_simulate, simulate_em, Scheme, SimConfig};
use delayed_claims::Error as CoreError;

const EXIT_CONFIG: i32 = 2;
const EXIT_SIMULATION: i32 = 3;
const EXIT_WINDOW: i32 = 4;

#[derive(Parser)]
#[command(
    name = "delayed-claims",
    about = "Corporate claim pricing under delayed firm-value dynamics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a firm-value path and write it as t,V CSV rows.
    Simulate(SimulateArgs),
    /// Price one claim by a chosen route; writes a JSON object.
    Price(PriceArgs),
    /// Risk-premium table over (tau1, d) grids; writes CSV.
    Curve(CurveArgs),
    /// Closed-form default probability, optionally with the
    /// additional-debt comparison; writes JSON or CSV.
    DefaultProb(DefaultProbArgs),
    /// Finite-difference refinement study against the closed form.
    Converge(ConvergeArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Time-stepping scheme.
    #[arg(long, value_enum, default_value_t = SchemeArg::LogEuler)]
    scheme: SchemeArg,
    /// Time step in years.
    #[arg(long)]
    step: f64,
    /// Absolute end time of the simulation.
    #[arg(long)]
    horizon: f64,
    /// RNG seed (randomized commands have no wall-clock default).
    #[arg(long)]
    seed: u64,
    /// Measure to simulate under; risk-neutral always steps log-Euler.
    #[arg(long, value_enum, default_value_t = MeasureArg::Physical)]
    measure: MeasureArg,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Euler,
    LogEuler,
    ExactRepresentation,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Scheme {
        match s {
            SchemeArg::Euler => Scheme::Euler,
            SchemeArg::LogEuler => Scheme::LogEuler,
            SchemeArg::ExactRepresentation => Scheme::ExactRepresentation,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MeasureArg {
    Physical,
    RiskNeutral,
}

#[derive(Args)]
struct PriceArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Monte Carlo path count.
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    /// Monte Carlo time step (default min(l1, l2)/64).
    #[arg(long)]
    step: Option<f64>,
    /// RNG seed; required for --method mc.
    #[arg(long)]
    seed: Option<u64>,
    /// Antithetic variates for Monte Carlo.
    #[arg(long, default_value_t = false)]
    antithetic: bool,
    /// Finite-difference mesh as INTERIORxSTEPS, e.g. 400x400.
    #[arg(long, value_parser = parse_grid, default_value = "400x400")]
    grid: (usize, usize),
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Equity,
    Debt,
    Guarantee,
}

impl From<KindArg> for ClaimKind {
    fn from(k: KindArg) -> ClaimKind {
        match k {
            KindArg::Equity => ClaimKind::Equity,
            KindArg::Debt => ClaimKind::Debt,
            KindArg::Guarantee => ClaimKind::Guarantee,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Closed,
    Pde,
    Mc,
    Heat,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long)]
    config: PathBuf,
    /// Quasi-debt ratios, comma separated, ascending.
    #[arg(long, value_delimiter = ',', required = true)]
    d_grid: Vec<f64>,
    /// Maturities tau1, comma separated, ascending.
    #[arg(long, value_delimiter = ',', required = true)]
    tau_grid: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DefaultProbArgs {
    #[arg(long)]
    config: PathBuf,
    /// Additional debt face value; enables the before/after comparison.
    #[arg(long)]
    b_prime: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Mesh ladder, e.g. 50x50,100x100,200x200,400x400.
    #[arg(long, value_parser = parse_grid, value_delimiter = ',',
          default_value = "50x50,100x100,200x200,400x400")]
    ladder: Vec<(usize, usize)>,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once('x')
        .ok_or_else(|| format!("expected INTERIORxSTEPS, got `{s}`"))?;
    let n: usize = a.parse().map_err(|_| format!("bad node count `{a}`"))?;
    let m: usize = b.parse().map_err(|_| format!("bad step count `{b}`"))?;
    Ok((n, m))
}

/// One JSON document holding the model, market, contract, and history.
#[derive(Debug, Deserialize)]
struct RunConfig {
    model: FirmModel,
    market: MarketParams,
    contract: DebtContract,
    history: HistorySource,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum HistorySource {
    Inline { t0: f64, dt: f64, values: Vec<f64> },
    Csv(PathBuf),
}

struct Loaded {
    model: FirmModel,
    market: MarketParams,
    contract: DebtContract,
    history: HistoryPath,
}

struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let code = match &e {
            CoreError::WindowViolation { .. } => EXIT_WINDOW,
            CoreError::SimulationFailure { .. } => EXIT_SIMULATION,
            _ => EXIT_CONFIG,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::config(e.to_string())
    }
}

fn load_config(path: &Path) -> Result<Loaded, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::config(format!("config file {}: {e}", path.display())))?;
    let cfg: RunConfig = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| CliError::config(format!("config parse: {e}")))?;
    cfg.model.validate()?;
    cfg.market.validate()?;
    cfg.contract.validate()?;
    let history = match cfg.history {
        HistorySource::Inline { t0, dt, values } => HistoryPath::new(t0, dt, values)?,
        HistorySource::Csv(ref p) => {
            let f = File::open(p)
                .map_err(|e| CliError::config(format!("history file {}: {e}", p.display())))?;
            HistoryPath::read_csv(BufReader::new(f))?
        }
    };
    Ok(Loaded {
        model: cfg.model,
        market: cfg.market,
        contract: cfg.contract,
        history,
    })
}

/// Writes to `--out` or stdout.
fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    match out {
        Some(p) => Ok(Box::new(BufWriter::new(File::create(p).map_err(|e| {
            CliError::config(format!("output file {}: {e}", p.display()))
        })?))),
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

#[derive(Serialize)]
struct PriceJson {
    kind: ClaimKind,
    method: Method,
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    vol_integral: Option<f64>,
    /// Discretization-error estimate for mesh-based methods.
    #[serde(skip_serializing_if = "Option::is_none")]
    tolerance: Option<f64>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Price(args) => cmd_price(args),
        Command::Curve(args) => cmd_curve(args),
        Command::DefaultProb(args) => cmd_default_prob(args),
        Command::Converge(args) => cmd_converge(args),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let loaded = load_config(&args.config)?;
    let cfg = SimConfig {
        step: args.step,
        horizon: args.horizon,
        seed: args.seed,
        scheme: args.scheme.into(),
    };
    let path = match args.measure {
        MeasureArg::Physical => simulate_em(&loaded.model, &loaded.history, &cfg)?,
        MeasureArg::RiskNeutral => {
            risk_neutral_simulate(&loaded.model, &loaded.history, &loaded.market, &cfg)?
        }
    };
    path.write_csv(sink(&args.out)?)?;
    Ok(())
}

fn cmd_price(args: PriceArgs) -> Result<(), CliError> {
    let loaded = load_config(&args.config)?;
    let kind: ClaimKind = args.kind.into();
    let t = loaded.history.end_time();
    let maturity = loaded.contract.maturity;
    let v_max = 8.0 * loaded.contract.face;
    let (n_space, n_time) = args.grid;

    let json = match args.method {
        MethodArg::Closed => {
            let res = closedform::price_from_history(
                kind,
                &loaded.history,
                &loaded.model,
                &loaded.contract,
                &loaded.market,
                t,
            )?;
            PriceJson {
                kind,
                method: res.method,
                value: res.value,
                vol_integral: res.vol_integral,
                tolerance: None,
            }
        }
        MethodArg::Pde => {
            let v = loaded.history.value_at(t)?;
            let solve = |ns: usize, nt: usize| -> Result<f64, CliError> {
                let grid = PdeGrid::from_history(
                    &loaded.history,
                    &loaded.model,
                    t,
                    maturity,
                    v_max,
                    ns,
                    nt,
                    0.5,
                )?;
                let surf = solve_claim_pde(kind, &grid, &loaded.contract, &loaded.market)?;
                Ok(surf.value_at(v, t)?)
            };
            let value = solve(n_space, n_time)?;
            let coarse = solve((n_space / 2).max(16), (n_time / 2).max(8))?;
            let vol_int = delayed_claims::sdde::vol_integral(
                &loaded.history,
                &loaded.model.vol,
                loaded.model.l2,
                t,
                maturity,
            )?;
            PriceJson {
                kind,
                method: Method::Pde,
                value,
                vol_integral: Some(vol_int),
                tolerance: Some((value - coarse).abs()),
            }
        }
        MethodArg::Heat => {
            let v = loaded.history.value_at(t)?;
            let grid = PdeGrid::from_history(
                &loaded.history,
                &loaded.model,
                t,
                maturity,
                v_max,
                n_space,
                n_time,
                0.5,
            )?;
            let value = heat_value(kind, v, t, &grid, &loaded.contract, &loaded.market)?;
            let vol_int = delayed_claims::sdde::vol_integral(
                &loaded.history,
                &loaded.model.vol,
                loaded.model.l2,
                t,
                maturity,
            )?;
            PriceJson {
                kind,
                method: Method::HeatKernel,
                value,
                vol_integral: Some(vol_int),
                tolerance: None,
            }
        }
        MethodArg::Mc => {
            let seed = args.seed.ok_or_else(|| {
                CliError::config("--seed is required for --method mc (no wall-clock default)")
            })?;
            let step = args
                .step
                .unwrap_or(loaded.model.l1.min(loaded.model.l2) / 64.0);
            let cfg = McConfig {
                n_paths: args.paths,
                step,
                seed,
                antithetic: args.antithetic,
            };
            let bundle = price_claims_mc(
                &loaded.model,
                &loaded.history,
                &loaded.contract,
                &loaded.market,
                &cfg,
            )?;
            let record = bundle.record(kind, seed);
            let mut w = sink(&args.out)?;
            serde_json::to_writer_pretty(&mut w, &record)
                .map_err(|e| CliError::config(e.to_string()))?;
            writeln!(w)?;
            return Ok(());
        }
    };
    let mut w = sink(&args.out)?;
    serde_json::to_writer_pretty(&mut w, &json).map_err(|e| CliError::config(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

fn cmd_curve(args: CurveArgs) -> Result<(), CliError> {
    let loaded = load_config(&args.config)?;
    let req = CurveRequest {
        d_values: args.d_grid,
        tau_values: args.tau_grid,
    };
    let t = loaded.history.end_time();
    let points = premium_curve(&req, &loaded.history, &loaded.model, t)?;
    write_premium_csv(&points, sink(&args.out)?)?;
    Ok(())
}

fn cmd_default_prob(args: DefaultProbArgs) -> Result<(), CliError> {
    let loaded = load_config(&args.config)?;
    let t = loaded.history.end_time();
    let maturity = loaded.contract.maturity;
    let tau = maturity - t;
    if !(tau > 0.0 && tau <= loaded.model.l2 * (1.0 + 1e-12)) {
        return Err(CoreError::WindowViolation {
            tau,
            l2: loaded.model.l2,
        }
        .into());
    }
    let vol_int = delayed_claims::sdde::vol_integral(
        &loaded.history,
        &loaded.model.vol,
        loaded.model.l2,
        t,
        maturity,
    )?;
    let v = loaded.history.value_at(t)?;
    match args.b_prime {
        None => {
            let p = closedform::default_probability_from_history(
                &loaded.history,
                &loaded.model,
                &loaded.contract,
                &loaded.market,
                t,
            )?;
            #[derive(Serialize)]
            struct DefaultProbJson {
                p_default: f64,
                v: f64,
                face: f64,
                vol_integral: f64,
            }
            let mut w = sink(&args.out)?;
            serde_json::to_writer_pretty(
                &mut w,
                &DefaultProbJson {
                    p_default: p,
                    v,
                    face: loaded.contract.face,
                    vol_integral: vol_int,
                },
            )
            .map_err(|e| CliError::config(e.to_string()))?;
            writeln!(w)?;
        }
        Some(b_prime) => {
            let impact = additional_debt_impact(
                v,
                loaded.contract.face,
                b_prime,
                &loaded.market,
                t,
                maturity,
                vol_int,
            )?;
            write_impact_csv(v, loaded.contract.face, b_prime, &impact, sink(&args.out)?)?;
        }
    }
    Ok(())
}

fn cmd_converge(args: ConvergeArgs) -> Result<(), CliError> {
    let loaded = load_config(&args.config)?;
    let t = loaded.history.end_time();
    let maturity = loaded.contract.maturity;
    // realized coefficient as a function of time, window-guarded
    realized_sigma(&loaded.history, &loaded.model, t, maturity, 8)?;
    let sigma_sq = |s: f64| {
        let v = loaded
            .history
            .value_at(s - loaded.model.l2)
            .expect("window checked above");
        let g = loaded.model.vol.eval(v).expect("positive history");
        g * g
    };
    let report = convergence_report(
        args.kind.into(),
        &loaded.contract,
        &loaded.market,
        t,
        &sigma_sq,
        &args.ladder,
        args.theta,
    )?;
    report.write_csv(sink(&args.out)?)?;
    eprintln!("empirical spatial order: {:.3}", report.spatial_order);
    Ok(())
}
