use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use pmono::document::ProblemDocument;
use pmono::elements::Form;
use pmono::netlist::{parse_netlist, partition_search, DerivedHybrid, Excitation, FixedChoices, Netlist};
use pmono::solver::DEFAULT_MAX_ITERS;
use pmono::timestep::{march, smooth_diodes, MarchConfig, DEFAULT_EPS};
use pmono::trajectory::Trajectory;
use pmono::{condat_vu_solve, Error, Grid, Problem, SolverConfig, Waveform};

mod plot;

/// Periodic steady state of monotone circuits by primal-dual splitting.
#[derive(Parser)]
#[command(name = "pmono", version)]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the periodic steady state.
    Solve(SolveArgs),
    /// Derive the interconnection of a netlist and write a problem document.
    Compile(CompileArgs),
    /// March in time from rest with backward Euler (cross-check).
    Simulate(SimulateArgs),
    /// Plot CSV columns against time as SVG.
    Plot(PlotArgs),
}

/// `name=Z|Y` for elements, `name=V|I` for ports.
#[derive(Clone, Debug)]
enum Pin {
    Form(String, Form),
    Excite(String, Excitation),
}

impl FromStr for Pin {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (name, choice) = s.split_once('=').ok_or(format!("expected NAME=CHOICE, got '{s}'"))?;
        let name = name.trim().to_string();
        match choice.trim().to_ascii_uppercase().as_str() {
            "Z" => Ok(Pin::Form(name, Form::Impedance)),
            "Y" => Ok(Pin::Form(name, Form::Admittance)),
            "V" => Ok(Pin::Excite(name, Excitation::Voltage)),
            "I" => Ok(Pin::Excite(name, Excitation::Current)),
            other => Err(format!("'{other}' is not one of Z, Y, V, I")),
        }
    }
}

/// `port=WAVEFORM`, e.g. `p=sine:240:50`.
#[derive(Clone, Debug)]
struct WaveArg {
    port: String,
    wave: Waveform,
}

impl FromStr for WaveArg {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (port, wave) = s.split_once('=').ok_or(format!("expected PORT=WAVEFORM, got '{s}'"))?;
        Ok(WaveArg {
            port: port.trim().to_string(),
            wave: wave.parse().map_err(|e: Error| e.to_string())?,
        })
    }
}

#[derive(Args)]
struct Source {
    /// Problem document (JSON).
    #[arg(long, required_unless_present = "netlist", conflicts_with = "netlist")]
    problem: Option<PathBuf>,
    /// Netlist; the partition is searched for.
    #[arg(long)]
    netlist: Option<PathBuf>,
    /// Pinned choices, `name=Z|Y|V|I`, comma separated.
    #[arg(long, value_delimiter = ',')]
    partition: Vec<Pin>,
    /// Samples per period (overrides the document).
    #[arg(long)]
    samples: Option<usize>,
    /// Sample spacing in seconds (overrides the document).
    #[arg(long)]
    dt: Option<f64>,
    /// Port excitation `port=sine:AMP:HZ[:PHASE] | const:LEVEL | table:V0,V1,..`.
    #[arg(long = "wave")]
    waves: Vec<WaveArg>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Run even if tau*sigma*|M|^2 >= 1.
    #[arg(long)]
    force_steps: bool,
    /// CSV trajectory; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Residual log, `iteration,residual` lines.
    #[arg(long)]
    residuals: Option<PathBuf>,
    /// SVG plot of excitations and responses.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct CompileArgs {
    #[arg(long)]
    netlist: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    partition: Vec<Pin>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "wave")]
    waves: Vec<WaveArg>,
    /// Print the hybrid matrix with its variable labels.
    #[arg(long)]
    print_hybrid: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: Source,
    /// Periods to march.
    #[arg(long, default_value_t = 50)]
    periods: usize,
    /// Ideal diode smoothing: on-resistance and off-conductance.
    #[arg(long, default_value_t = DEFAULT_EPS)]
    smooth: f64,
    /// Fixed per-step tau (default: adaptive).
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Per-step tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Per-step iteration cap.
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    plot: Option<PathBuf>,
}

/// `column=FACTOR`, factor a number or `1/N`.
#[derive(Clone, Debug)]
struct Scale {
    column: String,
    factor: f64,
    legend: String,
}

impl FromStr for Scale {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (column, text) = s.split_once('=').ok_or(format!("expected COLUMN=FACTOR, got '{s}'"))?;
        let (column, text) = (column.trim().to_string(), text.trim());
        let number = |t: &str| -> std::result::Result<f64, String> {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v != 0.0)
                .ok_or(format!("bad scale factor '{t}'"))
        };
        let (factor, legend) = match text.split_once('/') {
            Some((num, den)) => {
                let f = number(num)? / number(den)?;
                let legend = if num.trim() == "1" {
                    format!("{column}/{}", den.trim())
                } else {
                    format!("{}{column}/{}", num.trim(), den.trim())
                };
                (f, legend)
            }
            None => (number(text)?, format!("{text}{column}")),
        };
        Ok(Scale { column, factor, legend })
    }
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    csv: PathBuf,
    /// Columns to draw, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    columns: Vec<String>,
    /// Output SVG.
    #[arg(long)]
    out: PathBuf,
    /// Scale a column before drawing, `col=24` or `col=1/24` (repeatable).
    #[arg(long)]
    scale: Vec<Scale>,
    #[arg(long)]
    title: Option<String>,
}

/// Attaches the file name to located diagnostics.
fn located(path: &Path, e: Error) -> anyhow::Error {
    match e {
        Error::Parse(p) => anyhow!("{}:{}:{}: {}", path.display(), p.line, p.column, p.message),
        other => anyhow!("{}: {other}", path.display()),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_netlist(path: &Path) -> Result<Netlist> {
    parse_netlist(&read(path)?).map_err(|e| located(path, e.into()))
}

fn choices(netlist: &Netlist, pins: &[Pin]) -> FixedChoices {
    let mut fixed = FixedChoices::default();
    for pin in pins {
        match pin {
            Pin::Form(n, f) => {
                fixed.forms.insert(n.clone(), *f);
            }
            Pin::Excite(n, x) => {
                fixed.excitations.insert(n.clone(), *x);
            }
        }
    }
    fixed.over(netlist)
}

fn derive(netlist: &Netlist, pins: &[Pin]) -> Result<DerivedHybrid> {
    let d = partition_search(netlist, &choices(netlist, pins))?;
    info!("partition {}", d.partition.describe(netlist));
    Ok(d)
}

fn grid_from(samples: Option<usize>, dt: Option<f64>) -> Result<Option<Grid>> {
    match (samples, dt) {
        (Some(n), Some(dt)) => Ok(Some(Grid::new(n, dt)?)),
        (None, None) => Ok(None),
        _ => bail!("--samples and --dt go together"),
    }
}

fn waves(args: &[WaveArg]) -> Vec<(String, Waveform)> {
    args.iter().map(|w| (w.port.clone(), w.wave.clone())).collect()
}

fn load_problem(src: &Source) -> Result<Problem> {
    if let Some(path) = &src.netlist {
        let netlist = load_netlist(path)?;
        let d = derive(&netlist, &src.partition)?;
        let grid = grid_from(src.samples, src.dt)?
            .ok_or_else(|| anyhow!("a netlist needs --samples and --dt"))?;
        return Ok(d.problem(&netlist, grid, &waves(&src.waves))?);
    }
    let path = src.problem.as_ref().expect("clap requires a source");
    if !src.partition.is_empty() {
        bail!("--partition applies to netlists only");
    }
    let mut doc = ProblemDocument::from_json(&read(path)?).map_err(|e| located(path, e))?;
    if let Some(grid) = grid_from(src.samples, src.dt)? {
        doc.grid = Some(pmono::document::GridSpec {
            samples: grid.samples(),
            dt: grid.dt(),
        });
    }
    for w in &src.waves {
        let slot = doc
            .excitations
            .iter_mut()
            .find(|e| e.port == w.port)
            .ok_or_else(|| anyhow!("{}: no excitation for port '{}' to replace", path.display(), w.port))?;
        slot.waveform = w.wave.clone();
    }
    doc.to_problem().map_err(|e| located(path, e))
}

fn write_trajectory(t: &Trajectory, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            let file = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            t.write(io::BufWriter::new(file))?;
        }
        None => t.write(io::stdout().lock())?,
    }
    Ok(())
}

fn plot_ports(path: &Path, title: &str, t: &Trajectory, prob: &Problem) -> Result<()> {
    let series = prob
        .u_labels()
        .iter()
        .chain(&prob.y_labels)
        .map(|l| plot::Series {
            label: l.clone(),
            values: t.column(l).expect("port columns are written").to_vec(),
        })
        .collect::<Vec<_>>();
    plot::write_svg(path, title, &t.times, &series)
}

/// Paths written, for the run report.
fn report(what: &str, start: Instant, lines: &[String], paths: &[&Option<PathBuf>]) {
    let mut err = io::stderr().lock();
    let _ = writeln!(err, "{what}: {}", lines.join(", "));
    for p in paths.iter().filter_map(|p| p.as_ref()) {
        let _ = writeln!(err, "  wrote {}", p.display());
    }
    let _ = writeln!(err, "  wall time {:.3} s", start.elapsed().as_secs_f64());
}

fn cmd_solve(args: &SolveArgs) -> Result<ExitCode> {
    let start = Instant::now();
    let prob = load_problem(&args.source)?;
    let mut cfg = SolverConfig::for_problem(&prob);
    cfg.tau = args.tau.unwrap_or(cfg.tau);
    cfg.sigma = args.sigma.unwrap_or(cfg.sigma);
    cfg.tol = args.tol.unwrap_or(cfg.tol);
    cfg.max_iters = args.max_iters.unwrap_or(DEFAULT_MAX_ITERS);
    cfg.force_steps = args.force_steps;
    let result = condat_vu_solve(&prob, &cfg)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    let t = Trajectory::from_solution(&prob, &result)?;
    write_trajectory(&t, args.out.as_deref())?;
    if let Some(path) = &args.residuals {
        let file = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        result.write_residual_log(io::BufWriter::new(file))?;
    }
    if let Some(path) = &args.plot {
        plot_ports(path, "periodic steady state", &t, &prob)?;
    }
    let residual = result.final_residual().map_or("none".into(), |r| format!("{r:e}"));
    report(
        "solve",
        start,
        &[
            format!("converged={}", result.converged),
            format!("iterations={}", result.iterations),
            format!("residual={residual}"),
        ],
        &[&args.out, &args.residuals, &args.plot],
    );
    Ok(if result.converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn print_hybrid(d: &DerivedHybrid) {
    let mut out = io::stdout().lock();
    let width = 12;
    let _ = write!(out, "{:>8}", "");
    for v in &d.inputs {
        let _ = write!(out, "{:>width$}", v.label());
    }
    let _ = writeln!(out);
    for (r, v) in d.outputs.iter().enumerate() {
        let _ = write!(out, "{:>8}", v.label());
        for c in 0..d.inputs.len() {
            let _ = write!(out, "{:>width$.6}", d.hybrid.h[(r, c)]);
        }
        let _ = writeln!(out);
    }
}

fn cmd_compile(args: &CompileArgs) -> Result<ExitCode> {
    let start = Instant::now();
    let netlist = load_netlist(&args.netlist)?;
    let d = derive(&netlist, &args.partition)?;
    if args.print_hybrid {
        print_hybrid(&d);
    }
    let grid = grid_from(args.samples, args.dt)?;
    let doc = ProblemDocument::from_derived(&netlist, &d, grid, &waves(&args.waves))?;
    doc.save(&args.out)
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    report(
        "compile",
        start,
        &[format!("partition {}", d.partition.describe(&netlist))],
        &[&Some(args.out.clone())],
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<ExitCode> {
    let start = Instant::now();
    let prob = smooth_diodes(&load_problem(&args.source)?, args.smooth)?;
    let mut cfg = MarchConfig::new(args.periods);
    cfg.tau = args.tau;
    cfg.sigma = args.sigma;
    cfg.tol = args.tol.unwrap_or(cfg.tol);
    cfg.max_iters = args.max_iters.unwrap_or(cfg.max_iters);
    let m = match march(&prob, &cfg) {
        Ok(m) => m,
        Err(Error::StepNotConverged { step }) => {
            eprintln!("error: time step {step} did not converge");
            return Ok(ExitCode::from(2));
        }
        Err(e) => return Err(e.into()),
    };
    let t = Trajectory::from_bundles(prob.grid, &[&prob.u, &m.y, &m.i, &m.v], true)?;
    write_trajectory(&t, args.out.as_deref())?;
    if let Some(path) = &args.plot {
        plot_ports(path, "backward Euler, final period", &t, &prob)?;
    }
    report(
        "simulate",
        start,
        &[
            format!("steps={}", m.steps),
            format!("iterations={}", m.total_iterations),
            format!("worst step={}", m.max_step_iterations),
        ],
        &[&args.out, &args.plot],
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_plot(args: &PlotArgs) -> Result<ExitCode> {
    let t = Trajectory::parse(&read(&args.csv)?).map_err(|e| located(&args.csv, e))?;
    for s in &args.scale {
        if !args.columns.contains(&s.column) {
            bail!("--scale names '{}', which is not among --columns", s.column);
        }
    }
    let mut series = Vec::new();
    for name in &args.columns {
        let values = t.column(name).ok_or_else(|| {
            anyhow!("{}: unknown column '{name}' (have: {})", args.csv.display(), t.labels.join(", "))
        })?;
        let scale = args.scale.iter().find(|s| &s.column == name);
        series.push(plot::Series {
            label: scale.map_or(name.clone(), |s| s.legend.clone()),
            values: values.iter().map(|v| v * scale.map_or(1.0, |s| s.factor)).collect(),
        });
    }
    let title = args.title.clone().unwrap_or_else(|| args.csv.display().to_string());
    plot::write_svg(&args.out, &title, &t.times, &series)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let outcome = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Compile(a) => cmd_compile(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Plot(a) => cmd_plot(a),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(1)
    })
}
