//! Batch front end: `shearflow <subcommand> --config run.toml`.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::attractor::{self, ensemble_sections};
use crate::config::{parse_config, RunConfig};
use crate::plot::{self, Series};
use crate::setup::Pipeline;
use crate::simulate::{self, CheckpointSink, Trajectory};
use crate::Error;

#[derive(Debug, Parser)]
#[command(name = "shearflow", version, about = "Channel shear flow with a nonmonotone wall law")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Basis and operator identity suites.
    VerifyOperators(Common),
    /// Potential certification and mollification stability scan.
    VerifyPotential(Common),
    /// One trajectory with energy and derivative monitors.
    Simulate(Common),
    /// Ensemble run, absorbing-ball checks and attractor sections.
    Attractor(Common),
    /// Emit the constants audit.
    ConstantsAudit(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output.directory`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed (overrides `integration.seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Omit the timestamp header line from CSV outputs.
    #[arg(long)]
    pub no_timestamp: bool,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub code: String,
    pub module: String,
    pub message: String,
    pub witness: Option<f64>,
}

impl From<&Error> for ErrorReport {
    fn from(e: &Error) -> Self {
        ErrorReport { code: e.code().into(), module: e.module().into(), message: e.to_string(), witness: e.witness() }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParameter { .. } => EXIT_CONFIG,
        _ => EXIT_VIOLATION,
    }
}

struct Context {
    config: RunConfig,
    out: PathBuf,
    timestamp: bool,
}

impl Context {
    fn new(c: &Common) -> Result<Self, Error> {
        let mut config = parse_config(&c.config)?;
        if let Some(seed) = c.seed {
            config.integration.seed = seed;
        }
        let out = c.out.clone().unwrap_or_else(|| PathBuf::from(&config.output.directory));
        fs::create_dir_all(&out)?;
        fs::write(out.join("config.resolved"), config.resolved())?;
        Ok(Context { config, out, timestamp: !c.no_timestamp })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), Error> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Cache(e.to_string()))?;
        fs::write(self.path(name), text + "\n")?;
        Ok(())
    }

    fn csv(&self, name: &str) -> Result<csv::Writer<fs::File>, Error> {
        let mut f = fs::File::create(self.path(name))?;
        if self.timestamp {
            let secs = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            writeln!(f, "# generated {secs}")?;
        }
        Ok(csv::Writer::from_writer(f))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Parses `args` and runs the selected subcommand, returning the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            let report = ErrorReport::from(&e);
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_default());
            exit_code(&e)
        }
    }
}

pub fn dispatch(cmd: &Command) -> Result<i32, Error> {
    match cmd {
        Command::VerifyOperators(c) => verify_operators(&Context::new(c)?),
        Command::VerifyPotential(c) => verify_potential(&Context::new(c)?),
        Command::Simulate(c) => simulate(&Context::new(c)?),
        Command::Attractor(c) => attractor(&Context::new(c)?),
        Command::ConstantsAudit(c) => constants_audit(&Context::new(c)?),
    }
}

fn status(passed: bool) -> i32 {
    if passed {
        EXIT_OK
    } else {
        EXIT_VIOLATION
    }
}

fn verify_operators(ctx: &Context) -> Result<i32, Error> {
    let p = Pipeline::build(&ctx.config)?;
    let suite = p.verify_operators(100, ctx.config.integration.seed)?;
    ctx.write_json("operators.json", &suite)?;
    println!("{}", serde_json::to_string_pretty(&suite).unwrap_or_default());
    Ok(status(suite.passed))
}

fn verify_potential(ctx: &Context) -> Result<i32, Error> {
    let p = Pipeline::build(&ctx.config)?;
    let suite = p.verify_potential()?;
    ctx.write_json("potential.json", &suite)?;
    println!("{}", serde_json::to_string_pretty(&suite).unwrap_or_default());
    Ok(status(suite.passed))
}

fn constants_audit(ctx: &Context) -> Result<i32, Error> {
    let p = Pipeline::build(&ctx.config)?;
    ctx.write_json("audit.json", &p.audit)?;
    println!("{}", p.audit.to_json());
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SimulationSummary<'a> {
    seed: u64,
    scheme: simulate::TimeScheme,
    steps: usize,
    meta: &'a simulate::TrajectoryMeta,
    selection: simulate::SelectionStats,
    energy_violations: usize,
    energy_max_excess: f64,
    energy_integrated_ok: bool,
    vprime: simulate::VPrimeReport,
    gronwall: Option<attractor::GronwallReport>,
    windows: Option<attractor::WindowEnvelopeReport>,
    absorbing: Option<attractor::AbsorbingReport>,
    fb_norm: Option<f64>,
}

fn write_trajectory(ctx: &Context, traj: &Trajectory, slack: &[f64], tol: &[f64]) -> Result<(), Error> {
    let stride = ctx.config.output.stride;
    let mut w = ctx.csv("trajectory.csv")?;
    w.write_record(["t", "h_norm", "v_norm", "vprime_dual", "energy_slack"]).map_err(csv_err)?;
    for i in (0..traj.len()).step_by(stride) {
        let s = if i == 0 { f64::NAN } else { slack[i - 1] };
        w.write_record([traj.times[i], traj.h_norm[i], traj.v_norm[i], traj.vprime[i], s].map(|x| format!("{x:e}")))
            .map_err(csv_err)?;
    }
    w.flush()?;
    let mut w = ctx.csv("energy.csv")?;
    w.write_record(["t", "slack", "tolerance"]).map_err(csv_err)?;
    for i in 0..slack.len() {
        w.write_record([traj.times[i + 1], slack[i], tol[i]].map(|x| format!("{x:e}"))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn simulate(ctx: &Context) -> Result<i32, Error> {
    let p = Pipeline::build(&ctx.config)?;
    let params = p.flow_parameters();
    let seed = ctx.config.integration.seed;
    let a0 = p.initial(seed, 0)?;
    let sink = (ctx.config.integration.checkpoint_every > 0).then(|| CheckpointSink {
        dir: ctx.path("checkpoints"),
        every: ctx.config.integration.checkpoint_every,
        config_hash: p.config_hash(),
    });
    let mut traj = simulate::run(&params, &p.ops, &p.jn, &a0, sink.as_ref())?;
    traj.meta.seed = Some(seed);
    traj.meta.label = "simulate".into();
    let energy = simulate::energy_monitor(&traj, &p.audit, ctx.config.integration.energy_tol_factor);
    let vprime = simulate::vprime_monitor(&traj, &p.audit);
    let long = traj.horizon() >= 1.0;
    let dh = ctx.config.window_step();
    let gronwall = if long { Some(attractor::gronwall_check(&traj, &p.audit, ctx.config.attractor.ball_tolerance)?) } else { None };
    let windows = if long { Some(attractor::window_envelope_check(&traj, &p.audit, dh)?) } else { None };
    let absorbing = if long { Some(attractor::absorbing_check(&traj, &p.audit, dh)?) } else { None };
    let fb_norm = if long { Some(attractor::fb_norm(&traj, dh)?) } else { None };
    write_trajectory(ctx, &traj, &energy.slack, &energy.tolerance)?;
    ctx.write_json("audit.json", &p.audit)?;
    let passed = energy.violations == 0
        && vprime.violations == 0
        && traj.selection.violations == 0
        && gronwall.as_ref().is_none_or(|g| g.violations == 0)
        && windows.as_ref().is_none_or(|w| w.energy_violations + w.derivative_violations + w.lions_magenes_violations == 0);
    let summary = SimulationSummary {
        seed,
        scheme: params.scheme,
        steps: traj.len() - 1,
        meta: &traj.meta,
        selection: traj.selection,
        energy_violations: energy.violations,
        energy_max_excess: energy.max_excess,
        energy_integrated_ok: energy.integrated_ok,
        vprime,
        gronwall,
        windows,
        absorbing,
        fb_norm,
    };
    ctx.write_json("trajectory.json", &summary)?;
    if ctx.config.output.plots {
        let bound = vec![p.audit.gronwall_radius; traj.len()];
        plot::line_plot(
            &ctx.path("norms.png"),
            &[
                Series { x: &traj.times, y: &traj.h_norm, color: [200, 30, 30] },
                Series { x: &traj.times, y: &bound, color: [30, 30, 200] },
            ],
        )?;
        plot::line_plot(&ctx.path("energy.png"), &[Series { x: &traj.times[1..], y: &energy.slack, color: [30, 140, 30] }])?;
    }
    println!(
        "steps {}  energy violations {}  v' violations {}  final |v|_H {:.6e}",
        traj.len() - 1,
        energy.violations,
        summary.vprime.violations,
        traj.h_norm.last().copied().unwrap_or(0.0)
    );
    Ok(status(passed))
}

fn attractor(ctx: &Context) -> Result<i32, Error> {
    let p = Pipeline::build(&ctx.config)?;
    let spec = p.ensemble_spec(ctx.config.integration.seed);
    let report = ensemble_sections(&spec, &p.ops, &p.jn, &p.audit)?;
    ctx.write_json("attractor.json", &report)?;
    ctx.write_json("audit.json", &p.audit)?;
    let mut w = ctx.csv("sections.csv")?;
    let n = p.ops.n_modes();
    let mut header = vec!["member".to_string(), "t".into(), "h_norm".into(), "v_norm".into()];
    header.extend((0..n).map(|k| format!("a{k}")));
    w.write_record(&header).map_err(csv_err)?;
    let per = spec.section_samples.max(1);
    for (i, a) in report.section_cloud.iter().enumerate() {
        let mut row = vec![(i / per).to_string(), format!("{:e}", report.section_times[i])];
        row.push(format!("{:e}", report.section_h[i]));
        row.push(format!("{:e}", report.section_v[i]));
        row.extend(a.iter().map(|x| format!("{x:e}")));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    if ctx.config.output.plots {
        plot::scatter_plot(&ctx.path("sections.png"), &[Series { x: &report.section_h, y: &report.section_v, color: [120, 30, 160] }])?;
    }
    let passed = report.fraction_inside >= 1.0
        && report.members.iter().all(|m| {
            m.absorbing.violations == 0
                && m.windows.energy_violations + m.windows.derivative_violations == 0
                && m.gronwall.violations == 0
        });
    println!(
        "members {}  fb_norm {:.4e}  cloud H radius {:.4e}  ball radius {:.4e}  inside {:.3}",
        report.members.len(),
        report.fb_norm,
        report.cloud_h_radius,
        report.gronwall_radius,
        report.fraction_inside
    );
    Ok(status(passed))
}
