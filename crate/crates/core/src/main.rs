use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use refraction::check::run_checks;
use refraction::config::{Format, RunConfig};
use refraction::optimizer::{solve, OptimizerError, Solution};
use refraction::output::{fundamentals_csv, resolvent_csv, value_csv, SolutionSummary};
use refraction::simulate::{simulate_refraction, PayoffEstimate, SimError};
use refraction::specfun::{self, SpecFunError};
use refraction::sweep::run_sweep;

#[derive(Parser, Debug)]
#[command(name = "refraction", version, about = "Optimal refraction barriers for withdrawal control of diffusions")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.directory`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Monte Carlo seed; overrides `sim.seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Print nothing but errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for b* and the value function.
    Solve {
        /// Also write the fundamental solutions to PATH (default: the output directory).
        #[arg(long, value_name = "PATH", num_args = 0..=1)]
        dump_fundamentals: Option<Option<PathBuf>>,
        /// Also write J0 and the resolvent to PATH (default: the output directory).
        #[arg(long, value_name = "PATH", num_args = 0..=1)]
        dump_resolvent: Option<Option<PathBuf>>,
    },
    /// b* over a grid of affine bounds.
    Sweep,
    /// Monte Carlo value of a refraction strategy, against the analytic value.
    Simulate {
        /// Run configuration; same as --config.
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        /// Barrier; defaults to `sim.barrier`, then to b*.
        #[arg(long, value_name = "B")]
        barrier: Option<f64>,
        /// Number of paths; overrides `sim.n_paths`.
        #[arg(long, value_name = "N")]
        paths: Option<usize>,
        /// Euler step; overrides `sim.dt`.
        #[arg(long, value_name = "H")]
        dt: Option<f64>,
        /// Starting point; overrides `sim.x0`.
        #[arg(long, value_name = "X")]
        x0: Option<f64>,
    },
    /// Run every invariant check and write check_report.json.
    Check {
        /// Skip the Monte Carlo checks.
        #[arg(long)]
        no_monte_carlo: bool,
        /// Paths per Monte Carlo check.
        #[arg(long, value_name = "N")]
        paths: Option<usize>,
    },
    /// Evaluate M(a,b;z), U(a,b;z) or D_{-λ}(z).
    Special {
        /// kummer_m | tricomi_u | parabolic_d (or M, U, D)
        name: String,
        /// a b z for M and U; λ z for D.
        #[arg(allow_negative_numbers = true)]
        params: Vec<f64>,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
}

#[derive(Debug)]
enum Failure {
    /// Bad input: exit 1.
    Invalid(String),
    /// A solver or integrator failed: exit 2.
    Numerical(String),
    /// Everything ran but a check failed: exit 3.
    Diagnostics,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Diagnostics => 3,
        }
    }
}

impl From<OptimizerError> for Failure {
    fn from(e: OptimizerError) -> Self {
        match e {
            OptimizerError::Model(_) | OptimizerError::BarrierOutOfRange { .. } => Failure::Invalid(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<SpecFunError> for Failure {
    fn from(e: SpecFunError) -> Self {
        match e {
            SpecFunError::ParameterPole { .. } | SpecFunError::UnsupportedRegime { .. } => Failure::Invalid(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn warn(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("warning: {}", msg.as_ref());
        }
    }

    fn write(&self, path: &Path, text: &str) -> Result<(), Failure> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Failure::Invalid(format!("cannot create {}: {e}", dir.display())))?;
        }
        std::fs::write(path, text).map_err(|e| Failure::Invalid(format!("cannot write {}: {e}", path.display())))?;
        self.say(format!("wrote {}", path.display()));
        Ok(())
    }

    fn wants(&self, f: Format) -> bool {
        self.cfg.output.wants(f)
    }
}

fn load(cli: &Cli, path: Option<&PathBuf>) -> Result<Ctx, Failure> {
    let path = path.or(cli.config.as_ref()).ok_or_else(|| Failure::Invalid("no configuration given; pass --config PATH".into()))?;
    let mut cfg = RunConfig::load(path).map_err(|e| Failure::Invalid(e.to_string()))?;
    if let Some(s) = cli.seed {
        cfg.sim.config.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output.directory = o.clone();
    }
    let out = cfg.output.directory.clone();
    Ok(Ctx { cfg, out, quiet: cli.quiet })
}

fn to_json(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("report serialises") + "\n"
}

fn solved(ctx: &Ctx) -> Result<Solution, Failure> {
    let sol = solve(&ctx.cfg.model, &ctx.cfg.numerics)?;
    for w in &sol.warnings {
        ctx.warn(w);
    }
    Ok(sol)
}

fn run_solve(ctx: &Ctx, dump_fundamentals: &Option<Option<PathBuf>>, dump_resolvent: &Option<Option<PathBuf>>) -> Result<(), Failure> {
    let sol = solved(ctx)?;
    let t = &ctx.cfg.thresholds;
    let summary = SolutionSummary::new(&sol, t);
    let dx = ctx.cfg.numerics.grid_dx;
    if ctx.wants(Format::Json) {
        ctx.write(&ctx.out.join("solution.json"), &summary.to_json())?;
    }
    let fundamentals = fundamentals_csv(&sol, dx);
    let resolvent = resolvent_csv(&sol, dx);
    if ctx.wants(Format::Csv) {
        ctx.write(&ctx.out.join("value.csv"), &value_csv(&sol))?;
        ctx.write(&ctx.out.join("fundamentals.csv"), &fundamentals)?;
        ctx.write(&ctx.out.join("resolvent.csv"), &resolvent)?;
    }
    if let Some(Some(p)) = dump_fundamentals {
        ctx.write(p, &fundamentals)?;
    }
    if let Some(Some(p)) = dump_resolvent {
        ctx.write(p, &resolvent)?;
    }
    ctx.say(format!("regime {:?}, b* = {}, b̂ = {}", sol.regime, sol.b_star, sol.b_hat));
    for l in summary.checks.iter().filter(|l| !l.pass) {
        eprintln!("FAIL {} = {:e} (threshold {:e})", l.name, l.value, l.threshold);
    }
    if summary.pass {
        Ok(())
    } else {
        Err(Failure::Diagnostics)
    }
}

fn run_sweep_cmd(ctx: &Ctx) -> Result<(), Failure> {
    let sweep = ctx.cfg.sweep.as_ref().ok_or_else(|| Failure::Invalid("the configuration has no [sweep] section".into()))?;
    let h = run_sweep(&ctx.cfg.model, sweep, &ctx.cfg.numerics)?;
    if ctx.wants(Format::Csv) {
        ctx.write(&ctx.out.join("heatmap.csv"), &h.to_csv())?;
    }
    if ctx.wants(Format::Json) {
        ctx.write(&ctx.out.join("heatmap.json"), &to_json(&h))?;
    }
    let (connected, total) = h.zero_region();
    ctx.say(format!("{} cells, {} failed, {total} with b* = 0 ({connected} connected to the origin)", h.cells.len(), h.failures()));
    for c in h.cells.iter().filter(|c| c.error.is_some()) {
        ctx.warn(format!("F0 = {}, F1 = {}: {}", c.f0, c.f1, c.error.as_deref().unwrap_or("")));
    }
    Ok(())
}

#[derive(Serialize)]
struct SimReport {
    barrier: f64,
    x0: f64,
    seed: u64,
    dt: f64,
    #[serde(flatten)]
    estimate: PayoffEstimate,
    analytic: f64,
    z_score: f64,
}

fn run_simulate(ctx: &Ctx, barrier: Option<f64>, paths: Option<usize>, dt: Option<f64>, x0: Option<f64>) -> Result<(), Failure> {
    let mut sim = ctx.cfg.sim.config.clone();
    sim.n_paths = paths.unwrap_or(sim.n_paths);
    sim.dt = dt.unwrap_or(sim.dt);
    sim.x0 = x0.unwrap_or(sim.x0);
    let sol = solved(ctx)?;
    let b = barrier.or(ctx.cfg.sim.barrier).unwrap_or(sol.b_star);
    let analytic = sol.performance_at(b, sim.x0)?;
    let estimate = simulate_refraction(&sol.model, b, &sim)?;
    let report = SimReport { barrier: b, x0: sim.x0, seed: sim.seed, dt: sim.dt, estimate, analytic, z_score: estimate.z_score(analytic) };
    let text = to_json(&report);
    ctx.write(&ctx.out.join("report.json"), &text)?;
    ctx.say(text.trim_end());
    Ok(())
}

fn run_check_cmd(ctx: &mut Ctx, no_mc: bool, paths: Option<usize>) -> Result<(), Failure> {
    if no_mc {
        ctx.cfg.check.monte_carlo = false;
    }
    if let Some(n) = paths {
        ctx.cfg.check.n_paths = n;
    }
    let r = run_checks(&ctx.cfg);
    ctx.write(&ctx.out.join("check_report.json"), &to_json(&r))?;
    for l in &r.lines {
        ctx.say(format!("{} {:<40} {:>13.6e}  (threshold {:e})", if l.pass { "PASS" } else { "FAIL" }, l.name, l.value, l.threshold));
    }
    for w in &r.warnings {
        ctx.warn(w);
    }
    match (r.outcome.exit_code(), r.error) {
        (0, _) => Ok(()),
        (1, e) => Err(Failure::Invalid(e.unwrap_or_default())),
        (2, e) => Err(Failure::Numerical(e.unwrap_or_default())),
        _ => Err(Failure::Diagnostics),
    }
}

#[derive(Serialize)]
struct SpecialReport<'a> {
    function: &'a str,
    params: &'a [f64],
    #[serde(flatten)]
    result: specfun::SpecFunResult,
}

fn run_special(name: &str, params: &[f64], tol: f64) -> Result<(), Failure> {
    let need = |n: usize| {
        if params.len() == n {
            Ok(())
        } else {
            Err(Failure::Invalid(format!("{name} takes {n} parameters, got {}", params.len())))
        }
    };
    let (function, result) = match name {
        "kummer_m" | "M" => {
            need(3)?;
            ("kummer_m", specfun::kummer_m(params[0], params[1], params[2], tol)?)
        }
        "tricomi_u" | "U" => {
            need(3)?;
            ("tricomi_u", specfun::tricomi_u(params[0], params[1], params[2], tol)?)
        }
        "parabolic_d" | "D" => {
            need(2)?;
            ("parabolic_d", specfun::parabolic_cylinder_d(params[0], params[1], tol)?)
        }
        _ => return Err(Failure::Invalid(format!("unknown function `{name}`; expected kummer_m, tricomi_u or parabolic_d"))),
    };
    print!("{}", to_json(&SpecialReport { function, params, result }));
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Special { name, params, tol } => run_special(name, params, *tol),
        Command::Solve { dump_fundamentals, dump_resolvent } => run_solve(&load(cli, None)?, dump_fundamentals, dump_resolvent),
        Command::Sweep => run_sweep_cmd(&load(cli, None)?),
        Command::Simulate { model, barrier, paths, dt, x0 } => {
            let ctx = load(cli, model.as_ref())?;
            run_simulate(&ctx, *barrier, *paths, *dt, *x0)
        }
        Command::Check { no_monte_carlo, paths } => {
            let mut ctx = load(cli, None)?;
            run_check_cmd(&mut ctx, *no_monte_carlo, *paths)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Invalid(m) | Failure::Numerical(m) if !m.is_empty() => eprintln!("error: {m}"),
                Failure::Diagnostics => eprintln!("error: diagnostics failed their thresholds"),
                _ => {}
            }
            ExitCode::from(f.code())
        }
    }
}
