//! Batch front-end: parses flags, runs a pipeline and writes deterministic artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde::Serialize;

use crate::asymptotics::{run_sweep, SweepSettings, DEFAULT_EPS_SWEEP, SERIES};
use crate::boundary::{default_tau_max, gamma_margin, select_delta, solve_boundary_layer};
use crate::error::{Assumption, Error, Result};
use crate::game::{value_run, SimConfig, ValueReport};
use crate::linalg::{eigenvalues, min_singular_value};
use crate::model::{check_eps, delta_blocks, GameSpec};
use crate::ode::ToleranceConfig;
use crate::output::fmt_f64;
use crate::reduced::solve_reduced;
use crate::riccati::solve_full;

/// Step used by `simulate` when `--step` is absent, as a fraction of `eps`.
pub const DEFAULT_STEP_OVER_EPS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Full, reduced and boundary-layer solutions plus the assumption certificate.
    Solve,
    /// Error sweep over `eps` with fitted convergence rates.
    Sweep,
    /// Closed-form and Monte Carlo values of the exact and approximate laws.
    Simulate,
    /// Plain-text summary of all of the above.
    Report,
}

/// Command-line flags.
#[derive(Debug, Clone, Parser)]
#[command(
    name = "slowfast",
    version,
    about = "Slow–fast zero-sum LQ stochastic games"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Game specification JSON.
    #[arg(long)]
    pub spec: PathBuf,
    /// Singular-perturbation parameter in (0, 1] for solve and simulate
    #[arg(long)]
    pub eps: Option<f64>,
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',')]
    pub eps_list: Option<Vec<f64>>,
    /// Relative ODE tolerance
    #[arg(long)]
    pub tol_rel: Option<f64>,
    /// Absolute ODE tolerance
    #[arg(long)]
    pub tol_abs: Option<f64>,
    /// Decay split for the boundary-layer envelopes.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Monte Carlo paths
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    /// Euler–Maruyama step; defaults to `eps / 20`.
    #[arg(long)]
    pub step: Option<f64>,
    /// Base seed; path `p` uses stream `p` of this seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated initial state; defaults to all ones.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Also write one CSV row per simulated path.
    #[arg(long)]
    pub per_path: bool,
}

/// Validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub spec_path: PathBuf,
    pub eps: Option<f64>,
    pub eps_list: Vec<f64>,
    pub tol: ToleranceConfig,
    pub delta: Option<f64>,
    pub n_paths: usize,
    pub step: Option<f64>,
    pub seed: u64,
    pub x0: Option<Vec<f64>>,
    pub output_dir: PathBuf,
    pub per_path: bool,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self> {
        let defaults = ToleranceConfig::default();
        let tol = ToleranceConfig::new(
            cli.tol_rel.unwrap_or(defaults.rel),
            cli.tol_abs.unwrap_or(defaults.abs),
        )?;
        if let Some(e) = cli.eps {
            check_eps(e)?;
        }
        let eps_list = cli.eps_list.unwrap_or_else(|| DEFAULT_EPS_SWEEP.to_vec());
        for &e in &eps_list {
            check_eps(e)?;
        }
        Ok(Self {
            command: cli.command,
            spec_path: cli.spec,
            eps: cli.eps,
            eps_list,
            tol,
            delta: cli.delta,
            n_paths: cli.paths,
            step: cli.step,
            seed: cli.seed,
            x0: cli.x0,
            output_dir: cli.out,
            per_path: cli.per_path,
        })
    }

    fn eps(&self) -> Result<f64> {
        self.eps
            .ok_or_else(|| Error::InvalidArgument("this command needs --eps".into()))
    }

    fn x0(&self, spec: &GameSpec) -> Vec<f64> {
        self.x0.clone().unwrap_or_else(|| vec![1.0; spec.dims.n()])
    }

    fn sim_config(&self, eps: f64) -> SimConfig {
        SimConfig::new(
            self.step.unwrap_or(DEFAULT_STEP_OVER_EPS * eps),
            self.n_paths,
            self.seed,
        )
    }
}

/// One certified structural assumption.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub assumption: &'static str,
    pub passed: bool,
    /// Name of the measured quantity.
    pub measure: &'static str,
    pub value: f64,
}

/// Every assumption checked by `solve`, with the layer constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub eps: f64,
    pub assumptions: Vec<AssumptionCheck>,
    pub gamma: f64,
    pub delta: f64,
    pub q2: f64,
    pub k1: f64,
    pub k2: f64,
    pub q1: f64,
    pub c_p: f64,
}

fn write_artifact(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, text)?;
    Ok(path)
}

fn json_line<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

struct Solved {
    certificate: Certificate,
    files: Vec<(&'static str, String)>,
}

fn solve_pipeline(spec: &GameSpec, eps: f64, cfg: &RunConfig) -> Result<Solved> {
    let red = solve_reduced(spec, &cfg.tol)?;
    let gamma = gamma_margin(spec, &red.p22bar)?;
    let (delta, _) = select_delta(spec, &red.p22bar, cfg.delta)?;
    let tau_max = default_tau_max(eps, spec.horizon, gamma, delta);
    let bl = solve_boundary_layer(spec, &red, Some(delta), tau_max, &cfg.tol)?;
    let full = solve_full(spec, eps, &cfg.tol, None)?;
    let max_re = eigenvalues(&red.s)
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let sup_p11 = red.dre.values.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let check = |a: Assumption, measure, value| AssumptionCheck {
        assumption: a.label(),
        passed: true,
        measure,
        value,
    };
    let certificate = Certificate {
        eps,
        assumptions: vec![
            check(
                Assumption::Delta2Invertible,
                "min_singular_value_delta2",
                min_singular_value(&delta_blocks(spec).delta2),
            ),
            check(Assumption::ReducedDreSolvable, "sup_norm_p11bar", sup_p11),
            check(Assumption::StabilizingAre, "max_real_eig_s", max_re),
            check(Assumption::NegativeDefiniteSymPart, "gamma", gamma),
            check(
                Assumption::AttractionBall,
                "norm_p22bar_over_q2",
                red.p22bar.norm() / bl.q2,
            ),
        ],
        gamma,
        delta,
        q2: bl.q2,
        k1: bl.k1,
        k2: bl.k2,
        q1: bl.q1,
        c_p: bl.c_p,
    };
    Ok(Solved {
        files: vec![
            ("full.csv", full.to_csv()),
            ("reduced.csv", red.to_csv()),
            ("reduced.json", format!("{}\n", red.to_json()?)),
            ("boundary.csv", bl.to_csv()),
            ("certificate.json", json_line(&certificate)?),
        ],
        certificate,
    })
}

#[derive(Serialize)]
struct SimulateOutput {
    eps: f64,
    x0: Vec<f64>,
    mean: f64,
    stderr: f64,
    n_paths: usize,
    h: f64,
    seed: u64,
    report: ValueReport,
}

fn simulate_pipeline(
    spec: &GameSpec,
    eps: f64,
    cfg: &RunConfig,
) -> Result<Vec<(&'static str, String)>> {
    let x0 = cfg.x0(spec);
    let red = solve_reduced(spec, &cfg.tol)?;
    let full = solve_full(spec, eps, &cfg.tol, None)?;
    let run = value_run(spec, &full, &red, &x0, &cfg.sim_config(eps))?;
    let out = SimulateOutput {
        eps,
        x0,
        mean: run.report.j_mc,
        stderr: run.report.j_mc_stderr,
        n_paths: run.exact.n_paths,
        h: run.exact.h,
        seed: run.exact.seed,
        report: run.report,
    };
    let mut files = vec![("simulate.json", json_line(&out)?)];
    if cfg.per_path {
        files.push(("paths.csv", run.exact.per_path_csv()));
    }
    Ok(files)
}

fn sweep_pipeline(spec: &GameSpec, cfg: &RunConfig) -> Result<crate::asymptotics::Sweep> {
    let settings = SweepSettings {
        tol: cfg.tol,
        delta: cfg.delta,
        x0: cfg.x0(spec),
    };
    run_sweep(spec, &cfg.eps_list, &settings)
}

fn report_text(spec: &GameSpec, cfg: &RunConfig) -> Result<String> {
    let eps = cfg.eps.unwrap_or(DEFAULT_EPS_SWEEP[0]);
    let solved = solve_pipeline(spec, eps, cfg)?;
    let c = &solved.certificate;
    let mut out = String::new();
    let _ = writeln!(out, "assumption certificate at eps = {}", fmt_f64(eps));
    for a in &c.assumptions {
        let _ = writeln!(
            out,
            "  {:<5} {:<4} {} = {}",
            a.assumption,
            if a.passed { "ok" } else { "FAIL" },
            a.measure,
            fmt_f64(a.value)
        );
    }
    let _ = writeln!(
        out,
        "layer constants: gamma = {}, delta = {}, q2 = {}, k1 = {}, k2 = {}, q1 = {}, c_p = {}",
        fmt_f64(c.gamma),
        fmt_f64(c.delta),
        fmt_f64(c.q2),
        fmt_f64(c.k1),
        fmt_f64(c.k2),
        fmt_f64(c.q1),
        fmt_f64(c.c_p)
    );
    let sweep = sweep_pipeline(spec, cfg)?;
    let _ = writeln!(out, "\nsweep over eps = {:?}", sweep.eps_values());
    for name in &SERIES[..SERIES.len() - 1] {
        let line = match sweep.fit(name) {
            Some(Ok(f)) => format!("slope {:.4}, r² {:.4}", f.slope, f.r_squared),
            _ => "no fit (too few positive values)".to_string(),
        };
        let _ = writeln!(out, "  {name:<14} {line}");
    }
    let x0 = cfg.x0(spec);
    let red = solve_reduced(spec, &cfg.tol)?;
    let full = solve_full(spec, eps, &cfg.tol, None)?;
    let r = value_run(spec, &full, &red, &x0, &cfg.sim_config(eps))?.report;
    let _ = writeln!(out, "\nvalues at eps = {}, x0 = {:?}", fmt_f64(eps), x0);
    let _ = writeln!(out, "  closed form        {}", fmt_f64(r.v_eps_closed));
    let _ = writeln!(
        out,
        "  Monte Carlo        {} ± {}",
        fmt_f64(r.j_mc),
        fmt_f64(r.j_mc_stderr)
    );
    let _ = writeln!(out, "  limit (eps -> 0)   {}", fmt_f64(r.v_bar));
    let _ = writeln!(
        out,
        "  exact − approx     {} ± {}",
        fmt_f64(r.gap_exact_approx),
        fmt_f64(r.gap_exact_approx_stderr)
    );
    Ok(out)
}

/// Runs one command and returns the written artifact paths.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let spec = GameSpec::from_json_file(&cfg.spec_path)?;
    let files: Vec<(&str, String)> = match cfg.command {
        Command::Solve => solve_pipeline(&spec, cfg.eps()?, cfg)?.files,
        Command::Sweep => {
            let sweep = sweep_pipeline(&spec, cfg)?;
            vec![
                ("sweep.csv", sweep.to_csv()),
                ("sweep.json", format!("{}\n", sweep.summary_json()?)),
            ]
        }
        Command::Simulate => simulate_pipeline(&spec, cfg.eps()?, cfg)?,
        Command::Report => vec![("report.txt", report_text(&spec, cfg)?)],
    };
    std::fs::create_dir_all(&cfg.output_dir)?;
    files
        .iter()
        .map(|(name, text)| write_artifact(&cfg.output_dir, name, text))
        .collect()
}

/// Machine-readable error: variant name, assumption label if any, message.
pub fn error_json(err: &Error) -> String {
    #[derive(Serialize)]
    struct ErrorOut<'a> {
        error: &'a str,
        #[serde(skip_serializing_if = "Option::is_none")]
        assumption: Option<&'static str>,
        message: String,
    }
    serde_json::to_string(&ErrorOut {
        error: err.kind(),
        assumption: err.assumption().map(Assumption::label),
        message: err.to_string(),
    })
    .unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", err.kind()))
}

/// Entry point for the binary: error JSON on stderr and exit code 1 on failure.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    let report = cli.command == Command::Report;
    let result = RunConfig::from_cli(cli).and_then(|cfg| {
        let paths = run(&cfg)?;
        if report {
            if let Some(p) = paths.first() {
                print!("{}", std::fs::read_to_string(p)?);
            }
        }
        Ok(paths)
    });
    match result {
        Ok(paths) => {
            if !report {
                for p in paths {
                    println!("{}", p.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}
