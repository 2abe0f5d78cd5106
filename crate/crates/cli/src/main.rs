//! `choquard` command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use choquard::config::{parse_run_config, GridSpec, RunConfig};
use choquard::exponents::{
    decay_constant, existence_verdict, lower_critical, regularity_class, upper_critical, ProblemParams,
};
use choquard::grid::{RadialFunction, RadialGrid};
use choquard::hlslab::{brezis_lieb_split, consistency_suite, gaussian_coulomb, hls_ratio, mc_double_integral, Bump};
use choquard::kernel::assemble_kernel;
use choquard::solver::{diagnose, solve, Init, Mode};
use choquard::Error;

const EXIT_INVALID: u8 = 2;
const EXIT_NONCONVERGENT: u8 = 3;
const MIN_SAMPLES: usize = 1000;
const THREADS_VAR: &str = "CHOQUARD_THREADS";

#[derive(Parser)]
#[command(name = "choquard", version, about = "Numerical laboratory for weighted Choquard equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Critical exponents, existence verdict, regularity case and decay constant.
    Classify {
        #[arg(long = "N")]
        dim: usize,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        mu: f64,
        #[arg(long, allow_hyphen_values = true)]
        p: Option<f64>,
    },
    /// Solve the configured problem and write the profile and report.
    Solve(SolveArgs),
    /// Same as `solve` with the mode forced to critical.
    Extremal(SolveArgs),
    /// Evaluate a stored profile against a configuration.
    Verify {
        profile: PathBuf,
        config: PathBuf,
        /// Also write the report to this file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Monte Carlo checks of weighted double integrals.
    HlsCheck {
        #[arg(long, value_enum)]
        preset: Preset,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        seed: u64,
        /// Translation distance for the splitting preset.
        #[arg(long, default_value_t = 20.0)]
        shift: f64,
    },
    /// Dump the assembled kernel matrix as CSV.
    KernelTable {
        #[arg(long = "N")]
        dim: usize,
        #[arg(long)]
        mu: f64,
        #[arg(long, default_value_t = GridSpec::default().r_min)]
        r_min: f64,
        #[arg(long, default_value_t = GridSpec::default().r_max)]
        r_max: f64,
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct SolveArgs {
    config: PathBuf,
    /// Override the profile path from the configuration.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Override the report path from the configuration.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Gaussian,
    Bubble,
    Bump,
    BrezisLieb,
    Consistency,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Failure { code: EXIT_INVALID, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Nonconvergence(_) | Error::SingularSystem(_) => EXIT_NONCONVERGENT,
            _ => EXIT_INVALID,
        };
        Failure { code, message: e.to_string() }
    }
}

type CliResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_INVALID);
    }
    let outcome = match cli.command {
        Command::Classify { dim, alpha, mu, p } => cmd_classify(dim, alpha, mu, p),
        Command::Solve(args) => cmd_solve(&args, None),
        Command::Extremal(args) => cmd_solve(&args, Some(Mode::Critical)),
        Command::Verify { profile, config, output } => cmd_verify(&profile, &config, output.as_deref()),
        Command::HlsCheck { preset, samples, seed, shift } => cmd_hls_check(preset, samples, seed, shift),
        Command::KernelTable { dim, mu, r_min, r_max, n, output } => {
            cmd_kernel_table(dim, mu, GridSpec { r_min, r_max, n }, output.as_deref())
        }
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("{THREADS_VAR} must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::invalid(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::invalid(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn cmd_classify(dim: usize, alpha: f64, mu: f64, p: Option<f64>) -> CliResult {
    let params = ProblemParams { dim, alpha, mu, p };
    params.check_base()?;
    let upper = upper_critical(dim, alpha, mu)?;
    let lower = lower_critical(dim, alpha, mu)?;
    let verdict = match p {
        Some(_) => Some(existence_verdict(&params)?),
        None => None,
    };
    let (case, p_interval, q_interval) = match regularity_class(dim, alpha, mu) {
        Ok(v) => (json!(v.case_label), json!(v.p_interval), json!(v.q_interval)),
        Err(Error::UncoveredRange { .. }) => (Value::Null, Value::Null, Value::Null),
        Err(e) => return Err(e.into()),
    };
    let out = json!({
        "N": dim,
        "alpha": alpha,
        "mu": mu,
        "p": p,
        "critical_exponents": { "upper": upper, "lower": lower },
        "existence_verdict": verdict,
        "regularity_case": case,
        "p_interval": p_interval,
        "q_interval": q_interval,
        "decay_constant": decay_constant(dim, alpha, mu).ok(),
    });
    print!("{}", to_json(&out)?);
    Ok(0)
}

fn load_config(path: &Path, force: Option<Mode>) -> Result<RunConfig, Failure> {
    let text = read_file(path)?;
    let mut value: Value =
        serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    if let (Some(Mode::Critical), Some(obj)) = (force, value.as_object_mut()) {
        obj.insert("mode".into(), json!("critical"));
    }
    parse_run_config(&value.to_string()).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn relative_to(config: &Path, target: &Path) -> PathBuf {
    if target.is_absolute() {
        return target.to_path_buf();
    }
    config.parent().map(|d| d.join(target)).unwrap_or_else(|| target.to_path_buf())
}

fn problem_of(cfg: &RunConfig) -> ProblemParams {
    match cfg.mode() {
        Mode::Critical => ProblemParams { p: None, ..cfg.problem },
        Mode::Subcritical => cfg.problem,
    }
}

fn setup(cfg: &RunConfig) -> Result<(ProblemParams, Arc<RadialGrid>, choquard::kernel::KernelMatrix), Failure> {
    let params = problem_of(cfg);
    let grid = cfg.grid.build(params.dim)?;
    let kernel = assemble_kernel(params.dim, params.mu, &grid)?;
    Ok((params, grid, kernel))
}

fn cmd_solve(args: &SolveArgs, force: Option<Mode>) -> CliResult {
    let cfg = load_config(&args.config, force)?;
    let (params, grid, kernel) = setup(&cfg)?;
    let profile_path = args.profile.clone().unwrap_or_else(|| relative_to(&args.config, &cfg.outputs.profile));
    let report_path = args.report.clone().unwrap_or_else(|| relative_to(&args.config, &cfg.outputs.report));
    let (u, report) = solve(&params, &grid, &kernel, &cfg.solver, &Init::Preset(cfg.init), cfg.method)?;
    write_file(&profile_path, &u.to_csv())?;
    write_file(&report_path, &to_json(&report)?)?;
    if report.converged {
        Ok(0)
    } else {
        eprintln!("warning: no convergence after {} iterations (residual {:e})", report.iterations, report.residual);
        Ok(EXIT_NONCONVERGENT)
    }
}

fn cmd_verify(profile: &Path, config: &Path, output: Option<&Path>) -> CliResult {
    let cfg = load_config(config, None)?;
    let (params, grid, kernel) = setup(&cfg)?;
    let text = read_file(profile)?;
    let u =
        RadialFunction::from_csv(grid, &text).map_err(|e| Failure::invalid(format!("{}: {e}", profile.display())))?;
    let diagnostics = diagnose(&u, &params, &kernel)?;
    let json = to_json(&diagnostics)?;
    if let Some(path) = output {
        write_file(path, &json)?;
    }
    print!("{json}");
    Ok(0)
}

fn gaussian(x: &[f64]) -> f64 {
    (-x.iter().map(|v| v * v).sum::<f64>()).exp()
}

fn cmd_hls_check(preset: Preset, samples: usize, seed: u64, shift: f64) -> CliResult {
    if samples < MIN_SAMPLES {
        return Err(Failure::invalid(format!("--samples must be at least {MIN_SAMPLES}")));
    }
    let header = json!({ "samples": samples, "seed": seed });
    let body = match preset {
        Preset::Gaussian => {
            let est = mc_double_integral(gaussian, gaussian, 0.0, 0.0, 1.0, 3, samples, seed)?;
            let exact = gaussian_coulomb(1.0, 1.0);
            let z = (est.value - exact).abs() / est.stderr;
            json!({ "preset": "gaussian", "estimate": est, "exact": exact, "z_score": z, "pass": z <= 3.0 })
        }
        Preset::Bubble => {
            let (dim, mu) = (3usize, 1.0);
            let r = 2.0 * dim as f64 / (2.0 * dim as f64 - mu);
            let decay = 0.5 * (2.0 * dim as f64 - mu);
            let bubble = |x: &[f64]| (1.0 + x.iter().map(|v| v * v).sum::<f64>()).powf(-decay);
            let b = hls_ratio(bubble, bubble, r, r, 0.0, 0.0, mu, dim, samples, seed)?;
            let g = hls_ratio(gaussian, gaussian, r, r, 0.0, 0.0, mu, dim, samples, seed)?;
            json!({
                "preset": "bubble",
                "exponent": r,
                "bubble": b,
                "gaussian": g,
                "pass": b.ratio >= g.ratio,
            })
        }
        Preset::Bump => {
            let (dim, mu) = (3usize, 1.0);
            let r = 2.0 * dim as f64 / (2.0 * dim as f64 - mu);
            let bump = |x: &[f64]| Bump::unit().eval(x.iter().map(|v| v * v).sum::<f64>().sqrt());
            let b = hls_ratio(bump, bump, r, r, 0.0, 0.0, mu, dim, samples, seed)?;
            json!({ "preset": "bump", "exponent": r, "bump": b, "pass": b.ratio.is_finite() && b.ratio > 0.0 })
        }
        Preset::BrezisLieb => {
            let params = ProblemParams::critical(3, 0.25, 1.0);
            let split = brezis_lieb_split(Bump::unit(), Bump::unit(), shift, &params, samples, seed)?;
            json!({ "preset": "brezis-lieb", "split": split, "pass": split.defect < 0.05 })
        }
        Preset::Consistency => {
            let cases = consistency_suite(samples, seed, GridSpec::default().n)?;
            let passed = cases.iter().filter(|c| c.pass).count();
            let fraction = passed as f64 / cases.len() as f64;
            json!({
                "preset": "consistency",
                "cases": cases,
                "passed": passed,
                "fraction": fraction,
                "pass": fraction >= 0.95,
            })
        }
    };
    let mut out = header;
    if let (Some(o), Value::Object(b)) = (out.as_object_mut(), body) {
        o.extend(b);
    }
    print!("{}", to_json(&out)?);
    Ok(0)
}

fn cmd_kernel_table(dim: usize, mu: f64, extent: GridSpec, output: Option<&Path>) -> CliResult {
    let grid = extent.build(dim)?;
    let kernel = assemble_kernel(dim, mu, &grid)?;
    let csv = kernel.to_csv();
    match output {
        Some(path) => write_file(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(0)
}
