//! Config-driven command-line front end: solve the boundary, evaluate the
//! value surface, run simulations, run the invariant checks, and compare
//! instances. Artifacts are written as CSV/JSON under out/<run-name>/.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use maxstop::boundary::{self, FreeBoundary};
use maxstop::check::{self, CheckLevel};
use maxstop::compare::{self, ComparisonReport};
use maxstop::config::ProblemConfig;
use maxstop::error::{Error, Result};
use maxstop::sim::{self, SimConfig, StoppingPolicy};
use maxstop::value::ValueSurface;
use maxstop::Instance;

#[derive(Parser)]
#[command(name = "maxstop", version, about = "Investment-timing boundary solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Level {
    Fast,
    Full,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CompareMode {
    Costs,
    Payoffs,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the free boundary and write boundary.csv + summary.json.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Evaluate the value surface on a point or grid; write values.csv.
    Value {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Evaluation grid "x0:x1:n,m0:m1:n"; points with x > m are skipped.
        #[arg(long)]
        grid: Option<String>,
        /// Single evaluation point "x,m".
        #[arg(long)]
        point: Option<String>,
    },
    /// Monte Carlo estimates; writes sim.csv + sim.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Simulate the original game instead of the stopped pair (X, M).
        #[arg(long)]
        game: bool,
        /// Game policy: "boundary", "never", or "threshold=<x>".
        #[arg(long, default_value = "boundary")]
        policy: String,
        /// Override start point "x,m".
        #[arg(long)]
        start: Option<String>,
    },
    /// Run the invariant suite; writes check.json, exits nonzero on failure.
    Check {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Level::Fast)]
        level: Level,
        #[arg(long)]
        seed: Option<u64>,
        /// Verify a previously written boundary grid instead of solving.
        #[arg(long)]
        boundary: Option<PathBuf>,
    },
    /// Comparative statics between two configs; writes compare.csv + compare.json.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        config_b: PathBuf,
        #[arg(long, value_enum)]
        mode: CompareMode,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run_dir(out: &Path, config: &Path) -> Result<PathBuf> {
    let stem = config
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    let dir = out.join(stem);
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// 17 significant digits, locale-independent.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(
        serde_json::to_string_pretty(value)
            .map_err(|e| Error::Config(e.to_string()))?
            .as_bytes(),
    )?;
    file.write_all(b"\n")?;
    Ok(())
}

fn solve_instance(cfg: &ProblemConfig) -> Result<(Instance, FreeBoundary)> {
    let inst = cfg.build_instance()?;
    let fb = boundary::find_endpoint(&inst, &cfg.solver_config())?;
    Ok((inst, fb))
}

fn parse_pair(s: &str, what: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::Config(format!("{what} must be \"x,m\", got {s:?}")));
    }
    let x: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad number in {what}")))?;
    let m: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad number in {what}")))?;
    Ok((x, m))
}

fn parse_range(s: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("range must be \"lo:hi:n\", got {s:?}")));
    }
    let lo: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| Error::Config("bad range lo".into()))?;
    let hi: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| Error::Config("bad range hi".into()))?;
    let n: usize = parts[2]
        .trim()
        .parse()
        .map_err(|_| Error::Config("bad range count".into()))?;
    if n < 1 || hi < lo {
        return Err(Error::Config(format!("empty range {s:?}")));
    }
    Ok((lo, hi, n))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn write_boundary_csv(path: &Path, inst: &Instance, fb: &FreeBoundary) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# maxstop {}\n", env!("CARGO_PKG_VERSION")));
    out.push_str("m,b,E,m_x\n");
    let (ms, bs) = fb.grid();
    // the null-curve column costs a root solve per row, so thin the grid
    let stride = (ms.len() / 2048).max(1);
    for (i, (&m, &b)) in ms.iter().zip(bs).enumerate() {
        if !i.is_multiple_of(stride) && i + 1 != ms.len() {
            continue;
        }
        let e = boundary::vector_field(inst, b, m).unwrap_or(f64::NAN);
        let m_x = boundary::null_curve_m_x(inst, b).unwrap_or(f64::NAN);
        out.push_str(&format!("{},{},{},{}\n", fmt(m), fmt(b), fmt(e), fmt(m_x)));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn load_boundary_csv(path: &Path, x_r: f64) -> Result<FreeBoundary> {
    let text = std::fs::read_to_string(path)?;
    let mut ms = Vec::new();
    let mut bs = Vec::new();
    let mut slopes = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('m') {
            continue;
        }
        let mut cols = line.split(',');
        let m: f64 = cols
            .next()
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::Config(format!("bad boundary row: {line:?}")))?;
        let b: f64 = cols
            .next()
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::Config(format!("bad boundary row: {line:?}")))?;
        ms.push(m);
        bs.push(b);
        // the field column doubles as the node slope b'(m)
        if let Some(e) = cols.next().and_then(|v| v.trim().parse::<f64>().ok()) {
            slopes.push(e);
        }
    }
    let slopes = (slopes.len() == ms.len()).then_some(slopes);
    FreeBoundary::from_grid(x_r, ms, bs, slopes)
}

fn summary_json(fb: &FreeBoundary, inst: &Instance) -> serde_json::Value {
    serde_json::json!({
        "m_low": fb.m_low(),
        "x_R": inst.payoffs.x_r(),
        "x_U": inst.payoffs.x_u(),
        "m_xR": fb.m_x_r(),
        "horizon": fb.horizon(),
        "horizon_stable": fb.horizon_stable(),
        "i0_width": fb.i0_width(),
        "bracket_width": fb.bracket_width(),
        "iterations": fb.iterations(),
        "grid_nodes": fb.grid().0.len(),
    })
}

fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Solve { config, out } => {
            let cfg = ProblemConfig::load(&config)?;
            let dir = run_dir(&out, &config)?;
            let (inst, fb) = solve_instance(&cfg)?;
            write_boundary_csv(&dir.join("boundary.csv"), &inst, &fb)?;
            write_json(&dir.join("summary.json"), &summary_json(&fb, &inst))?;
            println!(
                "m_low = {}, x_R = {}, horizon = {} -> {}",
                fb.m_low(),
                inst.payoffs.x_r(),
                fb.horizon(),
                dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Value {
            config,
            out,
            grid,
            point,
        } => {
            let cfg = ProblemConfig::load(&config)?;
            let dir = run_dir(&out, &config)?;
            let (inst, fb) = solve_instance(&cfg)?;
            let surface = ValueSurface::new(inst.clone(), fb);
            let points: Vec<(f64, f64)> = if let Some(p) = point {
                let (x, m) = parse_pair(&p, "--point")?;
                if x > m {
                    return Err(Error::BadPoint {
                        x,
                        m,
                        constraint: "m >= x",
                    });
                }
                vec![(x, m)]
            } else {
                let spec = grid.ok_or_else(|| Error::Config("need --grid or --point".into()))?;
                let parts: Vec<&str> = spec.split(',').collect();
                if parts.len() != 2 {
                    return Err(Error::Config(format!(
                        "grid must be \"x0:x1:n,m0:m1:n\", got {spec:?}"
                    )));
                }
                let (x0, x1, nx) = parse_range(parts[0])?;
                let (m0, m1, nm) = parse_range(parts[1])?;
                let mut pts = Vec::new();
                for &m in &linspace(m0, m1, nm) {
                    for &x in &linspace(x0, x1, nx) {
                        if x <= m {
                            pts.push((x, m));
                        }
                    }
                }
                pts
            };
            let mut csv = String::new();
            csv.push_str(&format!("# maxstop {}\n", env!("CARGO_PKG_VERSION")));
            csv.push_str("x,m,region,W,dW_dx,dW_dm,V_bar\n");
            for (x, m) in points {
                let region = surface.region(x, m)?;
                let w = surface.value(x, m)?;
                let dx = surface.partial_x(x, m)?;
                let dm = surface.partial_m(x, m, maxstop::value::Side::Right)?;
                let vbar = if x == m {
                    fmt(surface.initial_value(x)?)
                } else {
                    String::new()
                };
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    fmt(x),
                    fmt(m),
                    region.as_str(),
                    fmt(w),
                    fmt(dx),
                    fmt(dm),
                    vbar
                ));
            }
            std::fs::write(dir.join("values.csv"), csv)?;
            // coefficient samples across the boundary domain
            let m_low = surface.m_low();
            let horizon = surface.boundary().horizon();
            let mut above = Vec::new();
            for i in 0..=48 {
                let m = m_low + (0.98 * horizon - m_low) * i as f64 / 48.0;
                above.push(serde_json::json!({
                    "m": m,
                    "A": surface.coefficient_a(m)?,
                    "B": surface.coefficient_b(m)?,
                }));
            }
            let mut below = Vec::new();
            for i in 1..=16 {
                let m = m_low * i as f64 / 16.0;
                below.push(serde_json::json!({
                    "m": m,
                    "C": surface.coefficient_c(m)?,
                }));
            }
            write_json(
                &dir.join("coefficients.json"),
                &serde_json::json!({"m_low": m_low, "above_endpoint": above, "below_endpoint": below}),
            )?;
            println!("values.csv -> {}", dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            config,
            out,
            seed,
            game,
            policy,
            start,
        } => {
            let cfg = ProblemConfig::load(&config)?;
            let dir = run_dir(&out, &config)?;
            let (inst, fb) = solve_instance(&cfg)?;
            let mut sim_cfg: SimConfig = cfg.sim_config(&inst, seed)?;
            if let Some(s) = start {
                sim_cfg.start = parse_pair(&s, "--start")?;
                sim_cfg.validate()?;
            }
            let result = if game {
                let policy = if policy == "boundary" {
                    StoppingPolicy::Boundary(&fb)
                } else if policy == "never" {
                    StoppingPolicy::Never
                } else if let Some(v) = policy.strip_prefix("threshold=") {
                    StoppingPolicy::Threshold(v.parse().map_err(|_| {
                        Error::Config(format!("bad threshold in --policy {policy:?}"))
                    })?)
                } else {
                    return Err(Error::Config(format!("unknown policy {policy:?}")));
                };
                sim::simulate_game_value(&inst, policy, &sim_cfg)?
            } else {
                sim::simulate_stopped_value(&inst, &fb, &sim_cfg)?
            };
            let mut csv = String::new();
            csv.push_str(&format!("# maxstop {}\n", env!("CARGO_PKG_VERSION")));
            csv.push_str("estimate,std_error,n_stopped,n_truncated\n");
            csv.push_str(&format!(
                "{},{},{},{}\n",
                fmt(result.estimate),
                fmt(result.std_error),
                result.n_stopped,
                result.n_truncated
            ));
            std::fs::write(dir.join("sim.csv"), csv)?;
            write_json(
                &dir.join("sim.json"),
                &serde_json::json!({
                    "estimate": result.estimate,
                    "std_error": result.std_error,
                    "n_stopped": result.n_stopped,
                    "n_truncated": result.n_truncated,
                    "truncation_bound": result.truncation_bound,
                    "config": sim_cfg,
                    "game": game,
                }),
            )?;
            println!("estimate = {} ± {}", result.estimate, result.std_error);
            Ok(ExitCode::SUCCESS)
        }
        Command::Check {
            config,
            out,
            level,
            seed,
            boundary: boundary_path,
        } => {
            let cfg = ProblemConfig::load(&config)?;
            let dir = run_dir(&out, &config)?;
            let inst = cfg.build_instance()?;
            let fb = match &boundary_path {
                Some(p) => load_boundary_csv(p, inst.payoffs.x_r())?,
                None => boundary::find_endpoint(&inst, &cfg.solver_config())?,
            };
            let surface = ValueSurface::new(inst.clone(), fb);
            let level = match level {
                Level::Fast => CheckLevel::Fast,
                Level::Full => CheckLevel::Full,
            };
            let sim_cfg = cfg.sim_config(&inst, seed).ok();
            let report = check::run_checks(&surface, level, seed.unwrap_or(42), sim_cfg.as_ref())?;
            write_json(
                &dir.join("check.json"),
                &serde_json::to_value(&report).map_err(|e| Error::Config(e.to_string()))?,
            )?;
            for c in &report.checks {
                println!(
                    "{} {} (worst {:.3e}, tol {:.1e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.worst,
                    c.tol
                );
            }
            if report.passed {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("failed checks: {:?}", report.failed_names());
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Compare {
            config,
            config_b,
            mode,
            out,
        } => {
            let cfg_a = ProblemConfig::load(&config)?;
            let cfg_b = ProblemConfig::load(&config_b)?;
            let dir = run_dir(&out, &config)?;
            let model = cfg_a.build_model()?;
            let solver = cfg_a.solver_config();
            let report: ComparisonReport = match mode {
                CompareMode::Costs => {
                    let payoffs = maxstop::payoff::TechnologyPayoffs::linear(
                        &model,
                        cfg_a.payoffs.investment_cost,
                        cfg_a.payoffs.kappa,
                        cfg_a.payoffs.bargaining,
                    )?;
                    compare::compare_cost_laws(
                        cfg_a.costs.to_law(),
                        cfg_b.costs.to_law(),
                        &model,
                        &payoffs,
                        &solver,
                    )?
                }
                CompareMode::Payoffs => compare::compare_payoffs(
                    cfg_a.payoffs.kappa,
                    cfg_b.payoffs.kappa,
                    &model,
                    cfg_a.payoffs.investment_cost,
                    cfg_a.payoffs.bargaining,
                    cfg_a.costs.to_law(),
                    &solver,
                )?,
            };
            let mut csv = String::new();
            csv.push_str(&format!("# maxstop {}\n", env!("CARGO_PKG_VERSION")));
            csv.push_str("m,b1,b2,b2_minus_b1\n");
            for &(m, b1, b2) in &report.grid {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt(m),
                    fmt(b1),
                    fmt(b2),
                    fmt(b2 - b1)
                ));
            }
            std::fs::write(dir.join("compare.csv"), csv)?;
            write_json(
                &dir.join("compare.json"),
                &serde_json::json!({
                    "verdict": report.verdict,
                    "m_low_1": report.m_low_1,
                    "m_low_2": report.m_low_2,
                    "margin": report.margin,
                    "detail": report.detail,
                }),
            )?;
            println!("verdict: {:?} ({})", report.verdict, report.detail);
            if report.verdict == compare::Verdict::Inconclusive {
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
