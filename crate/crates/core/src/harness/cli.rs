//! Command-line interface.
//!
//! Exit codes: 0 on success, 2 on usage or configuration errors, 1 on
//! runtime failures (including a failed audit).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::common;
use crate::datagen::{self, Design, FederationConfig, ServerDataset};
use crate::error::{Error, Result};
use crate::independent::{self, ProjectionPlan};
use crate::privacy;
use crate::rates;
use crate::seeds::{self, tag};
use crate::wavelet::{WaveletFamily, WaveletTable};

use super::config::ConfigFile;
use super::output::{self, Series};
use super::{imse_grid, run_sweep, ExperimentSpec};

#[derive(Debug, Parser)]
#[command(name = "fedmean", version, about = "Private federated mean-curve estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Default)]
struct RunArgs {
    /// Base seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Replications, or audit trials (overrides the config file).
    #[arg(long)]
    reps: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the rate equation and print per-server regimes.
    Rates {
        config: PathBuf,
        /// Constant in the delta condition.
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the Monte Carlo sweep and write risk tables and a plot.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Record wall time per row (makes the CSV run-dependent).
        #[arg(long)]
        timing: bool,
    },
    /// Run the configured estimator on a dataset CSV.
    Estimate {
        data: PathBuf,
        config: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Check sensitivity bounds and noise calibration.
    Audit {
        config: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write one simulated dataset as CSV.
    Generate {
        config: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
}

/// Distinguishes configuration problems (exit 2) from runtime failures (exit 1).
enum Failure {
    Usage(Error),
    Runtime(Error),
    AuditFailed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::InvalidParameter { .. } | Error::UnsupportedFamily(_) => Failure::Usage(e),
            other => Failure::Runtime(other),
        }
    }
}

/// Runs the CLI on `args` (program name first), writing to `out` and `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Rates { config, kappa, run } => cmd_rates(&config, kappa, &run, out),
        Command::Simulate { config, run, timing } => cmd_simulate(&config, &run, timing, out, err),
        Command::Estimate { data, config, run } => cmd_estimate(&data, &config, &run, out),
        Command::Audit { config, run } => cmd_audit(&config, &run, out),
        Command::Generate { config, run } => cmd_generate(&config, &run, out),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(e)) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
        Err(Failure::AuditFailed) => {
            let _ = writeln!(err, "audit failed");
            1
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn out_dir(run: &RunArgs) -> Result<PathBuf> {
    let dir = run.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn load(config: &Path) -> std::result::Result<ConfigFile, Failure> {
    ConfigFile::load(config).map_err(|e| match e {
        Error::Io { .. } => Failure::Usage(e),
        other => other.into(),
    })
}

fn cmd_rates(config: &Path, kappa: f64, run: &RunArgs, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let cfg = load(config)?;
    let fed = cfg.federation(config)?;
    let sol = rates::solve(fed.design, &fed.servers, fed.alpha)?;
    let delta_ok = rates::check_delta_condition(&fed.servers, kappa);
    let mut table = String::new();
    table.push_str(&format!(
        "design {}  alpha {}  servers {}\n",
        fed.design,
        fed.alpha,
        fed.servers.len()
    ));
    table.push_str(&format!(
        "D* = {:.6}  risk = {:.6e}  residual = {:.2e}\n",
        sol.d_star, sol.risk, sol.residual
    ));
    if let Some(h) = homogeneous_rate(&fed) {
        table.push_str(&format!("homogeneous closed form = {h:.6e}\n"));
    }
    table.push_str(&format!(
        "{:>6} {:>8} {:>6} {:>10} {:>10} {:>20} {:>8}\n",
        "server", "n", "m", "epsilon", "delta", "regime", "delta_ok"
    ));
    let mut csv = String::from("server,n,m,epsilon,delta,regime,delta_ok\n");
    for (s, c) in fed.servers.iter().enumerate() {
        table.push_str(&format!(
            "{:>6} {:>8} {:>6} {:>10} {:>10.3e} {:>20} {:>8}\n",
            s, c.n, c.m, c.epsilon, c.delta, sol.regimes[s].to_string(), delta_ok[s]
        ));
        csv.push_str(&format!(
            "{s},{},{},{},{:e},{},{}\n",
            c.n, c.m, c.epsilon, c.delta, sol.regimes[s], delta_ok[s]
        ));
    }
    write!(out, "{table}").map_err(|e| Failure::Runtime(Error::io("<stdout>", e)))?;
    if run.out.is_some() {
        let dir = out_dir(run)?;
        let path = dir.join("rates.csv");
        std::fs::write(&path, csv).map_err(io_err(&path))?;
    }
    Ok(())
}

fn homogeneous_rate(fed: &FederationConfig) -> Option<f64> {
    let first = fed.servers[0];
    if fed.servers.iter().any(|c| c.n != first.n || c.m != first.m || c.epsilon != first.epsilon) {
        return None;
    }
    let s = fed.servers.len();
    Some(match fed.design {
        Design::Independent => rates::homogeneous_rate_independent(s, first.n, first.m, first.epsilon, fed.alpha),
        Design::Common => rates::homogeneous_rate_common(s, first.n, first.m, first.epsilon, fed.alpha),
    })
}

fn apply_overrides(spec: &mut ExperimentSpec, run: &RunArgs) {
    if let Some(seed) = run.seed {
        spec.base_seed = seed;
    }
    if let Some(reps) = run.reps {
        spec.replications = reps;
    }
}

fn file_label(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

fn cmd_simulate(
    config: &Path,
    run: &RunArgs,
    timing: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> std::result::Result<(), Failure> {
    let cfg = load(config)?;
    let specs = cfg.specs(config)?;
    if run.reps == Some(0) {
        return Err(Failure::Usage(Error::invalid("reps", "need at least one replication")));
    }
    let dir = out_dir(run)?;
    let mut series = Vec::new();
    for labelled in specs {
        let mut spec = labelled.spec;
        apply_overrides(&mut spec, run);
        let started = std::time::Instant::now();
        let result = run_sweep(&spec, timing)?;
        let _ = writeln!(
            err,
            "{}: {} rows x {} reps in {:.1}s",
            labelled.label,
            result.rows.len(),
            spec.replications,
            started.elapsed().as_secs_f64()
        );
        let name = if labelled.label == "all" {
            "risk.csv".to_string()
        } else {
            format!("risk_{}.csv", file_label(&labelled.label))
        };
        let path = dir.join(&name);
        output::emit_csv(&result.rows, &path)?;
        let _ = writeln!(out, "{}", path.display());
        for r in &result.rows {
            let _ = writeln!(
                out,
                "  {} = {:<8} mean IMSE {:.4e} (se {:.1e})  D* {:.3}",
                spec.sweep.variable, r.sweep, r.mean_imse, r.stderr, r.d_star
            );
        }
        series.push(Series {
            label: labelled.label,
            rows: result.rows,
        });
    }
    let x_label = cfg.sweep.as_ref().map_or("sweep".to_string(), |s| s.variable.clone());
    output::emit_plot_data(&series, &dir.join("plot_data.csv"))?;
    output::emit_plot(&series, &x_label, &dir.join("plot.svg"))?;
    Ok(())
}

fn cmd_generate(config: &Path, run: &RunArgs, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let cfg = load(config)?;
    let specs = cfg.specs(config)?;
    let mut spec = specs[0].spec.clone();
    apply_overrides(&mut spec, run);
    let fed = cfg.federation(config)?;
    let table = WaveletTable::build(spec.curve.family, spec.depth)?;
    let data = datagen::simulate_federation(&fed, &spec.curve, &table, spec.base_seed, spec.noiseless)?;
    let dir = out_dir(run)?;
    let path = dir.join("data.csv");
    datagen::write_datasets_csv(&path, &data)?;
    let _ = writeln!(out, "{}", path.display());
    Ok(())
}

fn cmd_estimate(data: &Path, config: &Path, run: &RunArgs, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let cfg = load(config)?;
    let specs = cfg.specs(config)?;
    let mut spec = specs[0].spec.clone();
    apply_overrides(&mut spec, run);
    let fed = cfg.federation(config)?;
    let datasets = datagen::read_datasets_csv(data, &fed)?;
    let dir = out_dir(run)?;
    let grid = imse_grid();
    let seed = spec.base_seed;
    let fhat = match fed.design {
        Design::Independent => {
            let table = WaveletTable::build(WaveletFamily::for_smoothness(fed.alpha)?, spec.depth)?;
            let est = independent::estimate(&datasets, &fed, &table, &spec.independent, seed)?;
            independent::write_transcripts_csv(&dir.join("transcripts.csv"), &est.transcripts)?;
            let _ = writeln!(out, "independent design: L = {}, D* = {:.4}", est.level, est.d_star);
            grid.iter().map(|&x| est.eval(&table, x)).collect::<Vec<_>>()
        }
        Design::Common => {
            let est = common::estimate(&datasets, &fed, &spec.common, seed)?;
            common::write_means_csv(&dir.join("means.csv"), &est.zeta, &est.means)?;
            let _ = writeln!(
                out,
                "common design: m0 = {}, groups = {}, h = {:.4}, D* = {:.4}",
                est.plan.m0,
                est.plan.count(),
                est.config.bandwidth,
                est.d_star
            );
            est.eval_grid(&grid)?
        }
    };
    let path = dir.join("evaluations.csv");
    common::write_evaluations_csv(&path, &grid, &fhat)?;
    let _ = writeln!(out, "{}", path.display());
    Ok(())
}

/// A fresh individual drawn from the generator, for neighbouring datasets.
fn fresh_record(spec: &ExperimentSpec, ds: &ServerDataset, table: &WaveletTable, key: u64) -> (Vec<f64>, Vec<f64>) {
    let m = ds.m();
    let points: Vec<f64> = match ds.design {
        Design::Common => ds.points.row(0).to_vec(),
        Design::Independent => {
            let mut rng = seeds::stream(key, &[tag::DESIGN]);
            (0..m).map(|_| rng.random::<f64>()).collect()
        }
    };
    let curve = datagen::RandomCurve::new(spec.curve, seeds::derive(key, &[tag::CURVE]));
    let mut rng = seeds::stream(key, &[tag::NOISE]);
    let y = points
        .iter()
        .map(|&z| {
            let noise: f64 = if spec.noiseless { 0.0 } else { StandardNormal.sample(&mut rng) };
            curve.eval(table, z) + noise
        })
        .collect();
    (points, y)
}

struct AuditLine {
    check: &'static str,
    server: usize,
    observed: f64,
    bound: f64,
    pass: bool,
}

fn cmd_audit(config: &Path, run: &RunArgs, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let cfg = load(config)?;
    let specs = cfg.specs(config)?;
    let mut spec = specs[0].spec.clone();
    apply_overrides(&mut spec, run);
    let trials = run.reps.unwrap_or(200);
    let fed = cfg.federation(config)?;
    let curve_table = WaveletTable::build(spec.curve.family, spec.depth)?;
    let data = datagen::simulate_federation(&fed, &spec.curve, &curve_table, spec.base_seed, spec.noiseless)?;
    let mut lines = Vec::new();

    match fed.design {
        Design::Independent => {
            let table = WaveletTable::build(WaveletFamily::for_smoothness(fed.alpha)?, spec.depth)?;
            let (coarsest, level, _) = independent::select_levels(&fed, &table, &spec.independent)?;
            let plan = ProjectionPlan::new(&table, &fed, coarsest, level, spec.independent.c)?;
            for ds in &data {
                let stat = |d: &ServerDataset| independent::rescaled_statistic(d, &table, &plan);
                let observed = privacy::audit_sensitivity(stat, ds, trials, |t| {
                    let key = seeds::derive(spec.base_seed, &[tag::AUDIT, ds.server as u64, t as u64]);
                    let i = (seeds::mix64(key) % ds.n() as u64) as usize;
                    let (p, y) = fresh_record(&spec, ds, &curve_table, key);
                    Ok((i, p, y))
                })?;
                let bound = privacy::sensitivity_bound_independent(plan.levels(), ds.n(), plan.overlap);
                lines.push(AuditLine {
                    check: "sensitivity",
                    server: ds.server,
                    observed,
                    bound,
                    pass: observed <= bound,
                });
                if ds.config.is_private() {
                    lines.push(independent_calibration(ds, &table, &plan, spec.base_seed)?);
                }
            }
        }
        Design::Common => {
            let sup = match spec.common.sup_bound {
                Some(c) => c,
                None => privacy::holder_sup_bound(&curve_table, spec.curve.alpha, spec.curve.r, spec.curve.l_star),
            };
            let tau = privacy::tau_common((fed.total_n() as f64).max(2.0), sup);
            for ds in &data {
                let stat = |d: &ServerDataset| {
                    let public = ServerDataset {
                        config: datagen::ServerConfig { epsilon: f64::INFINITY, ..d.config },
                        ..d.clone()
                    };
                    Ok(common::privatized_server_means(&public, tau, 0)?.values)
                };
                let observed = privacy::audit_sensitivity(stat, ds, trials, |t| {
                    let key = seeds::derive(spec.base_seed, &[tag::AUDIT, ds.server as u64, t as u64]);
                    let i = (seeds::mix64(key) % ds.n() as u64) as usize;
                    let (p, y) = fresh_record(&spec, ds, &curve_table, key);
                    Ok((i, p, y))
                })?;
                let bound = 2.0 * tau * (ds.m() as f64).sqrt() / ds.n() as f64;
                lines.push(AuditLine {
                    check: "sensitivity",
                    server: ds.server,
                    observed,
                    bound,
                    pass: observed <= bound,
                });
                if ds.config.is_private() {
                    lines.push(common_calibration(ds, tau, spec.base_seed)?);
                }
            }
        }
    }

    let mut csv = String::from("check,server,observed,bound,pass\n");
    for l in &lines {
        let _ = writeln!(
            out,
            "{:<12} server {:<3} observed {:.6e}  bound {:.6e}  {}",
            l.check,
            l.server,
            l.observed,
            l.bound,
            if l.pass { "PASS" } else { "FAIL" }
        );
        csv.push_str(&format!("{},{},{:e},{:e},{}\n", l.check, l.server, l.observed, l.bound, l.pass));
    }
    if run.out.is_some() {
        let dir = out_dir(run)?;
        let path = dir.join("audit.csv");
        std::fs::write(&path, csv).map_err(io_err(&path))?;
    }
    if lines.iter().all(|l| l.pass) {
        Ok(())
    } else {
        Err(Failure::AuditFailed)
    }
}

const CALIBRATION_DRAWS: usize = 10_000;

/// Pooled variance of `(noisy − clean) / σ_l` over transcripts; should be 1.
/// Reported as `|ratio − 1|` against a 5% tolerance.
fn independent_calibration(
    ds: &ServerDataset,
    table: &WaveletTable,
    plan: &ProjectionPlan,
    seed: u64,
) -> Result<AuditLine> {
    let public = ServerDataset {
        config: datagen::ServerConfig { epsilon: f64::INFINITY, ..ds.config },
        ..ds.clone()
    };
    let clean = independent::server_transcript(&public, table, plan, seed)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut round = 0u64;
    while count < CALIBRATION_DRAWS {
        let noisy = independent::server_transcript(ds, table, plan, seeds::derive(seed, &[tag::AUDIT, round]))?;
        let levels: Vec<u32> = noisy.coeffs.block_levels().collect();
        for ((a, b), l) in noisy.coeffs.blocks().zip(clean.coeffs.blocks()).zip(levels) {
            let s = noisy.sigma[(l - plan.coarsest) as usize];
            for (x, y) in a.iter().zip(b) {
                sum += ((x - y) / s).powi(2);
                count += 1;
            }
        }
        round += 1;
    }
    let ratio = sum / count as f64;
    Ok(AuditLine {
        check: "calibration",
        server: ds.server,
        observed: (ratio - 1.0).abs(),
        bound: 0.05,
        pass: (ratio - 1.0).abs() <= 0.05,
    })
}

fn common_calibration(ds: &ServerDataset, tau: f64, seed: u64) -> Result<AuditLine> {
    let public = ServerDataset {
        config: datagen::ServerConfig { epsilon: f64::INFINITY, ..ds.config },
        ..ds.clone()
    };
    let clean = common::privatized_server_means(&public, tau, seed)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut round = 0u64;
    while count < CALIBRATION_DRAWS {
        let noisy = common::privatized_server_means(ds, tau, seeds::derive(seed, &[tag::AUDIT, round]))?;
        for (x, y) in noisy.values.iter().zip(&clean.values) {
            sum += ((x - y) / noisy.sigma).powi(2);
            count += 1;
        }
        round += 1;
    }
    let ratio = sum / count as f64;
    Ok(AuditLine {
        check: "calibration",
        server: ds.server,
        observed: (ratio - 1.0).abs(),
        bound: 0.05,
        pass: (ratio - 1.0).abs() <= 0.05,
    })
}
