//! Command-line front end: file-driven, reproducible runs of the sampling,
//! counting, analytic, decomposition, and Monte Carlo layers.
//!
//! Exit codes: 0 success, 2 invalid configuration, 1 runtime failure. Every
//! artifact embeds the resolved configuration and tool version; writes go
//! through a temp file + rename so partial outputs never land at the target
//! path.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::analytic::{
    classify_phase, expectation_bounds, integral_ie, integral_iv, ln_phase_expression,
    power_law_schedule, variance_bounds, PhaseLabel, RipsParams,
};
use crate::decomp::enumerate_classes;
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::montecarlo::{phase_sweep, run_experiment_with_theta, ExperimentSummary};
use crate::rips::{count_simplices, naive_count};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "ripsim", version, about = "Random Vietoris-Rips f-vector toolkit")]
pub struct Cli {
    /// Worker thread cap (also via RIPS_THREADS)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Which {
    /// expectation integral I_E(d, k)
    Ie,
    /// variance integral I_V(d, k, r)
    Iv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample a Poisson cloud and write it as replayable JSON
    Sample {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count k-simplices of a serialized cloud
    Count {
        /// cloud JSON produced by `sample`
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        /// override the radius stored in the cloud header
        #[arg(long)]
        delta: Option<f64>,
        /// use the exhaustive reference counter (small clouds only)
        #[arg(long)]
        naive: bool,
    },
    /// Exact integrals and expectation/variance sandwich bounds
    Analytic {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        k: usize,
        /// print a single exact integral instead of the bounds row
        #[arg(long, value_enum)]
        which: Option<Which>,
        /// shared-variable index for I_V
        #[arg(long)]
        r: Option<usize>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact moment-decomposition constants table
    Decomp {
        /// kernel order n (number of variables per kernel)
        #[arg(long)]
        n: usize,
        /// moment power; all of 2, 3, 4 when omitted
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo replication experiment, JSON summary output
    Mc {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, short = 'R')]
        replications: usize,
        #[arg(long)]
        seed: u64,
        /// Poisson reference parameter for the total-variation estimate
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Phase sweep over dimensions from a JSON config, CSV output
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a configuration without executing it
    Validate {
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        t: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        delta: Option<f64>,
        /// sweep config to check the schedule of
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

/// Serialized cloud: header record plus coordinate rows.
#[derive(Debug, serde::Serialize, serde::Deserialize)]
pub struct CloudFile {
    pub version: String,
    pub d: usize,
    pub t: f64,
    pub delta: f64,
    pub seed: u64,
    pub points: Vec<Vec<f64>>,
}

/// Plain-JSON sweep configuration: the canonical power-law schedule
/// `delta_d = c d^{-alpha}`, `t_d = d^{growth_power} * (phase-2 intensity)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub theta: f64,
    pub k: usize,
    pub c: f64,
    pub alpha: f64,
    pub growth_power: f64,
    pub d_list: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    /// declared phase (gaussian | poisson | vanishing); classified from the
    /// schedule tail when omitted
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<String>,
}

#[derive(Debug, serde::Serialize)]
struct McRecord<'a> {
    version: &'a str,
    config: McConfig,
    summary: &'a ExperimentSummary,
}

#[derive(Debug, serde::Serialize)]
struct McConfig {
    d: usize,
    k: usize,
    t: f64,
    delta: f64,
    replications: usize,
    seed: u64,
    theta: Option<f64>,
}

/// 17-significant-digit float formatting; exact integers print plainly.
pub fn fmt_float(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:.16e}")
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp{}",
            path.file_name().unwrap_or_default().to_string_lossy(),
            std::process::id()
        )),
        None => PathBuf::from(format!(".ripsim.tmp{}", std::process::id())),
    };
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("RIPS_THREADS") {
            Ok(v) => Some(
                v.parse::<usize>()
                    .map_err(|_| Error::Config(format!("RIPS_THREADS = {v} is not a count")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::Config("thread count must be >= 1".into()));
        }
        // a second build_global in the same process is a no-op, not a failure
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn load_cloud(path: &Path) -> Result<(CloudFile, PointCloud)> {
    let raw = std::fs::read_to_string(path)?;
    let file: CloudFile = serde_json::from_str(&raw)?;
    let cloud = PointCloud::from_points(file.d, file.points.clone())?;
    Ok((file, cloud))
}

fn analytic_table(
    d: usize,
    k: usize,
    t: f64,
    delta: f64,
) -> Result<String> {
    let p = RipsParams::new(d, t, delta, k)?;
    let e = expectation_bounds(&p)?;
    let decomp = enumerate_classes(k + 1, 2)?;
    let v = variance_bounds(&p, &decomp)?;
    let theta_hat = ln_phase_expression(d, t, delta, k).exp();
    // a single point has no schedule, hence no phase label
    let mut s = String::from(
        "d,k,t,delta,E_lower,E_upper,V_lower,V_upper,phase,theta_hat\n",
    );
    s.push_str(&format!(
        "{},{},{},{},{},{},{},{},{},{}\n",
        d,
        k,
        fmt_float(t),
        fmt_float(delta),
        fmt_float(e.lower),
        fmt_float(e.upper),
        fmt_float(v.lower),
        fmt_float(v.upper),
        "NA",
        fmt_float(theta_hat),
    ));
    Ok(s)
}

fn decomp_table(n: usize, p: Option<usize>) -> Result<String> {
    let powers: Vec<usize> = match p {
        Some(p) => vec![p],
        None => vec![2, 3, 4],
    };
    let mut s = String::from("p,n,signature,numerator,denominator\n");
    for &p in &powers {
        let decomp = enumerate_classes(n, p)?;
        // aggregate to count-signature rows, in signature order
        let mut rows: Vec<(Vec<usize>, crate::decomp::Rational)> = Vec::new();
        for term in &decomp.terms {
            match rows.iter_mut().find(|(sig, _)| *sig == term.signature.shared) {
                Some((_, c)) => *c += term.constant.clone(),
                None => rows.push((term.signature.shared.clone(), term.constant.clone())),
            }
        }
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        for (sig, c) in rows {
            let label: Vec<String> = sig.iter().map(|v| v.to_string()).collect();
            s.push_str(&format!(
                "{},{},\"({})\",{},{}\n",
                p,
                n,
                label.join(","),
                c.numer(),
                c.denom()
            ));
        }
    }
    Ok(s)
}

fn declared_phase(cfg: &SweepConfig) -> Result<PhaseLabel> {
    if let Some(name) = &cfg.phase {
        return match name.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(PhaseLabel::Gaussian),
            "poisson" => Ok(PhaseLabel::Poisson(cfg.theta)),
            "vanishing" => Ok(PhaseLabel::Vanishing),
            other => Err(Error::Config(format!("unknown phase label {other}"))),
        };
    }
    let schedule = power_law_schedule(cfg.theta, cfg.k, cfg.c, cfg.alpha, cfg.growth_power);
    let d_max = cfg.d_list.iter().copied().max().unwrap_or(0).max(50);
    Ok(classify_phase(schedule, cfg.k, d_max)?.label)
}

fn sweep_csv(cfg: &SweepConfig) -> Result<String> {
    if cfg.d_list.is_empty() {
        return Err(Error::Config("d_list must be nonempty".into()));
    }
    if cfg.replications < 2 {
        return Err(Error::Config("replications must be >= 2".into()));
    }
    let label = declared_phase(cfg)?;
    let schedule = power_law_schedule(cfg.theta, cfg.k, cfg.c, cfg.alpha, cfg.growth_power);
    let outcomes = phase_sweep(
        &schedule,
        cfg.k,
        &cfg.d_list,
        cfg.replications,
        cfg.seed,
        &label,
    )?;
    let mut s = format!(
        "# ripsim {VERSION} phase={label} config={}\n",
        serde_json::to_string(cfg)?
    );
    s.push_str("d,t,delta,k,R,mean,var,E_lo,E_hi,V_lo,V_hi,w1,tv,theta\n");
    let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
    for o in &outcomes {
        let summary = match &o.result {
            Ok(s) => s,
            Err(e) => {
                eprintln!("ripsim: sweep d = {} failed: {e}", o.d);
                continue;
            }
        };
        let p = &summary.params;
        let e = expectation_bounds(p)?;
        let decomp = enumerate_classes(p.k + 1, 2)?;
        let v = variance_bounds(p, &decomp)?;
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            o.d,
            fmt_float(p.t),
            fmt_float(p.delta),
            p.k,
            summary.replications,
            fmt_float(summary.empirical_mean),
            fmt_float(summary.empirical_var),
            fmt_float(e.lower),
            fmt_float(e.upper),
            fmt_float(v.lower),
            fmt_float(v.upper),
            opt(summary.w1_to_normal),
            opt(summary.tv_to_poisson),
            opt(summary.theta_used),
        ));
    }
    Ok(s)
}

fn validate_report(
    d: Option<usize>,
    k: Option<usize>,
    t: Option<f64>,
    delta: Option<f64>,
    config: Option<&Path>,
) -> Result<Vec<String>> {
    let mut report = Vec::new();
    if let Some(0) = d {
        report.push("ERROR: dimension d must be >= 1".into());
    }
    if let Some(0) = k {
        report.push("ERROR: simplex order k must be >= 1".into());
    }
    if let Some(t) = t {
        if !(t > 0.0) || !t.is_finite() {
            report.push(format!("ERROR: intensity t = {t} must be positive and finite"));
        } else if t > crate::montecarlo::MAX_INTENSITY {
            report.push(format!(
                "WARNING: t = {t} exceeds the per-cloud cap {}",
                crate::montecarlo::MAX_INTENSITY
            ));
        }
    }
    if let Some(delta) = delta {
        if !(delta > 0.0) || !delta.is_finite() {
            report.push(format!("ERROR: radius delta = {delta} must be positive"));
        } else if delta >= 1.0 {
            report.push(format!("ERROR: radius delta = {delta} must be < 1"));
        } else if delta >= 0.25 {
            report.push(format!(
                "WARNING: delta = {delta} outside the analytic range (0, 1/4); \
                 sandwich bounds do not apply"
            ));
        }
    }
    if let Some(path) = config {
        let raw = std::fs::read_to_string(path)?;
        match serde_json::from_str::<SweepConfig>(&raw) {
            Err(e) => report.push(format!("ERROR: sweep config does not parse: {e}")),
            Ok(cfg) => {
                if cfg.alpha <= 1.0 {
                    report.push(format!(
                        "WARNING: schedule delta_d = {} d^-{} decays no faster than 1/d, \
                         violating the d*delta_d -> 0 requirement",
                        cfg.c, cfg.alpha
                    ));
                }
                if cfg.d_list.is_empty() {
                    report.push("ERROR: d_list must be nonempty".into());
                }
                if cfg.replications < 2 {
                    report.push("ERROR: replications must be >= 2".into());
                }
                if !(cfg.theta > 0.0) {
                    report.push(format!("ERROR: theta = {} must be > 0", cfg.theta));
                }
                for &d in &cfg.d_list {
                    let (t, delta) = power_law_schedule(
                        cfg.theta,
                        cfg.k,
                        cfg.c,
                        cfg.alpha,
                        cfg.growth_power,
                    )(d);
                    if !(delta > 0.0 && delta < 0.25) || !t.is_finite() {
                        report.push(format!(
                            "ERROR: schedule invalid at d = {d}: t = {t}, delta = {delta}"
                        ));
                    } else if t > crate::montecarlo::MAX_INTENSITY {
                        report.push(format!(
                            "WARNING: d = {d} infeasible (t = {t} over the cap); \
                             the sweep should stop at the largest feasible d"
                        ));
                    }
                }
            }
        }
    }
    Ok(report)
}

fn dispatch(cli: Cli) -> Result<()> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Sample { d, t, delta, seed, out } => {
            // delta is stored for replay, so reject out-of-range radii here
            RipsParams::new(d, t, delta, 1)?;
            let cloud = crate::geometry::sample_poisson(d, t, seed)?;
            let file = CloudFile {
                version: VERSION.to_string(),
                d,
                t,
                delta,
                seed,
                points: cloud.to_rows(),
            };
            emit(out.as_deref(), &format!("{}\n", serde_json::to_string(&file)?))
        }
        Command::Count { input, k, delta, naive } => {
            let (header, cloud) = load_cloud(&input)?;
            let delta = delta.unwrap_or(header.delta);
            let count = if naive {
                naive_count(&cloud, delta, k)?
            } else {
                count_simplices(&cloud, delta, k)?
            };
            println!("{}", count.count);
            Ok(())
        }
        Command::Analytic { d, k, which, r, t, delta, out } => match which {
            Some(Which::Ie) => {
                println!("{}", fmt_float(integral_ie(d, k)?));
                Ok(())
            }
            Some(Which::Iv) => {
                let r = r.ok_or_else(|| Error::Config("--which iv requires --r".into()))?;
                println!("{}", fmt_float(integral_iv(d, k, r)?));
                Ok(())
            }
            None => {
                let t = t.ok_or_else(|| Error::Config("bounds row requires --t".into()))?;
                let delta =
                    delta.ok_or_else(|| Error::Config("bounds row requires --delta".into()))?;
                emit(out.as_deref(), &analytic_table(d, k, t, delta)?)
            }
        },
        Command::Decomp { n, p, out } => {
            if let Some(p) = p {
                if !(2..=4).contains(&p) {
                    return Err(Error::Config(format!("power p = {p} must be 2, 3, or 4")));
                }
            }
            emit(out.as_deref(), &decomp_table(n, p)?)
        }
        Command::Mc { d, k, t, delta, replications, seed, theta, out } => {
            let p = RipsParams::new(d, t, delta, k)?;
            if replications < 2 {
                return Err(Error::Config("replications must be >= 2".into()));
            }
            let summary = run_experiment_with_theta(&p, replications, seed, theta)?;
            let record = McRecord {
                version: VERSION,
                config: McConfig { d, k, t, delta, replications, seed, theta },
                summary: &summary,
            };
            emit(out.as_deref(), &format!("{}\n", serde_json::to_string(&record)?))
        }
        Command::Sweep { config, out } => {
            let raw = std::fs::read_to_string(&config)?;
            let cfg: SweepConfig =
                serde_json::from_str(&raw).map_err(|e| Error::Config(e.to_string()))?;
            emit(out.as_deref(), &sweep_csv(&cfg)?)
        }
        Command::Validate { d, k, t, delta, config } => {
            let report = validate_report(d, k, t, delta, config.as_deref())?;
            if report.is_empty() {
                println!("ok");
            }
            for line in report {
                println!("{line}");
            }
            Ok(())
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parameter(_)
        | Error::Config(_)
        | Error::SizeGuard(..)
        | Error::CloudTooLarge(..)
        | Error::DimensionMismatch { .. }
        | Error::IndexOutOfRange { .. }
        | Error::GridMismatch { .. }
        | Error::NonIntegerSample(_) => 2,
        Error::Replication { source, .. } => exit_code(source),
        _ => 1,
    }
}

/// Parses arguments, dispatches, and converts errors to exit codes with a
/// machine-readable record on stderr.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(&e);
            eprintln!(
                "{}",
                serde_json::json!({ "error": e.to_string(), "exit": code })
            );
            code
        }
    }
}
