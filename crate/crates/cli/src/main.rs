use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use exflow::flow::{run_flow, FlowConfig, FlowRun, FlowState, RECORD_COLUMNS};
use exflow::io::{write_curve_csv, write_surface_csv, write_table};
use exflow::lab::{
    check_admissible, check_convexity, check_dual, check_inverse_concave, sample_boundary, sample_interior,
    sample_q_monotone, sample_scalar, Criterion, ScalarLemma, DEFAULT_TOL,
};
use exflow::psi::{check_conditions, Grid, Modulator};
use exflow::speed::SpeedFunction;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "exflow", version, about = "Modulated curvature flows: structure checks and reference runs")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "EXFLOW_THREADS")]
    threads: Option<usize>,
    /// Directory receiving every output file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sampled admissibility, convexity, inverse-concavity and dual checks.
    CheckSpeed {
        name: String,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Grid check of the modulator sign conditions.
    CheckPsi {
        name: String,
        #[arg(long, default_value_t = 1e-3)]
        grid_lo: f64,
        #[arg(long, default_value_t = 1e3)]
        grid_hi: f64,
        #[arg(long, default_value_t = 200)]
        grid_points: usize,
    },
    /// Randomized search for violations of one of the structural inequalities.
    VerifyLemma {
        #[arg(long, value_enum)]
        lemma: Lemma,
        #[arg(long)]
        speed: Option<String>,
        #[arg(long, default_value = "identity")]
        psi: String,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Run a flow from a config file; writes diagnostics, snapshots and a manifest.
    Flow { config: PathBuf },
    /// Summarize every manifest found under the given directories.
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Lemma {
    Interior,
    Boundary,
    ScalarIv,
    ScalarConvex,
    QMonotone,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<exflow::Error>() {
        Some(exflow::Error::Parse(_) | exflow::Error::Precondition(_) | exflow::Error::UnsupportedDimension(_)) => 2,
        Some(_) => 1,
        None if e.is::<Usage>() => 2,
        None => 1,
    }
}

#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.cmd {
        Cmd::CheckSpeed { name, dim, trials, seed } => check_speed(cli, name, *dim, *trials, *seed),
        Cmd::CheckPsi { name, grid_lo, grid_hi, grid_points } => {
            let m = Modulator::parse(name)?;
            let grid = Grid { lo: *grid_lo, hi: *grid_hi, points: *grid_points };
            emit(cli, "check_psi.json", &check_conditions(&m, &grid)?)?;
            Ok(true)
        }
        Cmd::VerifyLemma { lemma, speed, psi, dim, trials, seed, tol } => {
            let m = Modulator::parse(psi)?;
            let f = || -> anyhow::Result<SpeedFunction> {
                let name = speed.as_deref().ok_or_else(|| usage("this lemma needs --speed"))?;
                Ok(SpeedFunction::parse(name, *dim)?)
            };
            let report = match lemma {
                Lemma::Interior => sample_interior(&f()?, &m, *trials, *seed, *tol),
                Lemma::Boundary => sample_boundary(&f()?, &m, *trials, *seed, *tol),
                Lemma::QMonotone => sample_q_monotone(&f()?, &m, *trials, *seed, *tol),
                Lemma::ScalarIv => sample_scalar(&m, ScalarLemma::Iv, *trials, *seed, *tol),
                Lemma::ScalarConvex => sample_scalar(&m, ScalarLemma::Convex, *trials, *seed, *tol),
            };
            emit(cli, "verify_lemma.json", &report)?;
            Ok(report.pass)
        }
        Cmd::Flow { config } => flow(cli, config),
        Cmd::Report { dirs } => report(cli, dirs),
    }
}

/// Pretty JSON to stdout, and to `--out/<file>` when an output directory is set.
fn emit<T: Serialize>(cli: &Cli, file: &str, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    println!("{text}");
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(file), text + "\n")?;
    }
    Ok(())
}

fn check_speed(cli: &Cli, name: &str, dim: usize, trials: usize, seed: u64) -> anyhow::Result<bool> {
    let f = SpeedFunction::parse(name, dim)?;
    let admissible = check_admissible(&f, trials, seed, DEFAULT_TOL);
    let dual = check_dual(&f, trials, seed, DEFAULT_TOL);
    let convexity = check_convexity(&f, trials, seed, DEFAULT_TOL);
    let general = check_inverse_concave(&f, Criterion::General, trials, seed, DEFAULT_TOL);
    let homogeneous = check_inverse_concave(&f, Criterion::Homogeneous, trials, seed, DEFAULT_TOL);
    let ok = admissible.pass && dual.pass;
    let out = serde_json::json!({
        "speed": name,
        "dim": dim,
        "trials": trials,
        "seed": seed,
        "admissible": admissible,
        "convex": convexity.pass,
        "inverse_concave": general.pass && homogeneous.pass,
        "convexity": convexity,
        "inverse_concavity_general": general,
        "inverse_concavity_homogeneous": homogeneous,
        "dual": dual,
    });
    emit(cli, "check_speed.json", &out)?;
    Ok(ok)
}

#[derive(Serialize)]
struct Manifest {
    config_path: String,
    config_digest: String,
    version: &'static str,
    seed: u64,
    start_unix: f64,
    end_unix: f64,
    outputs: Vec<String>,
    regime: exflow::psi::Regime,
    steps: usize,
    final_time: f64,
    stop: exflow::flow::StopReason,
    error: Option<String>,
    passed: bool,
    verdicts: exflow::flow::Verdicts,
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn flow(cli: &Cli, path: &Path) -> anyhow::Result<bool> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let cfg = FlowConfig::parse_str(&text)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out")).join(stem);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    let start = unix_now();
    let run = run_flow(&cfg)?;
    let mut outputs = vec![write_diagnostics(&dir, &run)?];
    for (step, state) in &run.snapshots {
        let p = dir.join(format!("snapshot_{step}.csv"));
        let file = fs::File::create(&p)?;
        match state {
            FlowState::Curve(c) => write_curve_csv(file, c)?,
            FlowState::Surface(s) => write_surface_csv(file, s)?,
        }
        outputs.push(p.display().to_string());
    }
    if let Some(e) = &run.error {
        eprintln!("flow stopped at t = {}: {e}", run.final_time());
    }
    let manifest_path = dir.join("manifest.json");
    outputs.push(manifest_path.display().to_string());
    let digest = Sha256::digest(serde_json::to_vec(&cfg)?);
    let manifest = Manifest {
        config_path: path.display().to_string(),
        config_digest: hex(&digest),
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        start_unix: start,
        end_unix: unix_now(),
        outputs,
        regime: run.regime,
        steps: run.steps,
        final_time: run.final_time(),
        stop: run.stop.clone(),
        error: run.error.as_ref().map(|e| e.to_string()),
        passed: run.passed(),
        verdicts: run.verdicts.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&manifest_path, text.clone() + "\n")?;
    println!("{text}");
    Ok(run.passed())
}

fn write_diagnostics(dir: &Path, run: &FlowRun) -> anyhow::Result<String> {
    let p = dir.join("diagnostics.csv");
    write_table(fs::File::create(&p)?, &RECORD_COLUMNS, run.records.iter().map(|r| r.csv_row()))?;
    Ok(p.display().to_string())
}

fn find_manifests(dir: &Path, found: &mut Vec<PathBuf>) -> anyhow::Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .map_err(|e| usage(format!("cannot read {}: {e}", dir.display())))?
        .collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            find_manifests(&p, found)?;
        } else if p.file_name().is_some_and(|n| n == "manifest.json") {
            found.push(p);
        }
    }
    Ok(())
}

const REPORT_COLUMNS: [&str; 10] =
    ["run", "regime", "steps", "final_time", "stop", "passed", "embedded", "ordering", "z_nonnegative", "u_monotone"];

fn report(cli: &Cli, dirs: &[PathBuf]) -> anyhow::Result<bool> {
    let mut found = Vec::new();
    for d in dirs {
        find_manifests(d, &mut found)?;
    }
    if found.is_empty() {
        return Err(usage("no manifest.json found"));
    }
    let verdict = |v: &serde_json::Value| match v.get("pass").and_then(|p| p.as_bool()) {
        Some(true) => "pass".to_string(),
        Some(false) => "fail".to_string(),
        None => "na".to_string(),
    };
    let mut rows = Vec::new();
    let mut all = true;
    for p in &found {
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(p)?)
            .with_context(|| format!("parsing {}", p.display()))?;
        let get = |k: &str| m.get(k).ok_or_else(|| anyhow!("{}: missing {k}", p.display()));
        let passed = get("passed")?.as_bool().unwrap_or(false);
        all &= passed;
        let v = get("verdicts")?;
        let mut row = vec![p.parent().unwrap_or(p).display().to_string()];
        for k in ["regime", "steps", "final_time", "stop"] {
            row.push(match get(k)? {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            });
        }
        row.push(passed.to_string());
        for k in ["embedded", "ordering", "z_nonnegative", "u_monotone"] {
            row.push(verdict(&v[k]));
        }
        rows.push(row);
    }
    let mut buf = Vec::new();
    write_table(&mut buf, &REPORT_COLUMNS, rows)?;
    print!("{}", String::from_utf8(buf.clone())?);
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.csv"), buf)?;
    }
    Ok(all)
}
