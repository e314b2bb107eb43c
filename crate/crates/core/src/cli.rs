//! Command-line front end: single runs, seed sweeps and the MAC comparison.

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::engine::{run_with, EngineError, MacKind, RunOptions, RunResult};
use crate::metrics::{
    average_delay, check_sweep_sizes, convergence_time, goodput, network_average_reward,
    steady_state, MetricsError, MetricsSeries, SweepRow, DEFAULT_REWARD_WINDOW,
};
use crate::timebase::{validate_config, ConfigViolation, ScenarioConfig, SimDuration};

pub const REFERENCE_NOTE: &str =
    "reference testbed: network convergence at iteration 220 (22 s at 100 ms frames)";

#[derive(Debug, Parser)]
#[command(name = "qtdma", version, about = "Q-learning TDMA vs CSMA/CA on a broadcast optical channel")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one or both MACs for every seed and write per-run artifacts.
    Run(CommonArgs),
    /// Packet-size sweep of both MACs plus their time series at the configured size.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Data packet sizes in bytes, comma separated.
        #[arg(long, default_value = "30,60,90,120,150,180")]
        sweep: String,
    },
    /// Check a scenario file without running it.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MacChoice {
    Qlearning,
    Csma,
    Both,
}

impl MacChoice {
    pub fn kinds(self) -> Vec<MacKind> {
        match self {
            MacChoice::Qlearning => vec![MacKind::QLearning],
            MacChoice::Csma => vec![MacKind::Csma],
            MacChoice::Both => vec![MacKind::QLearning, MacKind::Csma],
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Scenario TOML; omitted fields keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MacChoice::Both)]
    pub mac: MacChoice,
    /// Iterations (frames) per run.
    #[arg(long, default_value_t = 3000)]
    pub horizon: u64,
    /// Seeds as `a..b`, `a..=b` or a comma list; defaults to the config seed.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Trailing reward average, in iterations.
    #[arg(long, default_value_t = DEFAULT_REWARD_WINDOW)]
    pub reward_window: usize,
    /// Goodput and delay averaging window, in ms.
    #[arg(long, default_value_t = 1000)]
    pub goodput_window: u64,
    /// Dump Q-tables every N iterations.
    #[arg(long)]
    pub q_snapshot_every: Option<u64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}", describe_violations(.0))]
    InvalidConfig(Vec<ConfigViolation>),
    #[error("reading {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("bad seed list '{0}'")]
    BadSeeds(String),
    #[error("seed list is empty")]
    NoSeeds,
    #[error("sweep required")]
    SweepRequired,
    #[error("bad sweep size '{0}'")]
    BadSweep(String),
    #[error("window must be positive")]
    ZeroWindow,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn describe_violations(v: &[ConfigViolation]) -> String {
    let parts: Vec<_> = v.iter().map(|x| format!("{}: {}", x.name(), x)).collect();
    format!("invalid config: {}", parts.join("; "))
}

/// Resolved command-line request.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    pub macs: Vec<MacKind>,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub sweep: Option<Vec<u32>>,
    pub output_dir: PathBuf,
    pub reward_window: usize,
    pub goodput_window: SimDuration,
    pub q_snapshot_every: Option<u64>,
}

impl ExperimentSpec {
    pub fn from_args(a: &CommonArgs) -> Result<Self, CliError> {
        let scenario = load_config(a.config.as_deref())?;
        let seeds = match &a.seeds {
            Some(s) => parse_seeds(s)?,
            None => vec![scenario.rng_seed],
        };
        if a.reward_window == 0 || a.goodput_window == 0 {
            return Err(CliError::ZeroWindow);
        }
        Ok(ExperimentSpec {
            scenario,
            macs: a.mac.kinds(),
            horizon: a.horizon,
            seeds,
            sweep: None,
            output_dir: a.out.clone(),
            reward_window: a.reward_window,
            goodput_window: SimDuration::from_millis(a.goodput_window),
            q_snapshot_every: a.q_snapshot_every,
        })
    }
}

pub fn load_config(path: Option<&Path>) -> Result<ScenarioConfig, CliError> {
    let cfg = match path {
        None => ScenarioConfig::default(),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| CliError::Read {
                path: p.to_path_buf(),
                source,
            })?;
            toml::from_str(&text).map_err(|source| CliError::Parse {
                path: p.to_path_buf(),
                source,
            })?
        }
    };
    validate_config(&cfg).map_err(CliError::InvalidConfig)?;
    Ok(cfg)
}

pub fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::BadSeeds(s.to_string());
    let num = |x: &str| x.trim().parse::<u64>().map_err(|_| bad());
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        s.split(',')
            .filter(|x| !x.trim().is_empty())
            .map(num)
            .collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(CliError::NoSeeds);
    }
    Ok(seeds)
}

pub fn parse_sweep(s: &str) -> Result<Vec<u32>, CliError> {
    let sizes = s
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| match x.parse::<u32>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(CliError::BadSweep(x.to_string())),
        })
        .collect::<Result<Vec<_>, _>>()?;
    if sizes.is_empty() {
        return Err(CliError::SweepRequired);
    }
    Ok(sizes)
}

/// One line of `manifest.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub kind: String,
    pub mac: String,
    pub seed: Option<u64>,
    pub window: Option<String>,
}

/// Everything a command wrote, plus the metrics it could not compute.
#[derive(Debug, Default)]
pub struct Report {
    pub manifest: Vec<ManifestEntry>,
    pub problems: Vec<String>,
    pub summary: String,
}

impl Report {
    pub fn success(&self) -> bool {
        self.problems.is_empty()
    }

    fn add(&mut self, root: &Path, path: &Path, kind: &str, mac: &str, seed: Option<u64>, window: Option<f64>) {
        self.manifest.push(ManifestEntry {
            path: path.strip_prefix(root).unwrap_or(path).to_path_buf(),
            kind: kind.to_string(),
            mac: mac.to_string(),
            seed,
            window: window.map(|w| format!("{w:?}")),
        });
    }

    fn write_manifest(&mut self, root: &Path) -> Result<(), CliError> {
        let path = root.join("manifest.csv");
        self.add(root, &path, "manifest", "", None, None);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["path", "kind", "mac", "seed", "window"])?;
        for e in &self.manifest {
            w.write_record([
                e.path.to_string_lossy().into_owned(),
                e.kind.clone(),
                e.mac.clone(),
                e.seed.map(|s| s.to_string()).unwrap_or_default(),
                e.window.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn write_series(
    report: &mut Report,
    root: &Path,
    dir: &Path,
    name: &str,
    series: &MetricsSeries,
    r: &RunResult,
) -> Result<(), CliError> {
    let path = dir.join(name);
    series.write_csv(r.seed, BufWriter::new(fs::File::create(&path)?))?;
    report.add(root, &path, series.kind.as_str(), r.mac.as_str(), Some(r.seed), Some(series.window));
    Ok(())
}

struct RunLine {
    mac: MacKind,
    seed: u64,
    convergence: Option<(u64, f64)>,
    goodput: Option<f64>,
    delay: Option<f64>,
}

/// Runs one (MAC, seed) pair and writes its directory and metric series.
fn run_one(
    spec: &ExperimentSpec,
    mac: MacKind,
    seed: u64,
    report: &mut Report,
) -> Result<RunLine, CliError> {
    let root = &spec.output_dir;
    let cfg = spec.scenario.clone().with_seed(seed);
    let opts = RunOptions {
        q_snapshot_every: spec.q_snapshot_every,
    };
    let r = run_with(&cfg, mac, spec.horizon, &opts)?;
    let dir = root.join(format!("{mac}-seed{seed}"));
    for p in r.write_dir(&dir)? {
        let kind = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        report.add(root, &p, &kind, mac.as_str(), Some(seed), None);
    }
    let mut line = RunLine {
        mac,
        seed,
        convergence: None,
        goodput: None,
        delay: None,
    };
    if mac == MacKind::QLearning {
        let s = network_average_reward(&r, spec.reward_window)?;
        write_series(report, root, &dir, "reward_series.csv", &s, &r)?;
        match convergence_time(&r) {
            Ok(c) => line.convergence = Some((c.network_iterations, c.network_seconds)),
            Err(e) => report.problems.push(format!("{mac} seed {seed}: {e}")),
        }
    }
    write_series(report, root, &dir, "goodput_series.csv", &goodput(&r, spec.goodput_window)?, &r)?;
    let d = average_delay(&r, spec.goodput_window)?;
    write_series(report, root, &dir, "delay_series.csv", &d.series, &r)?;
    match steady_state(&r) {
        Ok(ss) => {
            line.goodput = Some(ss.goodput);
            line.delay = ss.delay_ms;
            if ss.delay_ms.is_none() {
                report.problems.push(format!("{mac} seed {seed}: steady delay undefined (no deliveries)"));
            }
        }
        Err(e) => report.problems.push(format!("{mac} seed {seed}: {e}")),
    }
    Ok(line)
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.prec$}"))
}

fn summary_table(lines: &[RunLine]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<10} {:>6} {:>10} {:>9} {:>10} {:>10}",
        "mac", "seed", "conv_iter", "conv_s", "goodput", "delay_ms"
    );
    for l in lines {
        let (it, secs) = match (l.mac, l.convergence) {
            (MacKind::Csma, _) => ("-".to_string(), "-".to_string()),
            (_, None) => ("none".to_string(), "none".to_string()),
            (_, Some((i, t))) => (i.to_string(), format!("{t:.1}")),
        };
        let _ = writeln!(
            s,
            "{:<10} {:>6} {:>10} {:>9} {:>10} {:>10}",
            l.mac.as_str(),
            l.seed,
            it,
            secs,
            fmt_opt(l.goodput, 4),
            fmt_opt(l.delay, 2)
        );
    }
    let mut iters: Vec<u64> = lines.iter().filter_map(|l| l.convergence.map(|c| c.0)).collect();
    if !iters.is_empty() {
        iters.sort_unstable();
        let tdma = lines.iter().filter(|l| l.mac == MacKind::QLearning).count();
        let _ = writeln!(
            s,
            "\nconverged {}/{} qlearning runs; median network convergence iteration {}",
            iters.len(),
            tdma,
            iters[iters.len() / 2]
        );
    }
    let _ = writeln!(s, "{REFERENCE_NOTE}");
    s
}

fn write_text(report: &mut Report, root: &Path, name: &str, kind: &str, text: &str) -> Result<(), CliError> {
    let path = root.join(name);
    fs::write(&path, text)?;
    report.add(root, &path, kind, "", None, None);
    Ok(())
}

fn run_all(spec: &ExperimentSpec, report: &mut Report) -> Result<Vec<RunLine>, CliError> {
    fs::create_dir_all(&spec.output_dir)?;
    let mut lines = Vec::new();
    for &seed in &spec.seeds {
        for &mac in &spec.macs {
            lines.push(run_one(spec, mac, seed, report)?);
        }
    }
    Ok(lines)
}

pub fn cmd_run(spec: &ExperimentSpec) -> Result<Report, CliError> {
    if spec.seeds.is_empty() {
        return Err(CliError::NoSeeds);
    }
    let mut report = Report::default();
    let lines = run_all(spec, &mut report)?;
    report.summary = summary_table(&lines);
    let root = &spec.output_dir;
    let summary = report.summary.clone();
    write_text(&mut report, root, "summary.txt", "summary", &summary)?;
    report.write_manifest(root)?;
    Ok(report)
}

/// Seed-averaged sweep row for one MAC.
fn mean_row(rows: &[SweepRow]) -> (f64, Option<f64>) {
    let g = rows.iter().map(|r| r.goodput).sum::<f64>() / rows.len() as f64;
    let d: Vec<f64> = rows.iter().filter_map(|r| r.delay_ms).collect();
    let d = (d.len() == rows.len() && !d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64);
    (g, d)
}

pub fn cmd_compare(spec: &ExperimentSpec) -> Result<Report, CliError> {
    let sizes = match &spec.sweep {
        Some(s) if !s.is_empty() => s.clone(),
        _ => return Err(CliError::SweepRequired),
    };
    if spec.seeds.is_empty() {
        return Err(CliError::NoSeeds);
    }
    check_sweep_sizes(&spec.scenario, &sizes, MacKind::QLearning)?;
    let both = ExperimentSpec {
        macs: vec![MacKind::QLearning, MacKind::Csma],
        ..spec.clone()
    };
    let mut report = Report::default();
    let lines = run_all(&both, &mut report)?;
    let root = &spec.output_dir;

    let mut per_seed = csv::Writer::from_writer(Vec::new());
    per_seed.write_record(["size", "mac", "seed", "goodput", "delay_ms"])?;
    let mut table = Vec::new();
    for &size in &sizes {
        let mut rows: [Vec<SweepRow>; 2] = [Vec::new(), Vec::new()];
        for &seed in &spec.seeds {
            for (k, mac) in [MacKind::QLearning, MacKind::Csma].into_iter().enumerate() {
                let cfg = ScenarioConfig {
                    data_packet_bytes: size,
                    ..spec.scenario.clone().with_seed(seed)
                };
                let r = crate::engine::run(&cfg, mac, spec.horizon)?;
                match steady_state(&r) {
                    Ok(ss) => {
                        per_seed.write_record([
                            size.to_string(),
                            mac.to_string(),
                            seed.to_string(),
                            format!("{:.6}", ss.goodput),
                            fmt_opt(ss.delay_ms, 4),
                        ])?;
                        rows[k].push(SweepRow {
                            size,
                            goodput: ss.goodput,
                            delay_ms: ss.delay_ms,
                        });
                    }
                    Err(e) => report.problems.push(format!("{mac} seed {seed} size {size}: {e}")),
                }
            }
        }
        if rows.iter().any(Vec::is_empty) {
            continue;
        }
        table.push((size, mean_row(&rows[0]), mean_row(&rows[1])));
    }
    let path = root.join("sweep_runs.csv");
    fs::write(&path, per_seed.into_inner().map_err(|e| e.into_error())?)?;
    report.add(root, &path, "sweep", "both", None, None);

    let mut cmp = csv::Writer::from_writer(Vec::new());
    cmp.write_record([
        "size",
        "tdma_goodput",
        "csma_goodput",
        "tdma_delay",
        "csma_delay",
        "goodput_gain_%",
        "delay_reduction_%",
    ])?;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:>6} {:>12} {:>12} {:>11} {:>11} {:>9} {:>9}",
        "size", "tdma_goodput", "csma_goodput", "tdma_delay", "csma_delay", "gain_%", "red_%"
    );
    for &(size, (tg, td), (cg, cd)) in &table {
        let gain = (cg > 0.0).then(|| (tg - cg) / cg * 100.0);
        let red = match (td, cd) {
            (Some(t), Some(c)) if c > 0.0 => Some((c - t) / c * 100.0),
            _ => None,
        };
        if td.is_none() || cd.is_none() {
            report.problems.push(format!("size {size}: steady delay undefined"));
        }
        cmp.write_record([
            size.to_string(),
            format!("{tg:.6}"),
            format!("{cg:.6}"),
            fmt_opt(td, 4),
            fmt_opt(cd, 4),
            fmt_opt(gain, 2),
            fmt_opt(red, 2),
        ])?;
        let _ = writeln!(
            text,
            "{:>6} {:>12.4} {:>12.4} {:>11} {:>11} {:>9} {:>9}",
            size,
            tg,
            cg,
            fmt_opt(td, 2),
            fmt_opt(cd, 2),
            fmt_opt(gain, 1),
            fmt_opt(red, 1)
        );
    }
    let path = root.join("comparison.csv");
    fs::write(&path, cmp.into_inner().map_err(|e| e.into_error())?)?;
    report.add(root, &path, "comparison", "both", None, None);

    report.summary = format!("{}\n{}", summary_table(&lines), text);
    let summary = report.summary.clone();
    write_text(&mut report, root, "summary.txt", "summary", &summary)?;
    report.write_manifest(root)?;
    Ok(report)
}

/// Executes a parsed command line; `Ok(false)` means some runs finished but
/// a requested metric could not be computed.
pub fn execute(cli: Cli) -> Result<bool, CliError> {
    let report = match cli.command {
        Command::Validate { config } => {
            load_config(config.as_deref())?;
            println!("config ok");
            return Ok(true);
        }
        Command::Run(a) => cmd_run(&ExperimentSpec::from_args(&a)?)?,
        Command::Compare { common, sweep } => {
            let mut spec = ExperimentSpec::from_args(&common)?;
            spec.sweep = Some(parse_sweep(&sweep)?);
            cmd_compare(&spec)?
        }
    };
    print!("{}", report.summary);
    for p in &report.problems {
        eprintln!("warning: {p}");
    }
    Ok(report.success())
}
