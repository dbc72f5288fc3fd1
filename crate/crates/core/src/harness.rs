//! Command-line front end: single-image decomposition and corpus
//! benchmarking at a matched STR.
//!
//! The binary is a thin wrapper around [`Cli`] and [`run`]; keeping the logic
//! here lets tests drive it without spawning processes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::decompose::{
    decompose_with, ConvergenceTrace, DecomposeConfig, GpExponent, TextureModel, Weight,
};
use crate::error::{Error, Result};
use crate::grid::ChannelImage;
use crate::imageio::{self, Encoding};
use crate::metrics::{match_str, MetricsReport};
use crate::par::{init_threads, map_indexed, Execution};
use crate::prox::HardShrinkMode;

/// Exit status for runtime failures (I/O, decoding, numerical errors).
pub const EXIT_FAILURE: i32 = 1;
/// Exit status for invalid arguments or parameters.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "semisparse", version, about = "Semi-sparse structure/texture decomposition")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split one image into structure and texture.
    Decompose(DecomposeArgs),
    /// Tune and decompose every image of a corpus under each listed config.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    L1,
    L2,
    Gp,
    Hinv,
}

impl From<ModelArg> for TextureModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::L1 => TextureModel::L1,
            ModelArg::L2 => TextureModel::L2,
            ModelArg::Gp => TextureModel::Gp,
            ModelArg::Hinv => TextureModel::Hinv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShrinkArg {
    /// Threshold sqrt(2β/ρ).
    Exact,
    /// Threshold β/ρ.
    Paper,
}

impl From<ShrinkArg> for HardShrinkMode {
    fn from(s: ShrinkArg) -> Self {
        match s {
            ShrinkArg::Exact => HardShrinkMode::ExactProx,
            ShrinkArg::Paper => HardShrinkMode::PaperLiteral,
        }
    }
}

/// Default `γ` of the `G_p` model when `--gamma` is absent.
pub const DEFAULT_GAMMA: f64 = 2e-4;

/// Model and solver flags shared by both subcommands.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value = "l1")]
    pub model: ModelArg,
    #[arg(long, default_value_t = 0.005)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.006)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.001)]
    pub beta: f64,
    /// Texture weight of the gp model [default: 0.0002].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Exponent of the gp texture norm (1 or 2) [default: 1].
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=2))]
    pub p: Option<u32>,
    /// Order of the L0-penalized differences.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..=3))]
    pub order: u8,
    #[arg(long, default_value_t = 1.0)]
    pub rho1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho3: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, value_enum, default_value = "exact")]
    pub hard_shrink: ShrinkArg,
    /// Worker threads across channels and images; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

impl SolverArgs {
    pub fn config(&self) -> Result<DecomposeConfig> {
        let model = TextureModel::from(self.model);
        let gp = model == TextureModel::Gp;
        if !gp && (self.gamma.is_some() || self.p.is_some()) {
            return Err(Error::Parameter(
                "--gamma and --p only apply to --model gp".into(),
            ));
        }
        let cfg = DecomposeConfig {
            model,
            lambda: self.lambda,
            alpha: self.alpha,
            beta: self.beta,
            gamma: gp.then(|| self.gamma.unwrap_or(DEFAULT_GAMMA)),
            p: if gp {
                Some(self.p.map_or(Ok(GpExponent::default()), GpExponent::from_int)?)
            } else {
                None
            },
            order: self.order as usize,
            rho1: self.rho1,
            rho2: self.rho2,
            rho3: self.rho3,
            eps: self.eps,
            max_iters: self.max_iters,
            hard_shrink_mode: self.hard_shrink.into(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn execution(&self) -> Execution {
        init_threads(self.threads);
        if self.threads == 1 {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out_structure: PathBuf,
    /// Texture image, stored with the signed 0.5-offset map.
    #[arg(long)]
    pub out_texture: PathBuf,
    /// Lossless texture dump (SSDT1 raw doubles).
    #[arg(long)]
    pub out_texture_raw: Option<PathBuf>,
    #[arg(long)]
    pub metrics_json: Option<PathBuf>,
    #[arg(long)]
    pub trace_csv: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    /// Directory of PNG/PPM/PGM images.
    #[arg(long)]
    pub corpus: PathBuf,
    /// key=value file with a target STR and `[config]` blocks.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_csv: PathBuf,
    #[arg(long)]
    pub out_json: PathBuf,
    /// Worker threads across images; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

/// Exit status for an error raised by [`run`].
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parameter(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Decompose(args) => cmd_decompose(&args).map(|_| ()),
        Command::Benchmark(args) => cmd_benchmark(&args).map(|_| ()),
    }
}

/// JSON written by `decompose --metrics-json`. `str_db` is `null` when the
/// texture vanishes, `c0`/`c1` when every channel is constant.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsJson {
    pub str_db: Option<f64>,
    pub c0: Option<f64>,
    pub c1: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
    pub config: DecomposeConfig,
}

pub fn cmd_decompose(args: &DecomposeArgs) -> Result<MetricsJson> {
    let cfg = args.solver.config()?;
    let exec = args.solver.execution();
    let f = imageio::read_image(&args.input)?;

    let start = Instant::now();
    let result = decompose_with(&f, &cfg, exec)?;
    let wall = start.elapsed().as_secs_f64();
    if !result.converged {
        log::warn!(
            "stopped after {} iterations without reaching eps={}",
            result.iterations,
            cfg.eps
        );
    }

    imageio::write_image(
        &args.out_structure,
        &result.structure,
        Encoding::for_path(&args.out_structure),
    )?;
    imageio::write_image(&args.out_texture, &result.texture, Encoding::SignedOffset)?;
    if let Some(path) = &args.out_texture_raw {
        imageio::write_raw(path, &result.texture)?;
    }
    if let Some(path) = &args.trace_csv {
        write_trace_csv(path, &result.traces)?;
    }

    let report = MetricsReport::from_result(&result, cfg.order, wall)?;
    let json = MetricsJson {
        str_db: report.str_db.is_finite().then_some(report.str_db),
        c0: report.c0,
        c1: report.c1,
        iterations: result.iterations,
        converged: result.converged,
        wall_time_s: wall,
        config: cfg,
    };
    if let Some(path) = &args.metrics_json {
        write_json(path, &json)?;
    }
    Ok(json)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{other:?}")),
    }
}

/// One row per iteration. Multichannel runs add a trailing `channel` column.
pub fn write_trace_csv(path: &Path, traces: &[ConvergenceTrace]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let multi = traces.len() > 1;
    let mut header = vec!["iter", "q_r", "e_u", "r_fidelity", "r_grad", "r_hess"];
    if multi {
        header.push("channel");
    }
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (c, trace) in traces.iter().enumerate() {
        for r in &trace.records {
            let mut row = vec![
                r.iter.to_string(),
                r.q_r.to_string(),
                r.e_u.to_string(),
                r.r_fidelity.to_string(),
                r.r_grad.to_string(),
                r.r_hess.to_string(),
            ];
            if multi {
                row.push(c.to_string());
            }
            w.write_record(&row).map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One `[config]` block of a benchmark file.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub name: String,
    pub config: DecomposeConfig,
    /// Weight adjusted to reach the target STR.
    pub tune: Weight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkPlan {
    pub target_str_db: f64,
    pub configs: Vec<BenchConfig>,
}

impl FromStr for BenchmarkPlan {
    type Err = Error;

    /// Line-oriented format; `#` starts a comment:
    ///
    /// ```text
    /// target_str = 19.23
    ///
    /// [config]
    /// name = ours
    /// model = l1
    /// lambda = 0.005
    /// tune = lambda
    /// ```
    ///
    /// Unset keys take the [`DecomposeConfig`] defaults; `tune` defaults to
    /// `lambda`.
    fn from_str(text: &str) -> Result<Self> {
        let mut target = None;
        let mut blocks: Vec<Vec<(usize, String, String)>> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line == "[config]" {
                blocks.push(Vec::new());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parameter(format!("line {}: expected key = value", n + 1)))?;
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            match blocks.last_mut() {
                Some(block) => block.push((n + 1, key, value)),
                None if key == "target_str" => target = Some(parse_num(n + 1, &value)?),
                None => {
                    return Err(Error::Parameter(format!(
                        "line {}: unknown global key '{key}'",
                        n + 1
                    )))
                }
            }
        }
        let target_str_db =
            target.ok_or_else(|| Error::Parameter("benchmark config lacks target_str".into()))?;
        if blocks.is_empty() {
            return Err(Error::Parameter("benchmark config has no [config] block".into()));
        }
        let configs = blocks
            .iter()
            .enumerate()
            .map(|(i, b)| parse_block(i, b))
            .collect::<Result<_>>()?;
        Ok(Self {
            target_str_db,
            configs,
        })
    }
}

fn parse_num<T: FromStr>(line: usize, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Parameter(format!("line {line}: cannot parse '{value}'")))
}

fn parse_block(index: usize, entries: &[(usize, String, String)]) -> Result<BenchConfig> {
    let mut cfg = DecomposeConfig::default();
    let mut name = format!("config{}", index + 1);
    let mut tune = Weight::Lambda;
    let mut gamma = None;
    let mut p = None;
    for (line, key, value) in entries {
        let line = *line;
        match key.as_str() {
            "name" => name = value.clone(),
            "model" => cfg.model = value.parse()?,
            "lambda" => cfg.lambda = parse_num(line, value)?,
            "alpha" => cfg.alpha = parse_num(line, value)?,
            "beta" => cfg.beta = parse_num(line, value)?,
            "gamma" => gamma = Some(parse_num(line, value)?),
            "p" => p = Some(GpExponent::from_int(parse_num(line, value)?)?),
            "order" => cfg.order = parse_num(line, value)?,
            "rho1" => cfg.rho1 = parse_num(line, value)?,
            "rho2" => cfg.rho2 = parse_num(line, value)?,
            "rho3" => cfg.rho3 = parse_num(line, value)?,
            "eps" => cfg.eps = parse_num(line, value)?,
            "max_iters" => cfg.max_iters = parse_num(line, value)?,
            "hard_shrink" => {
                cfg.hard_shrink_mode = match value.as_str() {
                    "exact" => HardShrinkMode::ExactProx,
                    "paper" => HardShrinkMode::PaperLiteral,
                    other => {
                        return Err(Error::Parameter(format!(
                            "line {line}: hard_shrink must be exact or paper, got '{other}'"
                        )))
                    }
                }
            }
            "tune" => tune = value.parse()?,
            other => {
                return Err(Error::Parameter(format!("line {line}: unknown key '{other}'")))
            }
        }
    }
    if cfg.model == TextureModel::Gp {
        cfg.gamma = Some(gamma.unwrap_or(DEFAULT_GAMMA));
        cfg.p = Some(p.unwrap_or_default());
    } else if gamma.is_some() || p.is_some() {
        return Err(Error::Parameter(format!(
            "config '{name}': gamma and p only apply to model gp"
        )));
    }
    cfg.validate()
        .map_err(|e| Error::Parameter(format!("config '{name}': {e}")))?;
    if cfg.weight(tune).is_none() {
        return Err(Error::Parameter(format!(
            "config '{name}': cannot tune {tune:?} for model {}",
            cfg.model
        )));
    }
    Ok(BenchConfig { name, config: cfg, tune })
}

/// Outcome of one image × config job.
#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkRow {
    pub image: String,
    pub config: String,
    pub model: TextureModel,
    pub tuned: Weight,
    /// Weights after tuning, or the starting ones when tuning failed.
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: Option<f64>,
    pub ok: bool,
    pub error: Option<String>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub str_db: Option<f64>,
    pub c0: Option<f64>,
    pub c1: Option<f64>,
    /// Decomposition time at the tuned weights, tuning excluded.
    pub wall_time_s: Option<f64>,
}

/// Means over the successful rows of one config.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkAggregate {
    pub config: String,
    pub rows: usize,
    pub failed: usize,
    pub mean_str_db: Option<f64>,
    pub mean_c0: Option<f64>,
    pub mean_c1: Option<f64>,
    pub mean_iterations: Option<f64>,
    pub mean_wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub target_str_db: f64,
    pub rows: Vec<BenchmarkRow>,
    pub aggregates: Vec<BenchmarkAggregate>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl BenchmarkReport {
    /// Recomputes per-config means from `rows`, in first-appearance order.
    pub fn aggregate(rows: &[BenchmarkRow]) -> Vec<BenchmarkAggregate> {
        let mut names: Vec<&str> = Vec::new();
        for r in rows {
            if !names.contains(&r.config.as_str()) {
                names.push(&r.config);
            }
        }
        names
            .into_iter()
            .map(|name| {
                let mine: Vec<&BenchmarkRow> = rows.iter().filter(|r| r.config == name).collect();
                let ok = || mine.iter().filter(|r| r.ok);
                BenchmarkAggregate {
                    config: name.to_string(),
                    rows: mine.len(),
                    failed: mine.iter().filter(|r| !r.ok).count(),
                    mean_str_db: mean(ok().map(|r| r.str_db)),
                    mean_c0: mean(ok().map(|r| r.c0)),
                    mean_c1: mean(ok().map(|r| r.c1)),
                    mean_iterations: mean(ok().map(|r| r.iterations.map(|i| i as f64))),
                    mean_wall_time_s: mean(ok().map(|r| r.wall_time_s)),
                }
            })
            .collect()
    }
}

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "ppm", "pgm"];

/// Image files directly inside `dir`, sorted by name.
pub fn list_corpus(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn bench_job(image: &str, f: &std::result::Result<ChannelImage, String>, bc: &BenchConfig, target: f64) -> BenchmarkRow {
    let mut row = BenchmarkRow {
        image: image.to_string(),
        config: bc.name.clone(),
        model: bc.config.model,
        tuned: bc.tune,
        lambda: bc.config.lambda,
        alpha: bc.config.alpha,
        beta: bc.config.beta,
        gamma: bc.config.gamma,
        ok: false,
        error: None,
        iterations: None,
        converged: None,
        str_db: None,
        c0: None,
        c1: None,
        wall_time_s: None,
    };
    let outcome = f.as_ref().map_err(|e| e.clone()).and_then(|f| {
        let mut run = || -> Result<_> {
        let cfg = match_str(f, target, &bc.config, bc.tune)?;
        row.lambda = cfg.lambda;
        row.alpha = cfg.alpha;
        row.beta = cfg.beta;
        row.gamma = cfg.gamma;
        let start = Instant::now();
        // channels run sequentially; the pool is busy with other jobs
        let result = decompose_with(f, &cfg, Execution::Sequential)?;
        let wall = start.elapsed().as_secs_f64();
        let report = MetricsReport::from_result(&result, cfg.order, wall)?;
        Ok((result, report))
        };
        run().map_err(|e| match &e {
            Error::TuningFailed { best_str_db, .. } => {
                row.str_db = best_str_db.is_finite().then_some(*best_str_db);
                e.to_string()
            }
            _ => e.to_string(),
        })
    });
    match outcome {
        Ok((result, report)) => {
            row.ok = true;
            row.iterations = Some(result.iterations);
            row.converged = Some(result.converged);
            row.str_db = report.str_db.is_finite().then_some(report.str_db);
            row.c0 = report.c0;
            row.c1 = report.c1;
            row.wall_time_s = Some(report.wall_time_s);
        }
        Err(e) => row.error = Some(e),
    }
    row
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

/// CSV view of the rows. Timings are left out so reruns compare
/// byte-for-byte; they remain in the JSON report.
pub fn write_benchmark_csv(path: &Path, rows: &[BenchmarkRow]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "image", "config", "model", "tuned", "lambda", "alpha", "beta", "gamma", "status",
        "iterations", "converged", "str_db", "c0", "c1", "error",
    ])
    .map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record([
            r.image.clone(),
            r.config.clone(),
            r.model.to_string(),
            format!("{:?}", r.tuned).to_lowercase(),
            r.lambda.to_string(),
            r.alpha.to_string(),
            r.beta.to_string(),
            opt(&r.gamma),
            if r.ok { "ok" } else { "failed" }.to_string(),
            opt(&r.iterations),
            opt(&r.converged),
            opt(&r.str_db),
            opt(&r.c0),
            opt(&r.c1),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn cmd_benchmark(args: &BenchmarkArgs) -> Result<BenchmarkReport> {
    let text = fs::read_to_string(&args.config).map_err(|e| Error::io(&args.config, e))?;
    let plan: BenchmarkPlan = text.parse()?;
    let files = list_corpus(&args.corpus)?;
    if files.is_empty() {
        return Err(Error::Io {
            path: args.corpus.clone(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "corpus has no images"),
        });
    }
    init_threads(args.threads);
    let exec = if args.threads == 1 {
        Execution::Sequential
    } else {
        Execution::default()
    };

    let images: Vec<(String, std::result::Result<ChannelImage, String>)> = files
        .iter()
        .map(|p| {
            let id = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            (id, imageio::read_image(p).map_err(|e| e.to_string()))
        })
        .collect();
    let n_cfg = plan.configs.len();
    let rows = map_indexed(exec, images.len() * n_cfg, |job| {
        let (id, img) = &images[job / n_cfg];
        bench_job(id, img, &plan.configs[job % n_cfg], plan.target_str_db)
    });
    for r in rows.iter().filter(|r| !r.ok) {
        log::warn!("{} / {}: {}", r.image, r.config, r.error.as_deref().unwrap_or(""));
    }

    let report = BenchmarkReport {
        target_str_db: plan.target_str_db,
        aggregates: BenchmarkReport::aggregate(&rows),
        rows,
    };
    write_benchmark_csv(&args.out_csv, &report.rows)?;
    write_json(&args.out_json, &report)?;
    Ok(report)
}

/// Entry point for the binary: parses, runs, reports, returns the status.
pub fn main_with_args<I, T>(args: I, stderr: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{ramp_step_scene, Stripes};

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("semisparse").chain(args.iter().copied())).unwrap()
    }

    fn solver(args: &[&str]) -> SolverArgs {
        let mut full = vec!["decompose", "--input", "a", "--out-structure", "u.png", "--out-texture", "v.png"];
        full.extend_from_slice(args);
        match parse(&full).command {
            Command::Decompose(d) => d.solver,
            _ => unreachable!(),
        }
    }

    #[test]
    fn flag_defaults_match_config_defaults() {
        assert_eq!(solver(&[]).config().unwrap(), DecomposeConfig::default());
        let gp = solver(&["--model", "gp"]).config().unwrap();
        assert_eq!(gp.gamma, Some(DEFAULT_GAMMA));
        assert_eq!(gp.p, Some(GpExponent::One));
    }

    #[test]
    fn flag_validation() {
        let err = solver(&["--gamma", "0.1"]).config().unwrap_err();
        assert_eq!(exit_code(&err), EXIT_USAGE);
        let err = solver(&["--lambda=-1"]).config().unwrap_err();
        assert_eq!(exit_code(&err), EXIT_USAGE);
        let bad_order = Cli::try_parse_from([
            "semisparse", "decompose", "--input", "a", "--out-structure", "u", "--out-texture", "v",
            "--order", "4",
        ]);
        assert_eq!(bad_order.unwrap_err().exit_code(), EXIT_USAGE);
        let cfg = solver(&["--hard-shrink", "paper", "--order", "3", "--model", "hinv"])
            .config()
            .unwrap();
        assert_eq!(cfg.hard_shrink_mode, HardShrinkMode::PaperLiteral);
        assert_eq!(cfg.order, 3);
        assert_eq!(cfg.model, TextureModel::Hinv);
    }

    #[test]
    fn help_exits_zero() {
        let err = Cli::try_parse_from(["semisparse", "--help"]).unwrap_err();
        assert_eq!(err.exit_code(), 0);
        let err = Cli::try_parse_from(["semisparse", "decompose", "--help"]).unwrap_err();
        assert_eq!(err.exit_code(), 0);
    }

    #[test]
    fn plan_parsing() {
        let plan: BenchmarkPlan = "# corpus settings\ntarget_str = 19.23\n\n[config]\nname = ours\nlambda = 0.004 # start\n\n[config]\nmodel = gp\np = 2\ntune = alpha\n"
            .parse()
            .unwrap();
        assert_eq!(plan.target_str_db, 19.23);
        assert_eq!(plan.configs.len(), 2);
        assert_eq!(plan.configs[0].name, "ours");
        assert_eq!(plan.configs[0].config.lambda, 0.004);
        assert_eq!(plan.configs[0].tune, Weight::Lambda);
        assert_eq!(plan.configs[1].name, "config2");
        assert_eq!(plan.configs[1].config.p, Some(GpExponent::Two));
        assert_eq!(plan.configs[1].tune, Weight::Alpha);

        for bad in [
            "[config]\n",
            "target_str = 1\n",
            "target_str = 1\n[config]\nfoo = 1\n",
            "target_str = 1\n[config]\nmodel = l1\ngamma = 1\n",
            "target_str = 1\n[config]\ntune = gamma\n",
            "target_str = 1\n[config]\nlambda\n",
        ] {
            assert!(bad.parse::<BenchmarkPlan>().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn aggregates_recompute_from_rows() {
        let row = |cfg: &str, ok: bool, s: f64| BenchmarkRow {
            image: "x".into(),
            config: cfg.into(),
            model: TextureModel::L1,
            tuned: Weight::Lambda,
            lambda: 1.0,
            alpha: 1.0,
            beta: 1.0,
            gamma: None,
            ok,
            error: None,
            iterations: Some(10),
            converged: Some(true),
            str_db: Some(s),
            c0: None,
            c1: None,
            wall_time_s: None,
        };
        let rows = [row("a", true, 1.0), row("b", true, 5.0), row("a", true, 3.0), row("a", false, 100.0)];
        let agg = BenchmarkReport::aggregate(&rows);
        assert_eq!(agg.len(), 2);
        assert_eq!(agg[0].config, "a");
        assert_eq!((agg[0].rows, agg[0].failed), (3, 1));
        assert_eq!(agg[0].mean_str_db, Some(2.0));
        assert_eq!(agg[0].mean_c0, None);
        assert_eq!(agg[1].mean_iterations, Some(10.0));
    }

    #[test]
    fn decompose_command_writes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("f.png");
        imageio::write_image(&input, &ramp_step_scene(32, Stripes::Vertical, 0.0).observed, Encoding::Direct)
            .unwrap();
        let out = |n: &str| dir.path().join(n);
        let args = DecomposeArgs {
            input,
            out_structure: out("u.png"),
            out_texture: out("v.png"),
            out_texture_raw: Some(out("v.raw")),
            metrics_json: Some(out("m.json")),
            trace_csv: Some(out("t.csv")),
            solver: solver(&["--max-iters", "5", "--threads", "1"]),
        };
        let m = cmd_decompose(&args).unwrap();
        assert_eq!(m.iterations, 5);
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out("m.json")).unwrap()).unwrap();
        for key in ["str_db", "c0", "c1", "iterations", "converged", "wall_time_s", "config"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        let trace = fs::read_to_string(out("t.csv")).unwrap();
        let lines: Vec<&str> = trace.lines().collect();
        assert_eq!(lines[0], "iter,q_r,e_u,r_fidelity,r_grad,r_hess");
        assert_eq!(lines.len(), 6);
        let v = imageio::read_raw(out("v.raw")).unwrap();
        let u = imageio::read_image(out("u.png")).unwrap();
        assert_eq!(v.width(), u.width());
    }

    #[test]
    fn missing_input_is_io_failure() {
        let dir = tempfile::tempdir().unwrap();
        let mut sink = Vec::new();
        let missing = dir.path().join("nope.png");
        let code = main_with_args(
            [
                "semisparse".as_ref(),
                "decompose".as_ref(),
                "--input".as_ref(),
                missing.as_os_str(),
                "--out-structure".as_ref(),
                dir.path().join("u.png").as_os_str(),
                "--out-texture".as_ref(),
                dir.path().join("v.png").as_os_str(),
            ],
            &mut sink,
        );
        assert_eq!(code, EXIT_FAILURE);
        assert!(String::from_utf8(sink).unwrap().contains("nope.png"));
    }
}
