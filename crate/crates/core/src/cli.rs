//! Command-line front end. Every command writes its outputs into a
//! directory together with a `manifest.txt` that `replay` can re-run.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, Vector3};
use sha2::{Digest, Sha256};

use crate::apps::{
    fit_sphere, register_clouds, registration_trial, run_registration_experiment, run_sphere_experiment, IcpOptions,
    RegistrationConfig, RegistrationReport, RegistrationStrategy, SphereConfig,
};
use crate::cloud::{apply_transform, recenter, scale_normalize, spectral_norm, PointCloud};
use crate::error::{bad_params, file_error, Result};
use crate::features::{don_scores, local_variation, pairwise_variation, FeatureVector};
use crate::filterbank::{parse_bank_config, passthrough_synthesis, run_bank};
use crate::filters::ideal_lowpass;
use crate::graph::{auto_sigma_k, build_graph, shift_operator, IsolatedPolicy, ShiftKind, SparseGraph};
use crate::io::{load_cloud_auto, save_cloud_named, CloudFormat};
use crate::resampling::{
    dist_allpass, dist_haar_lowpass, dist_highpass, dist_ideal_lowpass, dist_invariant, empirical_mse,
    expected_reconstruction_error, mse_closed_form, sample, unbiasedness_check, ResamplingDistribution,
};
use crate::shapes::{make_shape, ShapeKind, ShapeParams};

/// Environment variable holding the default worker thread count.
pub const THREADS_ENV: &str = "PCRESAMPLE_THREADS";
pub const MANIFEST_FILE: &str = "manifest.txt";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "pcresample",
    version,
    about = "Graph-filter based resampling of 3D point clouds"
)]
pub struct Cli {
    /// Worker threads (defaults to $PCRESAMPLE_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Resample a cloud with one of the optimal strategies.
    Resample(ResampleArgs),
    /// Compare closed-form and Monte-Carlo reconstruction error across strategies.
    Evaluate(EvaluateArgs),
    /// Per-point contour scores.
    Contour(ContourArgs),
    /// Fit a sphere to a cloud, or run the noisy-sphere experiment.
    FitSphere(FitSphereArgs),
    /// Register two clouds with ICP on resampled points.
    Register(RegisterArgs),
    /// Write a synthetic fixture.
    MakeShape(MakeShapeArgs),
    /// Dump the ε-graph as an edge list.
    Graph(GraphDumpArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

/// ε-graph parameters. `resample` and `evaluate` build the graph on the
/// recentered cloud scaled to spectral norm `--c`, so explicit values refer
/// to that frame.
#[derive(Debug, Clone, Args)]
pub struct GraphArgs {
    /// Gaussian kernel width (default: mean k-NN distance).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Neighborhood radius (default: 2σ).
    #[arg(long)]
    pub tau: Option<f64>,
    /// Neighbor rank used for the automatic σ.
    #[arg(long, default_value_t = 10)]
    pub knn: usize,
}

impl GraphArgs {
    fn build(&self, cloud: &PointCloud) -> Result<SparseGraph> {
        let sigma = match self.sigma {
            Some(s) => s,
            None => auto_sigma_k(cloud, self.knn)?,
        };
        build_graph(cloud, sigma, self.tau.unwrap_or(2.0 * sigma))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Strategy {
    Allpass,
    Highpass,
    LowpassIdeal,
    LowpassHaar,
    Filterbank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Ply,
}

impl FormatArg {
    fn format(self) -> CloudFormat {
        match self {
            FormatArg::Csv => CloudFormat::XyzCsv,
            FormatArg::Ply => CloudFormat::AsciiPly,
        }
    }

    fn extension(self) -> &'static str {
        match self {
            FormatArg::Csv => "csv",
            FormatArg::Ply => "ply",
        }
    }
}

#[derive(Debug, Clone, Args)]
#[command(group(clap::ArgGroup::new("budget").args(["ratio", "count"])))]
pub struct ResampleArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = Strategy::Highpass)]
    pub strategy: Strategy,
    /// Subband definitions for `--strategy filterbank`.
    #[arg(long)]
    pub bank_config: Option<PathBuf>,
    /// Draw ⌈ratio·N⌉ samples.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Draw exactly this many samples.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Uniform floor mix β.
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    /// Spectral norm the coordinates are normalized to.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Bandwidth of the ideal low-pass filter.
    #[arg(long)]
    pub bandwidth: Option<usize>,
    /// Exponent of the high-pass response (1 or 2).
    #[arg(long, default_value_t = 2)]
    pub exponent: u32,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Samples per resample.
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[command(flatten)]
    pub graph: GraphArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ContourArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Include attributes in the local variation.
    #[arg(long)]
    pub include_attrs: bool,
    /// Also write difference-of-normals scores for radii `R_SMALL R_LARGE`.
    #[arg(long, num_args = 2, value_names = ["R_SMALL", "R_LARGE"])]
    pub don: Option<Vec<f64>>,
    #[command(flatten)]
    pub graph: GraphArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FitSphereArgs {
    /// Cloud to fit; omit together with `--experiment`.
    #[arg(long, required_unless_present = "experiment")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    /// Run the noisy-sphere comparison instead of a single fit.
    #[arg(long, conflicts_with = "input")]
    pub experiment: bool,
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub first_seed: u64,
    #[arg(long, default_value_t = 6)]
    pub passes: usize,
    #[arg(long, default_value_t = 20)]
    pub bandwidth: usize,
    #[arg(long, default_value_t = 0.1)]
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegisterStrategyArg {
    Full,
    Uniform,
    Highpass,
}

impl RegisterStrategyArg {
    fn strategy(self) -> RegistrationStrategy {
        match self {
            RegisterStrategyArg::Full => RegistrationStrategy::Full,
            RegisterStrategyArg::Uniform => RegistrationStrategy::Uniform,
            RegisterStrategyArg::Highpass => RegistrationStrategy::Highpass,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RegisterArgs {
    /// Use the synthetic two-view desk scene with a known transform.
    #[arg(long, conflicts_with_all = ["source", "target"])]
    pub synthetic: bool,
    #[arg(long, requires = "target", required_unless_present = "synthetic")]
    pub source: Option<PathBuf>,
    #[arg(long, requires = "source")]
    pub target: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = RegisterStrategyArg::Highpass)]
    pub resample: RegisterStrategyArg,
    #[arg(long, default_value_t = 0.05)]
    pub ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// With `--synthetic`: run every strategy over `--seeds` seeds.
    #[arg(long, requires = "synthetic")]
    pub experiment: bool,
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
}

#[derive(Debug, Clone, Args)]
pub struct MakeShapeArgs {
    /// line, polygon, circle, cube-faces, hinge or sphere.
    #[arg(long)]
    pub kind: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub spacing: f64,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long, num_args = 3, value_names = ["X", "Y", "Z"], allow_negative_numbers = true)]
    pub center: Option<Vec<f64>>,
    #[arg(long, default_value_t = 4)]
    pub sides: usize,
    /// Hinge opening angle in radians.
    #[arg(long, default_value_t = 2.0 * std::f64::consts::FRAC_PI_3)]
    pub fold_angle: f64,
    /// Add a binary texture attribute to the hinge.
    #[arg(long)]
    pub texture: bool,
    /// Standard deviation of per-coordinate Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
}

#[derive(Debug, Clone, Args)]
pub struct GraphDumpArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub graph: GraphArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory for the re-run (default: the recorded one).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Resample(_) => "resample",
            Command::Evaluate(_) => "evaluate",
            Command::Contour(_) => "contour",
            Command::FitSphere(_) => "fit-sphere",
            Command::Register(_) => "register",
            Command::MakeShape(_) => "make-shape",
            Command::Graph(_) => "graph",
            Command::Replay(_) => "replay",
        }
    }

    fn output_mut(&mut self) -> Option<&mut PathBuf> {
        match self {
            Command::Resample(a) => Some(&mut a.output),
            Command::Evaluate(a) => Some(&mut a.output),
            Command::Contour(a) => Some(&mut a.output),
            Command::FitSphere(a) => Some(&mut a.output),
            Command::Register(a) => Some(&mut a.output),
            Command::MakeShape(a) => Some(&mut a.output),
            Command::Graph(a) => Some(&mut a.output),
            Command::Replay(_) => None,
        }
    }

    /// Named input files, for hashing and path resolution.
    fn inputs_mut(&mut self) -> Vec<(&'static str, &mut PathBuf)> {
        let mut out = Vec::new();
        match self {
            Command::Resample(a) => {
                out.push(("input", &mut a.input));
                if let Some(p) = a.bank_config.as_mut() {
                    out.push(("bank_config", p));
                }
            }
            Command::Evaluate(a) => out.push(("input", &mut a.input)),
            Command::Contour(a) => out.push(("input", &mut a.input)),
            Command::FitSphere(a) => {
                if let Some(p) = a.input.as_mut() {
                    out.push(("input", p));
                }
            }
            Command::Register(a) => {
                if let Some(p) = a.source.as_mut() {
                    out.push(("source", p));
                }
                if let Some(p) = a.target.as_mut() {
                    out.push(("target", p));
                }
            }
            Command::Graph(a) => out.push(("input", &mut a.input)),
            Command::MakeShape(_) | Command::Replay(_) => {}
        }
        out
    }

    fn seed(&self) -> Option<u64> {
        match self {
            Command::Resample(a) => Some(a.seed),
            Command::Evaluate(a) => Some(a.seed),
            Command::Register(a) => Some(a.seed),
            Command::MakeShape(a) => Some(a.seed),
            Command::FitSphere(a) if a.experiment => Some(a.first_seed),
            _ => None,
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let threads = match cli.threads {
        Some(t) => t,
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => match v.trim().parse() {
                Ok(t) => t,
                Err(_) => {
                    eprintln!("error: {THREADS_ENV} must be a non-negative integer, got {v:?}");
                    return EXIT_USAGE;
                }
            },
            Err(_) => 0,
        },
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return EXIT_RUNTIME;
        }
    };
    let argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let cwd = match std::env::current_dir() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    match pool.install(|| execute(cli.command, argv, &cwd)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

/// Runs `command`; `cwd` is recorded so relative inputs resolve on replay.
fn execute(mut command: Command, argv: Vec<String>, cwd: &Path) -> Result<()> {
    if let Command::Replay(r) = &command {
        return replay(r);
    }
    let mut manifest = Manifest::new(command.name(), &argv, cwd);
    if let Some(seed) = command.seed() {
        manifest.push("seed", seed.to_string());
    }
    for (name, path) in command.inputs_mut() {
        manifest.push(&format!("input.{name}.path"), path.display().to_string());
        manifest.push(&format!("input.{name}.sha256"), sha256_file(path)?);
    }
    let output = command.output_mut().expect("non-replay command").clone();
    fs::create_dir_all(&output)?;
    match &command {
        Command::Resample(a) => cmd_resample(a, &mut manifest)?,
        Command::Evaluate(a) => cmd_evaluate(a, &mut manifest)?,
        Command::Contour(a) => cmd_contour(a, &mut manifest)?,
        Command::FitSphere(a) => cmd_fit_sphere(a)?,
        Command::Register(a) => cmd_register(a)?,
        Command::MakeShape(a) => cmd_make_shape(a)?,
        Command::Graph(a) => cmd_graph(a, &mut manifest)?,
        Command::Replay(_) => unreachable!(),
    }
    fs::write(output.join(MANIFEST_FILE), manifest.render())?;
    Ok(())
}

struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    fn new(command: &str, argv: &[String], cwd: &Path) -> Self {
        let mut m = Self { entries: Vec::new() };
        m.push("tool", format!("pcresample {}", env!("CARGO_PKG_VERSION")));
        m.push("command", command.to_string());
        m.push("argv", serde_json::to_string(argv).expect("strings serialize"));
        m.push("cwd", cwd.display().to_string());
        m
    }

    fn push(&mut self, key: &str, value: String) {
        self.entries.push((key.to_string(), value));
    }

    fn render(&self) -> String {
        self.entries.iter().fold(String::new(), |mut out, (k, v)| {
            let _ = writeln!(out, "{k}={v}");
            out
        })
    }

    fn parse(text: &str) -> Result<Vec<(String, String)>> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split_once('=')
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| bad_params(format!("malformed manifest line {l:?}")))
            })
            .collect()
    }
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(file_error(path))?;
    Ok(Sha256::digest(&bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

fn replay(args: &ReplayArgs) -> Result<()> {
    let text = fs::read_to_string(&args.manifest).map_err(file_error(&args.manifest))?;
    let entries = Manifest::parse(&text)?;
    let get = |key: &str| {
        entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| bad_params(format!("manifest has no `{key}`")))
    };
    let argv: Vec<String> =
        serde_json::from_str(&get("argv")?).map_err(|e| bad_params(format!("manifest argv: {e}")))?;
    let cwd = PathBuf::from(get("cwd")?);
    let mut cli = Cli::try_parse_from(std::iter::once("pcresample".to_string()).chain(argv.iter().cloned()))
        .map_err(|e| bad_params(format!("manifest argv does not parse: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(bad_params("a manifest cannot replay another replay"));
    }
    for (name, path) in cli.command.inputs_mut() {
        if path.is_relative() {
            *path = cwd.join(&*path);
        }
        let recorded = get(&format!("input.{name}.sha256"))?;
        let actual = sha256_file(path)?;
        if recorded != actual {
            return Err(bad_params(format!(
                "input `{name}` ({}) changed since the run was recorded",
                path.display()
            )));
        }
    }
    let here = std::env::current_dir()?;
    let out = cli.command.output_mut().expect("non-replay command");
    *out = match &args.output {
        Some(o) => here.join(o),
        None => cwd.join(&*out),
    };
    let new_output = out.display().to_string();
    // point the re-run's own manifest at its new output directory
    let mut argv = argv;
    if let Some(pos) = argv.iter().position(|a| a == "--output") {
        if let Some(slot) = argv.get_mut(pos + 1) {
            *slot = new_output;
        }
    } else if let Some(slot) = argv.iter_mut().find(|a| a.starts_with("--output=")) {
        *slot = format!("--output={new_output}");
    }
    execute(cli.command, argv, &cwd)
}

fn attr_names(n: usize) -> Vec<String> {
    (0..n).map(|j| format!("attr{j}")).collect()
}

/// Saves a cloud whose last attribute column holds sample weights.
fn save_weighted(path: &Path, cloud: &PointCloud, format: FormatArg) -> Result<()> {
    let mut names = attr_names(cloud.attr_dim() - 1);
    names.push("weight".into());
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    save_cloud_named(path, cloud, format.format(), &refs)
}

fn save_plain(path: &Path, cloud: &PointCloud, format: FormatArg) -> Result<()> {
    let names = attr_names(cloud.attr_dim());
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    save_cloud_named(path, cloud, format.format(), &refs)
}

/// `(normalized cloud, scale, centroid)` with `normalized = (X - 1·centroid)·scale`.
fn normalize(cloud: &PointCloud, c: f64) -> Result<(PointCloud, f64, Vector3<f64>)> {
    let centroid = cloud.centroid();
    let centered = recenter(cloud);
    let scale = c / spectral_norm(centered.coords())?;
    Ok((scale_normalize(&centered, c)?, scale, centroid))
}

fn sample_count(ratio: Option<f64>, count: Option<usize>, n: usize) -> Result<usize> {
    match (ratio, count) {
        (Some(r), None) if r > 0.0 && r <= 1.0 => Ok((r * n as f64).ceil() as usize),
        (Some(r), None) => Err(bad_params(format!("--ratio must lie in (0, 1], got {r}"))),
        (None, Some(m)) if m > 0 => Ok(m),
        (None, Some(_)) => Err(bad_params("--count must be positive")),
        _ => Err(bad_params("give exactly one of --ratio or --count")),
    }
}

fn strategy_distribution(a: &ResampleArgs, cloud: &PointCloud, graph: &SparseGraph) -> Result<ResamplingDistribution> {
    let transition = || shift_operator(graph, ShiftKind::Transition, IsolatedPolicy::SelfLoop);
    match a.strategy {
        Strategy::Allpass => dist_allpass(cloud, a.c),
        Strategy::Highpass => dist_highpass(&transition()?, cloud, a.exponent),
        Strategy::LowpassHaar => dist_haar_lowpass(&transition()?, cloud, a.c),
        Strategy::LowpassIdeal => {
            let b = a
                .bandwidth
                .ok_or_else(|| bad_params("--strategy lowpass-ideal needs --bandwidth"))?;
            let shift = shift_operator(graph, ShiftKind::NormalizedAdjacency, IsolatedPolicy::SelfLoop)?;
            dist_ideal_lowpass(&ideal_lowpass(&shift, b)?, cloud, a.c)
        }
        Strategy::Filterbank => unreachable!("handled by the bank path"),
    }
}

fn cmd_resample(a: &ResampleArgs, manifest: &mut Manifest) -> Result<()> {
    let cloud = load_cloud_auto(&a.input)?;
    let (normalized, scale, centroid) = normalize(&cloud, a.c)?;
    let graph = a.graph.build(&normalized)?;
    manifest.push("sigma", format!("{:e}", graph.sigma()));
    manifest.push("tau", format!("{:e}", graph.tau()));
    let out = |name: &str| a.output.join(name);

    if a.strategy == Strategy::Filterbank {
        let path = a
            .bank_config
            .as_ref()
            .ok_or_else(|| bad_params("--strategy filterbank needs --bank-config"))?;
        let specs = parse_bank_config(&fs::read_to_string(path).map_err(file_error(path))?)?;
        let mut bank = run_bank(&normalized, &graph, &specs, a.seed)?;
        for (i, sub) in bank.subbands.iter_mut().enumerate() {
            fs::write(out(&format!("distribution_{i}.csv")), sub.distribution.to_csv())?;
            // filtered coordinates back in the input frame
            let mut pts = &sub.points / scale;
            for mut row in pts.row_iter_mut() {
                row += centroid.transpose();
            }
            sub.points = pts;
        }
        fs::write(out("weights.csv"), bank.to_csv())?;
        let synthesized = passthrough_synthesis(&bank, &cloud)?;
        let path = out(&format!("resampled.{}", a.format.extension()));
        return save_weighted(&path, &synthesized, a.format);
    }

    let m = sample_count(a.ratio, a.count, cloud.len())?;
    let dist = strategy_distribution(a, &normalized, &graph)?.with_floor(a.beta)?;
    let result = sample(&dist, m, a.seed)?;
    fs::write(out("distribution.csv"), dist.to_csv())?;
    fs::write(out("weights.csv"), result.to_csv())?;
    let unique = result.unique_indices();
    let mut weight = vec![0.0; cloud.len()];
    for (&i, &w) in result.indices.iter().zip(&result.weights) {
        weight[i] += w;
    }
    let picked = cloud.select(&unique)?;
    let mut attrs = DMatrix::zeros(unique.len(), cloud.attr_dim() + 1);
    for (row, &i) in unique.iter().enumerate() {
        for k in 0..cloud.attr_dim() {
            attrs[(row, k)] = cloud.attrs()[(i, k)];
        }
        attrs[(row, cloud.attr_dim())] = weight[i];
    }
    let picked = picked.with_attrs(attrs)?;
    let path = out(&format!("resampled.{}", a.format.extension()));
    save_weighted(&path, &picked, a.format)
}

fn fmt_value(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.6e}")
    }
}

fn cmd_evaluate(a: &EvaluateArgs, manifest: &mut Manifest) -> Result<()> {
    let cloud = load_cloud_auto(&a.input)?;
    let (normalized, _, _) = normalize(&cloud, a.c)?;
    let graph = a.graph.build(&normalized)?;
    manifest.push("sigma", format!("{:e}", graph.sigma()));
    manifest.push("tau", format!("{:e}", graph.tau()));
    let shift = shift_operator(&graph, ShiftKind::Transition, IsolatedPolicy::SelfLoop)?;
    let n = normalized.len();

    let highpass = crate::features::highpass_response(&shift, &normalized, false)?;
    let features: Vec<(&str, DMatrix<f64>)> =
        vec![("coords", normalized.coords().clone()), ("highpass-response", highpass)];

    let mut table =
        String::from("feature,distribution,closed_form,expected,empirical,empirical_over_expected,relative_bias\n");
    for (fname, f) in &features {
        let optimal = dist_invariant(&FeatureVector::raw(f.clone()))?;
        let dists: Vec<(&str, ResamplingDistribution)> = vec![
            ("uniform", ResamplingDistribution::uniform(n)?),
            ("optimal", optimal.with_floor(a.beta)?),
            ("highpass", dist_highpass(&shift, &normalized, 2)?.with_floor(a.beta)?),
        ];
        for (dname, dist) in &dists {
            let closed = mse_closed_form(f, dist)?;
            let expected = expected_reconstruction_error(f, dist, a.count)?;
            let (empirical, ratio, bias) = if closed.is_finite() {
                let emp = empirical_mse(f, dist, a.count, a.trials, a.seed)?;
                let bias = unbiasedness_check(f, dist, a.count, a.trials, a.seed)?.relative_bias;
                let ratio = if expected > 0.0 { emp / expected } else { 1.0 };
                (fmt_value(emp), format!("{ratio:.6}"), format!("{bias:.6e}"))
            } else {
                ("inf".to_string(), "inf".to_string(), "inf".to_string())
            };
            let _ = writeln!(
                table,
                "{fname},{dname},{},{},{empirical},{ratio},{bias}",
                fmt_value(closed),
                fmt_value(expected)
            );
        }
    }
    print!("{table}");
    fs::write(a.output.join("evaluation.csv"), table)?;
    Ok(())
}

fn cmd_contour(a: &ContourArgs, manifest: &mut Manifest) -> Result<()> {
    let cloud = load_cloud_auto(&a.input)?;
    let graph = a.graph.build(&cloud)?;
    manifest.push("sigma", format!("{:e}", graph.sigma()));
    manifest.push("tau", format!("{:e}", graph.tau()));
    let shift = shift_operator(&graph, ShiftKind::Transition, IsolatedPolicy::SelfLoop)?;
    let lv = local_variation(&shift, &cloud, a.include_attrs)?;
    fs::write(a.output.join("local_variation.csv"), lv.scores_csv())?;
    let pv = pairwise_variation(&graph, &cloud)?;
    fs::write(a.output.join("pairwise_variation.csv"), pv.scores_csv())?;
    if let Some(r) = &a.don {
        let don = don_scores(&cloud, r[0], r[1])?;
        fs::write(a.output.join("don.csv"), don.scores_csv())?;
    }
    Ok(())
}

fn cmd_fit_sphere(a: &FitSphereArgs) -> Result<()> {
    let report = if a.experiment {
        let cfg = SphereConfig {
            passes: a.passes,
            bandwidth: a.bandwidth,
            ratio: a.ratio,
            seeds: (a.first_seed..a.first_seed + a.seeds).collect(),
            ..SphereConfig::default()
        };
        let summary = run_sphere_experiment(&cfg)?;
        fs::write(a.output.join("sphere_experiment.csv"), summary.to_csv())?;
        format!(
            "median_uniform_radius_error={:.6e}\nmedian_lowpass_radius_error={:.6e}\nreduction={:.6}\n",
            summary.median_uniform,
            summary.median_lowpass,
            summary.reduction()
        )
    } else {
        let path = a.input.as_ref().ok_or_else(|| bad_params("--input is required"))?;
        let fit = fit_sphere(&load_cloud_auto(path)?)?;
        format!(
            "radius={:.10}\ncenter_x={:.10}\ncenter_y={:.10}\ncenter_z={:.10}\nrms_residual={:.6e}\n",
            fit.radius, fit.center.x, fit.center.y, fit.center.z, fit.rms_residual
        )
    };
    print!("{report}");
    fs::write(a.output.join("report.txt"), report)?;
    Ok(())
}

fn registration_text(strategy: &str, r: &RegistrationReport) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6e}"));
    let rot = r.recovered.rotation;
    let shift = r.recovered.shift;
    format!(
        "strategy={strategy}\nrmse={:.6e}\nshift_error={}\nrotation_error={}\niterations={}\nconverged={}\n\
         rotation={:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n\
         shift={:.12e},{:.12e},{:.12e}\n",
        r.rmse,
        opt(r.shift_error),
        opt(r.rotation_error),
        r.iterations,
        r.converged,
        rot[(0, 0)],
        rot[(0, 1)],
        rot[(0, 2)],
        rot[(1, 0)],
        rot[(1, 1)],
        rot[(1, 2)],
        rot[(2, 0)],
        rot[(2, 1)],
        rot[(2, 2)],
        shift.x,
        shift.y,
        shift.z
    )
}

fn cmd_register(a: &RegisterArgs) -> Result<()> {
    let icp = IcpOptions {
        max_iter: a.max_iter,
        tol: a.tol,
    };
    let strategy = a.resample.strategy();
    let report = if a.synthetic {
        let cfg = RegistrationConfig {
            ratio: a.ratio,
            icp,
            seeds: (a.seed..a.seed + a.seeds).collect(),
            ..RegistrationConfig::default()
        };
        if a.experiment {
            let s = run_registration_experiment(&cfg)?;
            fs::write(a.output.join("registration_experiment.csv"), s.to_csv())?;
            let mut text = String::new();
            for (name, m) in [("full", s.full), ("uniform", s.uniform), ("highpass", s.highpass)] {
                let _ = writeln!(
                    text,
                    "{name}.median_rmse={:.6e}\n{name}.median_shift_error={:.6e}\n{name}.median_rotation_error={:.6e}",
                    m[0], m[1], m[2]
                );
            }
            text
        } else {
            let r = registration_trial(&cfg, strategy, a.seed)?;
            let truth = cfg.truth(a.seed);
            let (source, _) = cfg.views(&truth)?;
            let registered = apply_transform(&source, &r.recovered)?;
            save_plain(&a.output.join("registered.csv"), &registered, FormatArg::Csv)?;
            registration_text(strategy.name(), &r)
        }
    } else {
        let (Some(sp), Some(tp)) = (&a.source, &a.target) else {
            return Err(bad_params("give --source and --target, or --synthetic"));
        };
        let source = load_cloud_auto(sp)?;
        let target = load_cloud_auto(tp)?;
        let r = register_clouds(&source, &target, strategy, a.ratio, a.seed, icp, None)?;
        let registered = apply_transform(&source, &r.recovered)?;
        save_plain(&a.output.join("registered.csv"), &registered, FormatArg::Csv)?;
        registration_text(strategy.name(), &r)
    };
    print!("{report}");
    fs::write(a.output.join("report.txt"), report)?;
    Ok(())
}

fn cmd_make_shape(a: &MakeShapeArgs) -> Result<()> {
    let kind: ShapeKind = a.kind.parse()?;
    let center = match &a.center {
        Some(c) => Vector3::new(c[0], c[1], c[2]),
        None => Vector3::zeros(),
    };
    let params = ShapeParams {
        spacing: a.spacing,
        radius: a.radius,
        center,
        sides: a.sides,
        fold_angle: a.fold_angle,
        texture: a.texture,
        noise_sigma: a.noise,
        seed: a.seed,
    };
    let cloud = make_shape(kind, a.n, &params)?;
    let path = a.output.join(format!("shape.{}", a.format.extension()));
    if a.texture {
        save_cloud_named(&path, &cloud, a.format.format(), &["texture"])
    } else {
        save_plain(&path, &cloud, a.format)
    }
}

fn cmd_graph(a: &GraphDumpArgs, manifest: &mut Manifest) -> Result<()> {
    let cloud = load_cloud_auto(&a.input)?;
    let graph = a.graph.build(&cloud)?;
    manifest.push("sigma", format!("{:e}", graph.sigma()));
    manifest.push("tau", format!("{:e}", graph.tau()));
    fs::write(a.output.join("edges.csv"), graph.edge_list_csv())?;
    Ok(())
}
