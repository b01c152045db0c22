//! `rangelens` command-line front end.
//!
//! Exit codes: 0 on success (or all selected checks passing), 1 when a check
//! fails, 2 on usage or input errors.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::{Array2, Axis};
use serde::Serialize;

use rangelens::config::Config;
use rangelens::io;
use rangelens::kernels;
use rangelens::models::{self, LabeledCloud, ModelSet};
use rangelens::netsim::{self, ActivationKind};
use rangelens::recover::{self, RecoveryMethod};
use rangelens::report::{self, PairSource, ReportEnvelope};
use rangelens::verify::{self, Selection, TheoremReport};
use rangelens::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "rangelens", version, about = "Metric distortion of random Gaussian ReLU layers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a model, push it through the configured network, export clouds.
    Simulate(SimulateArgs),
    /// Print the distortion kernels on an even angle grid as CSV.
    KernelTable(KernelTableArgs),
    /// Estimate the Gaussian mean width of a cloud or model sample.
    MeanWidth(MeanWidthArgs),
    /// Greedy ε-net sizes and closed-form covering bounds.
    Covering(CoveringArgs),
    /// Run Monte Carlo checks and write report.json.
    Verify(VerifyArgs),
    /// Reconstruct a layer input from its ReLU output.
    Recover(RecoverArgs),
    /// Boundary-pair distortion histograms for two aligned clouds.
    BoundaryReport(BoundaryArgs),
    /// Angle-bin propagation histograms through the configured network.
    AngleReport(AngleArgs),
}

#[derive(Args, Debug)]
struct SourceArgs {
    /// Point cloud file (header `n count`, label in the last column).
    #[arg(long, conflicts_with = "config")]
    cloud: Option<PathBuf>,
    /// Config with a [model] section to sample from.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Points sampled from the model.
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the cloud after every intermediate layer.
    #[arg(long)]
    export_layers: bool,
}

#[derive(Args, Debug)]
struct KernelTableArgs {
    #[arg(long, default_value_t = 181)]
    grid: usize,
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MeanWidthArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
}

#[derive(Args, Debug)]
struct CoveringArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Comma-separated radii.
    #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.5])]
    epsilon: Vec<f64>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value = "all")]
    theorem: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; receives report.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Bp,
    Pg,
}

#[derive(Args, Debug)]
struct RecoverArgs {
    /// Config with a [model] section.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0)]
    layer_seed: u64,
    #[arg(long)]
    m: usize,
    /// Cloud file whose first point is the input, or `sample`.
    #[arg(long, default_value = "sample")]
    x: String,
    #[arg(long, value_enum, default_value_t = MethodArg::Bp)]
    method: MethodArg,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    /// Seed for `--x sample`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BoundaryArgs {
    /// Input-side cloud; its labels define the classes.
    #[arg(long)]
    input: PathBuf,
    /// Output-side cloud, row-aligned with the input.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = report::DEFAULT_HIST_BINS)]
    bins: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AngleArgs {
    /// Config with [network] and optional [report] sections.
    #[arg(long)]
    config: PathBuf,
    /// Draw pairs from this cloud instead of synthetic unit pairs.
    #[arg(long)]
    cloud: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

/// Parses `argv` (including the program name), runs the command, and returns
/// the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return if code == 0 { EXIT_OK } else { EXIT_USAGE };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::KernelTable(a) => kernel_table(a),
        Command::MeanWidth(a) => mean_width(a),
        Command::Covering(a) => covering(a),
        Command::Verify(a) => run_verify(a),
        Command::Recover(a) => run_recover(a),
        Command::BoundaryReport(a) => boundary(a),
        Command::AngleReport(a) => angle(a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// Model from a config plus, when `cloud` is given, the explicit cloud.
fn load_source(src: &SourceArgs) -> Result<(LabeledCloud, Option<ModelSet>)> {
    match (&src.cloud, &src.config) {
        (Some(path), _) => Ok((io::load_cloud(path)?, None)),
        (None, Some(path)) => {
            let model = Config::load(path)?.model()?;
            let cloud = models::sample_points(&model, src.count, src.seed)?;
            Ok((cloud, Some(model)))
        }
        (None, None) => Err(Error::InvalidArgument("pass either --cloud or --config".into())),
    }
}

#[derive(Serialize)]
struct LayerSummary {
    depth: usize,
    width: usize,
    mean_norm: f64,
    mean_sq_norm_ratio: f64,
    file: Option<String>,
}

fn mean_sq_norms(points: &Array2<f64>) -> Vec<f64> {
    points.axis_iter(Axis(0)).map(|r| r.dot(&r)).collect()
}

fn simulate(a: SimulateArgs) -> Result<i32> {
    let cfg = Config::load(&a.config)?;
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let model = cfg.model()?;
    let net = cfg.network()?;
    if net.input_dim() != model.ambient_dim {
        return Err(Error::Config(format!(
            "network input dim {} does not match model dim {}",
            net.input_dim(),
            model.ambient_dim
        )));
    }
    create_dir(&a.out)?;
    let cloud = models::sample_points(&model, a.count, seed)?;
    io::save_cloud(&a.out.join("input.txt"), &cloud)?;
    let base = mean_sq_norms(&cloud.points);
    let depth = net.depth();
    let mut layers = Vec::with_capacity(depth);
    let last = netsim::forward_each(&net, cloud.points.view(), |i, out| {
        let q = i + 1;
        let sq = mean_sq_norms(out);
        let ratios: Vec<f64> = sq.iter().zip(&base).filter(|(_, b)| **b > 0.0).map(|(s, b)| s / b).collect();
        let file = if a.export_layers && q < depth {
            let name = format!("layer_{q}.txt");
            let c = LabeledCloud::new(out.clone(), cloud.labels.clone())?;
            io::save_cloud(&a.out.join(&name), &c)?;
            Some(name)
        } else {
            None
        };
        layers.push(LayerSummary {
            depth: q,
            width: out.ncols(),
            mean_norm: sq.iter().map(|v| v.sqrt()).sum::<f64>() / sq.len() as f64,
            mean_sq_norm_ratio: ratios.iter().sum::<f64>() / ratios.len().max(1) as f64,
            file,
        });
        Ok(())
    })?;
    io::save_cloud(&a.out.join("output.txt"), &LabeledCloud::new(last, cloud.labels.clone())?)?;
    if let Some(l) = layers.last_mut() {
        l.file = Some("output.txt".into());
    }
    #[derive(Serialize)]
    struct Body<'a> {
        model: &'a str,
        points: usize,
        layers: Vec<LayerSummary>,
    }
    let body = Body {
        model: model.name(),
        points: a.count,
        layers,
    };
    ReportEnvelope::new("simulate", seed, body).write(&a.out.join("report.json"))?;
    Ok(EXIT_OK)
}

fn kernel_table(a: KernelTableArgs) -> Result<i32> {
    let rows = kernels::kernel_table(a.grid)?;
    let mut csv = String::from("theta,dist,expected_cosine,expected_hamming,expected_sq_distance_unit,m31,m22\n");
    for r in &rows {
        writeln!(
            csv,
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            r.theta, r.dist, r.expected_cosine, r.expected_hamming, r.expected_sq_distance_unit, r.m31, r.m22
        )
        .unwrap();
    }
    match a.out {
        Some(path) => write_text(&path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(EXIT_OK)
}

fn mean_width(a: MeanWidthArgs) -> Result<i32> {
    let (cloud, model) = load_source(&a.source)?;
    let est = models::estimate_mean_width(cloud.points.view(), a.trials, a.source.seed)?;
    let constant = match &a.source.config {
        Some(p) => Config::load(p)?.constants.mean_width,
        None => 1.0,
    };
    #[derive(Serialize)]
    struct Out {
        estimate: models::MeanWidthEstimate,
        closed_form: Option<f64>,
        constant: f64,
    }
    let closed_form = model.as_ref().and_then(|m| models::mean_width_bound(m, constant).ok());
    print_json(&Out {
        estimate: est,
        closed_form,
        constant,
    })?;
    Ok(EXIT_OK)
}

fn covering(a: CoveringArgs) -> Result<i32> {
    let (cloud, model) = load_source(&a.source)?;
    let mut records = Vec::with_capacity(a.epsilon.len());
    for &eps in &a.epsilon {
        let mut rec = models::greedy_epsilon_net(cloud.points.view(), eps)?;
        rec.bound_closed_form = model.as_ref().and_then(|m| models::covering_bound(m, eps).ok());
        records.push(rec);
    }
    print_json(&records)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct VerifyBody<'a> {
    theorem: String,
    pass: bool,
    config: &'a verify::VerificationConfig,
    reports: Vec<TheoremReport>,
}

fn run_verify(a: VerifyArgs) -> Result<i32> {
    let selection: Selection = a.theorem.parse()?;
    let mut cfg = match &a.config {
        Some(p) => Config::load(p)?.verify,
        None => verify::VerificationConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let reports = verify::run(&cfg, selection)?;
    let pass = reports.iter().all(|r| r.pass);
    for r in &reports {
        eprintln!("{:?}: {}", r.theorem_id, if r.pass { "pass" } else { "FAIL" });
    }
    create_dir(&a.out)?;
    let body = VerifyBody {
        theorem: selection.to_string(),
        pass,
        config: &cfg,
        reports,
    };
    ReportEnvelope::new("verify", cfg.seed, body).write(&a.out.join("report.json"))?;
    Ok(if pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn run_recover(a: RecoverArgs) -> Result<i32> {
    let model = Config::load(&a.model)?.model()?;
    let x = if a.x == "sample" {
        models::sample_points(&model, 1, a.seed)?.points.index_axis_move(Axis(0), 0)
    } else {
        let cloud = io::load_cloud(Path::new(&a.x))?;
        if cloud.is_empty() {
            return Err(Error::InvalidInput(format!("{}: no points", a.x)));
        }
        cloud.points.index_axis_move(Axis(0), 0)
    };
    let layer = netsim::make_layer(model.ambient_dim, a.m, ActivationKind::Relu, a.layer_seed)?;
    let y = layer.apply_one(x.view())?;
    let method = match a.method {
        MethodArg::Bp => RecoveryMethod::BackProject,
        MethodArg::Pg => RecoveryMethod::ProjGrad,
    };
    let result = recover::recover(&layer, y.view(), &model, method, a.iters)?.with_truth(x.view());
    create_dir(&a.out)?;
    let estimate_file = a.out.join("estimate.txt");
    let est = LabeledCloud::unlabeled(result.estimate.clone().insert_axis(Axis(0)));
    io::save_cloud(&estimate_file, &est)?;
    #[derive(Serialize)]
    struct Out {
        estimate_file: String,
        relative_error: Option<f64>,
        iterations: usize,
        method: RecoveryMethod,
        objective: f64,
    }
    print_json(&Out {
        estimate_file: estimate_file.display().to_string(),
        relative_error: result.relative_error,
        iterations: result.iterations,
        method,
        objective: result.objective,
    })?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct HistogramIndex<'a, T: Serialize> {
    histogram_files: Vec<String>,
    #[serde(flatten)]
    body: &'a T,
}

fn boundary(a: BoundaryArgs) -> Result<i32> {
    let input = io::load_cloud(&a.input)?;
    let output = io::load_cloud(&a.output)?;
    let r = report::boundary_pair_stats(input.points.view(), output.points.view(), &input.labels, a.bins)?;
    create_dir(&a.out)?;
    let files = report::write_histograms(&a.out, &r.histograms)?;
    let body = HistogramIndex {
        histogram_files: files,
        body: &r,
    };
    ReportEnvelope::new("boundary-report", 0, body).write(&a.out.join("report.json"))?;
    Ok(EXIT_OK)
}

fn angle(a: AngleArgs) -> Result<i32> {
    let cfg = Config::load(&a.config)?;
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let net = cfg.network()?;
    let cloud = a.cloud.as_deref().map(io::load_cloud).transpose()?;
    let source = match &cloud {
        Some(c) => PairSource::Cloud(c),
        None => PairSource::Synthetic { dim: net.input_dim() },
    };
    let rc = &cfg.report;
    let r = report::angle_bin_propagation(source, &net, &rc.angle_bins, rc.pairs_per_bin, &rc.depths, rc.hist_bins, seed)?;
    create_dir(&a.out)?;
    let hists: Vec<_> = r
        .bins
        .iter()
        .flat_map(|b| b.depths.iter().flat_map(|d| d.histograms.iter().cloned()))
        .collect();
    let files = report::write_histograms(&a.out, &hists)?;
    let body = HistogramIndex {
        histogram_files: files,
        body: &r,
    };
    ReportEnvelope::new("angle-report", seed, body).write(&a.out.join("report.json"))?;
    Ok(EXIT_OK)
}
