use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgMatches, Args, Command, FromArgMatches, Parser, Subcommand};

use leasc::analysis::check_contraction_with;
use leasc::config::{PipelineConfig, KEYS};
use leasc::io::{
    load_encoder, read_labels, read_matrix, save_encoder, write_contraction_csv, write_labels,
    write_matrix,
};
use leasc::metrics::evaluate;
use leasc::pipeline::{run_pipeline, select};
use leasc::rpcm::rpcm_fit;
use leasc::sampling::{coverage_probability, suggest_representative_count, SubspaceSizes};
use leasc::spectral::cluster_embedding;
use leasc::synth::{generate, BasisLayout, SynthConfig};
use leasc::{Error, Result};

#[derive(Parser)]
#[command(name = "leasc", version, about = "Learnable subspace clustering")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate points on a union of subspaces.
    Gen(GenArgs),
    /// Fit codes and an encoder on a representative matrix.
    Fit(FitArgs),
    /// Apply a saved encoder to a data matrix.
    Encode(EncodeArgs),
    /// Spectral clustering of a code matrix.
    Cluster(ClusterArgs),
    /// Accuracy and NMI of predicted labels against the truth.
    Eval(EvalArgs),
    /// Probability that random representatives cover every subspace.
    Coverage(CoverageArgs),
    /// Compare encoder output distances with the first-order bound.
    CheckContraction(ContractionArgs),
    /// Select, fit, encode and cluster in one run.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Output data matrix (`.csv` or binary).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Random subspaces instead of the four planar lines.
    #[arg(long)]
    random: bool,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 4)]
    subspaces: usize,
    #[arg(long, default_value_t = 1)]
    subspace_dim: usize,
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[arg(long, default_value_t = 0.02)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct FitArgs {
    /// Encoder manifest to write.
    #[arg(long)]
    encoder: PathBuf,
    /// Also write the code matrix.
    #[arg(long)]
    codes: Option<PathBuf>,
    /// Treat `--data` as the full dataset and select `--reps` columns first.
    #[arg(long)]
    select: bool,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    encoder: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 4096)]
    batch: usize,
}

#[derive(Args)]
struct ClusterArgs {
    /// Codes, one column per point.
    #[arg(long)]
    codes: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    predicted: PathBuf,
    truth: PathBuf,
}

#[derive(Args)]
struct CoverageArgs {
    /// Points per subspace, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long, required_unless_present = "target")]
    n: Option<usize>,
    /// Print the smallest count reaching this probability instead.
    #[arg(long, conflicts_with = "n")]
    target: Option<f64>,
}

#[derive(Args)]
struct ContractionArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    encoder: PathBuf,
    /// Number of randomly selected representatives.
    #[arg(long)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = leasc::analysis::DEFAULT_MARGIN)]
    margin: f64,
    /// Per-pair CSV report.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    settings: Settings,
}

/// One optional flag per configuration key, plus `--config FILE`.
struct Settings {
    config: Option<PathBuf>,
    pairs: Vec<(String, String)>,
}

impl FromArgMatches for Settings {
    fn from_arg_matches(m: &ArgMatches) -> std::result::Result<Self, clap::Error> {
        let mut s = Settings {
            config: None,
            pairs: Vec::new(),
        };
        s.update_from_arg_matches(m)?;
        Ok(s)
    }

    fn update_from_arg_matches(&mut self, m: &ArgMatches) -> std::result::Result<(), clap::Error> {
        self.config = m.get_one::<PathBuf>("config").cloned();
        self.pairs = KEYS
            .iter()
            .filter_map(|k| m.get_one::<String>(k).map(|v| (k.to_string(), v.clone())))
            .collect();
        Ok(())
    }
}

impl Args for Settings {
    fn augment_args(cmd: Command) -> Command {
        let cmd = cmd.arg(
            clap::Arg::new("config")
                .long("config")
                .value_name("FILE")
                .value_parser(clap::value_parser!(PathBuf))
                .help("`key = value` settings; flags take precedence"),
        );
        KEYS.iter().fold(cmd, |cmd, key| {
            cmd.arg(
                clap::Arg::new(*key)
                    .long(key.replace('_', "-"))
                    .value_name("VALUE"),
            )
        })
    }

    fn augment_args_for_update(cmd: Command) -> Command {
        Self::augment_args(cmd)
    }
}

impl Settings {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut config = PipelineConfig::default();
        if let Some(path) = &self.config {
            let file = PipelineConfig::load(path)?;
            config.apply(file.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
        }
        config.apply(self.pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
        Ok(config)
    }
}

fn require<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::InvalidInput(format!("--{what} is required")))
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let config = if a.random {
        let mut c = SynthConfig::uniform(a.dim, a.subspaces, a.subspace_dim, a.points, a.seed);
        c.noise_sigma = a.noise;
        c
    } else {
        SynthConfig {
            ambient_dim: a.dim,
            subspace_dims: vec![a.subspace_dim; a.subspaces],
            points_per_subspace: vec![a.points; a.subspaces],
            noise_sigma: a.noise,
            layout: BasisLayout::EvenlySpacedLines,
            ..SynthConfig::replica(a.seed)
        }
    };
    let data = generate(&config)?;
    write_matrix(&a.data, &data.y)?;
    write_labels(&a.labels, &data.labels)?;
    println!("wrote {} points of dimension {}", data.y.ncols(), data.y.nrows());
    Ok(())
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let config = a.settings.resolve()?;
    let y = read_matrix(require(&config.data, "data")?)?;
    let x = if a.select { select(&y, &config)?.x } else { y };
    let fit = rpcm_fit(&x, &config.rpcm)?;
    save_encoder(&a.encoder, &fit.params)?;
    if let Some(path) = &a.codes {
        write_matrix(path, &fit.z)?;
    }
    let last = fit.residual_history.last().copied().unwrap_or(f64::NAN);
    println!(
        "iterations {} converged {} residual {last:e} encoder_loss {:e}",
        fit.iterations, fit.converged, fit.train.final_loss
    );
    Ok(())
}

fn cmd_encode(a: EncodeArgs) -> Result<()> {
    let params = load_encoder(&a.encoder)?;
    let y = read_matrix(&a.data)?;
    let codes = params.forward_batched(&y, a.batch)?;
    write_matrix(&a.output, &codes)?;
    println!("encoded {} points", y.ncols());
    Ok(())
}

fn cmd_cluster(a: ClusterArgs) -> Result<()> {
    let codes = read_matrix(&a.codes)?;
    let labels = cluster_embedding(&codes, a.k, a.seed)?;
    write_labels(&a.output, &labels)?;
    println!("clustered {} points into {} groups", labels.len(), labels.distinct());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let report = evaluate(&read_labels(&a.predicted)?, &read_labels(&a.truth)?)?;
    println!("ACC {:.4}", report.acc);
    println!("NMI {:.4}", report.nmi);
    Ok(())
}

fn cmd_coverage(a: CoverageArgs) -> Result<()> {
    let sizes = SubspaceSizes::new(a.sizes)?;
    match (a.n, a.target) {
        (_, Some(target)) => println!("{}", suggest_representative_count(&sizes, target)?),
        (Some(n), None) => println!("{:.4}", coverage_probability(&sizes, n)?),
        (None, None) => unreachable!("clap requires one of --n or --target"),
    }
    Ok(())
}

fn cmd_check_contraction(a: ContractionArgs) -> Result<()> {
    let y = read_matrix(&a.data)?;
    let params = load_encoder(&a.encoder)?;
    let reps = leasc::sampling::select_random(&y, a.reps, a.seed)?;
    let report = check_contraction_with(&y, &reps, &params, a.margin)?;
    if let Some(path) = &a.output {
        write_contraction_csv(path, &report)?;
    }
    println!(
        "rho {:e} satisfied {:.4} max_remainder {:e}",
        report.rho, report.fraction_satisfied, report.max_remainder
    );
    Ok(())
}

fn cmd_pipeline(a: PipelineArgs) -> Result<()> {
    let config = a.settings.resolve()?;
    let out = run_pipeline(&config)?;
    println!(
        "clustered {} points into {} groups using {} representatives",
        out.labels.len(),
        out.labels.distinct(),
        out.representatives.len()
    );
    if let Some(eval) = out.eval {
        println!("ACC {:.4}", eval.acc);
        println!("NMI {:.4}", eval.nmi);
    }
    if let Some(dir) = &config.output {
        println!("wrote results to {}", dir.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Fit(a) => cmd_fit(a),
        Cmd::Encode(a) => cmd_encode(a),
        Cmd::Cluster(a) => cmd_cluster(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Coverage(a) => cmd_coverage(a),
        Cmd::CheckContraction(a) => cmd_check_contraction(a),
        Cmd::Pipeline(a) => cmd_pipeline(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
