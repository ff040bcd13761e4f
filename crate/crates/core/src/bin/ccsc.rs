use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use ccsc::csc::{encode, reconstruct, PenaltySpec, TrainConfig};
use ccsc::error::{Error, Result};
use ccsc::estimate::{estimate_gamma, DEFAULT_EPSILON};
use ccsc::experiment::{prepare, run_benchmark, run_experiment, ExperimentSpec, SampleCount};
use ccsc::io::{load_checkpoint, load_images, save_checkpoint, write_atomic, write_pgm, Checkpoint};
use ccsc::metrics::{evaluate, write_eval_csv, NEAR_ZERO_TOLERANCE};
use ccsc::penalty::{prox_curve, write_prox_curve_csv, PenaltyKind};
use ccsc::tensor::Shape;

#[derive(Parser)]
#[command(
    name = "ccsc",
    version,
    about = "Convolutional sparse coding with Cauchy, soft and hard thresholding"
)]
struct Cli {
    /// Print every default as JSON and exit.
    #[arg(long, global = true)]
    show_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Maximum-likelihood Cauchy scale of the centered pixels.
    EstimateGamma {
        dataset: PathBuf,
        #[arg(long, value_parser = parse_shape)]
        crop: Option<Shape>,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
    },
    /// One seeded training run with all artifacts.
    Train(ExperimentArgs),
    /// Fit maps for new images against a checkpoint's filters.
    Encode {
        #[arg(long)]
        checkpoint: PathBuf,
        images: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_shape)]
        crop: Option<Shape>,
        /// Outer rounds of z-iterations (defaults to the checkpoint's).
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Write the images a checkpoint's filters and maps represent.
    Reconstruct {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeated seeded runs for several penalties with combined CSVs.
    Benchmark {
        #[command(flatten)]
        experiment: ExperimentArgs,
        #[arg(long, value_delimiter = ',', default_value = "ict,ist,iht")]
        penalties: Vec<PenaltyName>,
    },
    /// Tabulate a thresholding operator.
    ProxCurve {
        #[arg(long, value_enum, default_value_t = PenaltyName::Ict)]
        penalty: PenaltyName,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
        min: f64,
        #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
        max: f64,
        #[arg(long, default_value_t = 201)]
        steps: usize,
        /// Writes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PenaltyName {
    Ict,
    Ist,
    Iht,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Image file, IDX container or directory of images.
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Label for the dataset column (defaults to the file stem).
    #[arg(long)]
    name: Option<String>,
    #[arg(long, value_parser = parse_shape)]
    crop: Option<Shape>,
    /// Images sampled per run; all when omitted.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 25)]
    filters: usize,
    #[arg(long, value_parser = parse_shape, default_value = "5x5")]
    filter_shape: Shape,
    #[arg(long, default_value_t = 100)]
    iterations: usize,
    #[arg(long, default_value_t = 10)]
    z_inner: usize,
    #[arg(long, default_value_t = 10)]
    f_inner: usize,
    /// Penalty for `train`; `benchmark` takes `--penalties`.
    #[arg(long, value_enum, default_value_t = PenaltyName::Ict)]
    penalty: PenaltyName,
    #[arg(long, default_value_t = 1.0)]
    lambda_ict: f64,
    #[arg(long, default_value_t = ccsc::experiment::DEFAULT_IST_LAMBDA)]
    lambda_ist: f64,
    #[arg(long, default_value_t = ccsc::experiment::DEFAULT_IHT_LAMBDA)]
    lambda_iht: f64,
    /// Fixed Cauchy scale instead of the estimate.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eta_z: Option<f64>,
    #[arg(long, default_value_t = ccsc::csc::DEFAULT_BASELINE_ETA)]
    eta_f: f64,
    #[arg(long, default_value_t = 101)]
    histogram_bins: usize,
}

impl ExperimentArgs {
    fn penalty_spec(&self, name: PenaltyName) -> PenaltySpec {
        match name {
            PenaltyName::Ict => PenaltySpec::Cauchy {
                lambda: self.lambda_ict,
                gamma: self.gamma,
            },
            PenaltyName::Ist => PenaltySpec::Soft {
                lambda: self.lambda_ist,
            },
            PenaltyName::Iht => PenaltySpec::Hard {
                lambda: self.lambda_iht,
            },
        }
    }

    fn spec(&self) -> ExperimentSpec {
        let name = self.name.clone().unwrap_or_else(|| {
            self.dataset
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into())
        });
        ExperimentSpec {
            name,
            dataset_path: self.dataset.clone(),
            sample_count: self.samples.map_or(SampleCount::All, SampleCount::Count),
            runs: self.runs,
            train: TrainConfig {
                filters: self.filters,
                filter_shape: self.filter_shape,
                max_outer_iterations: self.iterations,
                z_inner_iterations: self.z_inner,
                f_inner_iterations: self.f_inner,
                penalty: self.penalty_spec(self.penalty),
                eta_z: self.eta_z,
                eta_f: self.eta_f,
                seed: self.seed,
                ..TrainConfig::default()
            },
            output_dir: self.out.clone(),
            base_seed: self.seed,
            crop: self.crop,
            histogram_bins: self.histogram_bins,
        }
    }
}

fn parse_shape(s: &str) -> std::result::Result<Shape, String> {
    let (r, c) = s.split_once(['x', 'X']).unwrap_or((s, s));
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("bad extent {t:?}: {e}"));
    let (r, c) = (parse(r)?, parse(c)?);
    if r == 0 || c == 0 {
        return Err("extents must be positive".into());
    }
    Ok(Shape::new(r, c))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::ConvergenceCondition { .. } => 1,
        Error::NumericDivergence { .. } | Error::FilterDegenerate { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if cli.show_config {
        println!("{}", show_config());
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("no subcommand given; see --help");
        return ExitCode::from(1);
    };
    match run(command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn show_config() -> String {
    let spec = ExperimentSpec::new("<stem>", "<dataset>", "<out>");
    let v = json!({
        "experiment": spec,
        "lambda": {
            "ict": 1.0,
            "ist": ccsc::experiment::DEFAULT_IST_LAMBDA,
            "iht": ccsc::experiment::DEFAULT_IHT_LAMBDA,
        },
        "near_zero_tolerance": NEAR_ZERO_TOLERANCE,
    });
    serde_json::to_string_pretty(&v).unwrap_or_default()
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::EstimateGamma { dataset, crop, epsilon } => {
            let images = prepare(load_images(&dataset)?, crop)?;
            let pooled: Vec<f64> = images.iter().flat_map(|p| p.data.values().iter().copied()).collect();
            let est = estimate_gamma(&pooled, epsilon)?;
            println!("{}", serde_json::to_string(&est)?);
        }
        Command::Train(args) => {
            let summary = run_experiment(&ExperimentSpec { runs: 1, ..args.spec() })?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Benchmark { experiment, penalties } => {
            let specs: Vec<PenaltySpec> = penalties.iter().map(|&p| experiment.penalty_spec(p)).collect();
            let summaries = run_benchmark(&experiment.spec(), &specs)?;
            for s in &summaries {
                print!("{}", s.summary_row());
            }
        }
        Command::Encode {
            checkpoint,
            images,
            out,
            crop,
            iterations,
        } => encode_command(&checkpoint, &images, &out, crop, iterations)?,
        Command::Reconstruct { checkpoint, out } => reconstruct_command(&checkpoint, &out)?,
        Command::ProxCurve {
            penalty,
            gamma,
            lambda,
            min,
            max,
            steps,
            out,
        } => {
            let kind = match penalty {
                PenaltyName::Ict => PenaltyKind::cauchy(gamma, lambda)?,
                PenaltyName::Ist => PenaltyKind::soft(lambda)?,
                PenaltyName::Iht => PenaltyKind::hard(lambda)?,
            };
            let curve = prox_curve(&kind, min, max, steps)?;
            let mut buf = Vec::new();
            write_prox_curve_csv(&mut buf, &curve)?;
            match out {
                Some(p) => write_atomic(&p, &buf)?,
                None => print!("{}", String::from_utf8_lossy(&buf)),
            }
        }
    }
    Ok(())
}

fn encode_command(
    checkpoint: &Path,
    images: &Path,
    out: &Path,
    crop: Option<Shape>,
    iterations: Option<usize>,
) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    let mut config = ckpt.config.clone();
    if let (PenaltySpec::Cauchy { lambda, .. }, Some(g)) = (config.penalty, ckpt.gamma_used) {
        config.penalty = PenaltySpec::Cauchy { lambda, gamma: Some(g) };
    }
    if let Some(n) = iterations {
        config.max_outer_iterations = n;
    }
    let prepared = prepare(load_images(images)?, crop)?;
    std::fs::create_dir_all(out)?;
    let mut maps = Vec::new();
    let mut evals = Vec::new();
    let mut means = Vec::new();
    for img in &prepared {
        let z = encode(&img.data, &ckpt.filters, &config)?;
        let recon = reconstruct(&ckpt.filters, &z)?;
        evals.push((
            img.id.clone(),
            evaluate(&img.data, &recon, img.peak, &z, NEAR_ZERO_TOLERANCE, 101)?,
        ));
        means.push(img.mean.to_string());
        maps.push((img.id.clone(), z));
    }
    let mut buf = Vec::new();
    write_eval_csv(&mut buf, &evals)?;
    write_atomic(&out.join("eval.csv"), &buf)?;
    let mut enc = Checkpoint::new(config, ckpt.gamma_used, ckpt.filters, maps);
    enc.seed = ckpt.seed;
    enc.metadata.insert("image_means".into(), means.join(";"));
    enc.metadata
        .insert("encoded_from".into(), checkpoint.display().to_string());
    save_checkpoint(&enc, out.join("checkpoint"))
}

fn reconstruct_command(checkpoint: &Path, out: &Path) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    let means: Vec<f64> = ckpt
        .metadata
        .get("image_means")
        .map(|s| s.split(';').filter_map(|t| t.parse().ok()).collect())
        .unwrap_or_default();
    std::fs::create_dir_all(out)?;
    for (i, (id, maps)) in ckpt.maps.iter().enumerate() {
        let mean = means.get(i).copied().unwrap_or(0.0);
        let recon = reconstruct(&ckpt.filters, maps)?.map(|v| v + mean);
        write_pgm(out.join(format!("recon_{id}.pgm")), &recon, ckpt.config.peak)?;
    }
    Ok(())
}
