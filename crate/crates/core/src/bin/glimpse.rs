use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use glimpse::experiments::{evaluate, sweep_with, trajectories, SweepConfig};
use glimpse::{
    generate_pointer_task, learn_full_policy, load_bundle, load_dataset, save_bundle, save_dataset, Error,
    ExtractorConfig, PointerTaskSpec, Result, TrainingPlan,
};

#[derive(Parser)]
#[command(name = "glimpse", version, about = "Budgeted region-acquisition classifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy bundle on a manifest
    Train(TrainArgs),
    /// Accuracy of a bundle on a manifest
    Eval(EvalArgs),
    /// Learned versus random accuracy across budgets
    Sweep(SweepArgs),
    /// Region transition counts of a bundle on a manifest
    Trajectories(TrajectoryArgs),
    /// Write the synthetic pointer task as PGM files and manifests
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ExtractorKind {
    Hist,
    Codebook,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Region grid as ROWSxCOLS
    #[arg(long, default_value = "4x4", value_parser = parse_pair)]
    grid: (usize, usize),
    #[arg(long, default_value_t = 2)]
    budget: usize,
    /// Histogram bins or codebook words
    #[arg(long, default_value_t = 16)]
    bins: usize,
    #[arg(long, value_enum, default_value = "hist")]
    extractor: ExtractorKind,
    #[arg(long, default_value_t = 4)]
    patch_size: usize,
    #[arg(long, default_value_t = 8)]
    samples_per_image: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 1e-5)]
    l2: f64,
    /// Keep the last perceptron iterate instead of the average
    #[arg(long)]
    no_average: bool,
    /// First acquired region (default: grid center)
    #[arg(long)]
    start_region: Option<usize>,
}

impl ModelArgs {
    fn plan(&self, budget: usize) -> Result<TrainingPlan> {
        let (rows, cols) = self.grid;
        let mut plan = TrainingPlan::new(budget, rows, cols, self.seed);
        plan.samples_per_image = self.samples_per_image;
        plan.start_region = self.start_region;
        plan.extractor = match self.extractor {
            ExtractorKind::Hist => ExtractorConfig::Histogram { bins: self.bins },
            ExtractorKind::Codebook => ExtractorConfig::Codebook {
                words: self.bins,
                patch_size: self.patch_size,
            },
        };
        for cfg in [&mut plan.classifier, &mut plan.policy] {
            cfg.epochs = self.epochs;
            cfg.learning_rate = self.lr;
            cfg.l2 = self.l2;
            cfg.averaged = !self.no_average;
        }
        plan.validate()?;
        Ok(plan)
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Training manifest (filename<TAB>label)
    #[arg(long)]
    data: PathBuf,
    /// Bundle file to write
    #[arg(long)]
    out: PathBuf,
    /// Training log file (default: stderr)
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Per-item predictions CSV
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long)]
    per_class: bool,
    /// Accuracy CSV (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Comma-separated budgets
    #[arg(long, value_delimiter = ',', required = true)]
    budgets: Vec<usize>,
    /// Random-baseline trials per budget
    #[arg(long, default_value_t = 5)]
    trials: usize,
    /// Re-split repetitions
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Load `b<B>.json` from this directory instead of training
    #[arg(long)]
    models: Option<PathBuf>,
    /// Omit the wall-time column
    #[arg(long)]
    no_timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct TrajectoryArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Transition CSV (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-step region frequency CSV (default: appended to stdout)
    #[arg(long)]
    steps_out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "4x4", value_parser = parse_pair)]
    grid: (usize, usize),
    /// Image size as WIDTHxHEIGHT
    #[arg(long, default_value = "32x32", value_parser = parse_pair)]
    size: (usize, usize),
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 4)]
    targets: usize,
    #[arg(long, default_value_t = 8.0)]
    noise: f64,
    #[arg(long, default_value_t = 625)]
    images: usize,
    /// Pointer region (default: grid center)
    #[arg(long)]
    pointer: Option<usize>,
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected AxB, got {s:?}"))?;
    let a = a.trim().parse().map_err(|_| format!("bad number in {s:?}"))?;
    let b = b.trim().parse().map_err(|_| format!("bad number in {s:?}"))?;
    Ok((a, b))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        })?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn train(args: TrainArgs) -> Result<()> {
    let plan = args.model.plan(args.model.budget)?;
    let data = load_dataset(&args.data)?;
    let (bundle, log) = learn_full_policy(&data, &plan)?;
    save_bundle(&bundle, &args.out)?;
    match &args.log {
        Some(p) => std::fs::write(p, log.to_string()).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        })?,
        None => eprint!("{log}"),
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let bundle = load_bundle(&args.model)?;
    let data = load_dataset(&args.data)?;
    let report = evaluate(&bundle, &data)?;
    if let Some(p) = &args.predictions {
        report.write_predictions_csv(output(Some(p))?)?;
    }
    let mut w = csv::Writer::from_writer(output(args.out.as_deref())?);
    w.write_record(["class", "correct", "total", "accuracy"])?;
    let correct = report.predictions.iter().filter(|p| p.truth == p.predicted).count();
    w.write_record([
        "all".to_string(),
        correct.to_string(),
        report.predictions.len().to_string(),
        format!("{:.6}", report.accuracy()),
    ])?;
    if args.per_class {
        for c in report.per_class() {
            let acc = if c.total == 0 { 0.0 } else { c.correct as f64 / c.total as f64 };
            w.write_record([c.name, c.correct.to_string(), c.total.to_string(), format!("{acc:.6}")])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let plan = args.model.plan(1)?;
    let n = plan.grid_size();
    if let Some(b) = args.budgets.iter().find(|&&b| b == 0 || b > n) {
        return Err(Error::InvalidParameter(format!("budget {b} outside [1, {n}]")));
    }
    let train = load_dataset(&args.train)?;
    let test = load_dataset(&args.test)?;
    let config = SweepConfig {
        budgets: args.budgets.clone(),
        trials: args.trials,
        repeats: args.repeats,
    };
    let models = args.models.clone();
    let report = sweep_with(&train, &test, &plan, &config, |tr, p| match &models {
        Some(dir) => load_bundle(dir.join(format!("b{}.json", p.budget))),
        None => Ok(learn_full_policy(tr, p)?.0),
    })?;
    report.write_csv(output(args.out.as_deref())?, !args.no_timing)
}

fn trajectories_cmd(args: TrajectoryArgs) -> Result<()> {
    let bundle = load_bundle(&args.model)?;
    let data = load_dataset(&args.data)?;
    let graph = trajectories(&bundle, &data)?;
    graph.write_transitions_csv(output(args.out.as_deref())?)?;
    match &args.steps_out {
        Some(p) => graph.write_step_frequencies_csv(output(Some(p))?),
        None => {
            if args.out.is_none() {
                println!();
            }
            graph.write_step_frequencies_csv(io::stdout().lock())
        }
    }
}

fn synth(args: SynthArgs) -> Result<()> {
    let spec = PointerTaskSpec {
        rows: args.grid.0,
        cols: args.grid.1,
        width: args.size.0,
        height: args.size.1,
        n_classes: args.classes,
        pointer_region: args.pointer,
        n_targets: args.targets,
        noise_std: args.noise,
        n_images: args.images,
        seed: args.seed,
    };
    let (train, test) = generate_pointer_task(&spec)?;
    save_dataset(&train, &args.out, "train")?;
    save_dataset(&test, &args.out, "test")?;
    eprintln!(
        "wrote {} train / {} test images to {}; pointer {} targets {:?}",
        train.len(),
        test.len(),
        args.out.display(),
        spec.pointer()?,
        spec.target_regions()?
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::Trajectories(a) => trajectories_cmd(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
