use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mldecouple::harness::{
    generate_system, run_experiment, sample_points, ExperimentConfig, SyntheticSpec, TargetSpec,
    BUILTIN_NAMES,
};
use mldecouple::model::{build_f_matrix, build_jacobian_tensor};
use mldecouple::tuner::{tune, Validation};
use mldecouple::{Error, Result, Strategy};

/// Decouple multivariate polynomial functions into layered linear maps and
/// univariate polynomials.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one target and write the fitted model and tuner report.
    Decouple(DecoupleArgs),
    /// Run a batch of seeded fits and write per-run CSV and aggregate JSON.
    Experiment(ExperimentArgs),
    /// Write a random decoupled model as JSON.
    Generate(GenerateArgs),
}

#[derive(Args, Clone)]
struct Shape {
    /// Number of layers; a single --ranks or --degrees value is repeated.
    #[arg(long)]
    layers: Option<usize>,
    /// Neurons per layer, comma separated.
    #[arg(long, value_delimiter = ',')]
    ranks: Vec<usize>,
    /// Polynomial degree per layer, comma separated.
    #[arg(long, value_delimiter = ',')]
    degrees: Vec<usize>,
}

impl Shape {
    fn resolve(&self) -> Result<(Vec<usize>, Vec<usize>)> {
        let spread = |v: &[usize], what: &str| -> Result<Vec<usize>> {
            match self.layers {
                Some(l) if v.len() == 1 => Ok(vec![v[0]; l]),
                Some(l) if !v.is_empty() && v.len() != l => Err(Error::InvalidConfig(format!(
                    "--layers {l} but {} {what}",
                    v.len()
                ))),
                _ => Ok(v.to_vec()),
            }
        };
        Ok((
            spread(&self.ranks, "ranks")?,
            spread(&self.degrees, "degrees")?,
        ))
    }
}

#[derive(Args, Clone)]
struct FitArgs {
    /// Solver strategy.
    #[arg(long, value_parser = ["proj", "constr"])]
    strategy: Option<String>,
    /// First-stage weight of the function-value term.
    #[arg(long)]
    lambda0: Option<f64>,
    /// Growth factor of that weight between tuner stages.
    #[arg(long)]
    beta: Option<f64>,
    /// Base seed for sampling and initialization.
    #[arg(long)]
    seed: Option<u64>,
    /// Training points per fit.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args)]
struct DecoupleArgs {
    /// Builtin name (f1, f2, f3) or model JSON file.
    #[arg(long)]
    target: String,
    #[command(flatten)]
    shape: Shape,
    #[command(flatten)]
    fit: FitArgs,
    /// Output directory for model.json and report.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML experiment configuration. Flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Builtin name (f1, f2, f3) or model JSON file.
    #[arg(long)]
    target: Option<String>,
    #[command(flatten)]
    shape: Shape,
    #[command(flatten)]
    fit: FitArgs,
    /// Number of independent runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Concurrent runs; 0 uses every core.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory for results.csv and aggregates.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Input dimension.
    #[arg(long)]
    inputs: usize,
    /// Output dimension.
    #[arg(long)]
    outputs: usize,
    #[command(flatten)]
    shape: Shape,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn target_spec(s: &str) -> TargetSpec {
    if BUILTIN_NAMES.contains(&s) {
        TargetSpec::Builtin(s.to_string())
    } else {
        TargetSpec::File(PathBuf::from(s))
    }
}

fn apply_overrides(cfg: &mut ExperimentConfig, shape: &Shape, fit: &FitArgs) -> Result<()> {
    let (ranks, degrees) = shape.resolve()?;
    if !ranks.is_empty() {
        cfg.solver.ranks = ranks;
    }
    if !degrees.is_empty() {
        cfg.solver.degrees = degrees;
    }
    if let Some(s) = &fit.strategy {
        cfg.solver.strategy = s.parse::<Strategy>()?;
    }
    if let Some(v) = fit.lambda0 {
        cfg.tuner.lambda0 = v;
    }
    if let Some(v) = fit.beta {
        cfg.tuner.beta = v;
    }
    if let Some(v) = fit.seed {
        cfg.seed = v;
    }
    if let Some(v) = fit.samples {
        cfg.samples = v;
    }
    Ok(())
}

fn decouple(args: DecoupleArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::new(target_spec(&args.target));
    apply_overrides(&mut cfg, &args.shape, &args.fit)?;
    let model = cfg.target.load()?;
    let solver = mldecouple::SolverConfig {
        seed: cfg.seed,
        ..cfg.resolved_solver(&model)
    };
    solver.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let train = sample_points(&mut rng, model.input_dim(), cfg.samples);
    let val = sample_points(&mut rng, model.input_dim(), cfg.validation_samples);
    let j = build_jacobian_tensor(&model, &train)?;
    let f = build_f_matrix(&model, &train)?;
    let targets = build_f_matrix(&model, &val)?;
    let report = tune(
        &cfg.tuner,
        &solver,
        &j,
        &f,
        &train,
        Validation {
            points: &val,
            targets: &targets,
        },
    )?;
    let stage = report.selected_stage();
    let fit = &stage.result.fit;
    println!(
        "stage {} of {}  lambda {:e}  iters {} ({})  err_J {:e}  err_F {:e}  validation {:.4}",
        report.selected,
        report.stages.len(),
        stage.lambda,
        fit.iterations,
        fit.stop_reason,
        fit.err_j,
        fit.err_f,
        stage.metric
    );
    if let Some(dir) = args.out {
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("model.json"), fit.state.model()?.to_json()?)?;
        std::fs::write(dir.join("report.json"), report.to_json()?)?;
    }
    Ok(())
}

fn experiment(args: ExperimentArgs) -> Result<bool> {
    let mut cfg = match (&args.config, &args.target) {
        (Some(path), _) => ExperimentConfig::from_toml(&std::fs::read_to_string(path)?)?,
        (None, Some(t)) => ExperimentConfig::new(target_spec(t)),
        (None, None) => return Err(Error::InvalidConfig("need --config or --target".into())),
    };
    if let (Some(_), Some(t)) = (&args.config, &args.target) {
        cfg.target = target_spec(t);
    }
    apply_overrides(&mut cfg, &args.shape, &args.fit)?;
    if let Some(v) = args.runs {
        cfg.runs = v;
    }
    if let Some(v) = args.jobs {
        cfg.jobs = v;
    }
    if args.out.is_some() {
        cfg.out = args.out;
    }
    let start = Instant::now();
    let table = run_experiment(&cfg)?;
    // The CSV owns stdout when there is no output directory.
    let mut summary = String::new();
    for (name, s) in &table.aggregates {
        summary += &format!(
            "{name:>12}  mean {:<12.4e} median {:<12.4e} std {:.4e}\n",
            s.mean, s.median, s.std
        );
    }
    summary += &format!(
        "{} runs, {} failed, {:.1} s\n",
        table.rows.len(),
        table.failed(),
        start.elapsed().as_secs_f64()
    );
    if cfg.out.is_none() {
        eprint!("{summary}");
        print!("{}", table.to_csv());
    } else {
        print!("{summary}");
    }
    Ok(table.failed() == 0)
}

fn generate(args: GenerateArgs) -> Result<()> {
    let (ranks, degrees) = args.shape.resolve()?;
    let spec = SyntheticSpec::new(args.inputs, args.outputs, ranks, degrees, args.seed);
    let json = generate_system(&spec)?.to_json()?;
    match args.out {
        Some(path) => std::fs::write(path, json)?,
        None => println!("{json}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Decouple(a) => decouple(a).map(|_| true),
        Command::Experiment(a) => experiment(a),
        Command::Generate(a) => generate(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
