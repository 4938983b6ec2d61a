mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use budgetlearn::datagen::{generate, Profile};
use budgetlearn::folds::min_training_size;
use budgetlearn::harness::{
    diagnose, emit_results, run_cv_experiment, write_diagnostics, DiagnosticsReport, ExperimentOptions,
};
use budgetlearn::{load_csv_with_classes, Approach, Dataset, LogisticRegression, SslMethod, Strategy};
use clap::{Args, Parser, Subcommand};

use config::{seed_or_env, DataSource, FileConfig, Resolved};

#[derive(Parser)]
#[command(
    name = "budgetlearn",
    version,
    about = "Label-budget experiments: passive, active, semi-supervised and hybrid learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset CSV.
    Generate(GenerateArgs),
    /// Run learning-curve experiments and write the result files.
    Run(Box<RunArgs>),
    /// Write k-means agreement and PCA coordinates for a dataset.
    Diagnose(DiagnoseArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    profile: Profile,
    /// Generator seed [default: $BUDGETLEARN_SEED, else 0]
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Override the profile's class separation (feature-index units).
    #[arg(long)]
    peak_shift: Option<f64>,
    /// Override the profile's noise level.
    #[arg(long)]
    noise_std: Option<f64>,
}

/// Flags override the matching keys of the `--config` file.
#[derive(Args)]
struct RunArgs {
    /// Flat TOML file with any of the keys below (snake_case).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset CSV (feature columns, then `label`).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    num_classes: Option<usize>,
    /// Generate the dataset from a profile instead of reading a CSV.
    #[arg(long)]
    profile: Option<Profile>,
    #[arg(long)]
    profile_seed: Option<u64>,
    /// Comma-separated: passive, active, ssl, hybrid [default: passive,active]
    #[arg(long = "approach", value_delimiter = ',')]
    approaches: Option<Vec<Approach>>,
    /// random, least_confident, entropy, expected_error, expected_logloss [default: entropy]
    #[arg(long)]
    strategy: Option<Strategy>,
    /// self_train_maxconf, self_train_minentropy, spread_rbf, spread_knn [default: spread_rbf]
    #[arg(long)]
    ssl_method: Option<SslMethod>,
    /// RBF width [default: 0.1 for ssl, 0.01 for hybrid]
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    pseudo_weight: Option<f64>,
    /// B: random labels per fold before the loop starts [default: 40]
    #[arg(long)]
    warm_start: Option<usize>,
    /// F: human labels per fold at the end [default: 90]
    #[arg(long)]
    final_count: Option<usize>,
    #[arg(long)]
    grid_step: Option<usize>,
    #[arg(long)]
    retrain_budget: Option<usize>,
    #[arg(long)]
    include_candidate: Option<bool>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Experiment seed [default: $BUDGETLEARN_SEED, else 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long = "out")]
    out_dir: Option<PathBuf>,
    /// Print the resolved configuration and exit without training.
    #[arg(long)]
    dry_run: bool,
}

impl RunArgs {
    fn overrides(&self) -> FileConfig {
        FileConfig {
            data: self.data.clone(),
            num_classes: self.num_classes,
            profile: self.profile,
            profile_seed: self.profile_seed,
            approaches: self.approaches.clone(),
            strategy: self.strategy,
            ssl_method: self.ssl_method,
            sigma: self.sigma,
            k: self.k,
            alpha: self.alpha,
            tol: self.tol,
            max_iter: self.max_iter,
            pseudo_weight: self.pseudo_weight,
            warm_start: self.warm_start,
            final_count: self.final_count,
            grid_step: self.grid_step,
            retrain_budget: self.retrain_budget,
            include_candidate: self.include_candidate,
            learning_rate: self.learning_rate,
            l2: self.l2,
            epochs: self.epochs,
            repeats: self.repeats,
            seed: self.seed,
            jobs: self.jobs,
            out_dir: self.out_dir.clone(),
        }
    }
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long, conflicts_with = "profile", required_unless_present = "profile")]
    data: Option<PathBuf>,
    #[arg(long)]
    num_classes: Option<usize>,
    #[arg(long)]
    profile: Option<Profile>,
    #[arg(long)]
    profile_seed: Option<u64>,
    /// Number of k-means clusters [default: the dataset's class count]
    #[arg(long)]
    k: Option<usize>,
    /// k-means seed [default: $BUDGETLEARN_SEED, else 0]
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

fn load(source: &DataSource) -> Result<Dataset> {
    match source {
        DataSource::Csv { path, num_classes } => {
            load_csv_with_classes(path, *num_classes).with_context(|| format!("loading {}", path.display()))
        }
        DataSource::Generated { profile, seed } => Ok(generate(&profile.spec(*seed))?),
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let mut spec = args.profile.spec(seed_or_env(args.seed)?);
    if let Some(s) = args.peak_shift {
        spec.peak_shift = s;
    }
    if let Some(n) = args.noise_std {
        spec.noise_std = n;
    }
    let ds = generate(&spec)?;
    ds.write_csv(&args.out)?;
    println!(
        "{}: {} rows, {} feature columns, {} classes",
        args.out.display(),
        ds.num_samples(),
        ds.dim(),
        ds.num_classes()
    );
    Ok(())
}

fn dry_run_text(resolved: &Resolved) -> Result<String> {
    let mut text = String::from("# resolved configuration\n");
    text.push_str(&toml::to_string(resolved)?);
    for cfg in resolved.approach_configs() {
        let _ = write!(
            text,
            "\n# {} / {}: grid {:?}\n",
            cfg.approach,
            cfg.method_label(),
            cfg.grid()
        );
        text.push_str(&toml::to_string(&cfg)?);
    }
    Ok(text)
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let resolved = Resolved::from_file(file.overlay(args.overrides()))?;
    let ds = load(&resolved.data)?;
    let training_size = min_training_size(ds.num_samples());
    let configs = resolved.approach_configs();
    for cfg in &configs {
        cfg.validate(training_size, ds.num_classes())
            .with_context(|| format!("approach {}", cfg.approach))?;
    }
    if args.dry_run {
        print!("{}", dry_run_text(&resolved)?);
        return Ok(());
    }
    let out_dir = resolved
        .out_dir
        .clone()
        .context("no output directory: pass --out or set `out_dir` in the config")?;

    let clf = LogisticRegression::new(resolved.hyper())?;
    let options = ExperimentOptions {
        repeats: resolved.repeats,
        seed: resolved.seed,
        jobs: resolved.jobs,
    };
    let mut experiments = Vec::with_capacity(configs.len());
    for cfg in &configs {
        let exp = run_cv_experiment(&clf, &ds, cfg, options)?;
        let last = exp.curve.points.last().expect("grid is never empty");
        println!(
            "{}/{}: accuracy {:.3} ± {:.3} at {} labels per fold; train {} infer {}",
            exp.curve.meta.approach,
            exp.curve.meta.method,
            last.mean_accuracy,
            last.std_accuracy,
            last.num_labels,
            last.cost.train_count,
            last.cost.infer_count
        );
        experiments.push(exp);
    }
    let diagnostics = diagnose(&ds, None, resolved.seed)?;
    let written = emit_results(&experiments, &diagnostics, &ds, &out_dir)?;
    println!("wrote {} files to {}", written.len(), out_dir.display());
    Ok(())
}

fn write_pca_csv(report: &DiagnosticsReport, ds: &Dataset, path: &Path) -> Result<()> {
    let mut s = String::from("sample_id,pc1,pc2,class\n");
    for (id, [pc1, pc2]) in report.pca.coords.iter().enumerate() {
        let class = ds.label(id).map(|c| c.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{id},{pc1},{pc2},{class}");
    }
    std::fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

fn cmd_diagnose(args: DiagnoseArgs) -> Result<()> {
    let source = match (args.data, args.profile) {
        (Some(path), _) => DataSource::Csv {
            path,
            num_classes: args.num_classes,
        },
        (None, Some(profile)) => DataSource::Generated {
            profile,
            seed: args.profile_seed.unwrap_or(0),
        },
        (None, None) => unreachable!("clap requires one of --data and --profile"),
    };
    let ds = load(&source)?;
    let report = diagnose(&ds, args.k, seed_or_env(args.seed)?)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_diagnostics(&report, &args.out.join("diagnostics.json"))?;
    write_pca_csv(&report, &ds, &args.out.join("pca_coords.csv"))?;
    let [v1, v2] = report.pca.explained_variance;
    println!(
        "k-means (k = {}) agreement {:.3}; PCA explained variance {v1:.3}, {v2:.3}; wrote {}",
        report.kmeans.k,
        report.kmeans.agreement,
        args.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Run(a) => cmd_run(&a),
        Command::Diagnose(a) => cmd_diagnose(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
