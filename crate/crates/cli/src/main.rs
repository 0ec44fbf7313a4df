use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use tsf_cli::grid::{run_experiment, GridConfig};
use tsf_cli::io::{load_cohort, save_cohort, CohortSchema};
use tsf_cli::synth::{generate, SyntheticSpec};
use tsf_core::forest::{fit_forest, GrowthConfig};
use tsf_core::serial::{
    artifact_kind, load_forest, load_model, load_structure_distribution, save_forest,
    save_model, save_structure_distribution, KIND_DEPTHWISE, KIND_FOREST, KIND_MODEL,
    KIND_STRUCTURE,
};
use tsf_core::tsf::{
    build_depthwise_distribution, build_structure_distribution, fit_dp_forest,
    fit_transfer_forest, fit_transfer_forest_unlimited, TransferConfig,
};
use tsf_core::{
    adapt, model_concordance, pretrain, Cohort, CurveModel, Error, LossKind, ModelConfig,
    Result, TrainConfig, TransferMode, TransferProtocol,
};

#[derive(Parser)]
#[command(
    name = "tsf",
    version,
    about = "Survival forests and parametric survival models with source-to-target transfer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SourceModel {
    /// Random survival forest.
    Rsf,
    /// Tree-shape distribution down to level k, for structure transfer.
    Structure,
    /// Per-level split-feature distribution, the depth-wise comparator.
    Depthwise,
    /// Parametric survival network (pick the objective with --loss).
    Net,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Text,
    Tsv,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic source/target cohort pair as CSV files.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        n_source: usize,
        #[arg(long, default_value_t = 1000)]
        n_target: usize,
        /// Directory that receives source.csv / target.csv plus schemas.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a source-side artifact from a cohort CSV.
    FitSource {
        /// Cohort CSV (schema read from <data>.schema.json unless given).
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, value_enum)]
        model: SourceModel,
        /// Objective for --model net: deepsurv, cox-cc or deephit.
        #[arg(long)]
        loss: Option<String>,
        /// Transferred tree levels for --model structure/depthwise.
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 500)]
        n_trees: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Artifact file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Adapt a source artifact to a target cohort.
    Transfer {
        /// Source artifact from fit-source.
        #[arg(long)]
        source: PathBuf,
        /// Target cohort CSV.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Network artifacts only: source-only, fine-tune, retrain or
        /// target-only. Forest-family artifacts have one natural
        /// transfer each and ignore this flag.
        #[arg(long, default_value = "fine-tune")]
        mode: String,
        /// Trees in the adapted ensemble (forest-family artifacts).
        #[arg(long, default_value_t = 100)]
        n_trees: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Artifact file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Time-dependent concordance of a fitted artifact on a cohort.
    Evaluate {
        /// Forest or network artifact.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Optional JSON result file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validated method-by-size comparison on a target cohort.
    Experiment {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Target training-set sizes, one table row each.
        #[arg(long, value_delimiter = ',', default_values_t = vec![500, 200, 80, 40, 20])]
        sizes: Vec<usize>,
        /// Transferred tree levels for the structure-transfer columns.
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        n_trees: usize,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        /// Source cohort CSV; omitted means synthetic data from --seed.
        #[arg(long)]
        source: Option<PathBuf>,
        /// Target cohort CSV; omitted means synthetic data from --seed.
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
        /// Also write the table to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn default_growth(n_features: usize, seed: u64) -> GrowthConfig {
    GrowthConfig {
        min_leaf_size: 5,
        min_split_events: 3,
        rng_seed: seed,
        ..GrowthConfig::default_for(n_features)
    }
}

fn load(data: &Path, schema: Option<&Path>) -> Result<Cohort> {
    load_cohort(data, schema).map(|(c, _)| c)
}

fn run_synth(seed: u64, n_source: usize, n_target: usize, out: &Path) -> Result<()> {
    let spec = SyntheticSpec { n_source, n_target, rng_seed: seed, ..SyntheticSpec::default() };
    let pair = generate(&spec)?;
    std::fs::create_dir_all(out)?;
    for (name, cohort) in [("source", &pair.source), ("target", &pair.target)] {
        let csv = out.join(format!("{name}.csv"));
        let schema =
            CohortSchema::numeric(&cohort.feature_names().to_vec(), "duration", "event");
        save_cohort(&csv, cohort, &schema)?;
        println!(
            "wrote {} ({} subjects, {} events)",
            csv.display(),
            cohort.n_subjects(),
            cohort.n_events()
        );
    }
    Ok(())
}

fn run_fit_source(
    data: &Path,
    schema: Option<&Path>,
    model: SourceModel,
    loss: Option<&str>,
    k: usize,
    n_trees: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let cohort = load(data, schema)?;
    match model {
        SourceModel::Rsf => {
            let forest = fit_forest(&cohort, n_trees, &default_growth(cohort.n_features(), seed))?;
            save_forest(out, &forest)?;
        }
        SourceModel::Structure => {
            let forest = fit_forest(&cohort, n_trees, &default_growth(cohort.n_features(), seed))?;
            save_structure_distribution(out, &build_structure_distribution(&forest, k)?)?;
        }
        SourceModel::Depthwise => {
            let forest = fit_forest(&cohort, n_trees, &default_growth(cohort.n_features(), seed))?;
            tsf_core::serial::save_depthwise_distribution(
                out,
                &build_depthwise_distribution(&forest, k)?,
            )?;
        }
        SourceModel::Net => {
            let loss = LossKind::parse(loss.ok_or_else(|| {
                Error::InvalidConfig("--model net needs --loss".into())
            })?)?;
            let train = TrainConfig { rng_seed: seed, ..TrainConfig::default() };
            let fitted = pretrain(&cohort, loss, &ModelConfig::default(), &train)?;
            save_model(out, &fitted)?;
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn run_transfer(
    source: &Path,
    data: &Path,
    schema: Option<&Path>,
    mode: &str,
    n_trees: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let target = load(data, schema)?;
    let growth = default_growth(target.n_features(), seed);
    match artifact_kind(source)?.as_str() {
        KIND_STRUCTURE => {
            let dist = load_structure_distribution(source)?;
            let config = TransferConfig { n_trees, k: dist.k, growth, rng_seed: seed };
            let fit = fit_transfer_forest(&dist, &target, &config)?;
            save_forest(out, &fit.forest)?;
        }
        KIND_FOREST => {
            let forest = load_forest(source)?;
            let config = TransferConfig { n_trees, k: 1, growth, rng_seed: seed };
            save_forest(out, &fit_transfer_forest_unlimited(&forest, &target, &config)?)?;
        }
        KIND_DEPTHWISE => {
            let dist = tsf_core::serial::load_depthwise_distribution(source)?;
            let config = TransferConfig { n_trees, k: dist.levels.len(), growth, rng_seed: seed };
            save_forest(out, &fit_dp_forest(&dist, &target, &config)?)?;
        }
        KIND_MODEL => {
            let pretrained = load_model(source)?;
            let protocol = TransferProtocol {
                mode: TransferMode::parse(mode)?,
                train: TrainConfig { rng_seed: seed, ..TrainConfig::default() },
                refit_baseline: true,
            };
            save_model(out, &adapt(&pretrained, &target, &protocol)?)?;
        }
        other => {
            return Err(Error::InvalidConfig(format!("cannot transfer a {other} artifact")))
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn run_evaluate(
    model: &Path,
    data: &Path,
    schema: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let cohort = load(data, schema)?;
    let predictor: Box<dyn CurveModel> = match artifact_kind(model)?.as_str() {
        KIND_FOREST => Box::new(load_forest(model)?),
        KIND_MODEL => Box::new(load_model(model)?),
        other => {
            return Err(Error::InvalidConfig(format!(
                "a {other} artifact does not predict by itself; transfer it first"
            )))
        }
    };
    let score = model_concordance(predictor.as_ref(), &cohort)?;
    println!("concordance\t{score:.6}");
    if let Some(path) = out {
        let report = serde_json::json!({
            "concordance": score,
            "n_subjects": cohort.n_subjects(),
            "n_events": cohort.n_events(),
        });
        std::fs::write(path, format!("{report:#}\n"))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_grid(
    seed: u64,
    sizes: Vec<usize>,
    k: usize,
    n_trees: usize,
    folds: usize,
    source: Option<&Path>,
    target: Option<&Path>,
    format: OutputFormat,
    out: Option<&Path>,
) -> Result<()> {
    let (source, target) = match (source, target) {
        (Some(s), Some(t)) => (load(s, None)?, load(t, None)?),
        (None, None) => {
            let pair = generate(&SyntheticSpec { rng_seed: seed, ..SyntheticSpec::default() })?;
            (pair.source, pair.target)
        }
        _ => {
            return Err(Error::InvalidConfig(
                "give both --source and --target, or neither for synthetic data".into(),
            ))
        }
    };
    let mut config = GridConfig::new(source.n_features(), k, n_trees, seed);
    config.sizes = sizes;
    config.n_folds = folds;
    let table = run_experiment(&source, &target, &config)?;
    let rendered = match format {
        OutputFormat::Text => table.render_text(),
        OutputFormat::Tsv => table.render_tsv(),
    };
    print!("{rendered}");
    if let Some(path) = out {
        std::fs::write(path, &rendered)?;
    }
    Ok(())
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Synth { seed, n_source, n_target, out } => {
            run_synth(seed, n_source, n_target, &out)
        }
        Command::FitSource { data, schema, model, loss, k, n_trees, seed, out } => {
            run_fit_source(
                &data,
                schema.as_deref(),
                model,
                loss.as_deref(),
                k,
                n_trees,
                seed,
                &out,
            )
        }
        Command::Transfer { source, data, schema, mode, n_trees, seed, out } => {
            run_transfer(&source, &data, schema.as_deref(), &mode, n_trees, seed, &out)
        }
        Command::Evaluate { model, data, schema, out } => {
            run_evaluate(&model, &data, schema.as_deref(), out.as_deref())
        }
        Command::Experiment { seed, sizes, k, n_trees, folds, source, target, format, out } => {
            run_grid(
                seed,
                sizes,
                k,
                n_trees,
                folds,
                source.as_deref(),
                target.as_deref(),
                format,
                out.as_deref(),
            )
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
