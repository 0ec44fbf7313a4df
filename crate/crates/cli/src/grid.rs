//! The experiment grid: every transfer method evaluated on the target
//! cohort across a ladder of training-set sizes, with the source-side
//! artifacts (forest, tree-shape distributions, pretrained networks)
//! fitted once and reused by every cell.

use tsf_core::forest::{fit_forest, Forest, GrowthConfig};
use tsf_core::seed::derive_seed;
use tsf_core::tsf::{
    build_depthwise_distribution, build_structure_distribution, fit_dp_forest,
    fit_transfer_forest, fit_transfer_forest_unlimited, DepthwiseDistribution,
    StructureDistribution, TransferConfig,
};
use tsf_core::{
    adapt, pretrain, Cohort, CurveModel, Error, FittedModel, LossKind, ModelConfig, Result,
    TrainConfig, TransferMode, TransferProtocol,
};

use crate::cv::{run_cv, CvPlan, CvResult};

/// One column of the comparison grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Random survival forest fitted on the target training split alone.
    TargetForest,
    /// The source-fitted forest applied to the target unchanged.
    SourceForest,
    /// Structure transfer: source tree shapes down to level `k`,
    /// re-valued and extended on target data.
    StructureTransfer(usize),
    /// Whole source trees re-valued on target data, no depth cap.
    WholeTreeTransfer,
    /// Depth-wise feature-draw comparator.
    DepthwiseTransfer,
    /// Pretrained parametric model adapted under the given mode.
    Net { loss: LossKind, mode: TransferMode },
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::TargetForest => "target-rsf".into(),
            Method::SourceForest => "source-rsf".into(),
            Method::StructureTransfer(k) => format!("tsf-t{k}"),
            Method::WholeTreeTransfer => "tsf-tinf".into(),
            Method::DepthwiseTransfer => "dp-rsf".into(),
            Method::Net { loss, mode } => {
                let suffix = match mode {
                    TransferMode::SourceOnly => "src",
                    TransferMode::FineTune => "ft",
                    TransferMode::Retrain => "rt",
                    TransferMode::TargetOnly => "tgt",
                };
                format!("{}-{suffix}", loss.label())
            }
        }
    }
}

/// Settings shared by the whole grid.
#[derive(Debug, Clone)]
pub struct GridConfig {
    pub sizes: Vec<usize>,
    pub n_folds: usize,
    pub n_trees: usize,
    pub k: usize,
    pub rng_seed: u64,
    pub methods: Vec<Method>,
    pub growth: GrowthConfig,
    pub net_model: ModelConfig,
    pub pretrain_train: TrainConfig,
    pub adapt_train: TrainConfig,
}

impl GridConfig {
    /// Defaults sized for the two-domain comparison: every forest and
    /// structure-transfer column plus fine-tune and retrain for each
    /// parametric loss.
    pub fn new(n_features: usize, k: usize, n_trees: usize, rng_seed: u64) -> Self {
        let growth = GrowthConfig {
            min_leaf_size: 5,
            min_split_events: 3,
            ..GrowthConfig::default_for(n_features)
        };
        let adapt_train = TrainConfig { epochs: 48, learning_rate: 0.02, ..TrainConfig::default() };
        Self {
            sizes: vec![500, 200, 80, 40, 20],
            n_folds: 10,
            n_trees,
            k,
            rng_seed,
            methods: Self::default_methods(k),
            growth,
            net_model: ModelConfig::default(),
            pretrain_train: TrainConfig::default(),
            adapt_train,
        }
    }

    pub fn default_methods(k: usize) -> Vec<Method> {
        let mut methods = vec![
            Method::TargetForest,
            Method::SourceForest,
            Method::StructureTransfer(k),
            Method::WholeTreeTransfer,
            Method::DepthwiseTransfer,
        ];
        for loss in [LossKind::CoxFull, LossKind::CoxCaseControl, LossKind::DiscreteTime] {
            for mode in [TransferMode::FineTune, TransferMode::Retrain] {
                methods.push(Method::Net { loss, mode });
            }
        }
        methods
    }

    fn transfer_config(&self, k: usize, seed: u64) -> TransferConfig {
        TransferConfig { n_trees: self.n_trees, k, growth: self.growth.clone(), rng_seed: seed }
    }
}

/// Everything fitted on the source cohort, shared across the grid.
pub struct SourceArtifacts {
    pub forest: Forest,
    pub structure: StructureDistribution,
    pub depthwise: DepthwiseDistribution,
    pub nets: Vec<(LossKind, FittedModel)>,
}

impl SourceArtifacts {
    pub fn net(&self, loss: LossKind) -> Result<&FittedModel> {
        self.nets
            .iter()
            .find(|(l, _)| *l == loss)
            .map(|(_, m)| m)
            .ok_or_else(|| Error::InvalidConfig(format!("no pretrained {} model", loss.label())))
    }
}

/// Fit the source forest, extract both shape distributions, and pretrain
/// one network per loss the grid's methods ask for.
pub fn fit_source_artifacts(source: &Cohort, config: &GridConfig) -> Result<SourceArtifacts> {
    let growth = GrowthConfig {
        rng_seed: derive_seed(config.rng_seed, "source-forest", &[]),
        ..config.growth.clone()
    };
    let forest = fit_forest(source, config.n_trees, &growth)?;
    let structure = build_structure_distribution(&forest, config.k)?;
    let depthwise = build_depthwise_distribution(&forest, config.k)?;
    let mut losses: Vec<LossKind> = Vec::new();
    for m in &config.methods {
        if let Method::Net { loss, .. } = m {
            if !losses.contains(loss) {
                losses.push(*loss);
            }
        }
    }
    let nets = losses
        .into_iter()
        .enumerate()
        .map(|(i, loss)| {
            let train = TrainConfig {
                rng_seed: derive_seed(config.rng_seed, "pretrain", &[i as u64]),
                ..config.pretrain_train.clone()
            };
            pretrain(source, loss, &config.net_model, &train).map(|m| (loss, m))
        })
        .collect::<Result<_>>()?;
    Ok(SourceArtifacts { forest, structure, depthwise, nets })
}

/// Build one method's model on a target training split.
pub fn build_model(
    method: Method,
    artifacts: &SourceArtifacts,
    train: &Cohort,
    config: &GridConfig,
    seed: u64,
) -> Result<Box<dyn CurveModel>> {
    match method {
        Method::TargetForest => {
            let growth = GrowthConfig { rng_seed: seed, ..config.growth.clone() };
            Ok(Box::new(fit_forest(train, config.n_trees, &growth)?))
        }
        Method::SourceForest => Ok(Box::new(artifacts.forest.clone())),
        Method::StructureTransfer(k) => {
            let fit =
                fit_transfer_forest(&artifacts.structure, train, &config.transfer_config(k, seed))?;
            Ok(Box::new(fit.forest))
        }
        Method::WholeTreeTransfer => Ok(Box::new(fit_transfer_forest_unlimited(
            &artifacts.forest,
            train,
            &config.transfer_config(config.k, seed),
        )?)),
        Method::DepthwiseTransfer => Ok(Box::new(fit_dp_forest(
            &artifacts.depthwise,
            train,
            &config.transfer_config(config.k, seed),
        )?)),
        Method::Net { loss, mode } => {
            let protocol = TransferProtocol {
                mode,
                train: TrainConfig { rng_seed: seed, ..config.adapt_train.clone() },
                refit_baseline: true,
            };
            Ok(Box::new(adapt(artifacts.net(loss)?, train, &protocol)?))
        }
    }
}

/// One grid cell: fold-mean concordance with its spread.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub mean: f64,
    pub sd: f64,
    pub folds: usize,
    pub skipped: usize,
}

impl From<CvResult> for CellResult {
    fn from(r: CvResult) -> Self {
        Self { mean: r.mean(), sd: r.sd(), folds: r.fold_scores.len(), skipped: r.skipped }
    }
}

/// Grid output: one row per training size, one column per method.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub sizes: Vec<usize>,
    pub methods: Vec<String>,
    pub cells: Vec<Vec<CellResult>>,
}

impl ResultsTable {
    pub fn cell(&self, size: usize, method: &str) -> Option<&CellResult> {
        let r = self.sizes.iter().position(|&s| s == size)?;
        let c = self.methods.iter().position(|m| m == method)?;
        Some(&self.cells[r][c])
    }

    /// Tab-separated means, 4 decimals; deterministic byte-for-byte.
    pub fn render_tsv(&self) -> String {
        let mut out = String::from("n");
        for m in &self.methods {
            out.push('\t');
            out.push_str(m);
        }
        out.push('\n');
        for (r, &size) in self.sizes.iter().enumerate() {
            out.push_str(&size.to_string());
            for cell in &self.cells[r] {
                out.push_str(&format!("\t{:.4}", cell.mean));
            }
            out.push('\n');
        }
        out
    }

    /// Aligned table with `mean+-sd`. The best cell per row is bracketed;
    /// cells that fall below the leftmost target-only column (when one is
    /// present) are asterisked.
    pub fn render_text(&self) -> String {
        let reference = self.methods.iter().position(|m| m.starts_with("target"));
        let mut columns: Vec<Vec<String>> = Vec::new();
        let mut head = vec!["n".to_string()];
        head.extend(self.methods.iter().cloned());
        columns.push(head);
        for (r, &size) in self.sizes.iter().enumerate() {
            let best = self.cells[r]
                .iter()
                .map(|c| c.mean)
                .fold(f64::NEG_INFINITY, f64::max);
            let floor = reference.map(|c| self.cells[r][c].mean);
            let mut row = vec![size.to_string()];
            for cell in &self.cells[r] {
                let star = if floor.is_some_and(|f| cell.mean < f) { "*" } else { "" };
                let body = format!("{:.4}+-{:.4}{star}", cell.mean, cell.sd);
                row.push(if cell.mean == best { format!("[{body}]") } else { body });
            }
            columns.push(row);
        }
        let widths: Vec<usize> = (0..columns[0].len())
            .map(|c| columns.iter().map(|row| row[c].len()).max().unwrap())
            .collect();
        let mut out = String::new();
        for row in &columns {
            for (c, cell) in row.iter().enumerate() {
                if c > 0 {
                    out.push_str("  ");
                }
                out.push_str(&format!("{:>width$}", cell, width = widths[c]));
            }
            out.push('\n');
        }
        out
    }
}

/// Run the whole grid: for every training size, k-fold CV of every
/// method on the target cohort. Folds and subsamples are shared across
/// methods, so columns are paired.
pub fn run_experiment(
    source: &Cohort,
    target: &Cohort,
    config: &GridConfig,
) -> Result<ResultsTable> {
    if source.n_features() != target.n_features() {
        return Err(Error::FeatureMismatch {
            expected: source.n_features(),
            got: target.n_features(),
        });
    }
    let artifacts = fit_source_artifacts(source, config)?;
    let plan = CvPlan { n_folds: config.n_folds, rng_seed: derive_seed(config.rng_seed, "cv", &[]) };
    let mut cells = Vec::with_capacity(config.sizes.len());
    for &size in &config.sizes {
        let mut row = Vec::with_capacity(config.methods.len());
        for &method in &config.methods {
            let factory = |train: &Cohort, seed: u64| -> Result<Box<dyn CurveModel>> {
                build_model(method, &artifacts, train, config, seed)
            };
            row.push(run_cv(target, &plan, Some(size), &factory)?.into());
        }
        cells.push(row);
    }
    Ok(ResultsTable {
        sizes: config.sizes.clone(),
        methods: config.methods.iter().map(Method::label).collect(),
        cells,
    })
}

/// Single-split evaluation: fit every method on `train`, score on `test`.
/// Returns `(label, concordance)` pairs in method order.
pub fn holdout_row(
    artifacts: &SourceArtifacts,
    train: &Cohort,
    test: &Cohort,
    config: &GridConfig,
    seed: u64,
) -> Result<Vec<(String, f64)>> {
    config
        .methods
        .iter()
        .map(|&method| {
            let model = build_model(method, artifacts, train, config, seed)?;
            let score = tsf_core::model_concordance(model.as_ref(), test)?;
            Ok((method.label(), score))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SyntheticSpec};

    fn quick_grid(seed: u64) -> (Cohort, Cohort, GridConfig) {
        let spec =
            SyntheticSpec { n_source: 250, n_target: 120, rng_seed: seed, ..SyntheticSpec::default() };
        let pair = generate(&spec).unwrap();
        let mut config = GridConfig::new(pair.source.n_features(), 2, 8, seed);
        config.sizes = vec![60, 30];
        config.n_folds = 3;
        config.methods = vec![
            Method::TargetForest,
            Method::SourceForest,
            Method::StructureTransfer(2),
            Method::Net { loss: LossKind::CoxFull, mode: TransferMode::FineTune },
        ];
        config.pretrain_train = TrainConfig { epochs: 4, ..TrainConfig::default() };
        config.adapt_train = TrainConfig { epochs: 4, ..TrainConfig::default() };
        (pair.source, pair.target, config)
    }

    #[test]
    fn grid_runs_and_is_deterministic() {
        let (source, target, config) = quick_grid(5);
        let a = run_experiment(&source, &target, &config).unwrap();
        let b = run_experiment(&source, &target, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sizes, vec![60, 30]);
        assert_eq!(a.methods.len(), 4);
        assert_eq!(a.methods[2], "tsf-t2");
        for row in &a.cells {
            for cell in row {
                assert!(cell.mean.is_finite() && cell.mean > 0.0 && cell.mean < 1.0);
            }
        }
        assert_eq!(a.render_tsv(), b.render_tsv());
    }

    #[test]
    fn renders_are_shaped_like_the_grid() {
        let (source, target, config) = quick_grid(6);
        let table = run_experiment(&source, &target, &config).unwrap();
        let tsv = table.render_tsv();
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("n\ttarget-rsf\tsource-rsf\t"));
        assert_eq!(lines[1].split('\t').count(), 5);
        let text = table.render_text();
        assert_eq!(text.lines().count(), 3);
        // every row brackets its best cell
        assert_eq!(text.matches('[').count(), 2);
        // a cell is asterisked exactly when it trails the target-only column
        for (r, line) in text.lines().skip(1).enumerate() {
            let floor = table.cells[r][0].mean;
            let below = table.cells[r].iter().filter(|c| c.mean < floor).count();
            assert_eq!(line.matches('*').count(), below);
        }
        assert!(table.cell(60, "source-rsf").is_some());
        assert!(table.cell(61, "source-rsf").is_none());
    }

    #[test]
    fn holdout_row_scores_every_method() {
        let (source, target, config) = quick_grid(7);
        let artifacts = fit_source_artifacts(&source, &config).unwrap();
        let train = target.select(&(0..60).collect::<Vec<_>>()).unwrap();
        let test = target.select(&(60..120).collect::<Vec<_>>()).unwrap();
        let row = holdout_row(&artifacts, &train, &test, &config, 11).unwrap();
        assert_eq!(row.len(), 4);
        assert_eq!(row[0].0, "target-rsf");
        for (label, score) in &row {
            assert!(score.is_finite(), "{label} produced a bad score");
        }
    }
}
