//! Random survival forests: bootstrap ensembles of log-rank-split trees
//! whose terminals carry Nelson-Aalen cumulative hazards.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::Cohort;
use crate::error::{Error, Result};
use crate::estimators::build_event_table;
use crate::logrank::logrank_sweep;
use crate::seed::derive_seed;
use crate::step::StepFunction;

/// Default ensemble size.
pub const DEFAULT_N_TREES: usize = 500;

/// Controls for growing survival trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthConfig {
    /// Maximum node depth (root is depth 0); `None` grows until the size
    /// and event gates stop splitting.
    pub max_depth: Option<usize>,
    /// Minimum subjects required in each child of a split.
    pub min_leaf_size: usize,
    /// Minimum observed events a node needs before a split is attempted.
    pub min_split_events: usize,
    /// Candidate features drawn without replacement at each node.
    pub mtry: usize,
    /// Candidate split values per feature, taken at evenly spaced quantiles.
    pub n_split_candidates: usize,
    /// Resample subjects with replacement per tree; disable to grow every
    /// tree on the data exactly as given.
    pub bootstrap: bool,
    /// Master seed; tree `i` derives its own stream from `(seed, i)`.
    pub rng_seed: u64,
}

impl GrowthConfig {
    /// Defaults for a cohort with `n_features` covariates:
    /// `mtry = ceil(sqrt(p))`, leaves of at least 15 subjects, 3 events to
    /// split, 10 quantile candidates, bootstrap on, unlimited depth.
    pub fn default_for(n_features: usize) -> Self {
        Self {
            max_depth: None,
            min_leaf_size: 15,
            min_split_events: 3,
            mtry: ((n_features as f64).sqrt().ceil() as usize).max(1),
            n_split_candidates: 10,
            bootstrap: true,
            rng_seed: 0,
        }
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.mtry == 0 || self.mtry > n_features {
            return Err(Error::InvalidConfig(format!(
                "mtry {} outside [1, {n_features}]",
                self.mtry
            )));
        }
        if self.min_leaf_size == 0 {
            return Err(Error::InvalidConfig("min_leaf_size must be >= 1".into()));
        }
        if self.n_split_candidates == 0 {
            return Err(Error::InvalidConfig("n_split_candidates must be >= 1".into()));
        }
        Ok(())
    }
}

/// One node of a survival tree. A terminal stores its Nelson-Aalen
/// cumulative hazard as sparse increments against the owning forest's time
/// grid: `jumps[k] = (grid_index, d/Y)`, so the curve at `grid[j]` is the
/// sum of increments with `grid_index <= j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Internal { feature: usize, split: f64, left: Box<TreeNode>, right: Box<TreeNode> },
    Terminal { jumps: Vec<(u32, f64)>, n_samples: usize },
}

impl TreeNode {
    fn depth(&self) -> usize {
        match self {
            TreeNode::Terminal { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// A single grown tree. Routing sends a subject left when its value for
/// the split feature is `<=` the split value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalTree {
    pub root: TreeNode,
}

impl SurvivalTree {
    /// Terminal node reached by covariate vector `x`.
    pub fn leaf(&self, x: &[f64]) -> &TreeNode {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Terminal { .. } => return node,
                TreeNode::Internal { feature, split, left, right } => {
                    node = if x[*feature] <= *split { left } else { right };
                }
            }
        }
    }

    /// This tree's cumulative-hazard prediction on the given grid.
    pub fn predict_cum_hazard(&self, x: &[f64], time_grid: &[f64]) -> StepFunction {
        let mut acc = vec![0.0; time_grid.len()];
        accumulate_leaf(self.leaf(x), &mut acc);
        to_cumulative(&mut acc);
        StepFunction::new(time_grid.to_vec(), acc, 0.0)
            .expect("time grid is strictly increasing")
    }

    /// Longest root-to-terminal path, in edges.
    pub fn depth(&self) -> usize {
        self.root.depth()
    }
}

/// A fitted ensemble. `time_grid` holds the distinct event times of the
/// fitting cohort; every terminal curve is expressed against it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<SurvivalTree>,
    config: GrowthConfig,
    time_grid: Vec<f64>,
    n_features: usize,
}

impl Forest {
    pub(crate) fn from_parts(
        trees: Vec<SurvivalTree>,
        config: GrowthConfig,
        time_grid: Vec<f64>,
        n_features: usize,
    ) -> Self {
        Self { trees, config, time_grid, n_features }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[SurvivalTree] {
        &self.trees
    }

    pub fn config(&self) -> &GrowthConfig {
        &self.config
    }

    pub fn time_grid(&self) -> &[f64] {
        &self.time_grid
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Ensemble cumulative hazard: the pointwise mean of the terminal
    /// curves reached by `x`, one per tree. Nondecreasing from 0 by
    /// construction.
    pub fn predict_chf(&self, x: &[f64]) -> Result<StepFunction> {
        if x.len() != self.n_features {
            return Err(Error::FeatureMismatch { expected: self.n_features, got: x.len() });
        }
        let mut acc = vec![0.0; self.time_grid.len()];
        for tree in &self.trees {
            accumulate_leaf(tree.leaf(x), &mut acc);
        }
        to_cumulative(&mut acc);
        let inv = 1.0 / self.trees.len() as f64;
        for v in &mut acc {
            *v *= inv;
        }
        Ok(StepFunction::new(self.time_grid.clone(), acc, 0.0)
            .expect("time grid is strictly increasing"))
    }

    /// Scalar risk score: the sum of the ensemble cumulative hazard over
    /// the training-time grid. Higher means shorter predicted survival.
    pub fn predict_mortality(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict_chf(x)?.values().iter().sum())
    }
}

fn accumulate_leaf(leaf: &TreeNode, acc: &mut [f64]) {
    if let TreeNode::Terminal { jumps, .. } = leaf {
        for &(gi, delta) in jumps {
            acc[gi as usize] += delta;
        }
    }
}

fn to_cumulative(acc: &mut [f64]) {
    let mut running = 0.0;
    for v in acc.iter_mut() {
        running += *v;
        *v = running;
    }
}

/// A chosen split: the feature, the threshold (left means `<=`), the
/// log-rank statistic it scored, and the child sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub value: f64,
    pub statistic: f64,
    pub n_left: usize,
    pub n_right: usize,
}

/// Best split of `subset` over the given candidate features, maximizing
/// the two-sample log-rank statistic across quantile-spaced thresholds.
///
/// Returns `None` when the subset has fewer than `min_split_events` events
/// or no threshold leaves both children with `min_leaf_size` subjects.
/// Ties break toward the lowest feature index, then the smallest value.
pub fn best_split(
    subset: &Cohort,
    candidate_features: &[usize],
    config: &GrowthConfig,
) -> Result<Option<SplitChoice>> {
    for &f in candidate_features {
        if f >= subset.n_features() {
            return Err(Error::InvalidConfig(format!(
                "candidate feature {f} out of range for {} features",
                subset.n_features()
            )));
        }
    }
    let mut idx: Vec<usize> = (0..subset.n_subjects()).collect();
    idx.sort_unstable_by(|&a, &b| subset.duration(a).total_cmp(&subset.duration(b)));
    let mut features = candidate_features.to_vec();
    features.sort_unstable();
    features.dedup();
    Ok(best_split_sorted(subset, &idx, &features, config))
}

/// Core split search. `idx_by_time` must be sorted ascending by duration
/// and `features` ascending by index (that ordering is what makes the
/// tie-break deterministic).
pub(crate) fn best_split_sorted(
    cohort: &Cohort,
    idx_by_time: &[usize],
    features: &[usize],
    config: &GrowthConfig,
) -> Option<SplitChoice> {
    let n = idx_by_time.len();
    let n_events = idx_by_time.iter().filter(|&&i| cohort.event(i)).count();
    if n_events < config.min_split_events {
        return None;
    }
    let mut best: Option<SplitChoice> = None;
    let mut vals: Vec<f64> = Vec::with_capacity(n);
    for &f in features {
        vals.clear();
        vals.extend(idx_by_time.iter().map(|&i| cohort.value(i, f)));
        vals.sort_unstable_by(f64::total_cmp);
        for v in quantile_candidates(&vals, config.n_split_candidates) {
            let n_left = vals.partition_point(|&x| x <= v);
            if n_left < config.min_leaf_size || n - n_left < config.min_leaf_size {
                continue;
            }
            let terms = logrank_sweep(
                idx_by_time
                    .iter()
                    .map(|&i| (cohort.duration(i), cohort.event(i), cohort.value(i, f) <= v)),
                n as u64,
                n_left as u64,
            );
            let stat = terms.statistic();
            if best.as_ref().map_or(true, |b| stat > b.statistic) {
                best = Some(SplitChoice {
                    feature: f,
                    value: v,
                    statistic: stat,
                    n_left,
                    n_right: n - n_left,
                });
            }
        }
    }
    best
}

/// Evenly spaced quantiles of an already-sorted value list, deduplicated.
fn quantile_candidates(sorted: &[f64], n_candidates: usize) -> Vec<f64> {
    let len = sorted.len();
    if len == 0 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(n_candidates);
    for j in 1..=n_candidates {
        let q = j as f64 / (n_candidates as f64 + 1.0);
        let pos = (q * (len - 1) as f64).round() as usize;
        out.push(sorted[pos]);
    }
    out.dedup();
    out
}

/// Grow one tree on `sample`, expressing terminal curves against
/// `time_grid`, which must contain every event time present in the sample.
pub fn grow_tree<R: Rng>(
    sample: &Cohort,
    time_grid: &[f64],
    config: &GrowthConfig,
    rng: &mut R,
) -> Result<SurvivalTree> {
    config.validate(sample.n_features())?;
    for t in sample.event_time_grid() {
        if time_grid.binary_search_by(|g| g.total_cmp(&t)).is_err() {
            return Err(Error::InvalidConfig(format!(
                "time grid is missing sample event time {t}"
            )));
        }
    }
    let idx: Vec<usize> = (0..sample.n_subjects()).collect();
    grow_on_indices(sample, idx, time_grid, config, rng)
}

/// Grow a tree over the subjects listed in `idx` (repeats allowed; this is
/// how bootstrap resamples are passed without copying the cohort).
pub(crate) fn grow_on_indices<R: Rng>(
    cohort: &Cohort,
    mut idx: Vec<usize>,
    time_grid: &[f64],
    config: &GrowthConfig,
    rng: &mut R,
) -> Result<SurvivalTree> {
    if idx.is_empty() {
        return Err(Error::EmptyCohort);
    }
    idx.sort_unstable_by(|&a, &b| cohort.duration(a).total_cmp(&cohort.duration(b)));
    let root = grow_node(cohort, idx, time_grid, config, 0, rng)?;
    Ok(SurvivalTree { root })
}

pub(crate) fn grow_node<R: Rng>(
    cohort: &Cohort,
    idx: Vec<usize>,
    grid: &[f64],
    config: &GrowthConfig,
    depth: usize,
    rng: &mut R,
) -> Result<TreeNode> {
    let depth_ok = config.max_depth.map_or(true, |d| depth < d);
    if depth_ok && idx.len() >= 2 * config.min_leaf_size {
        let features = sample_features(cohort.n_features(), config.mtry, rng);
        if let Some(split) = best_split_sorted(cohort, &idx, &features, config) {
            let (left, right): (Vec<usize>, Vec<usize>) = idx
                .into_iter()
                .partition(|&i| cohort.value(i, split.feature) <= split.value);
            return Ok(TreeNode::Internal {
                feature: split.feature,
                split: split.value,
                left: Box::new(grow_node(cohort, left, grid, config, depth + 1, rng)?),
                right: Box::new(grow_node(cohort, right, grid, config, depth + 1, rng)?),
            });
        }
    }
    terminal_node(cohort, &idx, grid)
}

/// Terminal holding the Nelson-Aalen increments of the node's subjects,
/// located on the shared time grid.
pub(crate) fn terminal_node(cohort: &Cohort, idx: &[usize], grid: &[f64]) -> Result<TreeNode> {
    let durations: Vec<f64> = idx.iter().map(|&i| cohort.duration(i)).collect();
    let events: Vec<bool> = idx.iter().map(|&i| cohort.event(i)).collect();
    let table = build_event_table(&durations, &events, None)?;
    let mut jumps = Vec::with_capacity(table.times.len());
    for l in 0..table.times.len() {
        let gi = grid
            .binary_search_by(|g| g.total_cmp(&table.times[l]))
            .map_err(|_| {
                Error::InvalidConfig(format!("time grid is missing event time {}", table.times[l]))
            })?;
        jumps.push((gi as u32, table.deaths[l] as f64 / table.at_risk[l] as f64));
    }
    Ok(TreeNode::Terminal { jumps, n_samples: idx.len() })
}

/// `mtry` distinct feature indices, ascending.
pub(crate) fn sample_features<R: Rng>(n_features: usize, mtry: usize, rng: &mut R) -> Vec<usize> {
    let mut features = rand::seq::index::sample(rng, n_features, mtry.min(n_features)).into_vec();
    features.sort_unstable();
    features
}

/// Fit a survival forest: `n_trees` trees, each grown on its own bootstrap
/// resample (subject to `config.bootstrap`) with per-node feature
/// subsampling. Trees are grown in parallel; results are identical for any
/// thread count because every tree seeds its own RNG from
/// `(config.rng_seed, tree index)`.
pub fn fit_forest(cohort: &Cohort, n_trees: usize, config: &GrowthConfig) -> Result<Forest> {
    if n_trees == 0 {
        return Err(Error::InvalidConfig("n_trees must be >= 1".into()));
    }
    config.validate(cohort.n_features())?;
    let grid = cohort.event_time_grid();
    let n = cohort.n_subjects();
    let trees = (0..n_trees)
        .into_par_iter()
        .map(|tree_idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                config.rng_seed,
                "forest-tree",
                &[tree_idx as u64],
            ));
            let idx: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_on_indices(cohort, idx, &grid, config, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest { trees, config: config.clone(), time_grid: grid, n_features: cohort.n_features() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::nelson_aalen;
    use crate::logrank::log_rank_statistic;

    fn toy_cohort() -> Cohort {
        // feature 0 separates early deaths (x<=0) from late (x>0); feature 1 constant
        let rows = vec![
            vec![0.0, 5.0],
            vec![0.0, 5.0],
            vec![0.0, 5.0],
            vec![1.0, 5.0],
            vec![1.0, 5.0],
            vec![1.0, 5.0],
        ];
        let durations = vec![1.0, 2.0, 3.0, 10.0, 11.0, 12.0];
        let events = vec![true, true, true, true, true, false];
        Cohort::from_rows(rows, durations, events).unwrap()
    }

    fn tiny_config() -> GrowthConfig {
        GrowthConfig {
            max_depth: None,
            min_leaf_size: 1,
            min_split_events: 1,
            mtry: 2,
            n_split_candidates: 10,
            bootstrap: false,
            rng_seed: 7,
        }
    }

    #[test]
    fn best_split_picks_the_separating_feature() {
        let c = toy_cohort();
        let config = tiny_config();
        let split = best_split(&c, &[0, 1], &config).unwrap().unwrap();
        assert_eq!(split.feature, 0);
        assert_eq!(split.value, 0.0);
        assert_eq!((split.n_left, split.n_right), (3, 3));
        // statistic must equal the plain two-group log-rank computation
        let expected = log_rank_statistic(
            &[1.0, 2.0, 3.0],
            &[true, true, true],
            &[10.0, 11.0, 12.0],
            &[true, true, false],
        )
        .unwrap();
        assert!((split.statistic - expected).abs() < 1e-12);
    }

    #[test]
    fn best_split_breaks_feature_ties_low() {
        // two identical informative columns; the lower index must win
        let rows = vec![
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
        ];
        let c = Cohort::from_rows(rows, vec![1.0, 2.0, 9.0, 10.0], vec![true; 4]).unwrap();
        let split = best_split(&c, &[1, 0], &tiny_config()).unwrap().unwrap();
        assert_eq!(split.feature, 0);
    }

    #[test]
    fn best_split_respects_gates() {
        let c = toy_cohort();
        let mut config = tiny_config();
        config.min_leaf_size = 4; // no threshold can give both children 4 of 6
        assert!(best_split(&c, &[0], &config).unwrap().is_none());

        let mut config = tiny_config();
        config.min_split_events = 6; // only 5 events present
        assert!(best_split(&c, &[0], &config).unwrap().is_none());
    }

    #[test]
    fn constant_covariates_admit_no_split() {
        let c = Cohort::from_rows(vec![vec![3.0]; 4], vec![1.0, 2.0, 3.0, 4.0], vec![true; 4])
            .unwrap();
        assert!(best_split(&c, &[0], &tiny_config()).unwrap().is_none());
        // and growing a tree on it yields a single terminal
        let mut config = tiny_config();
        config.mtry = 1;
        let grid = c.event_time_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tree = grow_tree(&c, &grid, &config, &mut rng).unwrap();
        assert!(matches!(tree.root, TreeNode::Terminal { n_samples: 4, .. }));
    }

    #[test]
    fn stump_forest_reproduces_nelson_aalen() {
        let c = toy_cohort();
        let mut config = tiny_config();
        config.max_depth = Some(0);
        let forest = fit_forest(&c, 1, &config).unwrap();
        let pred = forest.predict_chf(&[0.0, 5.0]).unwrap();
        let table = build_event_table(c.durations(), c.events(), None).unwrap();
        let na = nelson_aalen(&table);
        assert_eq!(pred, na);
    }

    #[test]
    fn max_depth_is_honored() {
        let c = toy_cohort();
        let mut config = tiny_config();
        config.max_depth = Some(1);
        let forest = fit_forest(&c, 8, &config).unwrap();
        assert!(forest.trees().iter().all(|t| t.depth() <= 1));
    }

    #[test]
    fn prediction_is_monotone_from_zero() {
        let c = toy_cohort();
        let mut config = tiny_config();
        config.bootstrap = true;
        let forest = fit_forest(&c, 16, &config).unwrap();
        for x in [[0.0, 5.0], [1.0, 5.0], [0.5, -2.0]] {
            let chf = forest.predict_chf(&x).unwrap();
            assert_eq!(chf.initial_value(), 0.0);
            let mut prev = 0.0;
            for &v in chf.values() {
                assert!(v >= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn same_seed_same_forest() {
        let c = toy_cohort();
        let mut config = tiny_config();
        config.bootstrap = true;
        let a = fit_forest(&c, 12, &config).unwrap();
        let b = fit_forest(&c, 12, &config).unwrap();
        assert_eq!(a, b);
        config.rng_seed = 8;
        let c2 = fit_forest(&c, 12, &config).unwrap();
        assert_ne!(a, c2);
    }

    #[test]
    fn row_order_does_not_matter_without_bootstrap() {
        let c = toy_cohort();
        let perm = [5usize, 2, 4, 0, 3, 1];
        let shuffled = c.select(&perm).unwrap();
        let config = tiny_config();
        let grid = c.event_time_grid();
        let mut rng_a = ChaCha8Rng::seed_from_u64(3);
        let mut rng_b = ChaCha8Rng::seed_from_u64(3);
        let ta = grow_tree(&c, &grid, &config, &mut rng_a).unwrap();
        let tb = grow_tree(&shuffled, &grid, &config, &mut rng_b).unwrap();
        for x in [[0.0, 5.0], [1.0, 5.0]] {
            assert_eq!(
                ta.predict_cum_hazard(&x, &grid),
                tb.predict_cum_hazard(&x, &grid)
            );
        }
    }

    #[test]
    fn mismatched_probe_width_errors() {
        let c = toy_cohort();
        let forest = fit_forest(&c, 2, &tiny_config()).unwrap();
        assert!(matches!(
            forest.predict_chf(&[1.0]).unwrap_err(),
            Error::FeatureMismatch { expected: 2, got: 1 }
        ));
    }

    #[test]
    fn binary_feature_has_one_admissible_threshold() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![f64::from(i % 2)]).collect();
        let durations: Vec<f64> = (0..10).map(|i| 1.0 + i as f64).collect();
        let c = Cohort::from_rows(rows, durations, vec![true; 10]).unwrap();
        let split = best_split(&c, &[0], &tiny_config()).unwrap().unwrap();
        assert_eq!(split.value, 0.0); // left = zeros, right = ones
        assert_eq!((split.n_left, split.n_right), (5, 5));
    }
}
