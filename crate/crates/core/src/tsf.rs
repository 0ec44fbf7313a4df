//! Structure transfer for survival forests.
//!
//! A large source cohort fixes *which* features the top of each tree splits
//! on; a small target cohort only has to re-estimate *where*. The top-k
//! tree shapes of a source forest are summarized as an empirical
//! distribution over structure signatures; target trees sample a prototype
//! signature, re-fit its split values on target data, and grow freely below
//! the transferred levels. Variants: whole-tree transfer (no growth beyond
//! the source structure) and a level-wise comparator that only transfers
//! per-depth feature frequencies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::cohort::Cohort;
use crate::error::{Error, Result};
use crate::forest::{
    best_split_sorted, grow_node, sample_features, terminal_node, Forest, GrowthConfig,
    SurvivalTree, TreeNode,
};
use crate::seed::derive_seed;

/// The top-`k` levels of a tree as a positional map: position 0 is the
/// root, the children of position `p` sit at `2p+1` and `2p+2`, and
/// `slots[p]` is `Some(feature)` for an internal node or `None` where the
/// tree has already terminated.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StructureSignature {
    k: usize,
    slots: Vec<Option<usize>>,
}

impl StructureSignature {
    /// Validating constructor: `2^k - 1` slots and no feature hanging below
    /// a terminated position.
    pub fn new(k: usize, slots: Vec<Option<usize>>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("signature needs k >= 1".into()));
        }
        let len = (1usize << k) - 1;
        if slots.len() != len {
            return Err(Error::InvalidConfig(format!(
                "signature with k={k} needs {len} slots, got {}",
                slots.len()
            )));
        }
        for p in 0..len {
            if slots[p].is_none() {
                for child in [2 * p + 1, 2 * p + 2] {
                    if child < len && slots[child].is_some() {
                        return Err(Error::InvalidConfig(format!(
                            "slot {child} is internal below terminated slot {p}"
                        )));
                    }
                }
            }
        }
        Ok(Self { k, slots })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn slots(&self) -> &[Option<usize>] {
        &self.slots
    }

    /// Largest feature index referenced, if any slot is internal.
    pub fn max_feature(&self) -> Option<usize> {
        self.slots.iter().flatten().copied().max()
    }
}

/// Read the top-`k` structure of a grown tree.
pub fn extract_signature(tree: &SurvivalTree, k: usize) -> Result<StructureSignature> {
    if k == 0 {
        return Err(Error::InvalidConfig("signature needs k >= 1".into()));
    }
    let len = (1usize << k) - 1;
    let mut slots = vec![None; len];
    fn fill(node: &TreeNode, pos: usize, level: usize, k: usize, slots: &mut [Option<usize>]) {
        if level >= k {
            return;
        }
        if let TreeNode::Internal { feature, left, right, .. } = node {
            slots[pos] = Some(*feature);
            fill(left, 2 * pos + 1, level + 1, k, slots);
            fill(right, 2 * pos + 2, level + 1, k, slots);
        }
    }
    fill(&tree.root, 0, 0, k, &mut slots);
    Ok(StructureSignature { k, slots })
}

/// Empirical distribution over top-`k` signatures of a source forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureDistribution {
    pub k: usize,
    /// `(signature, probability)` pairs, sorted by signature; probabilities
    /// are tree counts over `source_n_trees` and sum to 1.
    pub entries: Vec<(StructureSignature, f64)>,
    pub source_n_trees: usize,
    pub n_features: usize,
}

/// Count the signatures of every tree in `forest`.
pub fn build_structure_distribution(forest: &Forest, k: usize) -> Result<StructureDistribution> {
    let mut counts: BTreeMap<StructureSignature, usize> = BTreeMap::new();
    for tree in forest.trees() {
        *counts.entry(extract_signature(tree, k)?).or_insert(0) += 1;
    }
    let n = forest.n_trees();
    let entries = counts
        .into_iter()
        .map(|(sig, c)| (sig, c as f64 / n as f64))
        .collect();
    Ok(StructureDistribution { k, entries, source_n_trees: n, n_features: forest.n_features() })
}

/// Draw one signature according to its probability.
pub fn sample_prototype<'d, R: Rng>(
    dist: &'d StructureDistribution,
    rng: &mut R,
) -> &'d StructureSignature {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    for (sig, p) in &dist.entries {
        cum += p;
        if u < cum {
            return sig;
        }
    }
    // guard against cum landing at 1.0 - epsilon
    &dist.entries.last().expect("distribution has at least one entry").0
}

/// Per-depth feature frequencies of a source forest's internal nodes.
/// `levels[d]` lists `(feature, probability)` for depth `d`, sorted by
/// feature; a depth with no internal nodes gets an empty list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthwiseDistribution {
    pub levels: Vec<Vec<(usize, f64)>>,
    pub n_features: usize,
}

/// Count split features per depth over the first `max_levels` levels.
pub fn build_depthwise_distribution(
    forest: &Forest,
    max_levels: usize,
) -> Result<DepthwiseDistribution> {
    if max_levels == 0 {
        return Err(Error::InvalidConfig("depth-wise distribution needs >= 1 level".into()));
    }
    let mut counts: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); max_levels];
    fn walk(node: &TreeNode, depth: usize, counts: &mut [BTreeMap<usize, usize>]) {
        if let TreeNode::Internal { feature, left, right, .. } = node {
            if depth < counts.len() {
                *counts[depth].entry(*feature).or_insert(0) += 1;
                walk(left, depth + 1, counts);
                walk(right, depth + 1, counts);
            }
        }
    }
    for tree in forest.trees() {
        walk(&tree.root, 0, &mut counts);
    }
    let levels = counts
        .into_iter()
        .map(|level| {
            let total: usize = level.values().sum();
            level
                .into_iter()
                .map(|(f, c)| (f, c as f64 / total as f64))
                .collect()
        })
        .collect();
    Ok(DepthwiseDistribution { levels, n_features: forest.n_features() })
}

fn sample_feature<R: Rng>(level: &[(usize, f64)], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    for &(f, p) in level {
        cum += p;
        if u < cum {
            return f;
        }
    }
    level.last().expect("level is non-empty").0
}

/// Settings for fitting a transfer forest on a target cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    /// Trees in the target-side ensemble.
    pub n_trees: usize,
    /// Transferred levels; must match the structure distribution's `k`.
    pub k: usize,
    /// Growth settings for the free levels below `k` and for all gates.
    pub growth: GrowthConfig,
    /// Master seed for prototype draws, bootstraps, and free growth;
    /// supersedes `growth.rng_seed`.
    pub rng_seed: u64,
}

/// Which prescribed positions were abandoned while re-fitting one tree.
/// A position is truncated when its feature cannot produce a valid split
/// on the node's target data (constant feature, child-size gate, or too
/// few events); the node becomes terminal and the positions below it are
/// never visited.
#[derive(Debug, Clone, Default)]
pub struct FineTuneReport {
    pub truncated_positions: Vec<usize>,
}

/// Re-fit one prototype signature on target data: prescribed positions
/// split on their fixed feature at the value maximizing the log-rank
/// statistic; terminated positions and everything below level `k` grow
/// standard. Terminal curves are expressed against `time_grid`.
pub fn fine_tune_tree<R: Rng>(
    signature: &StructureSignature,
    target: &Cohort,
    time_grid: &[f64],
    config: &TransferConfig,
    rng: &mut R,
) -> Result<(SurvivalTree, FineTuneReport)> {
    config.growth.validate(target.n_features())?;
    if let Some(f) = signature.max_feature() {
        if f >= target.n_features() {
            return Err(Error::FeatureMismatch { expected: target.n_features(), got: f + 1 });
        }
    }
    let mut idx: Vec<usize> = (0..target.n_subjects()).collect();
    idx.sort_unstable_by(|&a, &b| target.duration(a).total_cmp(&target.duration(b)));
    let mut report = FineTuneReport::default();
    let root = tune_node(target, idx, signature, 0, 0, time_grid, config, rng, &mut report)?;
    Ok((SurvivalTree { root }, report))
}

#[allow(clippy::too_many_arguments)]
fn tune_node<R: Rng>(
    cohort: &Cohort,
    idx: Vec<usize>,
    sig: &StructureSignature,
    pos: usize,
    level: usize,
    grid: &[f64],
    config: &TransferConfig,
    rng: &mut R,
    report: &mut FineTuneReport,
) -> Result<TreeNode> {
    if level < sig.k {
        if let Some(feature) = sig.slots[pos] {
            if idx.len() >= 2 * config.growth.min_leaf_size {
                if let Some(split) = best_split_sorted(cohort, &idx, &[feature], &config.growth) {
                    let (left, right): (Vec<usize>, Vec<usize>) =
                        idx.into_iter().partition(|&i| cohort.value(i, feature) <= split.value);
                    return Ok(TreeNode::Internal {
                        feature,
                        split: split.value,
                        left: Box::new(tune_node(
                            cohort,
                            left,
                            sig,
                            2 * pos + 1,
                            level + 1,
                            grid,
                            config,
                            rng,
                            report,
                        )?),
                        right: Box::new(tune_node(
                            cohort,
                            right,
                            sig,
                            2 * pos + 2,
                            level + 1,
                            grid,
                            config,
                            rng,
                            report,
                        )?),
                    });
                }
            }
            // the prescribed feature admits no valid split here
            report.truncated_positions.push(pos);
            return terminal_node(cohort, &idx, grid);
        }
    }
    grow_node(cohort, idx, grid, &config.growth, level, rng)
}

/// A transfer forest with its per-tree prototypes and truncation reports,
/// kept for structure-fidelity checks.
#[derive(Debug, Clone)]
pub struct TransferForestFit {
    pub forest: Forest,
    pub prototypes: Vec<StructureSignature>,
    pub reports: Vec<FineTuneReport>,
}

/// Fit a transfer forest: each target tree samples a prototype signature
/// from `dist` and re-fits it via [`fine_tune_tree`] on its own bootstrap
/// resample (per `config.growth.bootstrap`).
pub fn fit_transfer_forest(
    dist: &StructureDistribution,
    target: &Cohort,
    config: &TransferConfig,
) -> Result<TransferForestFit> {
    if config.n_trees == 0 {
        return Err(Error::InvalidConfig("n_trees must be >= 1".into()));
    }
    if config.k != dist.k {
        return Err(Error::InvalidConfig(format!(
            "config.k = {} but the structure distribution was built with k = {}",
            config.k, dist.k
        )));
    }
    if dist.n_features != target.n_features() {
        return Err(Error::FeatureMismatch {
            expected: dist.n_features,
            got: target.n_features(),
        });
    }
    config.growth.validate(target.n_features())?;
    let grid = target.event_time_grid();
    let n = target.n_subjects();
    let fitted = (0..config.n_trees)
        .into_par_iter()
        .map(|tree_idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                config.rng_seed,
                "transfer-tree",
                &[tree_idx as u64],
            ));
            let prototype = sample_prototype(dist, &mut rng).clone();
            let idx: Vec<usize> = if config.growth.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut sorted = idx;
            sorted.sort_unstable_by(|&a, &b| target.duration(a).total_cmp(&target.duration(b)));
            let mut report = FineTuneReport::default();
            let root = tune_node(
                target,
                sorted,
                &prototype,
                0,
                0,
                &grid,
                config,
                &mut rng,
                &mut report,
            )?;
            Ok((SurvivalTree { root }, prototype, report))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut trees = Vec::with_capacity(fitted.len());
    let mut prototypes = Vec::with_capacity(fitted.len());
    let mut reports = Vec::with_capacity(fitted.len());
    for (tree, proto, report) in fitted {
        trees.push(tree);
        prototypes.push(proto);
        reports.push(report);
    }
    let mut forest_config = config.growth.clone();
    forest_config.rng_seed = config.rng_seed;
    let forest = Forest::from_parts(trees, forest_config, grid, target.n_features());
    Ok(TransferForestFit { forest, prototypes, reports })
}

/// Fit a level-wise comparator forest: each node within the distribution's
/// levels draws its split feature independently from that level's source
/// frequencies (split values still come from target data); an empty level
/// and every level beyond fall back to standard free growth.
pub fn fit_dp_forest(
    dp: &DepthwiseDistribution,
    target: &Cohort,
    config: &TransferConfig,
) -> Result<Forest> {
    if config.n_trees == 0 {
        return Err(Error::InvalidConfig("n_trees must be >= 1".into()));
    }
    if dp.n_features != target.n_features() {
        return Err(Error::FeatureMismatch { expected: dp.n_features, got: target.n_features() });
    }
    config.growth.validate(target.n_features())?;
    let grid = target.event_time_grid();
    let n = target.n_subjects();
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|tree_idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                config.rng_seed,
                "dp-tree",
                &[tree_idx as u64],
            ));
            let idx: Vec<usize> = if config.growth.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut sorted = idx;
            sorted.sort_unstable_by(|&a, &b| target.duration(a).total_cmp(&target.duration(b)));
            let root = grow_dp_node(target, sorted, dp, 0, &grid, &config.growth, &mut rng)?;
            Ok(SurvivalTree { root })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut forest_config = config.growth.clone();
    forest_config.rng_seed = config.rng_seed;
    Ok(Forest::from_parts(trees, forest_config, grid, target.n_features()))
}

fn grow_dp_node<R: Rng>(
    cohort: &Cohort,
    idx: Vec<usize>,
    dp: &DepthwiseDistribution,
    level: usize,
    grid: &[f64],
    growth: &GrowthConfig,
    rng: &mut R,
) -> Result<TreeNode> {
    let depth_ok = growth.max_depth.map_or(true, |d| level < d);
    if depth_ok && idx.len() >= 2 * growth.min_leaf_size {
        let prescribed = dp.levels.get(level).filter(|l| !l.is_empty());
        let (features, from_source) = match prescribed {
            Some(level_dist) => (vec![sample_feature(level_dist, rng)], true),
            None => (sample_features(cohort.n_features(), growth.mtry, rng), false),
        };
        if let Some(split) = best_split_sorted(cohort, &idx, &features, growth) {
            let (left, right): (Vec<usize>, Vec<usize>) =
                idx.into_iter().partition(|&i| cohort.value(i, split.feature) <= split.value);
            return Ok(TreeNode::Internal {
                feature: split.feature,
                split: split.value,
                left: Box::new(grow_dp_node(cohort, left, dp, level + 1, grid, growth, rng)?),
                right: Box::new(grow_dp_node(cohort, right, dp, level + 1, grid, growth, rng)?),
            });
        }
        // a freely grown node that cannot split becomes terminal anyway;
        // a prescribed draw that cannot split truncates just like fine-tuning
        let _ = from_source;
    }
    terminal_node(cohort, &idx, grid)
}

/// Whole-tree transfer: every target tree copies the complete shape of a
/// uniformly drawn source tree and only re-fits split values, top-down on
/// the target subjects that reach each node. No growth happens beyond the
/// transferred structure; a node whose prescribed feature admits no valid
/// split becomes terminal.
pub fn fit_transfer_forest_unlimited(
    source: &Forest,
    target: &Cohort,
    config: &TransferConfig,
) -> Result<Forest> {
    if config.n_trees == 0 {
        return Err(Error::InvalidConfig("n_trees must be >= 1".into()));
    }
    if source.n_features() != target.n_features() {
        return Err(Error::FeatureMismatch {
            expected: source.n_features(),
            got: target.n_features(),
        });
    }
    config.growth.validate(target.n_features())?;
    let grid = target.event_time_grid();
    let n = target.n_subjects();
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|tree_idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                config.rng_seed,
                "whole-tree",
                &[tree_idx as u64],
            ));
            let source_tree = &source.trees()[rng.gen_range(0..source.n_trees())];
            let idx: Vec<usize> = if config.growth.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut sorted = idx;
            sorted.sort_unstable_by(|&a, &b| target.duration(a).total_cmp(&target.duration(b)));
            let root = revalue_node(target, sorted, &source_tree.root, &grid, &config.growth)?;
            Ok(SurvivalTree { root })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut forest_config = config.growth.clone();
    forest_config.rng_seed = config.rng_seed;
    Ok(Forest::from_parts(trees, forest_config, grid, target.n_features()))
}

fn revalue_node(
    cohort: &Cohort,
    idx: Vec<usize>,
    src: &TreeNode,
    grid: &[f64],
    growth: &GrowthConfig,
) -> Result<TreeNode> {
    if let TreeNode::Internal { feature, left: src_left, right: src_right, .. } = src {
        if idx.len() >= 2 * growth.min_leaf_size {
            if let Some(split) = best_split_sorted(cohort, &idx, &[*feature], growth) {
                let (left, right): (Vec<usize>, Vec<usize>) =
                    idx.into_iter().partition(|&i| cohort.value(i, *feature) <= split.value);
                return Ok(TreeNode::Internal {
                    feature: *feature,
                    split: split.value,
                    left: Box::new(revalue_node(cohort, left, src_left, grid, growth)?),
                    right: Box::new(revalue_node(cohort, right, src_right, grid, growth)?),
                });
            }
        }
    }
    terminal_node(cohort, &idx, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{build_event_table, nelson_aalen};
    use crate::forest::fit_forest;

    fn leaf() -> Box<TreeNode> {
        Box::new(TreeNode::Terminal { jumps: vec![], n_samples: 1 })
    }

    fn internal(feature: usize, left: TreeNode, right: TreeNode) -> TreeNode {
        TreeNode::Internal { feature, split: 0.0, left: Box::new(left), right: Box::new(right) }
    }

    fn stump(feature: usize) -> SurvivalTree {
        SurvivalTree { root: internal(feature, *leaf(), *leaf()) }
    }

    #[test]
    fn signature_of_a_stump() {
        let sig = extract_signature(&stump(3), 2).unwrap();
        assert_eq!(sig.slots(), &[Some(3), None, None]);
        let sig1 = extract_signature(&stump(3), 1).unwrap();
        assert_eq!(sig1.slots(), &[Some(3)]);
    }

    #[test]
    fn signature_of_an_uneven_tree() {
        // root f0; left child splits f2; right child terminal
        let tree = SurvivalTree { root: internal(0, internal(2, *leaf(), *leaf()), *leaf()) };
        let sig = extract_signature(&tree, 2).unwrap();
        assert_eq!(sig.slots(), &[Some(0), Some(2), None]);
        let sig3 = extract_signature(&tree, 3).unwrap();
        assert_eq!(sig3.slots(), &[Some(0), Some(2), None, None, None, None, None]);
    }

    #[test]
    fn signature_rejects_internal_below_terminated() {
        let err = StructureSignature::new(2, vec![None, Some(0), None]).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
        assert!(StructureSignature::new(2, vec![Some(1), None, None]).is_ok());
    }

    fn toy_forest(sigs: &[usize]) -> Forest {
        // one stump per requested feature; grid and config are dummies
        let trees = sigs.iter().map(|&f| stump(f)).collect();
        Forest::from_parts(trees, GrowthConfig::default_for(4), vec![1.0], 4)
    }

    #[test]
    fn distribution_counts_signatures() {
        let forest = toy_forest(&[1, 1, 2, 3]);
        let dist = build_structure_distribution(&forest, 2).unwrap();
        assert_eq!(dist.entries.len(), 3);
        assert_eq!(dist.source_n_trees, 4);
        let total: f64 = dist.entries.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let p1 = dist
            .entries
            .iter()
            .find(|(s, _)| s.slots()[0] == Some(1))
            .map(|(_, p)| *p)
            .unwrap();
        assert_eq!(p1, 0.5);
    }

    #[test]
    fn prototype_sampling_tracks_probabilities() {
        let forest = toy_forest(&[1, 1, 1, 2]);
        let dist = build_structure_distribution(&forest, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 4000;
        let hits = (0..draws)
            .filter(|_| sample_prototype(&dist, &mut rng).slots()[0] == Some(1))
            .count();
        let freq = hits as f64 / draws as f64;
        assert!((freq - 0.75).abs() < 0.03, "freq = {freq}");
    }

    #[test]
    fn depthwise_distribution_counts_per_level() {
        // two trees: [f0; f1 left] and [f0; f2 right]
        let t1 = SurvivalTree { root: internal(0, internal(1, *leaf(), *leaf()), *leaf()) };
        let t2 = SurvivalTree { root: internal(0, *leaf(), internal(2, *leaf(), *leaf())) };
        let forest =
            Forest::from_parts(vec![t1, t2], GrowthConfig::default_for(4), vec![1.0], 4);
        let dp = build_depthwise_distribution(&forest, 3).unwrap();
        assert_eq!(dp.levels[0], vec![(0, 1.0)]);
        assert_eq!(dp.levels[1], vec![(1, 0.5), (2, 0.5)]);
        assert!(dp.levels[2].is_empty());
    }

    fn separable_cohort() -> Cohort {
        // binary feature 0 separates early from late deaths; feature 1 noise
        let mut rows = Vec::new();
        let mut durations = Vec::new();
        let mut events = Vec::new();
        for i in 0..16 {
            let early = i % 2 == 0;
            rows.push(vec![if early { 0.0 } else { 1.0 }, (i % 5) as f64]);
            durations.push(if early { 1.0 + i as f64 * 0.1 } else { 20.0 + i as f64 * 0.1 });
            events.push(i % 8 != 7);
        }
        Cohort::from_rows(rows, durations, events).unwrap()
    }

    fn tiny_transfer_config(k: usize, seed: u64) -> TransferConfig {
        TransferConfig {
            n_trees: 8,
            k,
            growth: GrowthConfig {
                max_depth: Some(1),
                min_leaf_size: 2,
                min_split_events: 1,
                mtry: 2,
                n_split_candidates: 10,
                bootstrap: false,
                rng_seed: 0,
            },
            rng_seed: seed,
        }
    }

    #[test]
    fn fine_tune_replays_a_prescribed_root() {
        let target = separable_cohort();
        let sig = StructureSignature::new(2, vec![Some(0), None, None]).unwrap();
        let config = tiny_transfer_config(2, 5);
        let grid = target.event_time_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (tree, report) = fine_tune_tree(&sig, &target, &grid, &config, &mut rng).unwrap();
        assert!(report.truncated_positions.is_empty());
        match &tree.root {
            TreeNode::Internal { feature, split, left, right } => {
                assert_eq!(*feature, 0);
                assert_eq!(*split, 0.0);
                // max_depth = 1 stops free growth below, so both children are
                // terminals carrying the Nelson-Aalen curves of their sides
                assert!(matches!(**left, TreeNode::Terminal { .. }));
                assert!(matches!(**right, TreeNode::Terminal { .. }));
            }
            TreeNode::Terminal { .. } => panic!("root should split"),
        }
        // left side = subjects with feature 0 == 0
        let early: Vec<usize> = (0..target.n_subjects())
            .filter(|&i| target.value(i, 0) == 0.0)
            .collect();
        let durations: Vec<f64> = early.iter().map(|&i| target.duration(i)).collect();
        let events: Vec<bool> = early.iter().map(|&i| target.event(i)).collect();
        let na = nelson_aalen(&build_event_table(&durations, &events, None).unwrap());
        let pred = tree.predict_cum_hazard(&[0.0, 0.0], &grid);
        for &t in &grid {
            assert_eq!(pred.eval(t), na.eval(t));
        }
    }

    #[test]
    fn fine_tune_truncates_on_a_constant_feature() {
        let mut rows = Vec::new();
        for i in 0..8 {
            rows.push(vec![1.0, i as f64]); // feature 0 constant
        }
        let target =
            Cohort::from_rows(rows, (1..=8).map(f64::from).collect(), vec![true; 8]).unwrap();
        let sig = StructureSignature::new(1, vec![Some(0)]).unwrap();
        let config = tiny_transfer_config(1, 9);
        let grid = target.event_time_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (tree, report) = fine_tune_tree(&sig, &target, &grid, &config, &mut rng).unwrap();
        assert_eq!(report.truncated_positions, vec![0]);
        assert!(matches!(tree.root, TreeNode::Terminal { n_samples: 8, .. }));
    }

    #[test]
    fn transfer_forest_is_deterministic_and_prefix_compatible() {
        let source = separable_cohort();
        let mut growth = GrowthConfig::default_for(2);
        growth.min_leaf_size = 2;
        growth.min_split_events = 1;
        growth.rng_seed = 21;
        let source_forest = fit_forest(&source, 20, &growth).unwrap();
        let dist = build_structure_distribution(&source_forest, 2).unwrap();

        let target = separable_cohort();
        let config = tiny_transfer_config(2, 33);
        let fit_a = fit_transfer_forest(&dist, &target, &config).unwrap();
        let fit_b = fit_transfer_forest(&dist, &target, &config).unwrap();
        assert_eq!(fit_a.forest, fit_b.forest);
        assert_eq!(fit_a.prototypes, fit_b.prototypes);

        for (tree, proto) in fit_a.forest.trees().iter().zip(&fit_a.prototypes) {
            let grown = extract_signature(tree, 2).unwrap();
            for (pos, (g, p)) in grown.slots().iter().zip(proto.slots()).enumerate() {
                if let (Some(gf), Some(pf)) = (g, p) {
                    assert_eq!(gf, pf, "feature mismatch at position {pos}");
                }
            }
        }
    }

    #[test]
    fn dp_forest_draws_from_each_level() {
        let target = separable_cohort();
        let dp = DepthwiseDistribution {
            levels: vec![vec![(0, 1.0)], vec![]],
            n_features: 2,
        };
        let mut config = tiny_transfer_config(1, 17);
        config.growth.max_depth = Some(2);
        let forest = fit_dp_forest(&dp, &target, &config).unwrap();
        for tree in forest.trees() {
            match &tree.root {
                TreeNode::Internal { feature, .. } => assert_eq!(*feature, 0),
                TreeNode::Terminal { .. } => panic!("root should split on the prescribed feature"),
            }
        }
    }

    #[test]
    fn whole_tree_transfer_truncates_when_source_roots_cannot_split() {
        let source = separable_cohort();
        let mut growth = GrowthConfig::default_for(2);
        growth.min_leaf_size = 2;
        growth.min_split_events = 1;
        growth.mtry = 1;
        growth.rng_seed = 4;
        let source_forest = fit_forest(&source, 10, &growth).unwrap();

        // target where every feature is constant: nothing can split
        let target = Cohort::from_rows(
            vec![vec![1.0, 1.0]; 10],
            (1..=10).map(f64::from).collect(),
            vec![true; 10],
        )
        .unwrap();
        let config = tiny_transfer_config(1, 2);
        let forest = fit_transfer_forest_unlimited(&source_forest, &target, &config).unwrap();
        assert!(forest
            .trees()
            .iter()
            .all(|t| matches!(t.root, TreeNode::Terminal { n_samples: 10, .. })));
    }

    #[test]
    fn transfer_config_k_must_match_distribution() {
        let forest = toy_forest(&[1, 2]);
        let dist = build_structure_distribution(&forest, 2).unwrap();
        let target = separable_cohort();
        let mut config = tiny_transfer_config(1, 3);
        config.growth.mtry = 2;
        let err = fit_transfer_forest(&dist, &target, &config).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }
}
