//! Stratified k-fold evaluation on the target cohort. Folds and training
//! subsamples preserve the event share, and every random choice derives
//! from the plan seed, so a run is reproducible index-for-index.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tsf_core::seed::derive_seed;
use tsf_core::{concordance_td, cohort_curves, Cohort, CurveModel, Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct CvPlan {
    pub n_folds: usize,
    pub rng_seed: u64,
}

impl Default for CvPlan {
    fn default() -> Self {
        Self { n_folds: 10, rng_seed: 0 }
    }
}

/// Builds a model from a training cohort and a derived seed.
pub type ModelFactory<'a> = dyn Fn(&Cohort, u64) -> Result<Box<dyn CurveModel>> + 'a;

/// Partition `0..n` into folds that each carry their share of events:
/// events and censored subjects are shuffled separately, then dealt
/// round-robin.
pub fn stratified_folds(cohort: &Cohort, n_folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if n_folds < 2 {
        return Err(Error::InvalidConfig("need at least 2 folds".into()));
    }
    if cohort.n_subjects() < n_folds {
        return Err(Error::InvalidConfig(format!(
            "{} subjects cannot fill {n_folds} folds",
            cohort.n_subjects()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events: Vec<usize> = (0..cohort.n_subjects()).filter(|&i| cohort.event(i)).collect();
    let mut censored: Vec<usize> =
        (0..cohort.n_subjects()).filter(|&i| !cohort.event(i)).collect();
    events.shuffle(&mut rng);
    censored.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); n_folds];
    for (pos, idx) in events.into_iter().chain(censored).enumerate() {
        folds[pos % n_folds].push(idx);
    }
    Ok(folds)
}

/// Pick `m` of `pool` keeping the pool's event share (up to rounding);
/// asking for the whole pool or more returns it unchanged. The result is
/// sorted.
pub fn stratified_subsample(cohort: &Cohort, pool: &[usize], m: usize, seed: u64) -> Vec<usize> {
    if m >= pool.len() {
        let mut all = pool.to_vec();
        all.sort_unstable();
        return all;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events: Vec<usize> = pool.iter().copied().filter(|&i| cohort.event(i)).collect();
    let mut censored: Vec<usize> = pool.iter().copied().filter(|&i| !cohort.event(i)).collect();
    events.shuffle(&mut rng);
    censored.shuffle(&mut rng);
    let share = events.len() as f64 / pool.len() as f64;
    let mut take_events = (m as f64 * share).round() as usize;
    take_events = take_events.min(events.len()).max(m.saturating_sub(censored.len()));
    let take_censored = m - take_events;
    let mut picked: Vec<usize> = events
        .into_iter()
        .take(take_events)
        .chain(censored.into_iter().take(take_censored))
        .collect();
    picked.sort_unstable();
    picked
}

/// Per-fold concordances. Folds whose test split had no usable pairs are
/// counted in `skipped` rather than scored.
#[derive(Debug, Clone)]
pub struct CvResult {
    pub fold_scores: Vec<f64>,
    pub skipped: usize,
}

impl CvResult {
    pub fn mean(&self) -> f64 {
        self.fold_scores.iter().sum::<f64>() / self.fold_scores.len() as f64
    }

    pub fn sd(&self) -> f64 {
        if self.fold_scores.len() < 2 {
            return 0.0;
        }
        let mean = self.mean();
        let ss: f64 = self.fold_scores.iter().map(|s| (s - mean).powi(2)).sum();
        (ss / (self.fold_scores.len() - 1) as f64).sqrt()
    }
}

/// k-fold concordance of whatever `factory` builds. `train_size` caps the
/// training split with a stratified subsample, mimicking a small target
/// cohort while the test folds stay full-size.
pub fn run_cv(
    target: &Cohort,
    plan: &CvPlan,
    train_size: Option<usize>,
    factory: &ModelFactory,
) -> Result<CvResult> {
    let folds = stratified_folds(target, plan.n_folds, derive_seed(plan.rng_seed, "folds", &[]))?;
    let mut fold_scores = Vec::new();
    let mut skipped = 0;
    for f in 0..folds.len() {
        let mut train_idx: Vec<usize> = Vec::new();
        for (g, fold) in folds.iter().enumerate() {
            if g != f {
                train_idx.extend_from_slice(fold);
            }
        }
        if let Some(m) = train_size {
            train_idx = stratified_subsample(
                target,
                &train_idx,
                m,
                derive_seed(plan.rng_seed, "subsample", &[f as u64, m as u64]),
            );
        } else {
            train_idx.sort_unstable();
        }
        let train = target.select(&train_idx)?;
        let test = target.select(&folds[f])?;
        let model = factory(&train, derive_seed(plan.rng_seed, "fold-model", &[f as u64]))?;
        let curves = cohort_curves(model.as_ref(), &test)?;
        match concordance_td(&test, &curves) {
            Ok(score) => fold_scores.push(score),
            Err(Error::NoComparablePairs) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if fold_scores.is_empty() {
        return Err(Error::NoComparablePairs);
    }
    Ok(CvResult { fold_scores, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SyntheticSpec};
    use tsf_core::forest::{fit_forest, GrowthConfig};
    use tsf_core::{kaplan_meier, build_event_table, StepFunction};

    fn target_cohort(n: usize) -> Cohort {
        let spec = SyntheticSpec { n_source: 10, n_target: n, ..SyntheticSpec::default() };
        generate(&spec).unwrap().target
    }

    #[test]
    fn folds_partition_and_balance() {
        let cohort = target_cohort(103);
        let folds = stratified_folds(&cohort, 10, 7).unwrap();
        let mut seen: Vec<usize> = folds.iter().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..103).collect::<Vec<_>>());
        for fold in &folds {
            assert!((10..=11).contains(&fold.len()));
            assert!(fold.iter().any(|&i| cohort.event(i)), "fold without events");
        }
        assert_eq!(folds, stratified_folds(&cohort, 10, 7).unwrap());
        assert_ne!(folds, stratified_folds(&cohort, 10, 8).unwrap());
    }

    #[test]
    fn subsample_keeps_event_share() {
        let cohort = target_cohort(400);
        let pool: Vec<usize> = (0..400).collect();
        let picked = stratified_subsample(&cohort, &pool, 40, 3);
        assert_eq!(picked.len(), 40);
        assert!(picked.windows(2).all(|w| w[0] < w[1]));
        let pool_share = cohort.n_events() as f64 / 400.0;
        let picked_share =
            picked.iter().filter(|&&i| cohort.event(i)).count() as f64 / 40.0;
        assert!((picked_share - pool_share).abs() <= 0.05);
        assert_eq!(picked, stratified_subsample(&cohort, &pool, 40, 3));
        assert_eq!(stratified_subsample(&cohort, &pool, 400, 3), pool);
    }

    #[test]
    fn identical_curves_score_one_half() {
        let cohort = target_cohort(60);
        let factory = |train: &Cohort, _seed: u64| -> Result<Box<dyn CurveModel>> {
            let table = build_event_table(train.durations(), train.events(), None)?;
            Ok(Box::new(FixedCurve(kaplan_meier(&table))))
        };
        let result = run_cv(&cohort, &CvPlan { n_folds: 5, rng_seed: 1 }, None, &factory).unwrap();
        assert_eq!(result.skipped, 0);
        assert_eq!(result.fold_scores.len(), 5);
        for s in &result.fold_scores {
            assert!((s - 0.5).abs() <= 1e-12);
        }
        assert_eq!(result.mean(), 0.5);
    }

    struct FixedCurve(StepFunction);

    impl CurveModel for FixedCurve {
        fn survival_curve(&self, _x: &[f64]) -> Result<StepFunction> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn forests_beat_chance_on_informative_data() {
        let cohort = target_cohort(300);
        let factory = |train: &Cohort, seed: u64| -> Result<Box<dyn CurveModel>> {
            let config = GrowthConfig {
                min_leaf_size: 5,
                min_split_events: 2,
                rng_seed: seed,
                ..GrowthConfig::default_for(train.n_features())
            };
            Ok(Box::new(fit_forest(train, 25, &config)?))
        };
        let plan = CvPlan { n_folds: 5, rng_seed: 2 };
        let result = run_cv(&cohort, &plan, None, &factory).unwrap();
        assert!(result.mean() > 0.6, "mean concordance {}", result.mean());
        let again = run_cv(&cohort, &plan, None, &factory).unwrap();
        assert_eq!(result.fold_scores, again.fold_scores);
    }

    #[test]
    fn train_size_caps_the_training_split() {
        let cohort = target_cohort(200);
        let sizes = std::cell::RefCell::new(Vec::new());
        let factory = |train: &Cohort, _seed: u64| -> Result<Box<dyn CurveModel>> {
            sizes.borrow_mut().push(train.n_subjects());
            let table = build_event_table(train.durations(), train.events(), None)?;
            Ok(Box::new(FixedCurve(kaplan_meier(&table))))
        };
        run_cv(&cohort, &CvPlan { n_folds: 4, rng_seed: 3 }, Some(40), &factory).unwrap();
        assert_eq!(sizes.into_inner(), vec![40; 4]);
    }
}
