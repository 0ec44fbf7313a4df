//! Mini-batch gradient training for the survival networks, plus the
//! pieces a fitted model needs at prediction time: covariate
//! standardization, the Breslow baseline hazard, and survival-curve
//! construction for both heads.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cohort::Cohort;
use crate::error::{Error, Result};
use crate::nn::loss::{
    cox_nll_grad, coxcc_grad_with_controls, deephit_loss_grad, sample_case_controls,
    CaseControls, DiscreteTimeGrid,
};
use crate::nn::{softmax, Head, SurvivalNetwork};
use crate::seed::derive_seed;
use crate::step::StepFunction;

/// Which training objective drives the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    /// Full Cox partial likelihood over every batch risk set.
    CoxFull,
    /// Case-control approximation with sampled comparison sets.
    CoxCaseControl,
    /// Discrete-time likelihood plus ranking.
    DiscreteTime,
}

impl LossKind {
    /// Stable lower-case label used by the command line and result tables.
    pub fn label(&self) -> &'static str {
        match self {
            LossKind::CoxFull => "deepsurv",
            LossKind::CoxCaseControl => "cox-cc",
            LossKind::DiscreteTime => "deephit",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "deepsurv" => Ok(LossKind::CoxFull),
            "cox-cc" | "coxcc" => Ok(LossKind::CoxCaseControl),
            "deephit" => Ok(LossKind::DiscreteTime),
            other => Err(Error::InvalidConfig(format!("unknown loss '{other}'"))),
        }
    }

    pub fn head(&self) -> Head {
        match self {
            LossKind::CoxFull | LossKind::CoxCaseControl => Head::Risk,
            LossKind::DiscreteTime => Head::Discrete,
        }
    }
}

/// Which parameters a training run may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainScope {
    All,
    /// Update only the output layer; hidden weights stay bit-identical.
    OutputOnly,
}

/// Gradient-descent settings. `momentum` of 0 is plain SGD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Comparison-set draw count per event for the case-control loss.
    pub control_size: usize,
    /// Likelihood weight of the combined discrete-time loss.
    pub alpha: f64,
    /// Ranking temperature of the discrete-time loss.
    pub sigma: f64,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 64,
            batch_size: 128,
            learning_rate: 0.05,
            momentum: 0.9,
            control_size: 4,
            alpha: 0.6,
            sigma: 0.1,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidConfig("batch_size must be >= 2".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig("momentum must lie in [0, 1)".into()));
        }
        if self.control_size == 0 {
            return Err(Error::InvalidConfig("control_size must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig("alpha must lie strictly in (0, 1)".into()));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidConfig("sigma must be positive".into()));
        }
        Ok(())
    }
}

/// A fully specified, deterministic loss over a set of subjects. The
/// case-control variant carries its comparison sets (indices into the
/// subject list) so repeated evaluation gives identical values, which is
/// what finite-difference gradient checks need.
pub enum Objective<'a> {
    CoxFull,
    CoxCaseControl { cases: &'a [CaseControls] },
    DiscreteTime { grid: &'a DiscreteTimeGrid, alpha: f64, sigma: f64 },
}

impl Objective<'_> {
    fn expected_head(&self) -> Head {
        match self {
            Objective::CoxFull | Objective::CoxCaseControl { .. } => Head::Risk,
            Objective::DiscreteTime { .. } => Head::Discrete,
        }
    }
}

fn check_net(net: &SurvivalNetwork, cohort: &Cohort, objective: &Objective) -> Result<()> {
    if net.input_dim() != cohort.n_features() {
        return Err(Error::FeatureMismatch {
            expected: net.input_dim(),
            got: cohort.n_features(),
        });
    }
    if net.head() != objective.expected_head() {
        return Err(Error::InvalidConfig("loss does not match the network head".into()));
    }
    if let Objective::DiscreteTime { grid, .. } = objective {
        if net.output_dim() != grid.n_bins() {
            return Err(Error::InvalidConfig(format!(
                "network has {} outputs but the grid has {} bins",
                net.output_dim(),
                grid.n_bins()
            )));
        }
    }
    Ok(())
}

/// Loss and flat parameter gradient over the subjects `idx` (positions in
/// `cohort`); comparison-set indices inside the objective are positions in
/// `idx`, not in the cohort.
fn eval_indices(
    net: &SurvivalNetwork,
    cohort: &Cohort,
    idx: &[usize],
    objective: &Objective,
    want_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    let caches: Vec<_> = idx.iter().map(|&i| net.forward_cached(cohort.row(i))).collect();
    let durations: Vec<f64> = idx.iter().map(|&i| cohort.duration(i)).collect();
    let events: Vec<bool> = idx.iter().map(|&i| cohort.event(i)).collect();

    // d(loss)/d(raw outputs), one row per subject
    let (loss, d_raw): (f64, Vec<Vec<f64>>) = match objective {
        Objective::CoxFull | Objective::CoxCaseControl { .. } => {
            let scores: Vec<f64> = caches.iter().map(|c| c.raw[0]).collect();
            let (loss, grad) = match objective {
                Objective::CoxFull => cox_nll_grad(&scores, &durations, &events)?,
                Objective::CoxCaseControl { cases } => {
                    coxcc_grad_with_controls(&scores, cases)?
                }
                _ => unreachable!(),
            };
            (loss, grad.into_iter().map(|g| vec![g]).collect())
        }
        Objective::DiscreteTime { grid, alpha, sigma } => {
            let m = grid.n_bins();
            let mut y = Vec::with_capacity(idx.len() * m);
            for cache in &caches {
                y.extend(softmax(&cache.raw));
            }
            let (loss, dy) = deephit_loss_grad(&y, grid, &durations, &events, *alpha, *sigma)?;
            // softmax jacobian: dz_o = y_o * (g_o - g . y)
            let d_raw = (0..idx.len())
                .map(|b| {
                    let yy = &y[b * m..(b + 1) * m];
                    let gg = &dy[b * m..(b + 1) * m];
                    let dot: f64 = yy.iter().zip(gg).map(|(a, b)| a * b).sum();
                    yy.iter().zip(gg).map(|(&yo, &go)| yo * (go - dot)).collect()
                })
                .collect();
            (loss, d_raw)
        }
    };

    if !want_grad {
        return Ok((loss, None));
    }
    let mut grad = vec![0.0; net.n_params()];
    for (b, &i) in idx.iter().enumerate() {
        net.backward(cohort.row(i), &caches[b], &d_raw[b], &mut grad);
    }
    Ok((loss, Some(grad)))
}

/// Total objective value over the whole cohort.
pub fn objective_loss(
    net: &SurvivalNetwork,
    cohort: &Cohort,
    objective: &Objective,
) -> Result<f64> {
    check_net(net, cohort, objective)?;
    let idx: Vec<usize> = (0..cohort.n_subjects()).collect();
    eval_indices(net, cohort, &idx, objective, false).map(|(l, _)| l)
}

/// Total objective value plus its gradient with respect to the flat
/// parameter vector of [`SurvivalNetwork::params`].
pub fn objective_loss_and_gradient(
    net: &SurvivalNetwork,
    cohort: &Cohort,
    objective: &Objective,
) -> Result<(f64, Vec<f64>)> {
    check_net(net, cohort, objective)?;
    let idx: Vec<usize> = (0..cohort.n_subjects()).collect();
    let (loss, grad) = eval_indices(net, cohort, &idx, objective, true)?;
    Ok((loss, grad.expect("gradient requested")))
}

/// A trained network with its per-epoch mean loss trace.
#[derive(Debug, Clone)]
pub struct TrainedNet {
    pub net: SurvivalNetwork,
    pub loss_trace: Vec<f64>,
}

/// Train every parameter. See [`train_scoped`].
pub fn train(
    net: &SurvivalNetwork,
    cohort: &Cohort,
    loss: LossKind,
    grid: Option<&DiscreteTimeGrid>,
    config: &TrainConfig,
) -> Result<TrainedNet> {
    train_scoped(net, cohort, loss, grid, config, TrainScope::All)
}

/// Mini-batch gradient descent from the given starting point. Batches are
/// reshuffled every epoch from a seed-derived stream, gradients are
/// averaged per batch, and a non-finite loss or gradient aborts with
/// [`Error::Diverged`]. With [`TrainScope::OutputOnly`] the hidden layers
/// are left bit-identical to the input network.
pub fn train_scoped(
    net: &SurvivalNetwork,
    cohort: &Cohort,
    loss: LossKind,
    grid: Option<&DiscreteTimeGrid>,
    config: &TrainConfig,
    scope: TrainScope,
) -> Result<TrainedNet> {
    config.validate()?;
    if matches!(loss, LossKind::CoxFull | LossKind::CoxCaseControl) && cohort.n_events() == 0 {
        return Err(Error::NoEvents);
    }
    let grid = match loss {
        LossKind::DiscreteTime => {
            Some(grid.ok_or(Error::MissingGrid)?)
        }
        _ => None,
    };
    // dry-run validation against a trivial objective of the right shape
    {
        let probe = match (loss, grid) {
            (LossKind::DiscreteTime, Some(g)) => {
                Objective::DiscreteTime { grid: g, alpha: config.alpha, sigma: config.sigma }
            }
            _ => Objective::CoxFull,
        };
        check_net(net, cohort, &probe)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.rng_seed, "train", &[]));
    let mut net = net.clone();
    let mut params = net.params();
    let mut velocity = vec![0.0; params.len()];
    let scope_range = match scope {
        TrainScope::All => 0..params.len(),
        TrainScope::OutputOnly => net.output_param_range(),
    };

    let n = cohort.n_subjects();
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let objective_cases; // keeps sampled comparison sets alive
            let objective = match (loss, grid) {
                (LossKind::CoxFull, _) => Objective::CoxFull,
                (LossKind::CoxCaseControl, _) => {
                    let durations: Vec<f64> =
                        batch.iter().map(|&i| cohort.duration(i)).collect();
                    let events: Vec<bool> = batch.iter().map(|&i| cohort.event(i)).collect();
                    objective_cases =
                        sample_case_controls(&durations, &events, config.control_size, &mut rng);
                    Objective::CoxCaseControl { cases: &objective_cases }
                }
                (LossKind::DiscreteTime, Some(g)) => {
                    Objective::DiscreteTime { grid: g, alpha: config.alpha, sigma: config.sigma }
                }
                (LossKind::DiscreteTime, None) => unreachable!(),
            };
            let (batch_loss, grad) = eval_indices(&net, cohort, batch, &objective, true)?;
            let grad = grad.expect("gradient requested");
            if !batch_loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
            epoch_loss += batch_loss;
            let inv = 1.0 / batch.len() as f64;
            for i in scope_range.clone() {
                velocity[i] =
                    config.momentum * velocity[i] - config.learning_rate * grad[i] * inv;
                params[i] += velocity[i];
            }
            net.set_params(&params)?;
        }
        trace.push(epoch_loss / n as f64);
    }
    Ok(TrainedNet { net, loss_trace: trace })
}

/// Breslow cumulative baseline hazard: at every distinct event time,
/// `deaths / sum of e^score over the at-risk set`, accumulated. With all
/// scores zero this reproduces the counting-process hazard estimate
/// exactly.
pub fn breslow_baseline(
    scores: &[f64],
    durations: &[f64],
    events: &[bool],
) -> Result<StepFunction> {
    if durations.is_empty() {
        return Err(Error::EmptyCohort);
    }
    if scores.len() != durations.len() || events.len() != durations.len() {
        return Err(Error::InvalidConfig("scores, durations and events must align".into()));
    }
    if !events.iter().any(|&e| e) {
        return Err(Error::NoEvents);
    }
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| durations[b].total_cmp(&durations[a]));
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut terms: Vec<(f64, f64)> = Vec::new(); // (time, deaths / risk sum)
    let mut cum = 0.0;
    let mut at = 0;
    while at < n {
        let t = durations[order[at]];
        let mut deaths = 0u64;
        while at < n && durations[order[at]] == t {
            let i = order[at];
            cum += (scores[i] - max).exp();
            if events[i] {
                deaths += 1;
            }
            at += 1;
        }
        if deaths > 0 {
            terms.push((t, deaths as f64 * (-max).exp() / cum));
        }
    }
    terms.reverse();
    let mut knots = Vec::with_capacity(terms.len());
    let mut values = Vec::with_capacity(terms.len());
    let mut h = 0.0;
    for (t, inc) in terms {
        h += inc;
        knots.push(t);
        values.push(h);
    }
    StepFunction::new(knots, values, 0.0)
}

/// Per-feature affine normalization learned from a cohort and reused
/// verbatim on any later data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Feature means and sample standard deviations; a degenerate feature
    /// keeps scale 1 so it passes through unchanged.
    pub fn fit(cohort: &Cohort) -> Self {
        let n = cohort.n_subjects();
        let p = cohort.n_features();
        let mut mean = vec![0.0; p];
        for i in 0..n {
            for (m, &x) in mean.iter_mut().zip(cohort.row(i)) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut scale = vec![1.0; p];
        if n > 1 {
            for (j, s) in scale.iter_mut().enumerate() {
                let ss: f64 = (0..n).map(|i| (cohort.value(i, j) - mean[j]).powi(2)).sum();
                let sd = (ss / (n - 1) as f64).sqrt();
                if sd.is_finite() && sd > 0.0 {
                    *s = sd;
                }
            }
        }
        Self { mean, scale }
    }

    pub fn apply_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::FeatureMismatch { expected: self.mean.len(), got: x.len() });
        }
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect())
    }

    pub fn apply(&self, cohort: &Cohort) -> Result<Cohort> {
        if cohort.n_features() != self.mean.len() {
            return Err(Error::FeatureMismatch {
                expected: self.mean.len(),
                got: cohort.n_features(),
            });
        }
        let mut covariates = Vec::with_capacity(cohort.n_subjects() * cohort.n_features());
        for i in 0..cohort.n_subjects() {
            covariates.extend(self.apply_row(cohort.row(i))?);
        }
        Cohort::new(
            covariates,
            cohort.n_features(),
            cohort.durations().to_vec(),
            cohort.events().to_vec(),
            cohort.feature_names().to_vec(),
        )
    }
}

/// Survival curve for a (already standardized) covariate row. The risk
/// head needs a `baseline` cumulative hazard, the discrete head its time
/// `grid`; curve values are clamped at 0 from below.
pub fn predict_survival(
    net: &SurvivalNetwork,
    x: &[f64],
    baseline: Option<&StepFunction>,
    grid: Option<&DiscreteTimeGrid>,
) -> Result<StepFunction> {
    match net.head() {
        Head::Risk => {
            let baseline = baseline.ok_or(Error::MissingBaseline)?;
            let r = net.score(x)?.exp();
            baseline.map_values(|h| (-h * r).exp())
        }
        Head::Discrete => {
            let grid = grid.ok_or(Error::MissingGrid)?;
            if grid.n_bins() != net.output_dim() {
                return Err(Error::InvalidConfig(format!(
                    "network has {} outputs but the grid has {} bins",
                    net.output_dim(),
                    grid.n_bins()
                )));
            }
            let y = net.forward(x)?;
            let mut values = Vec::with_capacity(y.len());
            let mut acc = 0.0;
            for p in y {
                acc += p;
                values.push((1.0 - acc).max(0.0));
            }
            StepFunction::new(grid.cuts().to_vec(), values, 1.0)
        }
    }
}
