//! Source-to-target adaptation protocols for the parametric models. A
//! model is pretrained on the source cohort; `adapt` then either keeps it
//! as-is, re-fits only the output layer, continues training everything,
//! or fits from scratch on the target. Standardization and the discrete
//! time grid always come from whichever cohort the weights were first
//! fitted on.

use serde::{Deserialize, Serialize};

use crate::cohort::Cohort;
use crate::error::{Error, Result};
use crate::nn::loss::DiscreteTimeGrid;
use crate::nn::train::{
    breslow_baseline, predict_survival, train_scoped, LossKind, Standardizer, TrainConfig,
    TrainScope,
};
use crate::nn::{Activation, SurvivalNetwork};
use crate::seed::derive_seed;
use crate::step::StepFunction;
use crate::CurveModel;

/// How a pretrained model meets the target cohort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransferMode {
    /// Apply the source model unchanged.
    SourceOnly,
    /// Re-fit the output layer on the target; hidden layers stay frozen.
    FineTune,
    /// Continue training every parameter on the target.
    Retrain,
    /// Ignore the source weights entirely and fit fresh on the target.
    TargetOnly,
}

impl TransferMode {
    pub fn label(&self) -> &'static str {
        match self {
            TransferMode::SourceOnly => "source-only",
            TransferMode::FineTune => "fine-tune",
            TransferMode::Retrain => "retrain",
            TransferMode::TargetOnly => "target-only",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "source-only" | "source" => Ok(TransferMode::SourceOnly),
            "fine-tune" | "finetune" => Ok(TransferMode::FineTune),
            "retrain" => Ok(TransferMode::Retrain),
            "target-only" | "target" => Ok(TransferMode::TargetOnly),
            other => Err(Error::InvalidConfig(format!("unknown transfer mode '{other}'"))),
        }
    }
}

/// Architecture of a parametric model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_dims: Vec<usize>,
    pub activation: Activation,
    /// Requested bin count for the discrete-time head; duplicate
    /// quantiles may merge, so the fitted grid decides the true width.
    pub n_bins: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { hidden_dims: vec![32], activation: Activation::Rectifier, n_bins: 10 }
    }
}

/// A transfer mode with the training settings used on the target side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferProtocol {
    pub mode: TransferMode,
    pub train: TrainConfig,
    /// Re-estimate the baseline hazard on the target after adapting
    /// (proportional-hazards heads only).
    pub refit_baseline: bool,
}

/// A trained network bundled with everything prediction needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub loss: LossKind,
    pub net: SurvivalNetwork,
    pub standardizer: Standardizer,
    /// Cumulative baseline hazard (proportional-hazards heads).
    pub baseline: Option<StepFunction>,
    /// Time discretization (discrete-time head).
    pub grid: Option<DiscreteTimeGrid>,
    #[serde(default)]
    pub loss_trace: Vec<f64>,
}

impl FittedModel {
    /// Survival curve for a raw (unstandardized) covariate row.
    pub fn predict_curve(&self, x: &[f64]) -> Result<StepFunction> {
        let z = self.standardizer.apply_row(x)?;
        predict_survival(&self.net, &z, self.baseline.as_ref(), self.grid.as_ref())
    }
}

impl CurveModel for FittedModel {
    fn survival_curve(&self, x: &[f64]) -> Result<StepFunction> {
        self.predict_curve(x)
    }
}

fn fit_cox_baseline(
    net: &SurvivalNetwork,
    standardized: &Cohort,
) -> Result<StepFunction> {
    let scores: Vec<f64> = (0..standardized.n_subjects())
        .map(|i| net.score(standardized.row(i)))
        .collect::<Result<_>>()?;
    breslow_baseline(&scores, standardized.durations(), standardized.events())
}

fn fit_fresh(
    cohort: &Cohort,
    loss: LossKind,
    hidden_dims: &[usize],
    activation: Activation,
    n_bins: usize,
    config: &TrainConfig,
) -> Result<FittedModel> {
    let standardizer = Standardizer::fit(cohort);
    let z = standardizer.apply(cohort)?;
    let grid = match loss {
        LossKind::DiscreteTime => Some(DiscreteTimeGrid::from_quantiles(z.durations(), n_bins)?),
        _ => None,
    };
    let output_dim = grid.as_ref().map_or(1, DiscreteTimeGrid::n_bins);
    let net = SurvivalNetwork::new(
        cohort.n_features(),
        hidden_dims,
        output_dim,
        activation,
        loss.head(),
        derive_seed(config.rng_seed, "net-init", &[]),
    )?;
    let trained = train_scoped(&net, &z, loss, grid.as_ref(), config, TrainScope::All)?;
    let baseline = match loss {
        LossKind::DiscreteTime => None,
        _ => Some(fit_cox_baseline(&trained.net, &z)?),
    };
    Ok(FittedModel {
        loss,
        net: trained.net,
        standardizer,
        baseline,
        grid,
        loss_trace: trained.loss_trace,
    })
}

/// Fit a model on the source cohort from a fresh seeded initialization.
pub fn pretrain(
    source: &Cohort,
    loss: LossKind,
    model: &ModelConfig,
    config: &TrainConfig,
) -> Result<FittedModel> {
    fit_fresh(source, loss, &model.hidden_dims, model.activation, model.n_bins, config)
}

/// Adapt a pretrained model to the target cohort under the protocol's
/// mode. Fine-tuning and retraining reuse the source standardizer and
/// (for the discrete head) the source time grid, so curves stay
/// comparable across modes; target-only refits everything from target
/// data alone.
pub fn adapt(
    pretrained: &FittedModel,
    target: &Cohort,
    protocol: &TransferProtocol,
) -> Result<FittedModel> {
    if target.n_features() != pretrained.net.input_dim() {
        return Err(Error::FeatureMismatch {
            expected: pretrained.net.input_dim(),
            got: target.n_features(),
        });
    }
    match protocol.mode {
        TransferMode::SourceOnly => Ok(pretrained.clone()),
        TransferMode::FineTune | TransferMode::Retrain => {
            let scope = match protocol.mode {
                TransferMode::FineTune => TrainScope::OutputOnly,
                _ => TrainScope::All,
            };
            let z = pretrained.standardizer.apply(target)?;
            let trained = train_scoped(
                &pretrained.net,
                &z,
                pretrained.loss,
                pretrained.grid.as_ref(),
                &protocol.train,
                scope,
            )?;
            let baseline = match pretrained.loss {
                LossKind::DiscreteTime => None,
                _ => {
                    if protocol.refit_baseline {
                        Some(fit_cox_baseline(&trained.net, &z)?)
                    } else {
                        pretrained.baseline.clone()
                    }
                }
            };
            Ok(FittedModel {
                loss: pretrained.loss,
                net: trained.net,
                standardizer: pretrained.standardizer.clone(),
                baseline,
                grid: pretrained.grid.clone(),
                loss_trace: trained.loss_trace,
            })
        }
        TransferMode::TargetOnly => fit_fresh(
            target,
            pretrained.loss,
            &pretrained.net.hidden_dims(),
            pretrained.net.activation(),
            pretrained.grid.as_ref().map_or(2, DiscreteTimeGrid::n_bins),
            &protocol.train,
        ),
    }
}
