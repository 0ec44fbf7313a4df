//! Survival analysis with structure transfer between cohorts.
//!
//! The crate has three layers:
//!
//! * estimators over right-censored data: event tables, Nelson-Aalen and
//!   Kaplan-Meier curves, the two-sample log-rank statistic, and
//!   time-dependent concordance ([`cohort`], [`estimators`], [`logrank`],
//!   [`concordance`]);
//! * random survival forests plus structure transfer, which re-fits the
//!   split values of source-grown tree shapes on a small target cohort
//!   ([`forest`], [`tsf`]);
//! * parametric survival networks (proportional-hazards and discrete-time
//!   heads) with pretrain / fine-tune / retrain adaptation ([`nn`]).
//!
//! Everything stochastic is seeded through [`seed::derive_seed`], so fits
//! and experiment results are reproducible for any thread count.

pub mod cohort;
pub mod concordance;
pub mod error;
pub mod estimators;
pub mod forest;
pub mod logrank;
pub mod nn;
pub mod seed;
pub mod serial;
pub mod step;
pub mod tsf;

pub use cohort::Cohort;
pub use concordance::concordance_td;
pub use error::{Error, Result};
pub use estimators::{build_event_table, kaplan_meier, nelson_aalen, surv_from_cumhaz, EventTable};
pub use forest::{best_split, fit_forest, grow_tree, Forest, GrowthConfig, SurvivalTree, TreeNode};
pub use logrank::log_rank_statistic;
pub use nn::loss::{
    cox_nll, coxcc_nll, coxcc_nll_with_controls, deephit_likelihood, deephit_loss,
    deephit_rank, exhaustive_case_controls, sample_case_controls, CaseControls,
    DiscreteTimeGrid,
};
pub use nn::train::{
    breslow_baseline, objective_loss, objective_loss_and_gradient, predict_survival, train,
    train_scoped, LossKind, Objective, Standardizer, TrainConfig, TrainScope, TrainedNet,
};
pub use nn::transfer::{
    adapt, pretrain, FittedModel, ModelConfig, TransferMode, TransferProtocol,
};
pub use nn::{Activation, Head, SurvivalNetwork};
pub use step::StepFunction;
pub use tsf::{
    build_depthwise_distribution, build_structure_distribution, extract_signature,
    fine_tune_tree, fit_dp_forest, fit_transfer_forest, fit_transfer_forest_unlimited,
    sample_prototype, DepthwiseDistribution, StructureDistribution, StructureSignature,
    TransferConfig, TransferForestFit,
};

/// Anything that predicts a survival curve from a covariate vector.
pub trait CurveModel: Send + Sync {
    fn survival_curve(&self, x: &[f64]) -> Result<StepFunction>;
}

impl CurveModel for Forest {
    fn survival_curve(&self, x: &[f64]) -> Result<StepFunction> {
        surv_from_cumhaz(&self.predict_chf(x)?)
    }
}

/// Survival curves for every subject of a cohort.
pub fn cohort_curves(model: &dyn CurveModel, cohort: &Cohort) -> Result<Vec<StepFunction>> {
    (0..cohort.n_subjects()).map(|i| model.survival_curve(cohort.row(i))).collect()
}

/// Time-dependent concordance of a model's curves on a cohort.
pub fn model_concordance(model: &dyn CurveModel, cohort: &Cohort) -> Result<f64> {
    concordance_td(cohort, &cohort_curves(model, cohort)?)
}
