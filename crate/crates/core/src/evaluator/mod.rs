//! Realism, utility and privacy metrics for a synthetic table measured
//! against the real one, plus the per-feature statistics behind the
//! correlation/discrepancy analysis.

mod emd;
mod metrics;
mod predictors;
mod report;

pub use emd::{emd_1d, mean_feature_em, resample_rows, sliced_wasserstein, FeatureEm};
pub use metrics::{
    constant_predictor_mae, inverse_model_mae, mae, mean_abs_deviation, pearson_corr, reid_mae,
    select_columns, spearman_corr, ReidScore, UtilityScore,
};
pub use predictors::{
    fit_predictors, DecisionTreeRegressor, FittedModels, KnnRegressor, LinearEpsRegressor,
    ModelKind, Regressor, MIN_TRAIN_ROWS,
};
pub use report::{build_report, inverse_em, EmMode, EvalConfig, EvaluationReport, FeatureStats};
