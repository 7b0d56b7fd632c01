use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::emd::{mean_feature_em, sliced_wasserstein};
use super::metrics::{inverse_model_mae, pearson_corr, reid_mae, spearman_corr};
use super::predictors::ModelKind;
use crate::datapipe::Dataset;
use crate::numcore::Tensor;
use crate::{math, Result};

/// Maps a raw EM distance to `(0, 1]`, with 1 meaning identical.
pub fn inverse_em(raw: f64) -> f64 {
    1.0 / (1.0 + raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmMode {
    /// Mean of exact per-feature 1-D distances.
    PerFeature,
    /// Mean 1-D distance over seeded random unit projections.
    Sliced { projections: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub seed: u64,
    pub em_mode: EmMode,
    pub targets: Option<Vec<usize>>,
    pub config_hash: Option<String>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            seed: 0,
            em_mode: EmMode::PerFeature,
            targets: None,
            config_hash: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub name: String,
    pub real_mean: f64,
    pub real_std: f64,
    pub synth_mean: f64,
    pub synth_std: f64,
}

impl FeatureStats {
    /// `|Δmean| + |Δstd|` between real and synthetic.
    pub fn discrepancy(&self) -> f64 {
        (self.real_mean - self.synth_mean).abs() + (self.real_std - self.synth_std).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub raw_em: f64,
    pub inverse_em: f64,
    pub inverse_model_mae: f64,
    pub reid_mae: f64,
    pub em_mode: EmMode,
    pub per_model_maes: BTreeMap<ModelKind, f64>,
    pub reid_per_model_maes: BTreeMap<ModelKind, f64>,
    pub per_feature_em: Vec<f64>,
    pub feature_names: Vec<String>,
    pub sensitive_index: usize,
    /// Pearson correlation of each feature with the sensitive column in the
    /// real data; 0 where undefined (see `corr_undefined`).
    pub per_feature_corr: Vec<f64>,
    pub per_feature_corr_synth: Vec<f64>,
    pub corr_undefined: Vec<bool>,
    pub per_feature_stats: Vec<FeatureStats>,
    /// Spearman correlation, over non-sensitive features, between
    /// `|per_feature_corr|` and the mean/std discrepancy.
    pub discrepancy_rank_corr: Option<f64>,
    pub seeds: BTreeMap<String, u64>,
    pub config_hash: Option<String>,
}

impl EvaluationReport {
    /// The three radar axes, each in `[0, 1]`.
    pub fn radar_rows(&self) -> [(&'static str, f64); 3] {
        [
            ("inverse_em", self.inverse_em),
            ("inverse_model_mae", self.inverse_model_mae),
            ("reid_mae", self.reid_mae.min(1.0)),
        ]
    }
}

fn corr_or_zero(x: &[f64], y: &[f64]) -> (f64, bool) {
    match pearson_corr(x, y) {
        Ok(r) => (r, false),
        Err(_) => (0.0, true),
    }
}

/// `real` must be normalized; `synth` must be on the same normalized scale.
pub fn build_report(real: &Dataset, synth: &Tensor, cfg: &EvalConfig) -> Result<EvaluationReport> {
    let em = mean_feature_em(real.matrix(), synth, cfg.seed)?;
    let raw_em = match cfg.em_mode {
        EmMode::PerFeature => em.mean,
        EmMode::Sliced { projections } => sliced_wasserstein(real.matrix(), synth, projections, cfg.seed)?,
    };
    let utility = inverse_model_mae(real, synth, cfg.targets.as_deref())?;
    let reid = reid_mae(real, synth)?;

    let s = real.sensitive_index();
    let real_sens = real.column(s);
    let synth_sens = synth.column(s);
    let mut per_feature_corr = Vec::new();
    let mut per_feature_corr_synth = Vec::new();
    let mut corr_undefined = Vec::new();
    let mut per_feature_stats = Vec::new();
    for (j, name) in real.feature_names().iter().enumerate() {
        let rc = real.column(j);
        let sc = synth.column(j);
        let (r, undefined) = corr_or_zero(&rc, &real_sens);
        per_feature_corr.push(r);
        corr_undefined.push(undefined);
        per_feature_corr_synth.push(corr_or_zero(&sc, &synth_sens).0);
        per_feature_stats.push(FeatureStats {
            name: name.clone(),
            real_mean: math::mean(&rc),
            real_std: math::std_dev(&rc),
            synth_mean: math::mean(&sc),
            synth_std: math::std_dev(&sc),
        });
    }
    let (abs_corr, disc): (Vec<f64>, Vec<f64>) = (0..real.n_features())
        .filter(|&j| j != s)
        .map(|j| (per_feature_corr[j].abs(), per_feature_stats[j].discrepancy()))
        .unzip();
    let discrepancy_rank_corr = spearman_corr(&abs_corr, &disc).ok();

    let mut seeds = BTreeMap::new();
    seeds.insert(String::from("evaluation"), cfg.seed);
    Ok(EvaluationReport {
        raw_em,
        inverse_em: inverse_em(raw_em),
        inverse_model_mae: utility.value,
        reid_mae: reid.value,
        em_mode: cfg.em_mode,
        per_model_maes: utility.per_model,
        reid_per_model_maes: reid.per_model,
        per_feature_em: em.per_feature,
        feature_names: real.feature_names().to_vec(),
        sensitive_index: s,
        per_feature_corr,
        per_feature_corr_synth,
        corr_undefined,
        per_feature_stats,
        discrepancy_rank_corr,
        seeds,
        config_hash: cfg.config_hash.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn inverse_em_fixed_points() {
        assert_eq!(inverse_em(0.0), 1.0);
        assert_eq!(inverse_em(1.0), 0.5);
    }

    proptest! {
        #[test]
        fn inverse_em_range(raw in 0.0f64..1e6) {
            let v = inverse_em(raw);
            prop_assert!(v > 0.0 && v <= 1.0);
            prop_assert_eq!(v == 1.0, raw == 0.0);
        }
    }
}
