use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::predictors::{fit_xy, ModelKind};
use crate::datapipe::Dataset;
use crate::numcore::Tensor;
use crate::{math, Error, Result};

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("mae input"));
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

/// Mean absolute deviation from the mean.
pub fn mean_abs_deviation(xs: &[f64]) -> f64 {
    let m = math::mean(xs);
    xs.iter().map(|x| (x - m).abs()).sum::<f64>() / xs.len() as f64
}

/// MAE on `test` of the predictor that always answers the mean of `train`.
pub fn constant_predictor_mae(train: &[f64], test: &[f64]) -> f64 {
    let m = math::mean(train);
    test.iter().map(|x| (x - m).abs()).sum::<f64>() / test.len() as f64
}

pub fn select_columns(m: &Tensor, cols: &[usize]) -> Tensor {
    let mut data = Vec::with_capacity(m.rows() * cols.len());
    for i in 0..m.rows() {
        let row = m.row(i);
        data.extend(cols.iter().map(|&j| row[j]));
    }
    Tensor::matrix(m.rows(), cols.len(), data).expect("selected columns form a matrix")
}

/// Population Pearson correlation.
pub fn pearson_corr(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::arg("correlation needs at least 2 points"));
    }
    let (mx, my) = (math::mean(x), math::mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sxy / math::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = alloc::vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (ties take their average rank).
pub fn spearman_corr(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    pearson_corr(&ranks(x), &ranks(y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityScore {
    /// `1 - mean_mae`, clamped to `[0, 1]`.
    pub value: f64,
    pub mean_mae: f64,
    pub per_model: BTreeMap<ModelKind, f64>,
    /// Mean MAE over the three models for each target column index.
    pub per_target: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReidScore {
    pub value: f64,
    pub per_model: BTreeMap<ModelKind, f64>,
}

fn check_pair(real: &Dataset, synth: &Tensor) -> Result<()> {
    if !real.is_normalized() {
        return Err(Error::State("real dataset must be normalized before evaluation".into()));
    }
    if synth.shape().len() != 2 || synth.cols() != real.n_features() {
        return Err(Error::dim("synthetic columns", real.n_features(), synth.cols()));
    }
    Ok(())
}

fn score_models(train_x: &Tensor, train_y: &[f64], test_x: &Tensor, test_y: &[f64]) -> Result<[f64; 3]> {
    let models = fit_xy(train_x, train_y)?;
    let mut out = [0.0; 3];
    for (slot, kind) in out.iter_mut().zip(ModelKind::ALL) {
        *slot = mae(&models.model(kind).predict(test_x), test_y)?;
    }
    Ok(out)
}

/// Train-on-synthetic, test-on-real utility. For each target column (all
/// non-sensitive columns by default) the three predictors learn it from the
/// other non-sensitive columns of `synth` and are scored on `real`.
pub fn inverse_model_mae(real: &Dataset, synth: &Tensor, targets: Option<&[usize]>) -> Result<UtilityScore> {
    check_pair(real, synth)?;
    let s = real.sensitive_index();
    let features: Vec<usize> = (0..real.n_features()).filter(|&j| j != s).collect();
    if features.len() < 2 {
        return Err(Error::arg("utility needs at least two non-sensitive features"));
    }
    let targets: Vec<usize> = match targets {
        Some(t) => {
            if let Some(&bad) = t.iter().find(|j| !features.contains(j)) {
                return Err(Error::arg(alloc::format!("target column {bad} is sensitive or out of range")));
            }
            t.to_vec()
        }
        None => features.clone(),
    };
    if targets.is_empty() {
        return Err(Error::Empty("utility targets"));
    }
    let mut per_model = [0.0; 3];
    let mut per_target = Vec::with_capacity(targets.len());
    for &t in &targets {
        let inputs: Vec<usize> = features.iter().copied().filter(|&j| j != t).collect();
        let m = score_models(
            &select_columns(synth, &inputs),
            &synth.column(t),
            &select_columns(real.matrix(), &inputs),
            &real.column(t),
        )?;
        for (acc, v) in per_model.iter_mut().zip(m) {
            *acc += v / targets.len() as f64;
        }
        per_target.push((t, m.iter().sum::<f64>() / 3.0));
    }
    let mean_mae = per_model.iter().sum::<f64>() / 3.0;
    Ok(UtilityScore {
        value: (1.0 - mean_mae).clamp(0.0, 1.0),
        mean_mae,
        per_model: ModelKind::ALL.into_iter().zip(per_model).collect(),
        per_target,
    })
}

/// Attribute-inference error: predictors trained on `synth` guess the
/// sensitive column of `real` from its other columns. Higher is more private.
pub fn reid_mae(real: &Dataset, synth: &Tensor) -> Result<ReidScore> {
    check_pair(real, synth)?;
    let s = real.sensitive_index();
    if real.n_features() < 2 {
        return Err(Error::arg("re-identification needs at least one non-sensitive feature"));
    }
    let m = score_models(
        &synth.without_column(s),
        &synth.column(s),
        &real.matrix().without_column(s),
        &real.column(s),
    )?;
    Ok(ReidScore {
        value: m.iter().sum::<f64>() / 3.0,
        per_model: ModelKind::ALL.into_iter().zip(m).collect(),
    })
}
