use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numcore::Tensor;
use crate::rng;
use crate::{Error, Result};

/// Exact 1-D optimal transport cost between two equal-size, equal-weight
/// samples: `(1/n) * sum |sorted(a)_i - sorted(b)_i|`.
pub fn emd_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Empty("emd_1d sample"));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    Ok(sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

/// Draws `n` rows with replacement.
pub fn resample_rows(m: &Tensor, n: usize, seed: u64) -> Tensor {
    let mut r = rng::seeded(seed);
    let idx: Vec<usize> = (0..n).map(|_| r.gen_range(0..m.rows())).collect();
    m.select_rows(&idx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEm {
    pub mean: f64,
    pub per_feature: Vec<f64>,
}

fn equalize(real: &Tensor, synth: &Tensor, seed: u64) -> Result<Tensor> {
    if real.cols() != synth.cols() {
        return Err(Error::dim("synthetic feature count", real.cols(), synth.cols()));
    }
    Ok(if synth.rows() == real.rows() {
        synth.clone()
    } else {
        resample_rows(synth, real.rows(), seed)
    })
}

/// Mean over features of the 1-D EM distance. The synthetic sample is
/// resampled with replacement to the real row count when they differ.
pub fn mean_feature_em(real: &Tensor, synth: &Tensor, seed: u64) -> Result<FeatureEm> {
    let synth = equalize(real, synth, seed)?;
    let per_feature = (0..real.cols())
        .map(|j| emd_1d(&real.column(j), &synth.column(j)))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureEm {
        mean: per_feature.iter().sum::<f64>() / per_feature.len() as f64,
        per_feature,
    })
}

/// Sliced Wasserstein-1: mean 1-D EM over random unit projections.
pub fn sliced_wasserstein(real: &Tensor, synth: &Tensor, projections: usize, seed: u64) -> Result<f64> {
    if projections == 0 {
        return Err(Error::arg("need at least one projection"));
    }
    let synth = equalize(real, synth, seed)?;
    let mut r = rng::seeded(rng::derive_seed(seed, 1));
    let d = real.cols();
    let mut total = 0.0;
    for _ in 0..projections {
        let mut dir: Vec<f64> = (0..d).map(|_| rng::standard_normal(&mut r)).collect();
        let norm = crate::math::sqrt(dir.iter().map(|v| v * v).sum());
        for v in &mut dir {
            *v /= norm;
        }
        let project = |m: &Tensor| -> Vec<f64> {
            (0..m.rows())
                .map(|i| m.row(i).iter().zip(&dir).map(|(a, b)| a * b).sum())
                .collect()
        };
        total += emd_1d(&project(real), &project(&synth))?;
    }
    Ok(total / projections as f64)
}
