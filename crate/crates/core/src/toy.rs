//! Desk-scale synthetic datasets used as fixtures and demo inputs.
//!
//! * `blobs3` - three tight Gaussian clusters (sigma 0.01) whose centers are
//!   at least 0.5 apart, a clustering fixture.
//! * `copycol` - a sensitive column that copies one feature plus Gaussian
//!   noise (sigma 0.05); the other features load on the copied feature with
//!   graded strength, a re-identification fixture.
//! * `heartlike` - 303 rows of 14 correlated columns shaped like the UCI
//!   heart-disease table, with `age` as the sensitive attribute.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::numcore::Tensor;
use crate::rng::{self, ChaCha8Rng};
use crate::{math, Error, Result};

pub const BLOBS_FEATURES: usize = 10;
pub const BLOBS_SIGMA: f64 = 0.01;
pub const BLOBS_MIN_SEPARATION: f64 = 0.5;
const BLOB_LEVELS: [f64; 3] = [0.2, 0.5, 0.8];

pub const COPYCOL_FEATURES: usize = 14;
/// Column whose value the sensitive attribute copies.
pub const COPYCOL_SOURCE: usize = 3;
pub const COPYCOL_NOISE: f64 = 0.05;
const COPYCOL_SCALE: f64 = 0.15;
/// Loadings of the non-source features on the copied factor.
const COPYCOL_LOADINGS: [f64; 13] = [
    0.85, 0.75, 0.65, 1.0, 0.55, 0.45, 0.35, 0.30, 0.25, 0.20, 0.10, 0.05, 0.0,
];

pub const HEART_ROWS: usize = 303;
pub const HEART_COLUMNS: [&str; 14] = [
    "age", "sex", "cp", "trestbps", "chol", "fbs", "restecg", "thalach", "exang", "oldpeak",
    "slope", "ca", "thal", "target",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyKind {
    Blobs3,
    CopyCol,
    HeartLike,
}

impl ToyKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "blobs3" => Ok(ToyKind::Blobs3),
            "copycol" => Ok(ToyKind::CopyCol),
            "heartlike" => Ok(ToyKind::HeartLike),
            other => Err(Error::arg(format!(
                "unknown toy dataset '{other}' (expected blobs3, copycol or heartlike)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ToyKind::Blobs3 => "blobs3",
            ToyKind::CopyCol => "copycol",
            ToyKind::HeartLike => "heartlike",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyData {
    pub names: Vec<String>,
    pub rows: Tensor,
    /// Suggested sensitive column.
    pub sensitive: String,
    /// Generating cluster per row, when the kind has one.
    pub labels: Option<Vec<usize>>,
}

/// `n` is ignored for `heartlike`, which always has 303 rows.
pub fn make(kind: ToyKind, n: usize, seed: u64) -> Result<ToyData> {
    match kind {
        ToyKind::Blobs3 => blobs3(n, seed),
        ToyKind::CopyCol => copycol(n, seed),
        ToyKind::HeartLike => Ok(heartlike(seed)),
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    math::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

pub fn blobs3(n: usize, seed: u64) -> Result<ToyData> {
    if n < 3 {
        return Err(Error::arg("blobs3 needs at least 3 rows"));
    }
    let mut r = rng::seeded(seed);
    let d = BLOBS_FEATURES;
    // Each coordinate of the three centers is a shuffle of BLOB_LEVELS, so
    // every feature spans the same range and min-max scaling keeps the blobs
    // isotropic. Centers end up at least 0.3 * sqrt(d) apart.
    let mut centers = vec![vec![0.0; d]; 3];
    for j in 0..d {
        let mut levels = BLOB_LEVELS;
        for i in (1..3).rev() {
            levels.swap(i, r.gen_range(0..=i));
        }
        for (c, &v) in centers.iter_mut().zip(&levels) {
            c[j] = v;
        }
    }
    debug_assert!((0..3).all(|a| (a + 1..3).all(|b| dist(&centers[a], &centers[b]) >= BLOBS_MIN_SEPARATION)));
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % 3;
        for j in 0..d {
            data.push(centers[c][j] + BLOBS_SIGMA * rng::standard_normal(&mut r));
        }
        labels.push(c);
    }
    let names: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
    Ok(ToyData {
        sensitive: names[d - 1].clone(),
        names,
        rows: Tensor::matrix(n, d, data)?,
        labels: Some(labels),
    })
}

pub fn copycol(n: usize, seed: u64) -> Result<ToyData> {
    if n < 2 {
        return Err(Error::arg("copycol needs at least 2 rows"));
    }
    let mut r = rng::seeded(seed);
    let d = COPYCOL_FEATURES;
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let z = rng::standard_normal(&mut r);
        let mut source = 0.0;
        for (j, &rho) in COPYCOL_LOADINGS.iter().enumerate() {
            let e = rng::standard_normal(&mut r);
            let v = 0.5 + COPYCOL_SCALE * (rho * z + math::sqrt(1.0 - rho * rho) * e);
            if j == COPYCOL_SOURCE {
                source = v;
            }
            data.push(v);
        }
        data.push(source + COPYCOL_NOISE * rng::standard_normal(&mut r));
    }
    let mut names: Vec<String> = (0..d - 1).map(|j| format!("f{j}")).collect();
    names.push("sensitive".to_string());
    Ok(ToyData {
        names,
        rows: Tensor::matrix(n, d, data)?,
        sensitive: "sensitive".to_string(),
        labels: None,
    })
}

fn bernoulli(r: &mut ChaCha8Rng, p: f64) -> f64 {
    if r.gen::<f64>() < p {
        1.0
    } else {
        0.0
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + math::exp(-x))
}

fn round_to(x: f64, step: f64) -> f64 {
    libm::round(x / step) * step
}

pub fn heartlike(seed: u64) -> ToyData {
    let mut r = rng::seeded(seed);
    let mut rows = Vec::with_capacity(HEART_ROWS);
    for _ in 0..HEART_ROWS {
        let g = |r: &mut ChaCha8Rng| rng::standard_normal(r);
        let age = libm::round((54.0 + 9.0 * g(&mut r)).clamp(29.0, 77.0));
        let a = (age - 54.0) / 9.0;
        let health = 0.5 * a + 0.87 * g(&mut r);
        let sex = bernoulli(&mut r, 0.68);
        let cp = libm::round((1.0 - 0.8 * health + 0.9 * g(&mut r)).clamp(0.0, 3.0));
        let trestbps = libm::round((131.0 + 8.0 * a + 15.0 * g(&mut r)).clamp(94.0, 200.0));
        let chol = libm::round((246.0 + 10.0 * a + 45.0 * g(&mut r)).clamp(126.0, 564.0));
        let fbs = bernoulli(&mut r, 0.15 + 0.05 * a.clamp(-1.0, 1.0));
        let restecg = libm::round((0.5 + 0.2 * a + 0.5 * g(&mut r)).clamp(0.0, 2.0));
        let thalach = libm::round((150.0 - 9.0 * a - 10.0 * health + 17.0 * g(&mut r)).clamp(71.0, 202.0));
        let exang = bernoulli(&mut r, sigmoid(-0.8 + 1.2 * health));
        let oldpeak = round_to((1.0 + 0.7 * health + 0.8 * g(&mut r)).clamp(0.0, 6.2), 0.1);
        let slope = libm::round((1.4 - 0.4 * health + 0.5 * g(&mut r)).clamp(0.0, 2.0));
        let ca = libm::round((0.7 + 0.4 * a + 0.5 * health + 0.8 * g(&mut r)).clamp(0.0, 3.0));
        let thal = libm::round((2.3 + 0.4 * health + 0.5 * g(&mut r)).clamp(1.0, 3.0));
        let target = if health + 0.3 * g(&mut r) < 0.0 { 1.0 } else { 0.0 };
        rows.push(vec![
            age, sex, cp, trestbps, chol, fbs, restecg, thalach, exang, oldpeak, slope, ca, thal,
            target,
        ]);
    }
    ToyData {
        names: HEART_COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows: Tensor::from_rows(&rows).expect("fixed width rows"),
        sensitive: "age".to_string(),
        labels: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        let h = heartlike(1);
        assert_eq!(h.rows.shape(), &[303, 14]);
        assert_eq!(h.names[0], "age");
        let c = copycol(50, 1).unwrap();
        assert_eq!(c.rows.shape(), &[50, 14]);
        let b = blobs3(30, 1).unwrap();
        assert_eq!(b.rows.shape(), &[30, BLOBS_FEATURES]);
        assert!(ToyKind::parse("nope").is_err());
        assert_eq!(ToyKind::parse("copycol").unwrap(), ToyKind::CopyCol);
    }

    #[test]
    fn deterministic() {
        assert_eq!(copycol(20, 4).unwrap(), copycol(20, 4).unwrap());
        assert_ne!(copycol(20, 4).unwrap().rows, copycol(20, 5).unwrap().rows);
    }
}
