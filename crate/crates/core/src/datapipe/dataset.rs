use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::numcore::Tensor;
use crate::{Error, Result};

/// Row-major table of real features with one designated sensitive column.
///
/// `bounds` always holds the per-feature `(min, max)` of the *raw* data, so a
/// normalized dataset can still be mapped back to the original scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Tensor,
    feature_names: Vec<String>,
    bounds: Vec<(f64, f64)>,
    sensitive_index: usize,
    normalized: bool,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, rows: Tensor, sensitive_index: usize) -> Result<Self> {
        if rows.shape().len() != 2 {
            return Err(Error::arg("dataset rows must be a matrix"));
        }
        if rows.rows() < 2 {
            return Err(Error::arg(format!("dataset needs at least 2 rows, got {}", rows.rows())));
        }
        if feature_names.len() != rows.cols() {
            return Err(Error::dim("feature names", rows.cols(), feature_names.len()));
        }
        if sensitive_index >= rows.cols() {
            return Err(Error::arg(format!(
                "sensitive index {sensitive_index} out of range for {} features",
                rows.cols()
            )));
        }
        if !rows.is_finite() {
            return Err(Error::NonFinite(String::from("dataset rows")));
        }
        let bounds = (0..rows.cols())
            .map(|j| {
                (0..rows.rows()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
                    let v = rows.row(i)[j];
                    (lo.min(v), hi.max(v))
                })
            })
            .collect();
        Ok(Dataset {
            rows,
            feature_names,
            bounds,
            sensitive_index,
            normalized: false,
        })
    }

    /// Like [`Dataset::new`] but resolves the sensitive column by header name.
    pub fn with_sensitive_name(feature_names: Vec<String>, rows: Tensor, sensitive: &str) -> Result<Self> {
        let idx = feature_names
            .iter()
            .position(|n| n == sensitive)
            .ok_or_else(|| Error::arg(format!("unknown sensitive column '{sensitive}'")))?;
        Self::new(feature_names, rows, idx)
    }

    /// Derived dataset over a subset of rows; keeps names, bounds and scale.
    pub(crate) fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            rows: self.rows.select_rows(idx),
            feature_names: self.feature_names.clone(),
            bounds: self.bounds.clone(),
            sensitive_index: self.sensitive_index,
            normalized: self.normalized,
        }
    }

    /// Replaces the rows of an already-normalized dataset, keeping metadata.
    pub fn with_normalized_rows(&self, rows: Tensor) -> Result<Dataset> {
        if rows.cols() != self.n_features() {
            return Err(Error::dim("replacement rows", self.n_features(), rows.cols()));
        }
        Ok(Dataset {
            rows,
            feature_names: self.feature_names.clone(),
            bounds: self.bounds.clone(),
            sensitive_index: self.sensitive_index,
            normalized: true,
        })
    }

    /// Rebuilds a dataset from stored metadata (checkpoints carry raw bounds).
    pub fn from_parts(
        feature_names: Vec<String>,
        rows: Tensor,
        bounds: Vec<(f64, f64)>,
        sensitive_index: usize,
        normalized: bool,
    ) -> Result<Self> {
        if feature_names.len() != rows.cols() || bounds.len() != rows.cols() {
            return Err(Error::dim("dataset metadata", rows.cols(), bounds.len()));
        }
        if sensitive_index >= rows.cols() {
            return Err(Error::arg("sensitive index out of range"));
        }
        Ok(Dataset {
            rows,
            feature_names,
            bounds,
            sensitive_index,
            normalized,
        })
    }

    pub fn matrix(&self) -> &Tensor {
        &self.rows
    }

    pub fn n_samples(&self) -> usize {
        self.rows.rows()
    }

    pub fn n_features(&self) -> usize {
        self.rows.cols()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn sensitive_index(&self) -> usize {
        self.sensitive_index
    }

    pub fn sensitive_name(&self) -> &str {
        &self.feature_names[self.sensitive_index]
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn constant_features(&self) -> Vec<usize> {
        self.bounds
            .iter()
            .enumerate()
            .filter(|(_, (lo, hi))| hi <= lo)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.column(j)
    }

    pub fn sensitive_column(&self) -> Vec<f64> {
        self.rows.column(self.sensitive_index)
    }

    /// Min-max scales every feature into `[0, 1]` using the recorded raw
    /// bounds. Constant features become 0.5 (and are logged). Normalizing an
    /// already-normalized dataset returns it unchanged.
    pub fn normalize(&self) -> Dataset {
        if self.normalized {
            return self.clone();
        }
        for j in self.constant_features() {
            log::warn!(
                "feature '{}' is constant; normalized to 0.5",
                self.feature_names[j]
            );
        }
        Dataset {
            rows: self.scale_rows(&self.rows),
            feature_names: self.feature_names.clone(),
            bounds: self.bounds.clone(),
            sensitive_index: self.sensitive_index,
            normalized: true,
        }
    }

    fn scale_rows(&self, m: &Tensor) -> Tensor {
        let mut rows = m.clone();
        for i in 0..rows.rows() {
            for (v, &(lo, hi)) in rows.row_mut(i).iter_mut().zip(&self.bounds) {
                *v = if hi > lo { (*v - lo) / (hi - lo) } else { 0.5 };
            }
        }
        rows
    }

    /// Scales a raw matrix with this dataset's columns using this dataset's
    /// raw bounds. Values outside the bounds land outside `[0, 1]`.
    pub fn normalize_matrix(&self, m: &Tensor) -> Result<Tensor> {
        if m.cols() != self.n_features() {
            return Err(Error::dim("normalize", self.n_features(), m.cols()));
        }
        Ok(self.scale_rows(m))
    }

    /// Maps a `[0, 1]`-scaled matrix with this dataset's columns back to the
    /// raw bounds. Constant features map to their single raw value.
    pub fn denormalize_matrix(&self, m: &Tensor) -> Result<Tensor> {
        if m.cols() != self.n_features() {
            return Err(Error::dim("denormalize", self.n_features(), m.cols()));
        }
        let mut out = m.clone();
        for i in 0..out.rows() {
            let r = out.row_mut(i);
            for (v, &(lo, hi)) in r.iter_mut().zip(&self.bounds) {
                *v = if hi > lo { lo + *v * (hi - lo) } else { lo };
            }
        }
        Ok(out)
    }

    pub fn denormalize(&self) -> Result<Dataset> {
        if !self.normalized {
            return Ok(self.clone());
        }
        let rows = self.denormalize_matrix(&self.rows)?;
        Ok(Dataset {
            rows,
            feature_names: self.feature_names.clone(),
            bounds: self.bounds.clone(),
            sensitive_index: self.sensitive_index,
            normalized: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn min_max_and_constant() {
        let rows = Tensor::from_rows(&[vec![0.0, 7.0], vec![5.0, 7.0], vec![10.0, 7.0]]).unwrap();
        let d = Dataset::new(names(2), rows, 1).unwrap();
        assert_eq!(d.constant_features(), vec![1]);
        let n = d.normalize();
        assert_eq!(n.column(0), vec![0.0, 0.5, 1.0]);
        assert_eq!(n.column(1), vec![0.5, 0.5, 0.5]);
        assert_eq!(n.denormalize().unwrap().matrix(), d.matrix());
    }

    #[test]
    fn sensitive_lookup() {
        let rows = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let n = vec!["height".to_string(), "age".to_string()];
        let d = Dataset::with_sensitive_name(n.clone(), rows.clone(), "age").unwrap();
        assert_eq!(d.sensitive_index(), 1);
        assert!(Dataset::with_sensitive_name(n, rows, "weight").is_err());
    }

    #[test]
    fn rejects_single_row() {
        let rows = Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(Dataset::new(names(2), rows, 0).is_err());
    }

    proptest! {
        #[test]
        fn normalize_round_trip_and_idempotent(
            vals in proptest::collection::vec(-1e3f64..1e3, 12..60)
        ) {
            let n = vals.len() / 3;
            let rows = Tensor::matrix(n, 3, vals[..n * 3].to_vec()).unwrap();
            let d = Dataset::new(names(3), rows, 2).unwrap();
            let norm = d.normalize();
            prop_assert!(norm.matrix().data().iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert_eq!(norm.normalize(), norm.clone());
            let back = norm.denormalize().unwrap();
            for (a, b) in back.matrix().data().iter().zip(d.matrix().data()) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }
}
