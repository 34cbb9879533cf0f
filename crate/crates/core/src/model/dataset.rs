use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TbfaError};

/// Provenance tag of an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObsLabel {
    Clean,
    Outlier,
}

/// N real matrices of shared shape d_c × d_r.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixDataset {
    d_c: usize,
    d_r: usize,
    observations: Vec<DMatrix<f64>>,
    labels: Option<Vec<ObsLabel>>,
}

impl MatrixDataset {
    pub fn new(observations: Vec<DMatrix<f64>>) -> Result<Self> {
        let (d_c, d_r) = observations.first().map(|x| x.shape()).ok_or(TbfaError::EmptyData)?;
        Self::with_shape(d_c, d_r, observations)
    }

    /// Like [`MatrixDataset::new`] but accepts an empty set with a known shape.
    pub fn with_shape(d_c: usize, d_r: usize, observations: Vec<DMatrix<f64>>) -> Result<Self> {
        if d_c == 0 || d_r == 0 {
            return Err(TbfaError::Dimension("observation dimensions must be positive".into()));
        }
        for (n, x) in observations.iter().enumerate() {
            if x.shape() != (d_c, d_r) {
                return Err(TbfaError::Dimension(format!(
                    "observation {n} is {}x{}, expected {d_c}x{d_r}",
                    x.nrows(),
                    x.ncols()
                )));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(TbfaError::Domain(format!("observation {n} has a non-finite entry")));
            }
        }
        Ok(Self { d_c, d_r, observations, labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<ObsLabel>) -> Result<Self> {
        if labels.len() != self.observations.len() {
            return Err(TbfaError::Dimension(format!(
                "{} labels for {} observations",
                labels.len(),
                self.observations.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    pub fn d_c(&self) -> usize {
        self.d_c
    }

    pub fn d_r(&self) -> usize {
        self.d_r
    }

    pub fn observations(&self) -> &[DMatrix<f64>] {
        &self.observations
    }

    pub fn get(&self, n: usize) -> &DMatrix<f64> {
        &self.observations[n]
    }

    pub fn labels(&self) -> Option<&[ObsLabel]> {
        self.labels.as_deref()
    }

    /// Labels, treating an unlabeled set as entirely clean.
    pub fn labels_or_clean(&self) -> Vec<ObsLabel> {
        self.labels.clone().unwrap_or_else(|| vec![ObsLabel::Clean; self.n()])
    }

    /// Appends observations with the given label.
    pub fn extend(&mut self, extra: Vec<DMatrix<f64>>, label: ObsLabel) -> Result<()> {
        let add = MatrixDataset::with_shape(self.d_c, self.d_r, extra)?;
        let mut labels = self.labels_or_clean();
        labels.extend(std::iter::repeat_n(label, add.n()));
        self.observations.extend(add.observations);
        self.labels = Some(labels);
        Ok(())
    }

    /// Each observation transposed (rows and columns swap roles).
    pub fn transposed(&self) -> MatrixDataset {
        MatrixDataset {
            d_c: self.d_r,
            d_r: self.d_c,
            observations: self.observations.iter().map(|x| x.transpose()).collect(),
            labels: self.labels.clone(),
        }
    }

    /// Each observation vectorized column-major into a D×1 matrix.
    pub fn vectorized(&self) -> MatrixDataset {
        let d = self.d_c * self.d_r;
        MatrixDataset {
            d_c: d,
            d_r: 1,
            observations: self
                .observations
                .iter()
                .map(|x| DMatrix::from_column_slice(d, 1, x.as_slice()))
                .collect(),
            labels: self.labels.clone(),
        }
    }

    /// The observations side by side: d_c × (N·d_r).
    pub fn stack(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.d_c, self.n() * self.d_r);
        for (n, x) in self.observations.iter().enumerate() {
            out.columns_mut(n * self.d_r, self.d_r).copy_from(x);
        }
        out
    }

    pub fn subset(&self, idx: &[usize]) -> MatrixDataset {
        MatrixDataset {
            d_c: self.d_c,
            d_r: self.d_r,
            observations: idx.iter().map(|&i| self.observations[i].clone()).collect(),
            labels: self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_and_nonfinite() {
        let a = DMatrix::zeros(2, 3);
        let b = DMatrix::zeros(3, 2);
        assert!(MatrixDataset::new(vec![a.clone(), b]).is_err());
        let mut c = a.clone();
        c[(0, 0)] = f64::NAN;
        assert!(MatrixDataset::new(vec![a, c]).is_err());
        assert_eq!(MatrixDataset::new(vec![]), Err(TbfaError::EmptyData));
    }

    #[test]
    fn stack_and_vectorize() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let ds = MatrixDataset::new(vec![x.clone(), x * 2.0]).unwrap();
        let s = ds.stack();
        assert_eq!(s.shape(), (2, 4));
        assert_eq!(s[(1, 3)], 8.0);
        let v = ds.vectorized();
        assert_eq!(v.get(0).as_slice(), &[1.0, 3.0, 2.0, 4.0]);
    }
}
