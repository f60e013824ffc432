use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Response family of the regression model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Linear,
    Logistic,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Family::Linear => write!(f, "linear"),
            Family::Logistic => write!(f, "logistic"),
        }
    }
}

/// A response vector plus a feature matrix partitioned into modalities.
///
/// Columns are grouped by modality: the first `modality_bounds[0]` columns
/// belong to modality 1, the next `modality_bounds[1]` to modality 2, and so
/// on. Feature names are optional and carried through to reports.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: Array1<f64>,
    x: Array2<f64>,
    modality_bounds: Vec<usize>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>, modality_bounds: Vec<usize>) -> Result<Self> {
        let (n, p) = x.dim();
        if n == 0 || p == 0 {
            return Err(Error::invalid("feature matrix must be non-empty"));
        }
        if n < 2 {
            return Err(Error::invalid("need at least two observations"));
        }
        if y.len() != n {
            return Err(Error::invalid(format!(
                "response length {} does not match {} rows",
                y.len(),
                n
            )));
        }
        if modality_bounds.is_empty() {
            return Err(Error::invalid("at least one modality is required"));
        }
        if modality_bounds.iter().any(|&c| c == 0) {
            return Err(Error::invalid("every modality must be non-empty"));
        }
        let total: usize = modality_bounds.iter().sum();
        if total != p {
            return Err(Error::invalid(format!(
                "modality bounds sum to {total} but the matrix has {p} columns"
            )));
        }
        if y.iter().any(|v| !v.is_finite()) || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite values in the data"));
        }
        Ok(Dataset {
            y,
            x,
            modality_bounds,
            feature_names: None,
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(Error::invalid(format!(
                "{} feature names for {} columns",
                names.len(),
                self.p()
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_modalities(&self) -> usize {
        self.modality_bounds.len()
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn modality_bounds(&self) -> &[usize] {
        &self.modality_bounds
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Modality index (0-based) of feature column `j`.
    pub fn modality_of(&self, j: usize) -> usize {
        debug_assert!(j < self.p());
        let mut end = 0;
        for (m, &count) in self.modality_bounds.iter().enumerate() {
            end += count;
            if j < end {
                return m;
            }
        }
        unreachable!("column index {j} out of range")
    }

    /// Per-feature penalty factors expanded from per-modality factors.
    pub fn expand_factors(&self, factors: &[f64]) -> Result<Vec<f64>> {
        if factors.len() != self.n_modalities() {
            return Err(Error::invalid(format!(
                "{} penalty factors for {} modalities",
                factors.len(),
                self.n_modalities()
            )));
        }
        let mut pf = Vec::with_capacity(self.p());
        for (&count, &f) in self.modality_bounds.iter().zip(factors) {
            pf.extend(std::iter::repeat(f).take(count));
        }
        Ok(pf)
    }

    /// Checks the response against the family contract: logistic models need
    /// 0/1 labels with both classes present.
    pub fn check_family(&self, family: Family) -> Result<()> {
        if family == Family::Logistic {
            let mut seen = [false, false];
            for &v in self.y.iter() {
                if v == 0.0 {
                    seen[0] = true;
                } else if v == 1.0 {
                    seen[1] = true;
                } else {
                    return Err(Error::invalid(format!(
                        "logistic family needs responses in {{0, 1}}, found {v}"
                    )));
                }
            }
            if !(seen[0] && seen[1]) {
                return Err(Error::invalid(
                    "logistic family needs both classes in the response",
                ));
            }
        }
        Ok(())
    }

    /// New dataset containing the given rows (in the given order).
    pub fn subset_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::invalid("row subset needs at least two rows"));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n()) {
            return Err(Error::invalid(format!("row index {bad} out of range")));
        }
        let p = self.p();
        let mut x = Array2::zeros((rows.len(), p));
        let mut y = Array1::zeros(rows.len());
        for (dst, &src) in rows.iter().enumerate() {
            x.row_mut(dst).assign(&self.x.row(src));
            y[dst] = self.y[src];
        }
        Ok(Dataset {
            x,
            y,
            modality_bounds: self.modality_bounds.clone(),
            feature_names: self.feature_names.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toy() -> Dataset {
        let x = array![[1.0, 2.0, 0.5], [0.0, 1.0, 1.5], [2.0, 0.0, 2.5], [1.5, 1.0, 3.5]];
        Dataset::new(x, array![0.0, 1.0, 0.0, 1.0], vec![2, 1]).unwrap()
    }

    #[test]
    fn modality_bookkeeping() {
        let ds = toy();
        assert_eq!(ds.n(), 4);
        assert_eq!(ds.p(), 3);
        assert_eq!(ds.modality_of(0), 0);
        assert_eq!(ds.modality_of(1), 0);
        assert_eq!(ds.modality_of(2), 1);
        assert_eq!(ds.expand_factors(&[1.0, 4.0]).unwrap(), vec![1.0, 1.0, 4.0]);
    }

    #[test]
    fn rejects_bad_bounds() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        assert!(Dataset::new(x.clone(), array![0.0, 1.0], vec![3]).is_err());
        assert!(Dataset::new(x.clone(), array![0.0, 1.0], vec![1, 0, 1]).is_err());
        assert!(Dataset::new(x, array![0.0], vec![2]).is_err());
    }

    #[test]
    fn family_checks() {
        let ds = toy();
        assert!(ds.check_family(Family::Logistic).is_ok());
        let x = array![[1.0], [2.0], [3.0]];
        let one_class = Dataset::new(x, array![1.0, 1.0, 1.0], vec![1]).unwrap();
        assert!(one_class.check_family(Family::Logistic).is_err());
        assert!(one_class.check_family(Family::Linear).is_ok());
    }

    #[test]
    fn subset_keeps_structure() {
        let ds = toy();
        let sub = ds.subset_rows(&[2, 0]).unwrap();
        assert_eq!(sub.n(), 2);
        assert_eq!(sub.y()[0], 0.0);
        assert_eq!(sub.x()[[0, 2]], 2.5);
        assert_eq!(sub.modality_bounds(), &[2, 1]);
    }
}
