use nalgebra::{Cholesky, DMatrix};
use statrs::function::erf::erfc;

use super::{check_query, make_result, CiError, CiTest, CiTestResult, TestKind};
use crate::data::Dataset;

const RIDGE: f64 = 1e-10;
const RHO_LIMIT: f64 = 1.0 - 1e-12;

/// Fisher's z-test on partial correlations, for linear-Gaussian dependence.
///
/// The sample correlation matrix is computed once; each query inverts the
/// submatrix over `{x, y} ∪ s`.
#[derive(Debug, Clone)]
pub struct FisherZ {
    names: Vec<String>,
    n: usize,
    corr: DMatrix<f64>,
    constant: Vec<bool>,
}

impl FisherZ {
    pub fn new(data: &Dataset) -> Self {
        let n = data.n_samples();
        let d = data.n_vars();
        let x = data.values();
        let means: Vec<f64> = (0..d).map(|j| x.column(j).mean()).collect();
        let centered = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - means[j]);
        let cov = centered.tr_mul(&centered);
        let sd: Vec<f64> = (0..d).map(|j| cov[(j, j)].sqrt()).collect();
        let constant: Vec<bool> = sd.iter().map(|&s| s == 0.0).collect();
        let corr = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                1.0
            } else if constant[i] || constant[j] {
                0.0
            } else {
                (cov[(i, j)] / (sd[i] * sd[j])).clamp(-1.0, 1.0)
            }
        });
        Self {
            names: data.columns().to_vec(),
            n,
            corr,
            constant,
        }
    }

    pub fn correlation_matrix(&self) -> &DMatrix<f64> {
        &self.corr
    }

    /// Partial correlation of `x` and `y` given `cond`, unclamped.
    pub fn partial_correlation(&self, x: usize, y: usize, cond: &[usize]) -> Result<f64, CiError> {
        let s = check_query(self.names.len(), x, y, cond)?;
        for &v in [x, y].iter().chain(s.iter()) {
            if self.constant[v] {
                return Err(CiError::ConstantColumn(self.names[v].clone()));
            }
        }
        let (a, b) = if x < y { (x, y) } else { (y, x) };
        let idx: Vec<usize> = [a, b].into_iter().chain(s.iter().copied()).collect();
        partial_correlation(&self.corr, &idx).ok_or_else(|| {
            CiError::Singular(idx.iter().map(|&i| self.names[i].clone()).collect())
        })
    }
}

/// Partial correlation of `idx[0]` and `idx[1]` given `idx[2..]` from a
/// correlation matrix, via the inverse of the submatrix. A ridge of `1e-10`
/// is added only when the plain submatrix is not positive definite; `None`
/// when it still fails.
pub fn partial_correlation(corr: &DMatrix<f64>, idx: &[usize]) -> Option<f64> {
    let k = idx.len();
    let sub = DMatrix::from_fn(k, k, |i, j| corr[(idx[i], idx[j])]);
    let chol = Cholesky::new(sub.clone()).or_else(|| {
        let mut reg = sub;
        for i in 0..k {
            reg[(i, i)] += RIDGE;
        }
        Cholesky::new(reg)
    })?;
    let prec = chol.inverse();
    let rho = -prec[(0, 1)] / (prec[(0, 0)] * prec[(1, 1)]).sqrt();
    rho.is_finite().then_some(rho)
}

impl CiTest for FisherZ {
    fn kind(&self) -> TestKind {
        TestKind::FisherZ
    }

    fn variables(&self) -> &[String] {
        &self.names
    }

    fn test(&self, x: usize, y: usize, cond: &[usize]) -> Result<CiTestResult, CiError> {
        let s = check_query(self.names.len(), x, y, cond)?;
        if self.n <= s.len() + 3 {
            return Err(CiError::TooFewSamples {
                have: self.n,
                needed: s.len() + 3,
            });
        }
        let rho = self.partial_correlation(x, y, &s)?.clamp(-RHO_LIMIT, RHO_LIMIT);
        let z = 0.5 * ((1.0 + rho) / (1.0 - rho)).ln() * ((self.n - s.len() - 3) as f64).sqrt();
        let p = erfc(z.abs() / std::f64::consts::SQRT_2);
        Ok(make_result(&self.names, x, y, &s, z, p, TestKind::FisherZ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(cols: &[Vec<f64>]) -> Dataset {
        let names = (0..cols.len()).map(|i| format!("c{i}")).collect();
        let n = cols[0].len();
        Dataset::new(names, DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])).unwrap()
    }

    #[test]
    fn identical_columns_are_dependent() {
        let x: Vec<f64> = (0..50).map(|i| ((i * 37 % 11) as f64).sin()).collect();
        let t = FisherZ::new(&dataset(&[x.clone(), x]));
        let r = t.test(0, 1, &[]).unwrap();
        assert!(r.p_value < 1e-12, "p = {}", r.p_value);
    }

    #[test]
    fn closed_form_for_uncorrelated_pair() {
        // orthogonal centered columns give rho = 0, z = 0, p = 1
        let a = vec![1.0, -1.0, 1.0, -1.0, 0.0, 0.0];
        let b = vec![1.0, 1.0, -1.0, -1.0, 0.0, 0.0];
        let t = FisherZ::new(&dataset(&[a, b]));
        let r = t.test(0, 1, &[]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_column_is_degenerate() {
        let t = FisherZ::new(&dataset(&[vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![2.0; 5]]));
        assert!(matches!(t.test(0, 1, &[]), Err(CiError::ConstantColumn(_))));
    }

    #[test]
    fn sample_size_precondition() {
        let t = FisherZ::new(&dataset(&[vec![1.0, 2.0, 4.0], vec![0.0, 1.0, 5.0]]));
        assert!(matches!(t.test(0, 1, &[]), Err(CiError::TooFewSamples { .. })));
    }

    #[test]
    fn bad_queries() {
        let t = FisherZ::new(&dataset(&[vec![1.0, 2.0, 4.0, 3.0, 0.0], vec![0.0, 1.0, 5.0, 2.0, 2.0]]));
        assert!(t.test(0, 0, &[]).is_err());
        assert!(t.test(0, 1, &[1]).is_err());
    }
}
