//! Kernel conditional-independence test.
//!
//! Gaussian RBF kernels with a median-distance bandwidth per variable block,
//! centered Gram matrices, and a gamma approximation to the null matched on
//! its first two moments.
//!
//! * `s = ∅`: statistic `tr(Kx~ Ky~)`, null mean `tr(Kx~) tr(Ky~) / n` and
//!   variance `2 |Kx~|² |Ky~|² / n²`.
//! * `s ≠ ∅`: `Kx` is built on `(x, s)`, then both Gram matrices are
//!   residualized by `R = ε (Kz~ + εI)⁻¹`. The null is a weighted sum of
//!   chi-squares whose weight matrix is the Hadamard product `KxR ∘ KyR`, so
//!   its mean is `Σ KxR_tt KyR_tt` and its variance `2 Σ (KxR_st KyR_st)²`.

use nalgebra::{Cholesky, DMatrix};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Gamma};

use super::{check_query, make_result, CiError, CiTest, CiTestResult, TestKind};
use crate::data::Dataset;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KciConfig {
    /// Kernel ridge used to residualize on the conditioning set.
    pub ridge: f64,
    /// Rows kept after deterministic-stride subsampling.
    pub max_rows: usize,
    /// Rows used for the median-distance bandwidth.
    pub bandwidth_rows: usize,
    pub seed: u64,
}

impl Default for KciConfig {
    fn default() -> Self {
        Self {
            ridge: 1e-3,
            max_rows: 1200,
            bandwidth_rows: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Kci {
    names: Vec<String>,
    /// Standardized columns of the subsampled rows.
    cols: Vec<Vec<f64>>,
    constant: Vec<bool>,
    n: usize,
    bandwidth_rows: Vec<usize>,
    cfg: KciConfig,
}

/// Row indices kept by stride subsampling to at most `max_rows`.
pub(crate) fn stride_rows(n: usize, max_rows: usize) -> Vec<usize> {
    if n <= max_rows {
        return (0..n).collect();
    }
    let step = n.div_ceil(max_rows);
    (0..n).step_by(step).collect()
}

impl Kci {
    pub fn new(data: &Dataset, cfg: KciConfig) -> Self {
        let rows = stride_rows(data.n_samples(), cfg.max_rows.max(1));
        let n = rows.len();
        let mut cols = Vec::with_capacity(data.n_vars());
        let mut constant = Vec::with_capacity(data.n_vars());
        for j in 0..data.n_vars() {
            let raw: Vec<f64> = rows.iter().map(|&i| data.values()[(i, j)]).collect();
            let mean = raw.iter().sum::<f64>() / n as f64;
            let var = raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            constant.push(!(sd > 0.0));
            let sd = if sd > 0.0 { sd } else { 1.0 };
            cols.push(raw.iter().map(|v| (v - mean) / sd).collect());
        }
        let bandwidth_rows = if n <= cfg.bandwidth_rows {
            (0..n).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut picked = sample(&mut rng, n, cfg.bandwidth_rows).into_vec();
            picked.sort_unstable();
            picked
        };
        Self {
            names: data.columns().to_vec(),
            cols,
            constant,
            n,
            bandwidth_rows,
            cfg,
        }
    }

    pub fn n_rows_used(&self) -> usize {
        self.n
    }

    /// Block of columns as per-row feature vectors, each column scaled.
    fn block(&self, vars: &[(usize, f64)]) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| vars.iter().map(|&(j, w)| self.cols[j][i] * w).collect())
            .collect()
    }

    fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
    }

    fn gram(&self, vars: &[(usize, f64)]) -> Result<DMatrix<f64>, CiError> {
        let pts = self.block(vars);
        let mut dists = Vec::with_capacity(self.bandwidth_rows.len() * self.bandwidth_rows.len() / 2);
        for (a, &i) in self.bandwidth_rows.iter().enumerate() {
            for &j in &self.bandwidth_rows[a + 1..] {
                dists.push(Self::sq_dist(&pts[i], &pts[j]).sqrt());
            }
        }
        let median = if dists.is_empty() {
            0.0
        } else {
            let mid = (dists.len() - 1) / 2;
            *dists.select_nth_unstable_by(mid, f64::total_cmp).1
        };
        if !(median > 0.0) {
            return Err(CiError::DegenerateBandwidth(
                vars.iter().map(|&(j, _)| self.names[j].clone()).collect(),
            ));
        }
        let scale = 1.0 / (2.0 * median * median);
        let n = self.n;
        let mut k = DMatrix::from_element(n, n, 1.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = (-Self::sq_dist(&pts[i], &pts[j]) * scale).exp();
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        Ok(k)
    }
}

/// `H K H` with `H = I - 11ᵀ/n`.
fn center(k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = k.nrows();
    let row_means: Vec<f64> = (0..n).map(|i| k.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    // K is symmetric so column means equal row means
    DMatrix::from_fn(n, n, |i, j| k[(i, j)] - row_means[i] - row_means[j] + grand)
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn gamma_sf(stat: f64, mean: f64, var: f64) -> f64 {
    if !(mean > 0.0) || !(var > 0.0) {
        return 1.0;
    }
    let shape = mean * mean / var;
    let rate = mean / var;
    match Gamma::new(shape, rate) {
        Ok(g) if stat > 0.0 => g.sf(stat),
        Ok(_) => 1.0,
        Err(_) => 1.0,
    }
}

impl CiTest for Kci {
    fn kind(&self) -> TestKind {
        TestKind::Kci
    }

    fn variables(&self) -> &[String] {
        &self.names
    }

    fn test(&self, x: usize, y: usize, cond: &[usize]) -> Result<CiTestResult, CiError> {
        let s = check_query(self.names.len(), x, y, cond)?;
        if self.n < 20 {
            return Err(CiError::TooFewSamples { have: self.n, needed: 19 });
        }
        for &v in [x, y].iter().chain(s.iter()) {
            if self.constant[v] {
                return Err(CiError::ConstantColumn(self.names[v].clone()));
            }
        }
        // order-normalize so that swapping x and y gives identical results
        let (a, b) = if x < y { (x, y) } else { (y, x) };
        let n = self.n as f64;

        let (stat, p) = if s.is_empty() {
            let kx = center(&self.gram(&[(a, 1.0)])?);
            let ky = center(&self.gram(&[(b, 1.0)])?);
            let stat = kx.component_mul(&ky).sum();
            let mean = kx.trace() * ky.trace() / n;
            let var = 2.0 * kx.norm_squared() * ky.norm_squared() / (n * n);
            (stat, gamma_sf(stat, mean, var))
        } else {
            let mut xs = vec![(a, 1.0)];
            xs.extend(s.iter().map(|&j| (j, 0.5)));
            let kx = center(&self.gram(&xs)?);
            let ky = center(&self.gram(&[(b, 1.0)])?);
            let zs: Vec<(usize, f64)> = s.iter().map(|&j| (j, 1.0)).collect();
            let kz = center(&self.gram(&zs)?);

            let eps = self.cfg.ridge;
            let mut reg = kz;
            for i in 0..self.n {
                reg[(i, i)] += eps;
            }
            let chol = Cholesky::new(reg).ok_or_else(|| {
                CiError::Singular(s.iter().map(|&j| self.names[j].clone()).collect())
            })?;
            let r = chol.inverse() * eps;
            let mut kxr = &r * kx * &r;
            let mut kyr = &r * ky * &r;
            symmetrize(&mut kxr);
            symmetrize(&mut kyr);
            let prod = kxr.component_mul(&kyr);
            let stat = prod.sum();
            let mean = prod.trace();
            let var = 2.0 * prod.norm_squared();
            (stat, gamma_sf(stat, mean, var))
        };
        Ok(make_result(&self.names, x, y, &s, stat, p, TestKind::Kci))
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

    fn wiggle(n: usize, k: u64) -> Vec<f64> {
        (0..n)
            .map(|i| (((i as u64 * 2654435761 + k * 97) % 1000) as f64) / 1000.0)
            .collect()
    }

    #[test]
    fn stride_caps_rows() {
        assert_eq!(stride_rows(10, 20).len(), 10);
        let r = stride_rows(2500, 1200);
        assert!(r.len() <= 1200);
        assert_eq!(r[1] - r[0], 3);
    }

    #[test]
    fn identical_columns_reject() {
        let x = wiggle(100, 1);
        let t = Kci::new(&dataset(&[x.clone(), x]), KciConfig::default());
        assert!(t.test(0, 1, &[]).unwrap().p_value < 1e-6);
    }

    #[test]
    fn constant_and_degenerate() {
        let t = Kci::new(&dataset(&[wiggle(30, 1), vec![3.0; 30]]), KciConfig::default());
        assert!(matches!(t.test(0, 1, &[]), Err(CiError::ConstantColumn(_))));
        // two-valued column with most mass on one value: median distance zero
        let mut spiky = vec![0.0; 30];
        spiky[0] = 1.0;
        let t = Kci::new(&dataset(&[wiggle(30, 1), spiky]), KciConfig::default());
        assert!(matches!(t.test(0, 1, &[]), Err(CiError::DegenerateBandwidth(_))));
    }

    #[test]
    fn needs_twenty_rows() {
        let t = Kci::new(&dataset(&[wiggle(10, 1), wiggle(10, 2)]), KciConfig::default());
        assert!(matches!(t.test(0, 1, &[]), Err(CiError::TooFewSamples { .. })));
    }

    #[test]
    fn conditional_runs_and_is_symmetric() {
        let z = wiggle(60, 3);
        let x: Vec<f64> = z.iter().zip(wiggle(60, 4)).map(|(a, b)| a + 0.3 * b).collect();
        let y: Vec<f64> = z.iter().zip(wiggle(60, 5)).map(|(a, b)| a - 0.3 * b).collect();
        let t = Kci::new(&dataset(&[x, y, z]), KciConfig::default());
        let r1 = t.test(0, 1, &[2]).unwrap();
        let r2 = t.test(1, 0, &[2]).unwrap();
        assert_eq!(r1.statistic.to_bits(), r2.statistic.to_bits());
        assert!((0.0..=1.0).contains(&r1.p_value));
    }
}
