//! Penalized Gaussian BIC over a dataset whose covariances are computed on
//! demand. Only per-column means and variances are stored; a pairwise
//! covariance is one pass over two centered columns.

use thiserror::Error;

use crate::data::Dataset;
use crate::graph::MixedGraph;

/// Relative threshold below which a Cholesky pivot or residual variance is
/// treated as zero.
pub const SINGULARITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum ScoreError {
    #[error("parent covariance matrix is numerically singular")]
    SingularParents,
    #[error("residual variance {0} is not positive")]
    NonPositiveResidual(f64),
    #[error("penalty discount must be positive, got {0}")]
    BadPenalty(f64),
}

/// Centered data plus precomputed means and MLE variances.
#[derive(Debug, Clone)]
pub struct CovarianceSource {
    names: Vec<String>,
    n: usize,
    centered: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl CovarianceSource {
    pub fn new(data: &Dataset) -> Self {
        let n = data.num_samples();
        let p = data.num_vars();
        let mut centered = Vec::with_capacity(n * p);
        let mut means = Vec::with_capacity(p);
        let mut variances = Vec::with_capacity(p);
        for j in 0..p {
            let col = data.column(j);
            let mean = col.iter().sum::<f64>() / n as f64;
            let start = centered.len();
            centered.extend(col.iter().map(|v| v - mean));
            means.push(mean);
            variances.push(dot(&centered[start..], &centered[start..]) / n as f64);
        }
        Self { names: data.names().to_vec(), n, centered, means, variances }
    }

    pub fn num_samples(&self) -> usize {
        self.n
    }

    pub fn num_vars(&self) -> usize {
        self.means.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.means[i]
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.variances[i]
    }

    fn centered(&self, i: usize) -> &[f64] {
        &self.centered[i * self.n..(i + 1) * self.n]
    }

    /// `(1/n) Σ (x_i - mean_i)(x_j - mean_j)`.
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.variances[i];
        }
        // Fixed summation order, so cov(i, j) == cov(j, i) bitwise.
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        dot(self.centered(a), self.centered(b)) / self.n as f64
    }

    /// Residual variance of `y` after least-squares regression on `parents`.
    pub fn residual_variance(&self, y: usize, parents: &[usize]) -> Result<f64, ScoreError> {
        let var_y = self.variances[y];
        let k = parents.len();
        if k == 0 {
            return if var_y > 0.0 { Ok(var_y) } else { Err(ScoreError::NonPositiveResidual(var_y)) };
        }
        let mut sigma = vec![0.0; k * k];
        for (r, &pr) in parents.iter().enumerate() {
            for (c, &pc) in parents.iter().enumerate().take(r + 1) {
                let v = self.covariance(pr, pc);
                sigma[r * k + c] = v;
                sigma[c * k + r] = v;
            }
        }
        let rhs: Vec<f64> = parents.iter().map(|&pr| self.covariance(pr, y)).collect();
        let chol = cholesky(&sigma, k).ok_or(ScoreError::SingularParents)?;
        let z = forward_substitute(&chol, k, &rhs);
        let explained: f64 = z.iter().map(|v| v * v).sum();
        let s = var_y - explained;
        if s <= SINGULARITY_TOL * var_y || s <= 0.0 {
            return Err(ScoreError::NonPositiveResidual(s));
        }
        Ok(s)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Lower-triangular Cholesky factor of a row-major `k x k` SPD matrix.
fn cholesky(a: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; k * k];
    for j in 0..k {
        let mut d = a[j * k + j];
        for m in 0..j {
            d -= l[j * k + m] * l[j * k + m];
        }
        if d.is_nan() || d <= SINGULARITY_TOL * a[j * k + j] || d <= 0.0 {
            return None;
        }
        let d = d.sqrt();
        l[j * k + j] = d;
        for i in j + 1..k {
            let mut s = a[i * k + j];
            for m in 0..j {
                s -= l[i * k + m] * l[j * k + m];
            }
            l[i * k + j] = s / d;
        }
    }
    Some(l)
}

fn forward_substitute(l: &[f64], k: usize, b: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; k];
    for i in 0..k {
        let mut s = b[i];
        for m in 0..i {
            s -= l[i * k + m] * z[m];
        }
        z[i] = s / l[i * k + i];
    }
    z
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreConfig {
    /// Multiplier `c` on the complexity penalty.
    pub penalty_discount: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self { penalty_discount: 2.0 }
    }
}

/// `-n ln s - c (2k + 1) ln n` for a node with `k` parents and residual
/// variance `s`. The constant of the Gaussian log-likelihood is dropped.
#[derive(Debug, Clone, Copy)]
pub struct GaussianBic<'a> {
    src: &'a CovarianceSource,
    penalty_discount: f64,
    n: f64,
    ln_n: f64,
}

impl<'a> GaussianBic<'a> {
    pub fn new(src: &'a CovarianceSource, cfg: ScoreConfig) -> Result<Self, ScoreError> {
        if !cfg.penalty_discount.is_finite() || cfg.penalty_discount <= 0.0 {
            return Err(ScoreError::BadPenalty(cfg.penalty_discount));
        }
        let n = src.num_samples() as f64;
        Ok(Self { src, penalty_discount: cfg.penalty_discount, n, ln_n: n.ln() })
    }

    pub fn source(&self) -> &'a CovarianceSource {
        self.src
    }

    pub fn local_score(&self, y: usize, parents: &[usize]) -> Result<f64, ScoreError> {
        debug_assert!(!parents.contains(&y));
        let s = self.src.residual_variance(y, parents)?;
        let k = (2 * parents.len() + 1) as f64;
        Ok(-self.n * s.ln() - self.penalty_discount * k * self.ln_n)
    }

    /// `local_score(y, parents + x) - local_score(y, parents)`.
    pub fn score_diff(&self, x: usize, y: usize, parents: &[usize]) -> Result<f64, ScoreError> {
        let mut with_x = Vec::with_capacity(parents.len() + 1);
        with_x.extend_from_slice(parents);
        with_x.push(x);
        Ok(self.local_score(y, &with_x)? - self.local_score(y, parents)?)
    }

    /// Sum of local scores of a DAG.
    pub fn dag_score(&self, dag: &MixedGraph) -> Result<f64, ScoreError> {
        let mut total = 0.0;
        for y in 0..dag.num_nodes() {
            let parents: Vec<usize> = dag.parents(y).iter().copied().collect();
            total += self.local_score(y, &parents)?;
        }
        Ok(total)
    }
}
