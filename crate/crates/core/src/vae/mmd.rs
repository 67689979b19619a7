use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MmdEstimator {
    /// Means over all ordered pairs including self-pairs. Always >= 0.
    #[default]
    Biased,
    /// Within-sample means exclude self-pairs.
    Unbiased,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmdConfig {
    /// Kernel bandwidth tau^2.
    pub bandwidth: f64,
    /// Prior draws per minibatch; `None` means one per batch element.
    pub prior_samples: Option<usize>,
    /// Weight of the MMD term in the loss.
    pub lambda: f64,
    pub estimator: MmdEstimator,
}

impl Default for MmdConfig {
    fn default() -> Self {
        Self::for_latent_dim(8)
    }
}

impl MmdConfig {
    /// Bandwidth K/2, unit weight.
    pub fn for_latent_dim(k: usize) -> Self {
        Self {
            bandwidth: k as f64 / 2.0,
            prior_samples: None,
            lambda: 1.0,
            estimator: MmdEstimator::Biased,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::invalid(format!("kernel bandwidth must be > 0, got {}", self.bandwidth)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("MMD weight must be >= 0, got {}", self.lambda)));
        }
        if self.prior_samples == Some(0) {
            return Err(Error::invalid("prior sample count must be positive"));
        }
        Ok(())
    }
}

/// exp(-|x - y|^2 / (2 tau2)).
pub fn gaussian_kernel(x: &[f64], y: &[f64], tau2: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::shape("gaussian_kernel", x.len(), y.len()));
    }
    if !(tau2 > 0.0) {
        return Err(Error::invalid(format!("kernel bandwidth must be > 0, got {tau2}")));
    }
    Ok(kernel(x, y, tau2))
}

#[inline]
fn kernel(x: &[f64], y: &[f64], tau2: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2 / (2.0 * tau2)).exp()
}

fn check_sets(q: &[f64], p: &[f64], dim: usize, cfg: &MmdConfig) -> Result<(usize, usize)> {
    cfg.validate()?;
    if dim == 0 || q.len() % dim != 0 || p.len() % dim != 0 {
        return Err(Error::shape("mmd sample sets", format!("multiples of {dim}"), format!("{} and {}", q.len(), p.len())));
    }
    let (n, m) = (q.len() / dim, p.len() / dim);
    if n == 0 || m == 0 {
        return Err(Error::invalid("mmd needs non-empty sample sets"));
    }
    if cfg.estimator == MmdEstimator::Unbiased && (n < 2 || m < 2) {
        return Err(Error::invalid("the unbiased mmd estimator needs at least two samples per set"));
    }
    Ok((n, m))
}

/// Mean kernel value over pairs within one set, and the gradient of that
/// mean w.r.t. each sample when requested.
fn within(s: &[f64], dim: usize, tau2: f64, unbiased: bool, grad: Option<&mut [f64]>, scale: f64) -> f64 {
    let n = s.len() / dim;
    let pairs = if unbiased { (n * (n - 1)) as f64 } else { (n * n) as f64 };
    let diag = if unbiased { 0.0 } else { n as f64 };
    let mut off = 0.0;
    let mut grad = grad;
    for i in 0..n {
        let xi = &s[i * dim..(i + 1) * dim];
        for j in (i + 1)..n {
            let xj = &s[j * dim..(j + 1) * dim];
            let k = kernel(xi, xj, tau2);
            off += k;
            if let Some(g) = grad.as_deref_mut() {
                // both ordered pairs (i, j) and (j, i)
                let c = scale * 2.0 * k / (tau2 * pairs);
                for d in 0..dim {
                    let diff = xi[d] - xj[d];
                    g[i * dim + d] -= c * diff;
                    g[j * dim + d] += c * diff;
                }
            }
        }
    }
    (diag + 2.0 * off) / pairs
}

/// Kernel two-sample discrepancy between row-major sample sets `q` and `p`
/// of `dim`-vectors.
pub fn mmd(q: &[f64], p: &[f64], dim: usize, cfg: &MmdConfig) -> Result<f64> {
    mmd_impl(q, p, dim, cfg, None)
}

/// MMD and its gradient w.r.t. the samples in `q`.
pub fn mmd_with_grad(q: &[f64], p: &[f64], dim: usize, cfg: &MmdConfig) -> Result<(f64, Vec<f64>)> {
    let mut g = vec![0.0; q.len()];
    let v = mmd_impl(q, p, dim, cfg, Some(&mut g))?;
    Ok((v, g))
}

fn mmd_impl(q: &[f64], p: &[f64], dim: usize, cfg: &MmdConfig, mut grad: Option<&mut [f64]>) -> Result<f64> {
    let (n, m) = check_sets(q, p, dim, cfg)?;
    let tau2 = cfg.bandwidth;
    let unbiased = cfg.estimator == MmdEstimator::Unbiased;
    let kqq = within(q, dim, tau2, unbiased, grad.as_deref_mut(), 1.0);
    let kpp = within(p, dim, tau2, unbiased, None, 1.0);
    // With equal set sizes the cross sum is accumulated in the same
    // diagonal-plus-pairs pattern as the within-set sums, which makes
    // mmd(S, S) exactly zero.
    let c = 2.0 / (tau2 * (n * m) as f64);
    let term = |i: usize, j: usize, grad: &mut Option<&mut [f64]>| -> f64 {
        let xi = &q[i * dim..(i + 1) * dim];
        let yj = &p[j * dim..(j + 1) * dim];
        let k = kernel(xi, yj, tau2);
        if let Some(g) = grad.as_deref_mut() {
            // d/dx_i of -2 k(x_i, y_j) / (n m)
            for d in 0..dim {
                g[i * dim + d] += c * k * (xi[d] - yj[d]);
            }
        }
        k
    };
    let (mut diag, mut off) = (0.0, 0.0);
    if n == m {
        for i in 0..n {
            diag += term(i, i, &mut grad);
            for j in (i + 1)..n {
                off += term(i, j, &mut grad) + term(j, i, &mut grad);
            }
        }
    } else {
        for i in 0..n {
            for j in 0..m {
                off += term(i, j, &mut grad);
            }
        }
    }
    let cross = diag + off;
    let v = kqq + kpp - 2.0 * cross / (n * m) as f64;
    if !v.is_finite() {
        return Err(Error::NonFinite("mmd".into()));
    }
    Ok(v)
}
