use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::AdjacencyMatrix;
use crate::error::{Error, Result};

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::invalid(format!("rho must lie in [0, 1), got {rho}")))
    }
}

/// Q(W, rho) = rho (diag(W 1) - W) + (1 - rho) I.
pub fn leroux_precision(w: &AdjacencyMatrix, rho: f64) -> Result<DMatrix<f64>> {
    check_rho(rho)?;
    let m = w.len();
    let mut q = w.laplacian() * rho;
    for i in 0..m {
        q[(i, i)] += 1.0 - rho;
    }
    Ok(q)
}

/// ln det Q(W, rho) from the Laplacian eigenvalues: sum ln(rho l + 1 - rho).
pub fn log_det_precision(eigenvalues: &[f64], rho: f64) -> Result<f64> {
    let mut acc = 0.0;
    for (i, &l) in eigenvalues.iter().enumerate() {
        let d = rho * l + 1.0 - rho;
        if !(d > 0.0) {
            return Err(Error::Numerical(format!(
                "precision eigenvalue {i} is {d} at rho = {rho}"
            )));
        }
        acc += d.ln();
    }
    Ok(acc)
}

/// Eigendecomposition of the Laplacian, computed once per adjacency and
/// reused for every value of rho.
#[derive(Clone, Debug)]
pub struct LerouxSpectrum {
    adjacency: AdjacencyMatrix,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl LerouxSpectrum {
    pub fn new(adjacency: &AdjacencyMatrix) -> Self {
        let eig = SymmetricEigen::new(adjacency.laplacian());
        // Laplacian eigenvalues are >= 0; clip round-off below zero.
        let eigenvalues = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
        Self {
            adjacency: adjacency.clone(),
            eigenvalues,
            eigenvectors: eig.eigenvectors,
        }
    }

    pub fn adjacency(&self) -> &AdjacencyMatrix {
        &self.adjacency
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn log_det(&self, rho: f64) -> Result<f64> {
        log_det_precision(&self.eigenvalues, rho)
    }

    /// v' Q v, evaluated with neighbour lists.
    pub fn quad_form(&self, v: &DVector<f64>, rho: f64) -> f64 {
        let (lap, sq) = self.quad_parts(v, v);
        rho * lap + (1.0 - rho) * sq
    }

    /// (u' L v, u' v) so that u' Q v = rho * first + (1 - rho) * second.
    pub fn quad_parts(&self, u: &DVector<f64>, v: &DVector<f64>) -> (f64, f64) {
        let mut lap = 0.0;
        let mut sq = 0.0;
        for i in 0..u.len() {
            let nb = self.adjacency.neighbours(i);
            let s: f64 = nb.iter().map(|&j| v[j]).sum();
            lap += u[i] * (nb.len() as f64 * v[i] - s);
            sq += u[i] * v[i];
        }
        (lap, sq)
    }

    /// Q v without forming Q.
    pub fn apply(&self, v: &DVector<f64>, rho: f64) -> DVector<f64> {
        DVector::from_fn(v.len(), |i, _| {
            let nb = self.adjacency.neighbours(i);
            let s: f64 = nb.iter().map(|&j| v[j]).sum();
            rho * (nb.len() as f64 * v[i] - s) + (1.0 - rho) * v[i]
        })
    }

    /// A draw from N(0, Q^-1) given standard-normal `z`: U diag(d^-1/2) z.
    pub fn sample_inverse(&self, z: &DVector<f64>, rho: f64) -> DVector<f64> {
        let scaled = DVector::from_fn(z.len(), |k, _| {
            z[k] / (rho * self.eigenvalues[k] + 1.0 - rho).sqrt()
        });
        &self.eigenvectors * scaled
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::car::build_adjacency;
    use crate::field::Mask;

    fn pair() -> AdjacencyMatrix {
        build_adjacency(&Mask::full(1, 2)).unwrap()
    }

    #[test]
    fn rho_zero_is_identity() {
        let w = build_adjacency(&Mask::full(3, 3)).unwrap();
        assert_eq!(leroux_precision(&w, 0.0).unwrap(), DMatrix::identity(9, 9));
        assert_eq!(log_det_precision(LerouxSpectrum::new(&w).eigenvalues(), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn two_node_example() {
        let q = leroux_precision(&pair(), 0.5).unwrap();
        assert_eq!(q, DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0]));
        let ld = log_det_precision(&[0.0, 2.0], 0.5).unwrap();
        assert!((ld - (-0.287682072451781)).abs() < 1e-12, "{ld}");
    }

    #[test]
    fn rows_sum_to_one_minus_rho() {
        let w = build_adjacency(&Mask::visual_field_24_2()).unwrap();
        let q = leroux_precision(&w, 0.73).unwrap();
        for r in q.row_iter() {
            assert!((r.sum() - 0.27).abs() < 1e-12);
        }
    }

    #[test]
    fn rho_out_of_range_rejected() {
        assert!(leroux_precision(&pair(), 1.0).is_err());
        assert!(leroux_precision(&pair(), -0.1).is_err());
        assert!(log_det_precision(&[0.0, -3.0], 0.9).is_err());
    }

    #[test]
    fn helpers_agree_with_dense_q() {
        let w = build_adjacency(&Mask::full(3, 4)).unwrap();
        let spec = LerouxSpectrum::new(&w);
        let rho = 0.6;
        let q = leroux_precision(&w, rho).unwrap();
        let v = DVector::from_fn(12, |i, _| (i as f64 * 0.7).sin());
        let u = DVector::from_fn(12, |i, _| (i as f64 * 1.3).cos());
        assert!((spec.apply(&v, rho) - &q * &v).amax() < 1e-12);
        assert!((spec.quad_form(&v, rho) - v.dot(&(&q * &v))).abs() < 1e-12);
        let (a, b) = spec.quad_parts(&u, &v);
        assert!((rho * a + (1.0 - rho) * b - u.dot(&(&q * &v))).abs() < 1e-12);
        // U diag(d^-1/2) applied to Q-whitened vectors: Q x = U diag(d^1/2) z.
        let x = spec.sample_inverse(&u, rho);
        let back = spec.eigenvectors.transpose() * (&q * &x);
        for k in 0..12 {
            let d = (rho * spec.eigenvalues()[k] + 1.0 - rho).sqrt();
            assert!((back[k] - d * u[k]).abs() < 1e-10);
        }
    }
}
