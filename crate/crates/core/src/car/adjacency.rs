use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::{queen_neighbours, Mask};

/// Symmetric binary neighbourhood matrix with zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyMatrix {
    matrix: DMatrix<f64>,
    neighbours: Vec<Vec<usize>>,
}

impl AdjacencyMatrix {
    /// Validates a dense 0/1 matrix.
    pub fn from_dense(matrix: DMatrix<f64>) -> Result<Self> {
        let m = matrix.nrows();
        if m < 2 || matrix.ncols() != m {
            return Err(Error::shape("AdjacencyMatrix", "square with m >= 2", format!("{}x{}", m, matrix.ncols())));
        }
        let mut neighbours = vec![Vec::new(); m];
        for i in 0..m {
            if matrix[(i, i)] != 0.0 {
                return Err(Error::invalid(format!("location {i} neighbours itself")));
            }
            for j in 0..m {
                let v = matrix[(i, j)];
                if v != 0.0 && v != 1.0 {
                    return Err(Error::invalid(format!("non-binary entry at ({i}, {j})")));
                }
                if v != matrix[(j, i)] {
                    return Err(Error::invalid(format!("asymmetric entry at ({i}, {j})")));
                }
                if v == 1.0 {
                    neighbours[i].push(j);
                }
            }
            if neighbours[i].is_empty() {
                return Err(Error::invalid(format!("location {i} has no neighbours")));
            }
        }
        Ok(Self { matrix, neighbours })
    }

    pub fn len(&self) -> usize {
        self.neighbours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbours.is_empty()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn neighbours(&self, i: usize) -> &[usize] {
        &self.neighbours[i]
    }

    pub fn degrees(&self) -> Vec<f64> {
        self.neighbours.iter().map(|n| n.len() as f64).collect()
    }

    /// The graph Laplacian diag(W 1) - W.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = -self.matrix.clone();
        for (i, n) in self.neighbours.iter().enumerate() {
            l[(i, i)] = n.len() as f64;
        }
        l
    }
}

/// Queen (edge or corner) adjacency among the informative cells of `mask`,
/// indexed in canonical mask order.
pub fn build_adjacency(mask: &Mask) -> Result<AdjacencyMatrix> {
    let coords = mask.coordinates();
    let m = coords.len();
    if m < 2 {
        return Err(Error::invalid(format!("mask needs at least 2 informative cells, has {m}")));
    }
    let comps = mask.queen_components();
    if comps.len() > 1 {
        return Err(Error::invalid(format!(
            "mask is disconnected under queen adjacency; components: {comps:?}"
        )));
    }
    let mut index = vec![usize::MAX; mask.rows() * mask.cols()];
    for (k, &(r, c)) in coords.iter().enumerate() {
        index[r * mask.cols() + c] = k;
    }
    let mut w = DMatrix::zeros(m, m);
    for (k, &(r, c)) in coords.iter().enumerate() {
        for (nr, nc) in queen_neighbours(r, c, mask.rows(), mask.cols()) {
            let j = index[nr * mask.cols() + nc];
            if j != usize::MAX {
                w[(k, j)] = 1.0;
            }
        }
    }
    AdjacencyMatrix::from_dense(w)
}
