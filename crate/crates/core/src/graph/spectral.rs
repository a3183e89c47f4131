use serde::{Deserialize, Serialize};

use super::{Graph, LaplacianKind};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const SYMMETRY_TOL: f64 = 1e-10;
const SIGN_TOL: f64 = 1e-12;

/// Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric
/// matrix. Column `l` of `vectors` is `u_l`; row `α` is the node position
/// `u(α)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralBasis {
    eigenvalues: Vec<f64>,
    vectors: Matrix,
    laplacian_kind: Option<LaplacianKind>,
}

impl SpectralBasis {
    /// Eigenbasis of the graph's Laplacian of the given kind.
    pub fn of_graph(g: &Graph, kind: LaplacianKind) -> Result<Self> {
        let mut basis = eigendecompose(&g.laplacian(kind))?;
        basis.laplacian_kind = Some(kind);
        Ok(basis)
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn laplacian_kind(&self) -> Option<LaplacianKind> {
        self.laplacian_kind
    }

    /// `u(α)`, the row of `U` at node `α`.
    pub fn row_of(&self, alpha: usize) -> Result<&[f64]> {
        if alpha >= self.n() {
            return Err(Error::OutOfRange {
                index: alpha,
                len: self.n(),
            });
        }
        Ok(self.vectors.row(alpha))
    }

    /// `U Λ Uᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let mut scaled = self.vectors.clone();
        for i in 0..scaled.rows() {
            for (v, lam) in scaled.row_mut(i).iter_mut().zip(&self.eigenvalues) {
                *v *= lam;
            }
        }
        scaled.matmul_tr(&self.vectors).expect("square factors always conform")
    }

    /// Max entry of `|UᵀU - I|`.
    pub fn orthogonality_error(&self) -> f64 {
        let gram = self
            .vectors
            .tr_matmul(&self.vectors)
            .expect("square factors always conform");
        gram.max_abs_diff(&Matrix::identity(self.n()))
    }

    /// Max entry of `|Δ u_l - λ_l u_l|` over all eigenpairs.
    pub fn residual(&self, delta: &Matrix) -> Result<f64> {
        let du = delta.matmul(&self.vectors)?;
        let mut worst = 0.0_f64;
        for i in 0..du.rows() {
            for l in 0..du.cols() {
                let r = du[(i, l)] - self.eigenvalues[l] * self.vectors[(i, l)];
                worst = worst.max(r.abs());
            }
        }
        Ok(worst)
    }
}

/// Symmetric eigendecomposition with ascending eigenvalues and the sign of
/// each eigenvector fixed so its first entry with `|x| > 1e-12` is positive.
pub fn eigendecompose(m: &Matrix) -> Result<SpectralBasis> {
    let asym = m.asymmetry().ok_or(Error::Shape {
        op: "eigendecompose",
        left: m.shape(),
        right: (m.cols(), m.rows()),
    })?;
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("eigendecompose input"));
    }
    let n = m.rows();
    let eig = m.to_nalgebra().symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut eigenvalues = Vec::with_capacity(n);
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues.push(eig.eigenvalues[src]);
        let col = eig.eigenvectors.column(src);
        let sign = col.iter().find(|v| v.abs() > SIGN_TOL).map_or(1.0, |v| v.signum());
        for i in 0..n {
            vectors[(i, dst)] = sign * col[i];
        }
    }
    Ok(SpectralBasis {
        eigenvalues,
        vectors,
        laplacian_kind: None,
    })
}
