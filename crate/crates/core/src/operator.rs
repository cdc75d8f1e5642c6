//! Dense operators and density matrices.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, RMat, C64};
use nalgebra::DVector;

#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    mat: CMat,
    hermitian_hint: bool,
}

impl Operator {
    pub fn new(mat: CMat, hermitian_hint: bool) -> Self {
        assert_eq!(mat.nrows(), mat.ncols(), "operators are square");
        Operator {
            mat,
            hermitian_hint,
        }
    }

    pub fn from_real(m: &RMat, hermitian_hint: bool) -> Self {
        Self::new(linalg::to_complex(m), hermitian_hint)
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(CMat::zeros(dim, dim), true)
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(CMat::identity(dim, dim), true)
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn hermitian_hint(&self) -> bool {
        self.hermitian_hint
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(&self.mat)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Hilbert-Schmidt norm `√tr(A†A)`.
    pub fn hs_norm(&self) -> f64 {
        linalg::hs_norm(&self.mat)
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.mat)
    }

    pub fn is_real(&self) -> bool {
        self.mat.iter().all(|v| v.im == 0.0)
    }

    pub fn real_part(&self) -> RMat {
        self.mat.map(|v| v.re)
    }

    pub fn imag_part(&self) -> RMat {
        self.mat.map(|v| v.im)
    }

    /// Ascending eigenpairs; requires a Hermitian operator.
    pub fn eigh(&self) -> (Vec<f64>, CMat) {
        linalg::eigh(&self.mat)
    }

    pub fn expectation(&self, rho: &DensityMatrix) -> f64 {
        (&self.mat * rho.matrix()).trace().re
    }
}

/// Unit-trace positive semidefinite Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: CMat,
}

impl Default for DensityMatrix {
    /// The 1x1 state `[1]`, a placeholder for records not yet filled.
    fn default() -> Self {
        DensityMatrix { mat: CMat::identity(1, 1) }
    }
}

impl DensityMatrix {
    /// Validates Hermiticity (1e-10), unit trace (1e-8) and PSD (-1e-8).
    pub fn new(mat: CMat) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::InvalidState("matrix not square".into()));
        }
        let herm = linalg::hermiticity_defect(&mat);
        if herm > 1e-10 {
            return Err(Error::InvalidState(format!("not Hermitian (defect {herm:e})")));
        }
        let tr = linalg::trace(&mat);
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-8 {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let rho = DensityMatrix { mat };
        let min = rho.min_eigenvalue();
        if min < -1e-8 {
            return Err(Error::InvalidState(format!("smallest eigenvalue {min:e}")));
        }
        Ok(rho)
    }

    /// Skips validation; used for integrator output that is monitored separately.
    pub fn new_unchecked(mat: CMat) -> Self {
        DensityMatrix { mat }
    }

    pub fn pure(psi: &DVector<C64>) -> Self {
        let norm = psi.norm();
        let v = psi / C64::new(norm, 0.0);
        DensityMatrix {
            mat: linalg::ket_bra(&v, &v),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix {
            mat: CMat::identity(dim, dim) / C64::new(dim as f64, 0.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.mat).re
    }

    pub fn purity(&self) -> f64 {
        // tr ρ² = Σ |ρ_ij|² for Hermitian ρ
        self.mat.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigh(&self.mat).0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn von_neumann_entropy(&self) -> f64 {
        self.eigenvalues()
            .into_iter()
            .filter(|&p| p > 1e-300)
            .map(|p| -p * p.ln())
            .sum()
    }
}
