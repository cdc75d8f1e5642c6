//! Finite spin-j stand-in for a bosonic mode via a truncated
//! Holstein-Primakoff map.
//!
//! States are indexed by the occupation number `n = j - m`, so index 0 is
//! the top state `|j, j⟩`. The ladder operator `J+` lowers `n`, which makes
//! `a ≈ M⁻¹ J+` an annihilator in this ordering.

use crate::error::{Error, Result};
use crate::linalg::{eigh_real, imag_to_complex, to_complex, CMat, RMat};
use crate::operator::Operator;

#[derive(Clone, Debug)]
pub struct SpinBasis {
    dim: usize,
    kappa: usize,
    hbar: f64,
    j_plus: Operator,
    j_minus: Operator,
    j_z: Operator,
    m_kappa: Vec<f64>,
    x_op: Operator,
    p_op: Operator,
    number_op: Operator,
    x_real: RMat,
    p_imag: RMat,
    x_eigvals: Vec<f64>,
    x_eigvecs: RMat,
}

impl SpinBasis {
    /// Builds the basis with `ħ = 1`.
    pub fn new(dim: usize, kappa: usize) -> Result<Self> {
        Self::with_hbar(dim, kappa, 1.0)
    }

    pub fn with_hbar(dim: usize, kappa: usize, hbar: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(format!(
                "spin basis needs dim >= 2, got {dim}"
            )));
        }
        if !(hbar > 0.0) || !hbar.is_finite() {
            return Err(Error::InvalidDimension(format!("hbar must be positive, got {hbar}")));
        }
        let j = (dim as f64 - 1.0) / 2.0;

        let mut jp = RMat::zeros(dim, dim);
        let mut jz = RMat::zeros(dim, dim);
        for n in 0..dim {
            let m = j - n as f64;
            jz[(n, n)] = hbar * m;
            if n >= 1 {
                jp[(n - 1, n)] = hbar * (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt();
            }
        }
        let jm = jp.transpose();

        let m_kappa = taylor_sqrt_diagonal(dim, kappa, hbar);
        if let Some((n, v)) = m_kappa
            .iter()
            .enumerate()
            .find(|(_, v)| v.abs() < 1e-10)
        {
            return Err(Error::NonInvertibleM {
                index: n,
                value: *v,
            });
        }

        // a ≈ M⁻¹ J+ ; only the superdiagonal is populated.
        let mut a = RMat::zeros(dim, dim);
        for n in 1..dim {
            a[(n - 1, n)] = jp[(n - 1, n)] / m_kappa[n - 1];
        }
        let adag = a.transpose();
        let s2 = std::f64::consts::SQRT_2;
        let x_real = (&adag + &a) / s2;
        // p' = i (a† - a)/√2 = i R
        let p_imag = (&adag - &a) / s2;

        let (x_eigvals, mut x_eigvecs) = eigh_real(&x_real);
        // Sign convention: positive weight on n = 0, matching the oscillator
        // wavefunctions ψ_n(x) evaluated on the eigenvalue nodes.
        for k in 0..dim {
            if x_eigvecs[(0, k)] < 0.0 {
                let mut col = x_eigvecs.column_mut(k);
                col *= -1.0;
            }
        }

        let number = RMat::from_diagonal(&nalgebra::DVector::from_fn(dim, |n, _| n as f64));
        Ok(SpinBasis {
            dim,
            kappa,
            hbar,
            j_plus: Operator::from_real(&jp, false),
            j_minus: Operator::from_real(&jm, false),
            j_z: Operator::from_real(&jz, true),
            m_kappa,
            x_op: Operator::from_real(&x_real, true),
            p_op: Operator::new(imag_to_complex(&p_imag), true),
            number_op: Operator::from_real(&number, true),
            x_real,
            p_imag,
            x_eigvals,
            x_eigvecs,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    /// Spin quantum number `j = (N-1)/2`.
    pub fn j(&self) -> f64 {
        (self.dim as f64 - 1.0) / 2.0
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn j_plus(&self) -> &Operator {
        &self.j_plus
    }

    pub fn j_minus(&self) -> &Operator {
        &self.j_minus
    }

    pub fn j_z(&self) -> &Operator {
        &self.j_z
    }

    pub fn j_x(&self) -> Operator {
        Operator::new((self.j_plus.matrix() + self.j_minus.matrix()).scale(0.5), true)
    }

    pub fn j_y(&self) -> Operator {
        let m = (self.j_plus.matrix() - self.j_minus.matrix()) / crate::linalg::C64::new(0.0, 2.0);
        Operator::new(m, true)
    }

    /// Diagonal of `M_κ` in the number basis.
    pub fn m_kappa_diagonal(&self) -> &[f64] {
        &self.m_kappa
    }

    pub fn m_kappa(&self) -> Operator {
        let d = nalgebra::DVector::from_column_slice(&self.m_kappa);
        Operator::from_real(&RMat::from_diagonal(&d), true)
    }

    pub fn m_kappa_inv(&self) -> Operator {
        let d = nalgebra::DVector::from_iterator(self.dim, self.m_kappa.iter().map(|v| 1.0 / v));
        Operator::from_real(&RMat::from_diagonal(&d), true)
    }

    /// Truncated annihilator `M_κ⁻¹ J+`.
    pub fn annihilator(&self) -> Operator {
        let a = (&self.x_real - &self.p_imag) / std::f64::consts::SQRT_2;
        Operator::from_real(&a, false)
    }

    pub fn creator(&self) -> Operator {
        let a = (&self.x_real + &self.p_imag) / std::f64::consts::SQRT_2;
        Operator::from_real(&a, false)
    }

    /// Dimensionless position quadrature `x'`.
    pub fn x_op(&self) -> &Operator {
        &self.x_op
    }

    /// Dimensionless momentum quadrature `p'`.
    pub fn p_op(&self) -> &Operator {
        &self.p_op
    }

    pub fn number_op(&self) -> &Operator {
        &self.number_op
    }

    /// `x'` as a real symmetric matrix.
    pub fn x_real(&self) -> &RMat {
        &self.x_real
    }

    /// Real antisymmetric `R` with `p' = i R`.
    pub fn p_imag(&self) -> &RMat {
        &self.p_imag
    }

    /// Ascending spectrum of `x'`.
    pub fn x_eigenvalues(&self) -> &[f64] {
        &self.x_eigvals
    }

    /// Eigenvectors of `x'` (columns), sign-fixed to positive `n = 0` weight.
    pub fn x_eigenvectors(&self) -> &RMat {
        &self.x_eigvecs
    }

    /// Spectral function of `x'`, `Σ_k f(x_k) |x_k⟩⟨x_k|`.
    pub fn x_function(&self, f: impl Fn(f64) -> f64) -> RMat {
        let mut scaled = self.x_eigvecs.clone();
        for (k, &xk) in self.x_eigvals.iter().enumerate() {
            let mut col = scaled.column_mut(k);
            col *= f(xk);
        }
        &scaled * self.x_eigvecs.transpose()
    }

    /// Parity `(-1)^n`; `x'` and `p'` are odd under it.
    pub fn parity_diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|n| if n % 2 == 0 { 1.0 } else { -1.0 }).collect()
    }

    pub fn x_complex(&self) -> CMat {
        to_complex(&self.x_real)
    }
}

/// `Σ_{q=0}^{κ} c_q n^q` for the expansion of `ħ√(2j - n)` around `n = 0`,
/// evaluated on each occupation number.
fn taylor_sqrt_diagonal(dim: usize, kappa: usize, hbar: f64) -> Vec<f64> {
    let two_j = dim as f64 - 1.0;
    let coeffs = sqrt_series_coefficients(kappa);
    (0..dim)
        .map(|n| {
            let u = n as f64 / two_j;
            // Horner in u = n / 2j
            let s = coeffs.iter().rev().fold(0.0, |acc, c| acc * (-u) + c);
            hbar * two_j.sqrt() * s
        })
        .collect()
}

/// Binomial coefficients `C(1/2, q)` for `q = 0..=kappa`, so that
/// `√(1 - u) = Σ_q C(1/2, q) (-u)^q`.
pub fn sqrt_series_coefficients(kappa: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(kappa + 1);
    let mut c = 1.0;
    out.push(c);
    for q in 1..=kappa {
        c *= (0.5 - (q as f64 - 1.0)) / q as f64;
        out.push(c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator, hermiticity_defect, C64};

    #[test]
    fn rejects_tiny_dimension() {
        assert!(matches!(SpinBasis::new(1, 3), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn first_order_m_for_spin_half() {
        let b = SpinBasis::new(2, 1).unwrap();
        let m = b.m_kappa_diagonal();
        assert!((m[0] - 1.0).abs() < 1e-15);
        assert!((m[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zeroth_order_m_is_constant() {
        let b = SpinBasis::new(2, 0).unwrap();
        assert_eq!(b.m_kappa_diagonal(), &[1.0, 1.0]);
    }

    #[test]
    fn series_coefficients_by_symbolic_differentiation() {
        // d^q/du^q √(1-u) at 0 divided by q!: 1, -1/2, -1/8, -1/16, -5/128
        let c = sqrt_series_coefficients(4);
        let expect = [1.0, -0.5, -0.125, -0.0625, -5.0 / 128.0];
        // alternating sign absorbed by (-u)^q: C(1/2,q)(-1)^q equals expect[q]
        for (q, (a, b)) in c.iter().zip(expect).enumerate() {
            let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
            assert!((a * sign - b).abs() < 1e-15, "q={q}");
        }
    }

    #[test]
    fn working_size_quadratures() {
        let b = SpinBasis::new(60, 60).unwrap();
        assert!((b.j() - 29.5).abs() < 1e-15);
        assert!(hermiticity_defect(b.x_op().matrix()) < 1e-12);
        assert!(hermiticity_defect(b.p_op().matrix()) < 1e-12);
        let c = commutator(b.x_op().matrix(), b.p_op().matrix());
        assert!((c[(0, 0)] - C64::new(0.0, 1.0)).norm() < 1e-6);
    }

    #[test]
    fn spin_algebra() {
        for &(n, k) in &[(2, 1), (5, 4), (60, 60)] {
            let b = SpinBasis::new(n, k).unwrap();
            let jz = b.j_z().matrix();
            let jp = b.j_plus().matrix();
            let jm = b.j_minus().matrix();
            let c1 = commutator(jz, jp) - jp;
            let c2 = commutator(jz, jm) + jm;
            assert!(c1.camax() < 1e-12 && c2.camax() < 1e-12);
            let jx = b.j_x();
            let jy = b.j_y();
            let c3 = commutator(jx.matrix(), jy.matrix()) - jz * C64::new(0.0, 1.0);
            assert!(c3.camax() < 1e-12 * (n as f64).powi(2));
        }
    }

    #[test]
    fn number_spectrum_and_vacuum() {
        let b = SpinBasis::new(60, 60).unwrap();
        let nop = b.number_op().matrix();
        let jz = b.j_z().matrix();
        for i in 0..60 {
            assert_eq!(nop[(i, i)].re, i as f64);
            // n = j - Jz/ħ
            assert!((b.j() - jz[(i, i)].re - i as f64).abs() < 1e-12);
        }
        let a = b.annihilator();
        let col0: f64 = a.matrix().column(0).iter().map(|v| v.norm_sqr()).sum();
        assert!(col0.sqrt() <= 1e-12);
    }

    #[test]
    fn low_sector_matches_bosonic_ladder() {
        let b = SpinBasis::new(60, 60).unwrap();
        let a = b.annihilator();
        for n in 0..=10 {
            let v = a.matrix()[(n, n + 1)].re;
            let exact = ((n + 1) as f64).sqrt();
            assert!(((v - exact) / exact).abs() <= 1e-3, "n={n}: {v}");
        }
    }
}
