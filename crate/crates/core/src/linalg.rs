//! Dense linear-algebra helpers shared by every module.
//!
//! Operators are stored as `DMatrix<Complex64>`. The hot propagation path
//! works on real/imaginary splits instead, since every operator there is
//! either real symmetric or purely imaginary.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type RMat = DMatrix<f64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|v| C64::new(v, 0.0))
}

/// `i * m` for a real matrix `m`.
pub fn imag_to_complex(m: &RMat) -> CMat {
    m.map(|v| C64::new(0.0, v))
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn anticommutator(a: &CMat, b: &CMat) -> CMat {
    a * b + b * a
}

/// Largest entrywise modulus of `m - m†`.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            worst = worst.max(d);
        }
    }
    worst
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.norm()))
}

pub fn hs_norm(m: &CMat) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().copied().sum()
}

pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted ascending.
///
/// Real-valued input (imaginary parts below 1e-300) takes the real symmetric
/// path and returns real eigenvectors.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let real = m.iter().all(|v| v.im.abs() < 1e-300);
    if real {
        let (vals, vecs) = eigh_real(&m.map(|v| v.re));
        return (vals, to_complex(&vecs));
    }
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let n = m.nrows();
    let mut vecs = CMat::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (col, &k) in order.iter().enumerate() {
        vals.push(eig.eigenvalues[k]);
        vecs.set_column(col, &eig.eigenvectors.column(k));
    }
    (vals, vecs)
}

/// Real symmetric eigendecomposition, ascending.
pub fn eigh_real(m: &RMat) -> (Vec<f64>, RMat) {
    let sym = (m + m.transpose()).scale(0.5);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let n = m.nrows();
    let mut vecs = RMat::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (col, &k) in order.iter().enumerate() {
        vals.push(eig.eigenvalues[k]);
        vecs.set_column(col, &eig.eigenvectors.column(k));
    }
    (vals, vecs)
}

/// Cyclic Jacobi diagonalization of a real symmetric matrix.
///
/// Unlike QR-based solvers, Jacobi keeps high relative accuracy for nearly
/// diagonal matrices whose diagonal carries the large scales: tiny gaps
/// between diagonal entries are resolved down to rounding of the gaps
/// themselves rather than of the matrix norm. Returns unsorted eigenvalues
/// (the final diagonal) and the accumulated rotation.
pub fn jacobi_eigh(a: &RMat, max_sweeps: usize) -> (Vec<f64>, RMat) {
    let n = a.nrows();
    // Row-major working copy for contiguous row access.
    let mut m: Vec<f64> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            m.push(0.5 * (a[(i, j)] + a[(j, i)]));
        }
    }
    let mut v = vec![0.0_f64; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                // Skip rotations that cannot change the diagonal in floating point.
                if apq.abs() <= 1e-18 * (app - aqq).abs()
                    || apq.abs() < 1e-300
                {
                    m[p * n + q] = 0.0;
                    m[q * n + p] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                m[p * n + p] = app - t * apq;
                m[q * n + q] = aqq + t * apq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = m[r * n + p];
                    let arq = m[r * n + q];
                    let new_rp = arp - s * (arq + tau * arp);
                    let new_rq = arq + s * (arp - tau * arq);
                    m[r * n + p] = new_rp;
                    m[p * n + r] = new_rp;
                    m[r * n + q] = new_rq;
                    m[q * n + r] = new_rq;
                }
                for r in 0..n {
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = vrp - s * (vrq + tau * vrp);
                    v[r * n + q] = vrq + s * (vrp - tau * vrq);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let vals = (0..n).map(|i| m[i * n + i]).collect();
    let vecs = RMat::from_row_slice(n, n, &v);
    (vals, vecs)
}

/// Apply a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_function(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = eigh(m);
    spectral_sum(&vals, &vecs, f)
}

pub fn spectral_sum(vals: &[f64], vecs: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let n = vecs.nrows();
    let weights = DVector::from_iterator(vals.len(), vals.iter().map(|&v| C64::new(f(v), 0.0)));
    let mut scaled = vecs.clone();
    for (j, w) in weights.iter().enumerate() {
        let mut column = scaled.column_mut(j);
        column *= *w;
    }
    let out = &scaled * vecs.adjoint();
    debug_assert_eq!(out.nrows(), n);
    out
}

/// Outer product `|u⟩⟨v|`.
pub fn ket_bra(u: &DVector<C64>, v: &DVector<C64>) -> CMat {
    u * v.adjoint()
}

/// `m = a + i b` split for the real-arithmetic propagation path.
#[derive(Clone, Debug)]
pub struct Split {
    pub re: RMat,
    pub im: RMat,
}

impl Split {
    pub fn zeros(n: usize) -> Self {
        Split {
            re: RMat::zeros(n, n),
            im: RMat::zeros(n, n),
        }
    }

    pub fn from_complex(m: &CMat) -> Self {
        Split {
            re: m.map(|v| v.re),
            im: m.map(|v| v.im),
        }
    }

    pub fn to_complex(&self) -> CMat {
        self.re.zip_map(&self.im, C64::new)
    }

    /// `self + self†`
    pub fn plus_adjoint(&self) -> Split {
        Split {
            re: &self.re + self.re.transpose(),
            im: &self.im - self.im.transpose(),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.re.norm_squared() + self.im.norm_squared()
    }
}

/// Product of a real matrix with a split complex matrix.
pub fn real_times(a: &RMat, m: &Split) -> Split {
    Split {
        re: a * &m.re,
        im: a * &m.im,
    }
}

/// Product of a split complex matrix with a real matrix.
pub fn times_real(m: &Split, a: &RMat) -> Split {
    Split {
        re: &m.re * a,
        im: &m.im * a,
    }
}

/// `(ar + i ai)(br + i bi)`
pub fn split_times(ar: &RMat, ai: &RMat, m: &Split) -> Split {
    Split {
        re: ar * &m.re - ai * &m.im,
        im: ar * &m.im + ai * &m.re,
    }
}
