//! Spin-coherent-state phase space: Husimi field, Wehrl entropy and the
//! entropy production rate.

use crate::dynamics::{dissipator, EnvironmentSpec};
use crate::error::{Error, Result};
use crate::linalg::{commutator, CMat, C64};
use crate::operator::DensityMatrix;
use crate::spinbasis::SpinBasis;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub const Q_FLOOR: f64 = 1e-14;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Product grid: Gauss-Legendre in `cos θ` times uniform `φ`.
#[derive(Clone, Debug)]
pub struct SphereGrid {
    pub dim: usize,
    pub theta: Vec<f64>,
    /// Gauss-Legendre weights in `cos θ`.
    pub theta_weights: Vec<f64>,
    pub phi: Vec<f64>,
    /// `w_θ · 2π/n_φ` per node, row-major in (θ, φ).
    pub weights: Vec<f64>,
    amplitudes: Vec<Vec<f64>>,
    fourier: Vec<Vec<C64>>,
}

impl SphereGrid {
    pub fn n_theta(&self) -> usize {
        self.theta.len()
    }

    pub fn n_phi(&self) -> usize {
        self.phi.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.weights.len()
    }

    /// `N/4π`, the measure normalization.
    pub fn measure(&self) -> f64 {
        self.dim as f64 / (4.0 * PI)
    }

    /// `Σ w f` over all nodes in fixed order.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Coherent-state amplitudes in the number basis at node `(i_theta, i_phi)`.
    pub fn coherent_state(&self, i_theta: usize, i_phi: usize) -> nalgebra::DVector<C64> {
        let a = &self.amplitudes[i_theta];
        let phi = self.phi[i_phi];
        nalgebra::DVector::from_iterator(
            self.dim,
            a.iter().enumerate().map(|(n, &v)| C64::from_polar(v, n as f64 * phi)),
        )
    }

    /// `⟨Ω|M|Ω⟩` on every node, row-major in (θ, φ).
    pub fn expectation_field(&self, m: &CMat) -> Vec<C64> {
        let n = self.dim;
        let nk = 2 * n - 1;
        let mut out = Vec::with_capacity(self.n_nodes());
        let mut s = vec![C64::new(0.0, 0.0); nk];
        for a in &self.amplitudes {
            // s[k + n - 1] = Σ_r a_r a_{r+k} M_{r, r+k}
            for (idx, slot) in s.iter_mut().enumerate() {
                let k = idx as isize - (n as isize - 1);
                let mut acc = C64::new(0.0, 0.0);
                for r in 0..n {
                    let c = r as isize + k;
                    if c < 0 || c >= n as isize {
                        continue;
                    }
                    let c = c as usize;
                    acc += m[(r, c)] * (a[r] * a[c]);
                }
                *slot = acc;
            }
            for f in &self.fourier {
                let mut v = C64::new(0.0, 0.0);
                for (sk, ek) in s.iter().zip(f) {
                    v += sk * ek;
                }
                out.push(v);
            }
        }
        out
    }

    /// Real part of [`Self::expectation_field`] for Hermitian `m`.
    pub fn real_field(&self, m: &CMat) -> Vec<f64> {
        self.expectation_field(m).into_iter().map(|v| v.re).collect()
    }
}

pub fn default_sizes(dim: usize) -> (usize, usize) {
    (2 * dim, 4 * dim + 1)
}

pub fn sphere_grid(dim: usize, n_theta: usize, n_phi: usize) -> Result<SphereGrid> {
    if n_theta < 2 || n_phi < 3 {
        return Err(Error::InvalidParameter {
            field: "numerics.grid",
            reason: format!("need n_theta >= 2 and n_phi >= 3, got {n_theta} x {n_phi}"),
        });
    }
    let (z, wz) = gauss_legendre(n_theta);
    // ascending θ means descending cos θ
    let theta: Vec<f64> = z.iter().rev().map(|c| c.acos()).collect();
    let theta_weights: Vec<f64> = wz.iter().rev().copied().collect();
    let dphi = 2.0 * PI / n_phi as f64;
    let phi: Vec<f64> = (0..n_phi).map(|k| k as f64 * dphi).collect();
    let mut weights = Vec::with_capacity(n_theta * n_phi);
    for w in &theta_weights {
        for _ in 0..n_phi {
            weights.push(w * dphi);
        }
    }
    let two_j = (dim - 1) as f64;
    let ln_binom: Vec<f64> = (0..dim).map(|n| ln_choose(dim - 1, n)).collect();
    let amplitudes = theta
        .iter()
        .map(|&th| {
            let (lc, ls) = ((th / 2.0).cos().ln(), (th / 2.0).sin().ln());
            (0..dim)
                .map(|n| (0.5 * ln_binom[n] + (two_j - n as f64) * lc + n as f64 * ls).exp())
                .collect()
        })
        .collect();
    let fourier = phi
        .iter()
        .map(|&p| {
            (0..2 * dim - 1)
                .map(|idx| {
                    let k = idx as f64 - (dim as f64 - 1.0);
                    C64::from_polar(1.0, -k * p)
                })
                .collect()
        })
        .collect();
    Ok(SphereGrid {
        dim,
        theta,
        theta_weights,
        phi,
        weights,
        amplitudes,
        fourier,
    })
}

fn ln_choose(n: usize, k: usize) -> f64 {
    let ln_fact = |m: usize| (1..=m).map(|v| (v as f64).ln()).sum::<f64>();
    ln_fact(n) - ln_fact(k) - ln_fact(n - k)
}

#[derive(Clone, Debug)]
pub struct HusimiField {
    pub values: Vec<f64>,
    /// Nodes where `Q` was slightly negative and set to zero.
    pub clamped: usize,
}

impl HusimiField {
    pub fn normalization(&self, grid: &SphereGrid) -> f64 {
        grid.measure() * grid.integrate(&self.values)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn husimi_field(rho: &DensityMatrix, grid: &SphereGrid) -> HusimiField {
    let mut clamped = 0;
    let values = grid
        .real_field(rho.matrix())
        .into_iter()
        .map(|q| {
            if q < 0.0 {
                clamped += 1;
                0.0
            } else {
                q
            }
        })
        .collect();
    HusimiField { values, clamped }
}

pub fn wehrl_entropy(field: &HusimiField, grid: &SphereGrid) -> f64 {
    let integrand: Vec<f64> = field
        .values
        .iter()
        .map(|&q| if q > 0.0 { -q * q.ln() } else { 0.0 })
        .collect();
    grid.measure() * grid.integrate(&integrand)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyRates {
    pub pi: f64,
    pub phi: f64,
    /// Dissipative Wehrl rate `dS_D/dt = Π - Φ`.
    pub wehrl_rate: f64,
    /// Nodes where `Q` fell below the floor.
    pub floored: usize,
}

/// Production rate `Π` and flux `Φ = Π - dS_D/dt`.
pub fn entropy_rates(rho: &DensityMatrix, grid: &SphereGrid, basis: &SpinBasis, env: &EnvironmentSpec) -> EntropyRates {
    let hbar = basis.hbar();
    let x = basis.x_complex();
    let p = basis.p_op().matrix();
    let r = rho.matrix();
    let q = grid.real_field(r);
    let jx = grid.expectation_field(&commutator(&x, r));
    let jp = grid.expectation_field(&commutator(p, r));
    let qd = grid.real_field(&dissipator(r, basis, env));
    let cx = env.gamma / (2.0 * hbar) + env.gamma_x(hbar) + env.lambda;
    let cp = env.gamma_p();
    let mut floored = 0;
    let mut pi_density = Vec::with_capacity(q.len());
    let mut rate_density = Vec::with_capacity(q.len());
    for k in 0..q.len() {
        let qk = if q[k] < Q_FLOOR {
            floored += 1;
            Q_FLOOR
        } else {
            q[k]
        };
        pi_density.push((cx * jx[k].norm_sqr() + cp * jp[k].norm_sqr()) / qk);
        rate_density.push(-(1.0 + qk.ln()) * qd[k]);
    }
    let pi = grid.measure() * grid.integrate(&pi_density);
    let wehrl_rate = grid.measure() * grid.integrate(&rate_density);
    EntropyRates {
        pi,
        phi: pi - wehrl_rate,
        wehrl_rate,
        floored,
    }
}

/// Trapezoidal `∫ Π dt`.
pub fn accumulate_sigma(times: &[f64], pi: &[f64]) -> Result<f64> {
    if times.len() != pi.len() {
        return Err(Error::DimensionMismatch(times.len(), pi.len()));
    }
    if times.len() < 2 {
        return Err(Error::InvalidParameter {
            field: "samples",
            reason: "need at least two samples".into(),
        });
    }
    let mut sigma = 0.0;
    for k in 1..times.len() {
        let dt = times[k] - times[k - 1];
        if !(dt > 0.0) {
            return Err(Error::NonMonotoneTime(k));
        }
        sigma += 0.5 * dt * (pi[k] + pi[k - 1]);
    }
    Ok(sigma)
}

/// Running trapezoidal `∫ Π dt` at each sample.
pub fn cumulative_sigma(times: &[f64], pi: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        if k > 0 {
            acc += 0.5 * (times[k] - times[k - 1]) * (pi[k] + pi[k - 1]);
        }
        out.push(acc);
    }
    out
}

/// Fock-space check of `-(iγ/2ħ)[x,{p,ρ}] = -(γ/2ħ)[x,[x,ρ]] - (γ/√2ħ)[x, ρa - a†ρ]`
/// on random states supported away from the truncation edge. Returns the
/// largest entrywise deviation on the interior block.
pub fn verify_decomposition(dim: usize, trials: usize, seed: u64) -> Result<f64> {
    if dim < 8 {
        return Err(Error::InvalidDimension(format!("Fock truncation {dim} < 8")));
    }
    let support = dim - dim / 4;
    let mut a = CMat::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    let ad = a.adjoint();
    let s2 = std::f64::consts::SQRT_2;
    let x = (&a + &ad) / C64::new(s2, 0.0);
    let p = (&a - &ad) * C64::new(0.0, -1.0 / s2);
    let (gamma, hbar) = (1.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let mut rho = CMat::zeros(dim, dim);
        for i in 0..support {
            for j in 0..=i {
                let v = if i == j {
                    C64::new(rng.random::<f64>(), 0.0)
                } else {
                    C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                };
                rho[(i, j)] = v;
                rho[(j, i)] = v.conj();
            }
        }
        let lhs = commutator(&x, &(&p * &rho + &rho * &p)) * C64::new(0.0, -gamma / (2.0 * hbar));
        let rhs = commutator(&x, &commutator(&x, &rho)) * C64::new(-gamma / (2.0 * hbar), 0.0)
            - commutator(&x, &(&rho * &a - &ad * &rho)) * C64::new(gamma / (s2 * hbar), 0.0);
        let diff = lhs - rhs;
        for i in 0..support {
            for j in 0..support {
                worst = worst.max(diff[(i, j)].norm());
            }
        }
    }
    Ok(worst)
}

/// Husimi function of a single number state `|n⟩` evaluated analytically.
pub fn fock_husimi(grid: &SphereGrid, n: usize) -> Vec<f64> {
    let mut m = CMat::zeros(grid.dim, grid.dim);
    m[(n, n)] = C64::new(1.0, 0.0);
    grid.real_field(&m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_is_exact() {
        let (z, w) = gauss_legendre(7);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        for deg in 0..14 {
            let q: f64 = z.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "degree {deg}");
        }
    }

    #[test]
    fn grid_integrals() {
        let g = sphere_grid(10, 20, 41).unwrap();
        let ones = vec![1.0; g.n_nodes()];
        assert!((g.integrate(&ones) - 4.0 * PI).abs() < 1e-12);
        let cos: Vec<f64> = g.theta.iter().flat_map(|t| std::iter::repeat_n(t.cos(), 41)).collect();
        assert!(g.integrate(&cos).abs() < 1e-12);
    }

    #[test]
    fn coherent_state_is_normalized_and_matches_rotation() {
        let basis = SpinBasis::new(12, 12).unwrap();
        let g = sphere_grid(12, 24, 49).unwrap();
        let psi = g.coherent_state(5, 7);
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        // e^{-iφJz} e^{-iθJy}|j,j⟩ up to a global phase
        let (th, ph) = (g.theta[5], g.phi[7]);
        let jy = basis.j_y().matrix().clone();
        let jz = basis.j_z().matrix().clone();
        let (vy, uy) = crate::linalg::eigh(&jy);
        let ry = {
            let mut s = uy.clone();
            for (k, v) in vy.iter().enumerate() {
                let mut c = s.column_mut(k);
                c *= C64::from_polar(1.0, -th * v);
            }
            s * uy.adjoint()
        };
        let mut top = nalgebra::DVector::<C64>::zeros(12);
        top[0] = C64::new(1.0, 0.0);
        let mut phi = &ry * top;
        for n in 0..12 {
            phi[n] *= C64::from_polar(1.0, -ph * jz[(n, n)].re);
        }
        let ov = psi.dotc(&phi).norm();
        assert!((ov - 1.0).abs() < 1e-10, "overlap {ov}");
    }

    #[test]
    fn husimi_of_top_state() {
        let n = 20;
        let g = sphere_grid(n, 40, 81).unwrap();
        let q = fock_husimi(&g, 0);
        for (it, th) in g.theta.iter().enumerate() {
            let expected = (th / 2.0).cos().powi(2 * (n as i32 - 1));
            assert!((q[it * 81] - expected).abs() < 1e-12);
        }
        let field = HusimiField { values: q, clamped: 0 };
        assert!((field.normalization(&g) - 1.0).abs() < 1e-10);
        assert!(wehrl_entropy(&field, &g) < (n as f64).ln());
    }

    #[test]
    fn mixed_state_field() {
        let n = 60;
        let (nt, np) = default_sizes(n);
        let g = sphere_grid(n, nt, np).unwrap();
        let rho = DensityMatrix::maximally_mixed(n);
        let f = husimi_field(&rho, &g);
        for v in &f.values {
            assert!((v - 1.0 / n as f64).abs() < 1e-12);
        }
        assert!((f.normalization(&g) - 1.0).abs() < 1e-10);
        assert!((wehrl_entropy(&f, &g) - (n as f64).ln()).abs() < 1e-6);
    }

    #[test]
    fn mixed_state_produces_no_entropy() {
        let basis = SpinBasis::new(16, 16).unwrap();
        let g = sphere_grid(16, 32, 65).unwrap();
        let env = EnvironmentSpec::new(0.023, 0.0023, 1.0);
        let r = entropy_rates(&DensityMatrix::maximally_mixed(16), &g, &basis, &env);
        assert!(r.pi.abs() < 1e-14);
        let closed = EnvironmentSpec::new(0.0, 0.0, 1.0);
        let mut psi = nalgebra::DVector::<C64>::zeros(16);
        psi[0] = C64::new(0.6, 0.0);
        psi[1] = C64::new(0.0, 0.8);
        let rho = DensityMatrix::pure(&psi);
        let r = entropy_rates(&rho, &g, &basis, &closed);
        assert!(r.pi.abs() < 1e-14 && r.phi.abs() < 1e-14);
        let r = entropy_rates(&rho, &g, &basis, &env);
        assert!(r.pi > 0.0);
    }

    #[test]
    fn sigma_accumulation() {
        assert_eq!(accumulate_sigma(&[0.0, 1.0, 2.0], &[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!((accumulate_sigma(&[0.0, 1.0, 3.0], &[1.0, 1.0, 2.0]).unwrap() - 4.0).abs() < 1e-15);
        assert!(matches!(accumulate_sigma(&[0.0, 1.0, 1.0], &[1.0; 3]), Err(Error::NonMonotoneTime(2))));
    }

    #[test]
    fn decomposition_identity() {
        assert!(verify_decomposition(32, 100, 7).unwrap() < 1e-10);
    }
}
