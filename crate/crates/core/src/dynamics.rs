//! Master-equation propagation with localization and Caldeira-Leggett
//! dissipation.

use crate::error::{Error, Result};
use crate::integrator::{integrate, StepControl, StepStats};
use crate::linalg::{commutator, eigh, eigh_real, to_complex, CMat, RMat, C64};
use crate::metrics::{coherence_l1, transfer_projector};
use crate::model::{Hamiltonian, ProtocolSpec, SystemSpec};
use crate::operator::{DensityMatrix, Operator};
use crate::phasespace::{entropy_rates, husimi_field, sphere_grid, wehrl_entropy, SphereGrid};
use crate::spinbasis::SpinBasis;
use crate::sta::CdEngine;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub gamma: f64,
    pub lambda: f64,
    pub temperature: f64,
    pub m: f64,
}

impl EnvironmentSpec {
    pub fn new(gamma: f64, lambda: f64, temperature: f64) -> Self {
        EnvironmentSpec {
            gamma,
            lambda,
            temperature,
            m: 1.0,
        }
    }

    pub fn closed() -> Self {
        Self::new(0.0, 0.0, 1.0)
    }

    pub fn is_closed(&self) -> bool {
        self.gamma == 0.0 && self.lambda == 0.0
    }

    /// `γ m k_B T / ħ²`
    pub fn gamma_x(&self, hbar: f64) -> f64 {
        self.gamma * self.m * self.temperature / (hbar * hbar)
    }

    /// `γ / (16 m k_B T)`
    pub fn gamma_p(&self) -> f64 {
        self.gamma / (16.0 * self.m * self.temperature)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) {
            return Err(Error::InvalidParameter {
                field: "environment.gamma",
                reason: format!("must be non-negative, got {}", self.gamma),
            });
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidParameter {
                field: "environment.lambda",
                reason: format!("must be non-negative, got {}", self.lambda),
            });
        }
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidParameter {
                field: "environment.T",
                reason: format!("must be positive, got {}", self.temperature),
            });
        }
        if !(self.m > 0.0) {
            return Err(Error::InvalidParameter {
                field: "environment.m",
                reason: format!("must be positive, got {}", self.m),
            });
        }
        Ok(())
    }
}

/// Dissipative part of the generator:
/// `-Λ[x,[x,ρ]] - (iγ/2ħ)[x,{p,ρ}] - γx[x,[x,ρ]] - γp[p,[p,ρ]]`.
pub fn dissipator(rho: &CMat, basis: &SpinBasis, env: &EnvironmentSpec) -> CMat {
    let hbar = basis.hbar();
    let x = basis.x_complex();
    let p = basis.p_op().matrix();
    let cx = env.lambda + env.gamma_x(hbar);
    let xx = commutator(&x, &commutator(&x, rho));
    let pp = commutator(p, &commutator(p, rho));
    let xp = commutator(&x, &(p * rho + rho * p));
    xx * C64::new(-cx, 0.0) + pp * C64::new(-env.gamma_p(), 0.0) + xp * C64::new(0.0, -env.gamma / (2.0 * hbar))
}

/// Full right-hand side `ρ̇` for Hamiltonian `h`.
pub fn generator(rho: &DensityMatrix, h: &Operator, env: &EnvironmentSpec, basis: &SpinBasis) -> Operator {
    let r = rho.matrix();
    let unitary = commutator(h.matrix(), r) * C64::new(0.0, -1.0 / basis.hbar());
    Operator::new(unitary + dissipator(r, basis, env), true)
}

pub fn generator_hs_norm(rho: &DensityMatrix, h: &Operator, env: &EnvironmentSpec, basis: &SpinBasis) -> f64 {
    generator(rho, h, env, basis).hs_norm()
}

/// Real-arithmetic generator on `ρ = A + iB` for `H = Hr + i Hi`.
///
/// Writes `ρ̇ = Kρ + (Kρ)† + 2c_x xρx - 2c_p RρR + g(xρR + (xρR)†)` with
/// `p' = iR`, `K = -(i/ħ)H - c_x x² + c_p R² + g xR` and `g = γ/2ħ`.
#[derive(Clone, Debug)]
pub struct SplitGenerator {
    dim: usize,
    hbar: f64,
    x: RMat,
    r: RMat,
    static_k: RMat,
    cx: f64,
    cp: f64,
    g: f64,
}

impl SplitGenerator {
    pub fn new(basis: &SpinBasis, env: &EnvironmentSpec) -> Self {
        let hbar = basis.hbar();
        let x = basis.x_real().clone();
        let r = basis.p_imag().clone();
        let cx = env.lambda + env.gamma_x(hbar);
        let cp = env.gamma_p();
        let g = env.gamma / (2.0 * hbar);
        let static_k = -(&x * &x) * cx + (&r * &r) * cp + (&x * &r) * g;
        SplitGenerator {
            dim: basis.dim(),
            hbar,
            x,
            r,
            static_k,
            cx,
            cp,
            g,
        }
    }

    /// `y` holds `A` then `B`, column-major; `out` likewise.
    pub fn apply(&self, hr: &RMat, hi: Option<&RMat>, y: &[f64], out: &mut [f64]) {
        let n = self.dim;
        let nn = n * n;
        let a = RMat::from_column_slice(n, n, &y[..nn]);
        let b = RMat::from_column_slice(n, n, &y[nn..2 * nn]);
        let mut kr = self.static_k.clone();
        if let Some(hi) = hi {
            kr += hi / self.hbar;
        }
        let ki = hr / (-self.hbar);
        // Kρ
        let kra = &kr * &a;
        let krb = &kr * &b;
        let kia = &ki * &a;
        let kib = &ki * &b;
        let mut re = &kra - &kib;
        let mut im = &krb + &kia;
        // + (Kρ)†
        re += re.transpose();
        im -= im.transpose();
        let xa = &self.x * &a;
        let xb = &self.x * &b;
        if self.cx != 0.0 {
            re += (&xa * &self.x) * (2.0 * self.cx);
            im += (&xb * &self.x) * (2.0 * self.cx);
        }
        if self.cp != 0.0 {
            re -= (&self.r * &a * &self.r) * (2.0 * self.cp);
            im -= (&self.r * &b * &self.r) * (2.0 * self.cp);
        }
        if self.g != 0.0 {
            let mr = &xa * &self.r;
            let mi = &xb * &self.r;
            re += (&mr + mr.transpose()) * self.g;
            im += (&mi - mi.transpose()) * self.g;
        }
        out[..nn].copy_from_slice(re.as_slice());
        out[nn..2 * nn].copy_from_slice(im.as_slice());
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NumericsSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: Option<f64>,
    pub min_step: f64,
    /// Observables are recorded every `sample_stride` accepted steps...
    pub sample_stride: usize,
    /// ...but no closer than `sample_dt` in time.
    pub sample_dt: Option<f64>,
    pub hermitize_every: usize,
    pub n_theta: Option<usize>,
    pub n_phi: Option<usize>,
    /// Evaluate Wehrl entropy and Π, Φ at each sample.
    pub entropy: bool,
    pub keep_states: bool,
}

impl Default for NumericsSpec {
    fn default() -> Self {
        NumericsSpec {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_step: None,
            min_step: 1e-14,
            sample_stride: 1,
            sample_dt: None,
            hermitize_every: 1,
            n_theta: None,
            n_phi: None,
            entropy: true,
            keep_states: false,
        }
    }
}

impl NumericsSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter {
                field: "numerics.abs_tol",
                reason: "tolerances must be positive".into(),
            });
        }
        if let Some(max) = self.max_step {
            if !(self.min_step < max) {
                return Err(Error::InvalidParameter {
                    field: "numerics.min_step",
                    reason: format!("min_step {} must be below max_step {max}", self.min_step),
                });
            }
        }
        if self.sample_stride == 0 || self.hermitize_every == 0 {
            return Err(Error::InvalidParameter {
                field: "numerics.sample_stride",
                reason: "strides must be at least 1".into(),
            });
        }
        Ok(())
    }

    pub fn grid_sizes(&self, dim: usize) -> (usize, usize) {
        let (t, p) = crate::phasespace::default_sizes(dim);
        (self.n_theta.unwrap_or(t), self.n_phi.unwrap_or(p))
    }
}

/// Sampled observables along a propagation.
#[derive(Clone, Debug, Default, Serialize)]
pub struct TrajectoryRecord {
    pub tau: f64,
    pub times: Vec<f64>,
    /// `⟨H0(t)⟩`
    pub energy: Vec<f64>,
    /// `⟨H0(t)²⟩ - ⟨H0(t)⟩²`
    pub energy_variance: Vec<f64>,
    /// Lowest eigenvalue of `H0(t)`.
    pub ground_energy: Vec<f64>,
    pub transfer: Vec<f64>,
    pub wehrl: Vec<f64>,
    pub husimi_norm: Vec<f64>,
    pub pi: Vec<f64>,
    pub phi: Vec<f64>,
    pub coherence: Vec<f64>,
    pub purity: Vec<f64>,
    pub von_neumann: Vec<f64>,
    pub min_eigenvalue: Vec<f64>,
    pub generator_hs: Vec<f64>,
    pub generator_op: Vec<f64>,
    pub generator_tr: Vec<f64>,
    pub sta_cost: Vec<f64>,
    /// `∫ ‖L[ρ_t]‖_hs dt` integrated alongside the state.
    pub hs_integral: f64,
    pub max_trace_drift: f64,
    pub q_floor_hits: usize,
    #[serde(skip)]
    pub states: Vec<DensityMatrix>,
    #[serde(skip)]
    pub initial_state: DensityMatrix,
    #[serde(skip)]
    pub final_state: DensityMatrix,
    #[serde(skip)]
    pub stats: StepStats,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Time average of `‖L[ρ_t]‖_hs` over `[0, τ]`.
    pub fn hs_average(&self) -> f64 {
        self.hs_integral / self.tau
    }
}

/// Time-dependent Hamiltonian assembly for one protocol.
struct Drive {
    ham: Hamiltonian,
    protocol: ProtocolSpec,
    engine: Option<CdEngine>,
}

impl Drive {
    /// `(H0, S)` with `H_STA = iS`.
    fn parts(&self, t: f64) -> Result<(RMat, Option<RMat>)> {
        let t = t.clamp(0.0, self.protocol.tau);
        let h0 = self.ham.for_protocol(&self.protocol, t)?;
        let s = match &self.engine {
            Some(e) => Some(e.term_for(&self.protocol, t)?.s),
            None => None,
        };
        Ok((h0, s))
    }
}

fn pack(rho: &CMat, y: &mut [f64]) {
    let nn = rho.len();
    for (k, v) in rho.iter().enumerate() {
        y[k] = v.re;
        y[nn + k] = v.im;
    }
}

fn unpack(y: &[f64], n: usize) -> CMat {
    let nn = n * n;
    CMat::from_fn(n, n, |i, j| C64::new(y[j * n + i], y[nn + j * n + i]))
}

struct Observer<'a> {
    basis: &'a SpinBasis,
    env: EnvironmentSpec,
    grid: Option<SphereGrid>,
    left: CMat,
}

impl Observer<'_> {
    fn record(&self, rec: &mut TrajectoryRecord, t: f64, rho: &CMat, h0: &RMat, s: Option<&RMat>, keep: bool) -> Result<()> {
        let state = DensityMatrix::new_unchecked(rho.clone());
        let h0c = to_complex(h0);
        let e = (&h0c * rho).trace().re;
        let e2 = (&h0c * &h0c * rho).trace().re;
        let (levels, _) = eigh_real(h0);
        let mut h = h0c.clone();
        if let Some(s) = s {
            h += crate::linalg::imag_to_complex(s);
        }
        let l = generator(&state, &Operator::new(h, true), &self.env, self.basis);
        let (lvals, _) = eigh(l.matrix());
        let (rvals, _) = eigh(rho);
        let vn: f64 = rvals.iter().filter(|&&v| v > 1e-300).map(|&v| -v * v.ln()).sum();
        rec.times.push(t);
        rec.energy.push(e);
        rec.energy_variance.push((e2 - e * e).max(0.0));
        rec.ground_energy.push(levels[0]);
        rec.transfer.push((&self.left * rho).trace().re);
        rec.coherence.push(coherence_l1(&state, self.basis));
        rec.purity.push((rho * rho).trace().re);
        rec.von_neumann.push(vn);
        rec.min_eigenvalue.push(rvals[0]);
        rec.generator_hs.push(l.hs_norm());
        rec.generator_op.push(lvals.iter().fold(0.0_f64, |a, v| a.max(v.abs())));
        rec.generator_tr.push(lvals.iter().map(|v| v.abs()).sum());
        rec.sta_cost.push(s.map(|s| s.norm()).unwrap_or(0.0));
        if let Some(grid) = &self.grid {
            let field = husimi_field(&state, grid);
            rec.husimi_norm.push(field.normalization(grid));
            rec.wehrl.push(wehrl_entropy(&field, grid));
            let rates = entropy_rates(&state, grid, self.basis, &self.env);
            rec.pi.push(rates.pi);
            rec.phi.push(rates.phi);
            rec.q_floor_hits += rates.floored;
        }
        if keep {
            rec.states.push(state);
        }
        Ok(())
    }
}

pub const POSITIVITY_WARN: f64 = -1e-4;
pub const POSITIVITY_ABORT: f64 = -1e-2;

/// Adaptive Dormand-Prince propagation from `0` to `τ`.
pub fn propagate(
    rho0: &DensityMatrix,
    system: &SystemSpec,
    protocol: &ProtocolSpec,
    env: &EnvironmentSpec,
    basis: &SpinBasis,
    numerics: &NumericsSpec,
    use_sta: bool,
) -> Result<TrajectoryRecord> {
    system.validate()?;
    protocol.validate()?;
    env.validate()?;
    numerics.validate()?;
    if use_sta && !protocol.kind.is_quantum() {
        return Err(Error::InvalidParameter {
            field: "protocol.kind",
            reason: "counter-diabatic driving requires a quantum schedule".into(),
        });
    }
    let n = basis.dim();
    if rho0.dim() != n {
        return Err(Error::DimensionMismatch(rho0.dim(), n));
    }
    let drive = Drive {
        ham: Hamiltonian::new(basis, system),
        protocol: *protocol,
        engine: use_sta.then(|| CdEngine::new(basis, system)),
    };
    let gen = SplitGenerator::new(basis, env);
    let grid = if numerics.entropy {
        let (nt, np) = numerics.grid_sizes(n);
        Some(sphere_grid(n, nt, np)?)
    } else {
        None
    };
    let observer = Observer {
        basis,
        env: *env,
        grid,
        left: to_complex(&transfer_projector(basis)),
    };
    let tau = protocol.tau;
    let nn = n * n;
    let mut y = vec![0.0; 2 * nn + 1];
    pack(rho0.matrix(), &mut y);

    let mut rec = TrajectoryRecord {
        tau,
        initial_state: rho0.clone(),
        ..Default::default()
    };
    let (h0, s0) = drive.parts(0.0)?;
    observer.record(&mut rec, 0.0, rho0.matrix(), &h0, s0.as_ref(), numerics.keep_states)?;

    let control = StepControl {
        abs_tol: numerics.abs_tol,
        rel_tol: numerics.rel_tol,
        max_step: numerics.max_step.unwrap_or(tau / 20.0),
        min_step: numerics.min_step,
        initial_step: None,
    };
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let (h0, s) = drive.parts(t)?;
        gen.apply(&h0, s.as_ref(), y, dy);
        let norm: f64 = dy[..2 * nn].iter().map(|v| v * v).sum::<f64>().sqrt();
        dy[2 * nn] = norm;
        Ok(())
    };
    let mut accepted = 0usize;
    let mut last_sample = 0.0;
    let stats = integrate(
        rhs,
        0.0,
        tau,
        &mut y,
        &protocol.critical_times(),
        &control,
        |t, y, _dy| {
            accepted += 1;
            let mut tr = 0.0;
            for i in 0..n {
                tr += y[i * n + i];
            }
            let drift = (tr - 1.0).abs();
            rec.max_trace_drift = rec.max_trace_drift.max(drift);
            if drift > 1e-8 {
                log::warn!("trace drift {drift:e} at t = {t}");
            }
            for v in y[..2 * nn].iter_mut() {
                *v /= tr;
            }
            if accepted.is_multiple_of(numerics.hermitize_every) {
                for i in 0..n {
                    y[nn + i * n + i] = 0.0;
                    for j in (i + 1)..n {
                        let (ij, ji) = (j * n + i, i * n + j);
                        let re = 0.5 * (y[ij] + y[ji]);
                        let im = 0.5 * (y[nn + ij] - y[nn + ji]);
                        y[ij] = re;
                        y[ji] = re;
                        y[nn + ij] = im;
                        y[nn + ji] = -im;
                    }
                }
            }
            let due = accepted.is_multiple_of(numerics.sample_stride)
                && numerics.sample_dt.is_none_or(|dt| t - last_sample >= dt);
            let at_end = (t - tau).abs() <= 1e-12 * tau;
            if (due || at_end) && t > last_sample {
                last_sample = t;
                let rho = unpack(y, n);
                let (h0, s) = drive.parts(t)?;
                observer.record(&mut rec, t, &rho, &h0, s.as_ref(), numerics.keep_states)?;
                if let Some(&m) = rec.min_eigenvalue.last() {
                    if m < POSITIVITY_ABORT {
                        return Err(Error::PositivityLoss { t, min_eigenvalue: m });
                    }
                    if m < POSITIVITY_WARN {
                        log::warn!("positivity: smallest eigenvalue {m:e} at t = {t}");
                    }
                }
            }
            // the rescaling is O(1e-15); the FSAL derivative stays valid
            Ok(false)
        },
    )?;
    rec.stats = stats;
    rec.hs_integral = y[2 * nn];
    rec.final_state = DensityMatrix::new_unchecked(unpack(&y, n));
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermiticity_defect;
    use crate::model::ProtocolKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(n: usize, seed: u64) -> DensityMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = CMat::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let m = &g * g.adjoint();
        let tr = m.trace();
        DensityMatrix::new(m / tr).unwrap()
    }

    #[test]
    fn split_generator_matches_direct_formula() {
        let basis = SpinBasis::new(12, 12).unwrap();
        let env = EnvironmentSpec::new(0.03, 0.004, 1.7);
        let rho = random_state(12, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let hr = RMat::from_fn(12, 12, |_, _| rng.random::<f64>());
        let hr = &hr + hr.transpose();
        let si = RMat::from_fn(12, 12, |_, _| rng.random::<f64>());
        let si = &si - si.transpose();
        let h = Operator::new(to_complex(&hr) + crate::linalg::imag_to_complex(&si), true);
        let direct = generator(&rho, &h, &env, &basis);
        let gen = SplitGenerator::new(&basis, &env);
        let mut y = vec![0.0; 288];
        pack(rho.matrix(), &mut y);
        let mut out = vec![0.0; 288];
        gen.apply(&hr, Some(&si), &y, &mut out);
        let fast = unpack(&out, 12);
        assert!((fast - direct.matrix()).camax() < 1e-12);
    }

    #[test]
    fn generator_properties() {
        let basis = SpinBasis::new(16, 16).unwrap();
        let env = EnvironmentSpec::new(0.023, 0.0023, 1.0);
        let h = Hamiltonian::new(&basis, &SystemSpec::default()).at(-0.001, 0.0);
        for seed in 0..5 {
            let rho = random_state(16, seed);
            let l = generator(&rho, &h, &env, &basis);
            assert!(l.trace().norm() < 1e-12);
            assert!(hermiticity_defect(l.matrix()) < 1e-12);
            let closed = generator(&rho, &h, &EnvironmentSpec::closed(), &basis);
            let unitary = commutator(h.matrix(), rho.matrix()) * C64::new(0.0, -1.0);
            assert!((closed.matrix() - unitary).camax() < 1e-13);
        }
        let mixed = DensityMatrix::maximally_mixed(16);
        let lc = EnvironmentSpec::new(0.0, 0.01, 1.0);
        assert!(dissipator(mixed.matrix(), &basis, &lc).camax() < 1e-14);
        let (_, vecs) = h.eigh();
        let g = DensityMatrix::pure(&vecs.column(0).into_owned());
        assert!(generator_hs_norm(&g, &h, &EnvironmentSpec::closed(), &basis) < 1e-10);
    }

    #[test]
    fn derived_coefficients() {
        let env = EnvironmentSpec::new(0.023, 0.0023, 10.0);
        assert!((env.gamma_x(1.0) - 0.23).abs() < 1e-12);
        assert!((env.gamma_p() - 0.023 / 160.0).abs() < 1e-12);
        assert!(EnvironmentSpec::new(-1.0, 0.0, 1.0).validate().is_err());
        assert!(EnvironmentSpec::new(0.0, 0.0, 0.0).validate().is_err());
    }

    #[test]
    fn closed_small_propagation_conserves_purity() {
        let basis = SpinBasis::new(20, 20).unwrap();
        let sys = SystemSpec::default();
        let p = ProtocolSpec::standard(ProtocolKind::Quantum1, 1.0);
        let mut psi = nalgebra::DVector::<C64>::zeros(20);
        psi[0] = C64::new(0.6, 0.0);
        psi[3] = C64::new(0.0, 0.8);
        let rho = DensityMatrix::pure(&psi);
        let numerics = NumericsSpec { entropy: false, ..Default::default() };
        let rec = propagate(&rho, &sys, &p, &EnvironmentSpec::closed(), &basis, &numerics, false).unwrap();
        assert!((rec.final_state.purity() - 1.0).abs() < 1e-7);
        assert!(rec.max_trace_drift < 1e-10);
        assert_eq!(*rec.times.last().unwrap(), 1.0);
        for w in rec.times.windows(2) {
            assert!(w[1] > w[0]);
        }
    }
}
