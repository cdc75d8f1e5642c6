//! State distances, speed limits and protocol grading.

use crate::dynamics::{EnvironmentSpec, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::linalg::{eigh, hermitize, spectral_sum, RMat};
use crate::model::SystemSpec;
use crate::operator::DensityMatrix;
use crate::phasespace::accumulate_sigma;
use crate::spinbasis::SpinBasis;
use serde::Serialize;

const PSD_TOL: f64 = 1e-6;

fn psd_sqrt(rho: &DensityMatrix) -> Result<crate::linalg::CMat> {
    let (vals, vecs) = eigh(rho.matrix());
    if vals[0] < -PSD_TOL {
        return Err(Error::NegativeEigenvalue(vals[0]));
    }
    Ok(spectral_sum(&vals, &vecs, |v| v.max(0.0).sqrt()))
}

/// Uhlmann fidelity `(tr √(√ρ1 ρ2 √ρ1))²`.
pub fn fidelity(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::DimensionMismatch(rho1.dim(), rho2.dim()));
    }
    let min2 = rho2.min_eigenvalue();
    if min2 < -PSD_TOL {
        return Err(Error::NegativeEigenvalue(min2));
    }
    let s = psd_sqrt(rho1)?;
    let m = hermitize(&(&s * rho2.matrix() * &s));
    let (mu, _) = eigh(&m);
    let root: f64 = mu.iter().map(|v| v.max(0.0).sqrt()).sum();
    Ok((root * root).clamp(0.0, 1.0))
}

pub fn bures_angle(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    Ok(fidelity(rho1, rho2)?.sqrt().clamp(0.0, 1.0).acos())
}

/// Mandelstam-Tamm and Margolus-Levitin times `(ħL/ΔE, 2ħL²/(π⟨E⟩))` from
/// time-averaged energy samples. `mean_energy` is measured above the
/// instantaneous ground energy.
pub fn qsl_bounds_from_samples(
    times: &[f64],
    mean_energy: &[f64],
    energy_spread: &[f64],
    bures: f64,
    hbar: f64,
) -> Result<(f64, f64)> {
    let e = time_average(times, mean_energy)?;
    let de = time_average(times, energy_spread)?;
    if bures == 0.0 {
        return Ok((0.0, 0.0));
    }
    let mt = if de > 0.0 { hbar * bures / de } else { f64::INFINITY };
    let ml = if e > 0.0 {
        2.0 * hbar * bures * bures / (std::f64::consts::PI * e)
    } else {
        f64::INFINITY
    };
    Ok((mt, ml))
}

pub fn qsl_closed_bounds(traj: &TrajectoryRecord, hbar: f64) -> Result<(f64, f64)> {
    let bures = bures_angle(&traj.initial_state, &traj.final_state)?;
    let above: Vec<f64> = traj.energy.iter().zip(&traj.ground_energy).map(|(e, g)| e - g).collect();
    let spread: Vec<f64> = traj.energy_variance.iter().map(|v| v.sqrt()).collect();
    qsl_bounds_from_samples(&traj.times, &above, &spread, bures, hbar)
}

/// Trapezoidal time average over the sample span.
pub fn time_average(times: &[f64], values: &[f64]) -> Result<f64> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch(times.len(), values.len()));
    }
    if times.len() == 1 {
        return Ok(values[0]);
    }
    let span = times[times.len() - 1] - times[0];
    if !(span > 0.0) {
        return Err(Error::NonMonotoneTime(times.len() - 1));
    }
    Ok(accumulate_sigma(times, values)? / span)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QslReport {
    pub tau_qsl: f64,
    pub bures: f64,
    pub hs_average: f64,
    pub op_average: f64,
    pub tr_average: f64,
    /// `Λτ_hs / sin² L`
    pub hs_ratio: f64,
}

/// `τ_QSL = ħ sin² L(ρi, ρf) / Λτ_hs`.
pub fn tau_qsl(traj: &TrajectoryRecord, rho_i: &DensityMatrix, rho_f: &DensityMatrix, hbar: f64) -> Result<QslReport> {
    let bures = bures_angle(rho_i, rho_f)?;
    if bures < 1e-8 {
        return Err(Error::DegenerateEndpoints(bures));
    }
    let s2 = bures.sin().powi(2);
    let hs_average = traj.hs_average();
    let op_average = time_average(&traj.times, &traj.generator_op)?;
    let tr_average = time_average(&traj.times, &traj.generator_tr)?;
    let tau_qsl = if hs_average > 0.0 { hbar * s2 / hs_average } else { f64::INFINITY };
    Ok(QslReport {
        tau_qsl,
        bures,
        hs_average,
        op_average,
        tr_average,
        hs_ratio: hs_average / s2,
    })
}

/// `max{0, 1 - 0.1 log10(τ/τ_QSL)}`, capped at 1.
pub fn speed_grade(tau: f64, tau_qsl: f64) -> f64 {
    let ratio = tau / tau_qsl;
    if !(ratio > 0.0) {
        return 1.0;
    }
    (1.0 - 0.1 * ratio.log10()).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GradingDiagnostics {
    pub mt_bound: f64,
    pub ml_bound: f64,
    pub op_norm_avg: f64,
    pub tr_norm_avg: f64,
    pub hs_norm_avg: f64,
    pub mean_energy_avg: f64,
    pub energy_var_avg: f64,
    pub degenerate_endpoints: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GradingReport {
    pub g_s: f64,
    pub g_q: f64,
    pub g_t: f64,
    #[serde(rename = "G")]
    pub g: f64,
    pub sigma_ir: f64,
    pub tau: f64,
    pub tau_qsl: f64,
    pub hs_ratio: f64,
    pub transfer_pct: f64,
    pub diagnostics: GradingDiagnostics,
}

pub fn grade(traj: &TrajectoryRecord, rho_target: &DensityMatrix, hbar: f64) -> Result<GradingReport> {
    let tau = traj.tau;
    let (tau_qsl_value, hs_ratio, hs_avg, op_avg, tr_avg, degenerate) =
        match tau_qsl(traj, &traj.initial_state, &traj.final_state, hbar) {
            Ok(q) => (q.tau_qsl, q.hs_ratio, q.hs_average, q.op_average, q.tr_average, false),
            Err(Error::DegenerateEndpoints(_)) => (0.0, f64::INFINITY, traj.hs_average(), f64::NAN, f64::NAN, true),
            Err(e) => return Err(e),
        };
    let g_s = speed_grade(tau, tau_qsl_value);
    let g_q = fidelity(&traj.final_state, rho_target)?;
    let sigma_ir = if traj.pi.is_empty() { 0.0 } else { accumulate_sigma(&traj.times, &traj.pi)? };
    let g_t = (-sigma_ir).exp();
    let (mt, ml) = qsl_closed_bounds(traj, hbar)?;
    let above: Vec<f64> = traj.energy.iter().zip(&traj.ground_energy).map(|(e, g)| e - g).collect();
    Ok(GradingReport {
        g_s,
        g_q,
        g_t,
        g: g_s * g_q * g_t,
        sigma_ir,
        tau,
        tau_qsl: tau_qsl_value,
        hs_ratio,
        transfer_pct: traj.transfer.last().copied().unwrap_or(f64::NAN),
        diagnostics: GradingDiagnostics {
            mt_bound: mt,
            ml_bound: ml,
            op_norm_avg: op_avg,
            tr_norm_avg: tr_avg,
            hs_norm_avg: hs_avg,
            mean_energy_avg: time_average(&traj.times, &above)?,
            energy_var_avg: time_average(&traj.times, &traj.energy_variance)?,
            degenerate_endpoints: degenerate,
        },
    })
}

/// Spectral projector of `x'` onto its non-positive eigenvalues.
pub fn transfer_projector(basis: &SpinBasis) -> RMat {
    basis.x_function(|x| if x <= 0.0 { 1.0 } else { 0.0 })
}

/// `P(x ≤ 0) = tr(ρ Θ(-x'))`.
pub fn transfer_percentage(rho: &DensityMatrix, basis: &SpinBasis) -> f64 {
    let p = crate::linalg::to_complex(&transfer_projector(basis));
    (p * rho.matrix()).trace().re.clamp(0.0, 1.0)
}

/// `Σ_{j≠k} |ρ_jk|` in the eigenbasis of `x'`.
pub fn coherence_l1(rho: &DensityMatrix, basis: &SpinBasis) -> f64 {
    let u = crate::linalg::to_complex(basis.x_eigenvectors());
    let r = u.adjoint() * rho.matrix() * &u;
    let n = r.nrows();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += r[(i, j)].norm();
            }
        }
    }
    total
}

/// `ħ² / (γ m k_B T Δx²)`; `Δx` defaults to the well separation.
pub fn decoherence_time(env: &EnvironmentSpec, system: &SystemSpec, delta_x: Option<f64>, hbar: f64) -> f64 {
    let dx = delta_x.unwrap_or(2.0 * system.well_position());
    let rate = env.gamma * env.m * env.temperature * dx * dx;
    if rate == 0.0 {
        return f64::INFINITY;
    }
    hbar * hbar / rate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{CMat, C64};
    use nalgebra::DVector;

    fn diag(p: &[f64]) -> DensityMatrix {
        DensityMatrix::new(CMat::from_diagonal(&DVector::from_iterator(p.len(), p.iter().map(|&v| C64::new(v, 0.0))))).unwrap()
    }

    #[test]
    fn fidelity_of_commuting_states() {
        let p = [0.5, 0.3, 0.2];
        let q = [0.1, 0.6, 0.3];
        let f = fidelity(&diag(&p), &diag(&q)).unwrap();
        let exact: f64 = p.iter().zip(&q).map(|(a, b)| (a * b).sqrt()).sum::<f64>().powi(2);
        assert!((f - exact).abs() < 1e-12);
        assert!((fidelity(&diag(&p), &diag(&p)).unwrap() - 1.0).abs() < 1e-12);
        assert!(fidelity(&diag(&[1.0, 0.0]), &diag(&[0.0, 1.0])).unwrap() < 1e-12);
    }

    #[test]
    fn bures_special_values() {
        let a = diag(&[1.0, 0.0]);
        assert!(bures_angle(&a, &a).unwrap().abs() < 1e-7);
        assert!((bures_angle(&a, &diag(&[0.0, 1.0])).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!((bures_angle(&a, &diag(&[0.5, 0.5])).unwrap() - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn rabi_flip_saturates_mandelstam_tamm() {
        // H = Ω σx, flip time π/(2Ω): ⟨E⟩ above ground = Ω, ΔE = Ω
        let omega = 1.7;
        let times: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let e = vec![omega; 11];
        let de = vec![omega; 11];
        let (mt, _) = qsl_bounds_from_samples(&times, &e, &de, std::f64::consts::FRAC_PI_2, 1.0).unwrap();
        assert!((mt - std::f64::consts::PI / (2.0 * omega)).abs() < 1e-12);
        let (mt, ml) = qsl_bounds_from_samples(&times, &e, &de, 0.0, 1.0).unwrap();
        assert_eq!((mt, ml), (0.0, 0.0));
    }

    #[test]
    fn speed_grade_values() {
        assert!((speed_grade(10.0, 1.0) - 0.9).abs() < 1e-12);
        assert_eq!(speed_grade(1e11, 1.0), 0.0);
        let c1 = 1.0 - 0.1 * ((300.0 / 2.3) * 0.13_f64).log10();
        assert!((c1 - 0.877).abs() < 1e-3);
    }

    #[test]
    fn transfer_and_coherence() {
        let basis = SpinBasis::new(60, 60).unwrap();
        let mixed = DensityMatrix::maximally_mixed(60);
        assert!((transfer_percentage(&mixed, &basis) - 0.5).abs() < 1e-10);
        assert!(coherence_l1(&mixed, &basis) < 1e-12);
        let u = crate::linalg::to_complex(basis.x_eigenvectors());
        let e3 = u.column(3).into_owned();
        assert!(coherence_l1(&DensityMatrix::pure(&e3), &basis) < 1e-12);
        let sup = (u.column(3) + u.column(7)) / C64::new(2f64.sqrt(), 0.0);
        assert!((coherence_l1(&DensityMatrix::pure(&sup), &basis) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decoherence_estimate() {
        let sys = SystemSpec::default();
        let env = EnvironmentSpec::new(0.023, 0.0023, 1.0);
        let t1 = decoherence_time(&env, &sys, None, 1.0);
        assert!((t1 - 1.0 / (0.023 * 60.0)).abs() < 1e-12);
        let env2 = EnvironmentSpec::new(0.023, 0.0023, 2.0);
        assert!((decoherence_time(&env2, &sys, None, 1.0) - t1 / 2.0).abs() < 1e-12);
        assert!(decoherence_time(&EnvironmentSpec::closed(), &sys, None, 1.0).is_infinite());
    }
}
