//! Two-level Landau-Zener sweep with and without counter-diabatic driving.

use crate::error::{Error, Result};
use crate::integrator::{integrate, StepControl};
use crate::linalg::{eigh, CMat, C64};
use crate::operator::Operator;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LZSpec {
    pub delta: f64,
    pub g0: f64,
    pub g1: f64,
    pub tau: f64,
    pub with_cd: bool,
}

impl Default for LZSpec {
    fn default() -> Self {
        LZSpec {
            delta: 0.05,
            g0: -1.0,
            g1: 1.0,
            tau: 1.0,
            with_cd: true,
        }
    }
}

impl LZSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::InvalidParameter {
                field: "lz.delta",
                reason: format!("must be positive, got {}", self.delta),
            });
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidParameter {
                field: "lz.tau",
                reason: format!("must be positive, got {}", self.tau),
            });
        }
        Ok(())
    }

    pub fn g(&self, t: f64) -> f64 {
        self.g0 + (self.g1 - self.g0) * t / self.tau
    }

    pub fn g_dot(&self) -> f64 {
        (self.g1 - self.g0) / self.tau
    }
}

pub fn sigma_x() -> CMat {
    CMat::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)])
}

pub fn sigma_y() -> CMat {
    CMat::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), C64::new(0.0, 0.0)])
}

pub fn sigma_z() -> CMat {
    CMat::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-1.0, 0.0)])
}

/// `H = Δσz + g σx`
pub fn hamiltonian_at(delta: f64, g: f64) -> CMat {
    sigma_z() * C64::new(delta, 0.0) + sigma_x() * C64::new(g, 0.0)
}

pub fn lz_hamiltonian(spec: &LZSpec, t: f64) -> Operator {
    Operator::new(hamiltonian_at(spec.delta, spec.g(t)), true)
}

/// `ġΔ / (2(Δ² + g²)) σy` (ħ = 1).
pub fn cd_at(delta: f64, g: f64, g_dot: f64) -> CMat {
    sigma_y() * C64::new(g_dot * delta / (2.0 * (delta * delta + g * g)), 0.0)
}

pub fn lz_cd(spec: &LZSpec, t: f64) -> Operator {
    Operator::new(cd_at(spec.delta, spec.g(t), spec.g_dot()), true)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LzOutcome {
    pub final_fidelity: f64,
    pub min_fidelity: f64,
    pub sx_initial: f64,
    pub sx_final: f64,
}

fn ground_state(h: &CMat) -> DVector<C64> {
    let (_, v) = eigh(h);
    v.column(0).into_owned()
}

/// Closed evolution from the instantaneous ground state, tracking the
/// overlap with the instantaneous ground state.
pub fn lz_run(spec: &LZSpec) -> Result<LzOutcome> {
    spec.validate()?;
    let psi0 = ground_state(&hamiltonian_at(spec.delta, spec.g0));
    let mut y = vec![psi0[0].re, psi0[0].im, psi0[1].re, psi0[1].im];
    let sx = sigma_x();
    let expect_sx = |psi: &DVector<C64>| psi.dotc(&(&sx * psi)).re;
    let sx_initial = expect_sx(&psi0);
    let hamiltonian = |t: f64| {
        let mut h = hamiltonian_at(spec.delta, spec.g(t));
        if spec.with_cd {
            h += cd_at(spec.delta, spec.g(t), spec.g_dot());
        }
        h
    };
    let control = StepControl {
        abs_tol: 1e-12,
        rel_tol: 1e-10,
        max_step: spec.tau / 200.0,
        min_step: 1e-14 * spec.tau,
        initial_step: None,
    };
    let mut min_fidelity: f64 = 1.0;
    let mut last = 1.0;
    let to_vec = |y: &[f64]| DVector::from_vec(vec![C64::new(y[0], y[1]), C64::new(y[2], y[3])]);
    integrate(
        |t, y, dy| {
            let h = hamiltonian(t);
            let psi = to_vec(y);
            let d = (&h * psi) * C64::new(0.0, -1.0);
            dy[0] = d[0].re;
            dy[1] = d[0].im;
            dy[2] = d[1].re;
            dy[3] = d[1].im;
            Ok(())
        },
        0.0,
        spec.tau,
        &mut y,
        &[],
        &control,
        |t, y, _| {
            let g = ground_state(&hamiltonian_at(spec.delta, spec.g(t)));
            let f = g.dotc(&to_vec(y)).norm_sqr();
            min_fidelity = min_fidelity.min(f);
            last = f;
            Ok(false)
        },
    )?;
    let psi = to_vec(&y);
    Ok(LzOutcome {
        final_fidelity: last,
        min_fidelity,
        sx_initial,
        sx_final: expect_sx(&psi),
    })
}
