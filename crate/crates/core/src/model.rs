//! Double-well Hamiltonian, control schedules, reference states and the
//! continuum benchmark.

use crate::error::{Error, Result};
use crate::linalg::{eigh_real, CMat, RMat, C64};
use crate::operator::{DensityMatrix, Operator};
use crate::spinbasis::SpinBasis;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Quartic double well `p²/2m + c1 x² + c2 x⁴`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub m: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for SystemSpec {
    fn default() -> Self {
        SystemSpec {
            m: 1.0,
            c1: -1.5,
            c2: 0.05,
        }
    }
}

impl SystemSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0) {
            return Err(Error::InvalidParameter {
                field: "system.m",
                reason: format!("mass must be positive, got {}", self.m),
            });
        }
        if !(self.c1 < 0.0) {
            return Err(Error::InvalidParameter {
                field: "system.c1",
                reason: format!("quadratic coefficient must be negative, got {}", self.c1),
            });
        }
        if !(self.c2 > 0.0) {
            return Err(Error::InvalidParameter {
                field: "system.c2",
                reason: format!("quartic coefficient must be positive, got {}", self.c2),
            });
        }
        Ok(())
    }

    /// Positions of the two minima, `±√(-c1 / 2c2)`.
    pub fn well_position(&self) -> f64 {
        (-self.c1 / (2.0 * self.c2)).sqrt()
    }

    /// Barrier height above the well bottoms, `c1² / 4c2`.
    pub fn barrier_height(&self) -> f64 {
        self.c1 * self.c1 / (4.0 * self.c2)
    }

    pub fn potential(&self, x: f64) -> f64 {
        let x2 = x * x;
        self.c1 * x2 + self.c2 * x2 * x2
    }

    /// Classical potential including the control terms at `(α, β)`.
    pub fn controlled_potential(&self, x: f64, alpha: f64, beta: f64) -> f64 {
        let mut v = self.potential(x) + alpha * x;
        if beta != 0.0 && x * x <= -self.c1 / (2.0 * self.c2) {
            v -= beta * (self.barrier_height() + self.potential(x));
        }
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Classical1,
    Classical2,
    Quantum1,
    Quantum2,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 4] = [
        ProtocolKind::Classical1,
        ProtocolKind::Classical2,
        ProtocolKind::Quantum1,
        ProtocolKind::Quantum2,
    ];

    pub fn is_quantum(self) -> bool {
        matches!(self, ProtocolKind::Quantum1 | ProtocolKind::Quantum2)
    }

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Classical1 => "classical1",
            ProtocolKind::Classical2 => "classical2",
            ProtocolKind::Quantum1 => "quantum1",
            ProtocolKind::Quantum2 => "quantum2",
        }
    }
}

impl std::str::FromStr for ProtocolKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "classical1" => Ok(ProtocolKind::Classical1),
            "classical2" => Ok(ProtocolKind::Classical2),
            "quantum1" => Ok(ProtocolKind::Quantum1),
            "quantum2" => Ok(ProtocolKind::Quantum2),
            other => Err(format!("unknown protocol `{other}`")),
        }
    }
}

impl std::fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub const DEFAULT_RAMP_FRACTION: f64 = 1.0 / 6.0;

/// One control schedule over `[0, τ]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub kind: ProtocolKind,
    pub delta: f64,
    /// Maximal tilt for the classical schedules; unused by the quantum ones.
    pub amplitude: f64,
    pub tau: f64,
    pub ramp_fraction: f64,
}

impl ProtocolSpec {
    pub fn new(kind: ProtocolKind, delta: f64, amplitude: f64, tau: f64) -> Self {
        ProtocolSpec {
            kind,
            delta,
            amplitude,
            tau,
            ramp_fraction: DEFAULT_RAMP_FRACTION,
        }
    }

    /// Schedule parameters used throughout the examples: δ = 0.001 and
    /// A = 5 (classical 1), A = 1 (classical 2).
    pub fn standard(kind: ProtocolKind, tau: f64) -> Self {
        let amplitude = match kind {
            ProtocolKind::Classical1 => 5.0,
            ProtocolKind::Classical2 => 1.0,
            _ => 0.0,
        };
        Self::new(kind, 0.001, amplitude, tau)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::InvalidParameter {
                field: "protocol.delta",
                reason: format!("tilt seed must be positive, got {}", self.delta),
            });
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidParameter {
                field: "protocol.tau",
                reason: format!("duration must be positive, got {}", self.tau),
            });
        }
        if !self.kind.is_quantum() && !(self.amplitude > self.delta) {
            return Err(Error::InvalidParameter {
                field: "protocol.amplitude",
                reason: format!(
                    "classical amplitude {} must exceed delta {}",
                    self.amplitude, self.delta
                ),
            });
        }
        if !(self.ramp_fraction > 0.0 && self.ramp_fraction <= 0.5) {
            return Err(Error::InvalidParameter {
                field: "protocol.ramp_fraction",
                reason: format!("must lie in (0, 1/2], got {}", self.ramp_fraction),
            });
        }
        Ok(())
    }

    /// Times where the schedule has a kink or the spectrum pinches; the
    /// integrator lands on them exactly.
    pub fn critical_times(&self) -> Vec<f64> {
        if self.kind.is_quantum() {
            vec![0.5 * self.tau]
        } else {
            vec![self.ramp_fraction * self.tau]
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.tau;
        if t < -slack || t > self.tau + slack || t.is_nan() {
            return Err(Error::OutOfRange { t, tau: self.tau });
        }
        Ok(())
    }
}

/// Tilt `α(t)` and flattening weight `β(t)`.
pub fn control_values(protocol: &ProtocolSpec, t: f64) -> Result<(f64, f64)> {
    protocol.check_time(t)?;
    let t = t.clamp(0.0, protocol.tau);
    let d = protocol.delta;
    Ok(match protocol.kind {
        ProtocolKind::Classical1 | ProtocolKind::Classical2 => {
            let knot = protocol.ramp_fraction * protocol.tau;
            let w = if t <= knot {
                t / knot
            } else {
                (protocol.tau - t) / (protocol.tau - knot)
            };
            let alpha = -d + (protocol.amplitude + d) * w;
            let beta = if protocol.kind == ProtocolKind::Classical2 { w } else { 0.0 };
            (alpha, beta)
        }
        ProtocolKind::Quantum1 => {
            let s = t / protocol.tau - 0.5;
            (d * (3.0 * s - 4.0 * s * s * s), 0.0)
        }
        ProtocolKind::Quantum2 => {
            let s = t / protocol.tau - 0.5;
            let s3 = s * s * s;
            (d * (20.0 * s3 - 48.0 * s3 * s * s), 0.0)
        }
    })
}

/// Time derivatives `(α̇, β̇)`. At the classical knot the ramp-up slope is
/// returned.
pub fn control_rates(protocol: &ProtocolSpec, t: f64) -> Result<(f64, f64)> {
    protocol.check_time(t)?;
    let t = t.clamp(0.0, protocol.tau);
    let d = protocol.delta;
    let tau = protocol.tau;
    Ok(match protocol.kind {
        ProtocolKind::Classical1 | ProtocolKind::Classical2 => {
            let knot = protocol.ramp_fraction * tau;
            let dw = if t <= knot { 1.0 / knot } else { -1.0 / (tau - knot) };
            let beta_dot = if protocol.kind == ProtocolKind::Classical2 { dw } else { 0.0 };
            ((protocol.amplitude + d) * dw, beta_dot)
        }
        ProtocolKind::Quantum1 => {
            let s = t / tau - 0.5;
            (d * (3.0 - 12.0 * s * s) / tau, 0.0)
        }
        ProtocolKind::Quantum2 => {
            let s = t / tau - 0.5;
            let s2 = s * s;
            (d * (60.0 * s2 - 240.0 * s2 * s2) / tau, 0.0)
        }
    })
}

/// Time-independent pieces of `H(t) = H_free + α x' + β F`, all real.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    free: RMat,
    x: RMat,
    flatten: RMat,
}

impl Hamiltonian {
    pub fn new(basis: &SpinBasis, system: &SystemSpec) -> Self {
        let x = basis.x_real().clone();
        let r = basis.p_imag();
        // p'² = -R²
        let kinetic = -(r * r) / (2.0 * system.m);
        let x2 = &x * &x;
        let x4 = &x2 * &x2;
        let free = kinetic + &x2 * system.c1 + &x4 * system.c2;
        let bound = -system.c1 / (2.0 * system.c2);
        let h = system.barrier_height();
        let flatten = basis.x_function(|xk| {
            if bound - xk * xk >= 0.0 {
                -(h + system.c1 * xk * xk + system.c2 * xk.powi(4))
            } else {
                0.0
            }
        });
        let free = (&free + free.transpose()) * 0.5;
        Hamiltonian { free, x, flatten }
    }

    pub fn free(&self) -> &RMat {
        &self.free
    }

    pub fn x(&self) -> &RMat {
        &self.x
    }

    /// Flattening operator `-(c1²/4c2 + c1x'² + c2x'⁴) Θ`.
    pub fn flatten(&self) -> &RMat {
        &self.flatten
    }

    pub fn real_at(&self, alpha: f64, beta: f64) -> RMat {
        let mut h = &self.free + &self.x * alpha;
        if beta != 0.0 {
            h += &self.flatten * beta;
        }
        h
    }

    pub fn at(&self, alpha: f64, beta: f64) -> Operator {
        Operator::from_real(&self.real_at(alpha, beta), true)
    }

    pub fn for_protocol(&self, protocol: &ProtocolSpec, t: f64) -> Result<RMat> {
        let (a, b) = control_values(protocol, t)?;
        Ok(self.real_at(a, b))
    }
}

pub fn build_hamiltonian(
    basis: &SpinBasis,
    system: &SystemSpec,
    protocol: &ProtocolSpec,
    t: f64,
) -> Result<Operator> {
    let (alpha, beta) = control_values(protocol, t)?;
    Ok(Hamiltonian::new(basis, system).at(alpha, beta))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WellLabel {
    Left,
    Right,
    Delocalized,
}

/// Instantaneous eigenpairs, ascending.
#[derive(Clone, Debug)]
pub struct EigenFrame {
    pub t: f64,
    pub energies: Vec<f64>,
    pub states: CMat,
    pub well_labels: Vec<WellLabel>,
}

impl EigenFrame {
    pub fn from_real(t: f64, energies: Vec<f64>, states: &RMat) -> Self {
        let n = energies.len();
        EigenFrame {
            t,
            energies,
            states: crate::linalg::to_complex(states),
            well_labels: vec![WellLabel::Delocalized; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn state(&self, i: usize) -> DVector<C64> {
        self.states.column(i).into_owned()
    }

    /// Indices carrying `label`, in ascending energy.
    pub fn indices_with(&self, label: WellLabel) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.well_labels[i] == label).collect()
    }

    /// Largest residual `‖H v - E v‖` over all columns.
    pub fn residual(&self, h: &Operator) -> f64 {
        let hv = h.matrix() * &self.states;
        (0..self.dim())
            .map(|i| {
                let r = hv.column(i) - self.states.column(i) * C64::new(self.energies[i], 0.0);
                r.norm()
            })
            .fold(0.0, f64::max)
    }
}

pub const DEFAULT_WELL_THRESHOLD: f64 = 1.0;

/// Labels each state by the sign of `⟨x'⟩` beyond `±threshold`.
pub fn classify_wells(mut frame: EigenFrame, basis: &SpinBasis, threshold: f64) -> EigenFrame {
    let x = basis.x_complex();
    let xv = &x * &frame.states;
    frame.well_labels = (0..frame.dim())
        .map(|i| {
            let mean = frame.states.column(i).dotc(&xv.column(i)).re;
            if mean > threshold {
                WellLabel::Right
            } else if mean < -threshold {
                WellLabel::Left
            } else {
                WellLabel::Delocalized
            }
        })
        .collect();
    frame
}

/// Well-resolved eigenbasis of `H0(0)`, with the sign conventions used for
/// the initial and target superpositions.
#[derive(Clone, Debug)]
pub struct WellStates {
    /// Right-well states, sign-fixed to behave like displaced oscillator
    /// levels: positive amplitude at the well centre for level 0, and
    /// `⟨R_k|x'|R_{k-1}⟩ > 0`.
    pub right: Vec<DVector<C64>>,
    pub right_energies: Vec<f64>,
    /// Left-well states, sign-fixed by positive overlap with the parity image
    /// of the matching right state.
    pub left: Vec<DVector<C64>>,
    pub left_energies: Vec<f64>,
}

impl WellStates {
    pub fn at_start(basis: &SpinBasis, system: &SystemSpec, protocol: &ProtocolSpec) -> Result<Self> {
        system.validate()?;
        protocol.validate()?;
        let ham = Hamiltonian::new(basis, system);
        let h0 = ham.for_protocol(protocol, 0.0)?;
        let (vals, vecs) = eigh_real(&h0);
        let frame = classify_wells(
            EigenFrame::from_real(0.0, vals.clone(), &vecs),
            basis,
            DEFAULT_WELL_THRESHOLD,
        );
        let (alpha, beta) = control_values(protocol, 0.0)?;
        let barrier = barrier_top(system, alpha, beta);
        let below = |i: &usize| vals[*i] < barrier;
        let right_idx: Vec<usize> = frame
            .indices_with(WellLabel::Right)
            .into_iter()
            .filter(below)
            .collect();
        let left_idx: Vec<usize> = frame
            .indices_with(WellLabel::Left)
            .into_iter()
            .filter(below)
            .collect();
        if right_idx.len() < 2 {
            return Err(Error::WellClassificationFailed(format!(
                "found {} right-well states below the barrier, need 2",
                right_idx.len()
            )));
        }
        if left_idx.len() < 2 {
            return Err(Error::WellClassificationFailed(format!(
                "found {} left-well states below the barrier, need 2",
                left_idx.len()
            )));
        }
        let x = basis.x_real();
        let xv = basis.x_eigenvectors();
        let mut right: Vec<DVector<f64>> = Vec::new();
        for (k, &i) in right_idx.iter().enumerate() {
            let mut v = vecs.column(i).into_owned();
            let sign = if k == 0 {
                let amps = xv.transpose() * &v;
                let mean = v.dot(&(x * &v));
                let node = nearest_index(basis.x_eigenvalues(), mean);
                amps[node].signum()
            } else {
                let prev: &DVector<f64> = &right[k - 1];
                v.dot(&(x * prev)).signum()
            };
            if sign < 0.0 {
                v *= -1.0;
            }
            right.push(v);
        }
        let parity = DVector::from_vec(basis.parity_diagonal());
        let mut left: Vec<DVector<f64>> = Vec::new();
        for (k, &i) in left_idx.iter().enumerate() {
            let mut v = vecs.column(i).into_owned();
            if k < right.len() {
                let mirrored = right[k].component_mul(&parity);
                if v.dot(&mirrored) < 0.0 {
                    v *= -1.0;
                }
            }
            left.push(v);
        }
        let cplx = |v: &DVector<f64>| v.map(|a| C64::new(a, 0.0));
        Ok(WellStates {
            right: right.iter().map(cplx).collect(),
            right_energies: right_idx.iter().map(|&i| vals[i]).collect(),
            left: left.iter().map(cplx).collect(),
            left_energies: left_idx.iter().map(|&i| vals[i]).collect(),
        })
    }

    /// Local oscillator frequency `(E1 - E0)/ħ` of the right well.
    pub fn omega(&self, hbar: f64) -> f64 {
        (self.right_energies[1] - self.right_energies[0]) / hbar
    }
}

fn nearest_index(values: &[f64], target: f64) -> usize {
    values
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Potential maximum between the two wells for the controlled potential.
pub fn barrier_top(system: &SystemSpec, alpha: f64, beta: f64) -> f64 {
    let xw = system.well_position();
    let n = 2001;
    (0..n)
        .map(|k| -xw + 2.0 * xw * k as f64 / (n - 1) as f64)
        .map(|x| system.controlled_potential(x, alpha, beta))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub const DEFAULT_COEFFICIENTS: [f64; 2] = [0.6, 0.8];

pub fn initial_state(basis: &SpinBasis, system: &SystemSpec, protocol: &ProtocolSpec) -> Result<DensityMatrix> {
    initial_state_with(basis, system, protocol, DEFAULT_COEFFICIENTS)
}

/// `c0 |0⟩_R + c1 |1⟩_R` on the eigenstates of `H0(0)`.
pub fn initial_state_with(
    basis: &SpinBasis,
    system: &SystemSpec,
    protocol: &ProtocolSpec,
    coefficients: [f64; 2],
) -> Result<DensityMatrix> {
    let wells = WellStates::at_start(basis, system, protocol)?;
    let psi = &wells.right[0] * C64::new(coefficients[0], 0.0) + &wells.right[1] * C64::new(coefficients[1], 0.0);
    Ok(DensityMatrix::pure(&psi))
}

pub fn target_state(basis: &SpinBasis, system: &SystemSpec, protocol: &ProtocolSpec, tau: f64) -> Result<DensityMatrix> {
    target_state_with(basis, system, protocol, tau, DEFAULT_COEFFICIENTS)
}

/// `Σ c_k e^{-i E_k^R τ/ħ} |k⟩_L`, phases from the right-well energies.
pub fn target_state_with(
    basis: &SpinBasis,
    system: &SystemSpec,
    protocol: &ProtocolSpec,
    tau: f64,
    coefficients: [f64; 2],
) -> Result<DensityMatrix> {
    let wells = WellStates::at_start(basis, system, protocol)?;
    let hbar = basis.hbar();
    let mut psi = DVector::<C64>::zeros(basis.dim());
    for k in 0..2 {
        let phase = C64::from_polar(1.0, -wells.right_energies[k] * tau / hbar);
        psi += &wells.left[k] * (phase * coefficients[k]);
    }
    Ok(DensityMatrix::pure(&psi))
}

/// Gibbs state `exp(-H/T)/Z` with `k_B = 1`.
pub fn thermal_state(h: &Operator, temperature: f64) -> Result<DensityMatrix> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidParameter {
            field: "environment.T",
            reason: format!("temperature must be positive, got {temperature}"),
        });
    }
    let (vals, vecs) = h.eigh();
    let e0 = vals[0];
    let weights: Vec<f64> = vals.iter().map(|e| (-(e - e0) / temperature).exp()).collect();
    let z: f64 = weights.iter().sum();
    let mut scaled = vecs.clone();
    for (k, w) in weights.iter().enumerate() {
        let mut col = scaled.column_mut(k);
        col *= C64::new(w / z, 0.0);
    }
    let rho = &scaled * vecs.adjoint();
    Ok(DensityMatrix::new_unchecked(crate::linalg::hermitize(&rho)))
}

/// Uniform grid for the continuum reference solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1d {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl Default for Grid1d {
    fn default() -> Self {
        Grid1d {
            x_min: -10.0,
            x_max: 10.0,
            n_points: 4000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LevelComparison {
    pub level: usize,
    pub discrete: f64,
    pub continuum: f64,
    /// `|E_d - E_c|` relative to the continuum level's height above the
    /// potential minimum.
    pub rel_err: f64,
}

/// Lowest `count` eigenvalues of `-ħ²/2m ∂² + V` by second-order finite
/// differences with Dirichlet walls.
pub fn continuum_levels(
    potential: impl Fn(f64) -> f64,
    mass: f64,
    hbar: f64,
    grid: &Grid1d,
    count: usize,
) -> Vec<f64> {
    let n = grid.n_points;
    let h = (grid.x_max - grid.x_min) / (n + 1) as f64;
    let kin = hbar * hbar / (2.0 * mass * h * h);
    let diag: Vec<f64> = (1..=n)
        .map(|i| 2.0 * kin + potential(grid.x_min + i as f64 * h))
        .collect();
    let off = -kin;
    crate::tridiag::lowest_eigenvalues(&diag, off, count)
}

pub const BENCHMARK_LEVELS: usize = 15;

/// Compares the spin-basis spectrum of `H0(t)` with the continuum. Fails with
/// `GridTooCoarse` when doubling the grid shifts one of the first 15
/// continuum levels by more than 0.1%.
pub fn benchmark_discretization(
    basis: &SpinBasis,
    system: &SystemSpec,
    protocol: &ProtocolSpec,
    t: f64,
    grid: &Grid1d,
) -> Result<Vec<LevelComparison>> {
    let (alpha, beta) = control_values(protocol, t)?;
    let ham = Hamiltonian::new(basis, system);
    let (discrete, _) = eigh_real(&ham.real_at(alpha, beta));
    let count = basis.dim();
    let pot = |x: f64| system.controlled_potential(x, alpha, beta);
    let coarse = continuum_levels(pot, system.m, basis.hbar(), grid, count);
    let fine_grid = Grid1d {
        n_points: grid.n_points * 2,
        ..*grid
    };
    let check = BENCHMARK_LEVELS.min(count);
    let fine = continuum_levels(pot, system.m, basis.hbar(), &fine_grid, check);
    let vmin = potential_minimum(system, alpha, beta, grid);
    for level in 0..check {
        let shift = (coarse[level] - fine[level]).abs() / (fine[level] - vmin).abs();
        if shift > 1e-3 {
            return Err(Error::GridTooCoarse { level, shift });
        }
    }
    Ok(discrete
        .iter()
        .zip(&coarse)
        .enumerate()
        .map(|(level, (&d, &c))| LevelComparison {
            level,
            discrete: d,
            continuum: c,
            rel_err: (d - c).abs() / (c - vmin).abs(),
        })
        .collect())
}

fn potential_minimum(system: &SystemSpec, alpha: f64, beta: f64, grid: &Grid1d) -> f64 {
    let n = grid.n_points.max(2000);
    (0..=n)
        .map(|k| grid.x_min + (grid.x_max - grid.x_min) * k as f64 / n as f64)
        .map(|x| system.controlled_potential(x, alpha, beta))
        .fold(f64::INFINITY, f64::min)
}
