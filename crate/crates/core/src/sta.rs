//! Instantaneous eigenframes and the counter-diabatic correction.

use crate::error::{Error, Result};
use crate::linalg::{eigh, eigh_real, hs_norm, jacobi_eigh, CMat, RMat, C64, I};
use crate::model::{control_rates, control_values, EigenFrame, Hamiltonian, ProtocolSpec, SystemSpec, WellLabel};
use crate::operator::Operator;
use crate::spinbasis::SpinBasis;

pub const DEFAULT_GAP_FLOOR: f64 = 1e-13;
const COUPLING_FLOOR: f64 = 1e-12;
const AMBIGUITY_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct CDReport {
    pub t: f64,
    pub h_sta: Operator,
    /// Hilbert-Schmidt norm of `H_STA`.
    pub cost: f64,
    pub min_gap: f64,
}

/// Ascending eigenframe of `h`. With `prev`, columns are matched to the
/// previous frame by maximal overlap and rotated so that `⟨prev_i|i⟩ > 0`.
pub fn eigenframe(h: &Operator, t: f64, prev: Option<&EigenFrame>) -> Result<EigenFrame> {
    let (vals, mut vecs) = eigh(h.matrix());
    let n = vals.len();
    let Some(prev) = prev else {
        // Standalone gauge: largest component of each column real positive.
        for k in 0..n {
            let col = vecs.column(k);
            let (_, pivot) = col
                .iter()
                .enumerate()
                .fold((0, C64::new(0.0, 0.0)), |acc, (i, v)| if v.norm() > acc.1.norm() + 1e-12 { (i, *v) } else { acc });
            let phase = pivot.conj() / pivot.norm();
            let mut c = vecs.column_mut(k);
            c *= phase;
        }
        return Ok(EigenFrame {
            t,
            energies: vals,
            states: vecs,
            well_labels: vec![WellLabel::Delocalized; n],
        });
    };
    if prev.dim() != n {
        return Err(Error::DimensionMismatch(prev.dim(), n));
    }
    let overlaps = prev.states.adjoint() * &vecs;
    let mut order = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    for col in 0..n {
        let mut mags: Vec<(usize, f64)> = (0..n).map(|i| (i, overlaps[(i, col)].norm())).collect();
        mags.sort_by(|a, b| b.1.total_cmp(&a.1));
        if n > 1 && mags[0].1 - mags[1].1 < AMBIGUITY_TOL {
            return Err(Error::GaugeAmbiguity {
                column: col,
                first: mags[0].1,
                second: mags[1].1,
            });
        }
        let target = mags.iter().map(|m| m.0).find(|&i| !taken[i]).unwrap_or(col);
        taken[target] = true;
        order[target] = col;
    }
    let mut states = CMat::zeros(n, n);
    let mut energies = vec![0.0; n];
    for (slot, &col) in order.iter().enumerate() {
        let ov = overlaps[(slot, col)];
        let phase = if ov.norm() > 0.0 { ov.conj() / ov.norm() } else { C64::new(1.0, 0.0) };
        states.set_column(slot, &(vecs.column(col) * phase));
        energies[slot] = vals[col];
    }
    vecs = states;
    Ok(EigenFrame {
        t,
        energies,
        states: vecs,
        well_labels: prev.well_labels.clone(),
    })
}

/// Counter-diabatic term `iħ Σ ⟨i|Ḣ|j⟩/(E_j - E_i) |i⟩⟨j|` from any
/// eigendecomposition. Returns the operator and the smallest gap used.
pub fn cd_from_eigensystem(
    energies: &[f64],
    states: &CMat,
    h_dot: &CMat,
    hbar: f64,
    gap_floor: f64,
) -> Result<(CMat, f64)> {
    let n = energies.len();
    let hd = states.adjoint() * h_dot * states;
    let mut m = CMat::zeros(n, n);
    let mut min_gap = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let gap = energies[j] - energies[i];
            if gap.abs() <= gap_floor {
                if hd[(i, j)].norm() > COUPLING_FLOOR {
                    return Err(Error::DegenerateGap {
                        i,
                        j,
                        gap: gap.abs(),
                        coupling: hd[(i, j)].norm(),
                    });
                }
                continue;
            }
            min_gap = min_gap.min(gap.abs());
            m[(i, j)] = I * hbar * hd[(i, j)] / gap;
        }
    }
    Ok((states * m * states.adjoint(), min_gap))
}

/// `Ḣ0(t)` from the analytic schedule derivatives.
pub fn hamiltonian_rate(ham: &Hamiltonian, protocol: &ProtocolSpec, t: f64) -> Result<RMat> {
    let (alpha_dot, beta_dot) = control_rates(protocol, t)?;
    let mut hd = ham.x() * alpha_dot;
    if beta_dot != 0.0 {
        hd += ham.flatten() * beta_dot;
    }
    Ok(hd)
}

pub fn cd_hamiltonian(
    basis: &SpinBasis,
    system: &SystemSpec,
    protocol: &ProtocolSpec,
    t: f64,
    frame: &EigenFrame,
) -> Result<CDReport> {
    cd_hamiltonian_with_floor(basis, system, protocol, t, frame, DEFAULT_GAP_FLOOR)
}

pub fn cd_hamiltonian_with_floor(
    basis: &SpinBasis,
    system: &SystemSpec,
    protocol: &ProtocolSpec,
    t: f64,
    frame: &EigenFrame,
    gap_floor: f64,
) -> Result<CDReport> {
    let ham = Hamiltonian::new(basis, system);
    let hd = crate::linalg::to_complex(&hamiltonian_rate(&ham, protocol, t)?);
    let (h, min_gap) = cd_from_eigensystem(&frame.energies, &frame.states, &hd, basis.hbar(), gap_floor)?;
    let h = crate::linalg::hermitize(&h);
    let cost = hs_norm(&h);
    Ok(CDReport {
        t,
        h_sta: Operator::new(h, true),
        cost,
        min_gap,
    })
}

/// Counter-diabatic engine for schedules of the form `H_free + α(t) x'`.
///
/// `H_free` is diagonalized once inside each parity sector, so the tunnel
/// doublets keep their splitting to relative precision. Each instant is then
/// diagonalized with Jacobi on `diag(E_free) + α X̃`, which resolves gaps of
/// order 1e-9 without the noise a dense solver would add at the scale of
/// `‖H‖`.
#[derive(Clone, Debug)]
pub struct CdEngine {
    hbar: f64,
    free_vecs: RMat,
    free_energies: Vec<f64>,
    shift: f64,
    x_free: RMat,
    gap_floor: f64,
}

/// Frame of `H_free + α x'` with real eigenvectors, ascending.
#[derive(Clone, Debug)]
pub struct RealFrame {
    pub energies: Vec<f64>,
    /// Columns in the number basis.
    pub states: RMat,
    /// `x'` in the frame.
    pub x_frame: RMat,
}

/// `H_STA = i S` with `S` real antisymmetric, in the number basis.
#[derive(Clone, Debug)]
pub struct CdTerm {
    pub s: RMat,
    pub min_gap: f64,
    /// Gap of the lowest doublet of `H0 + H_STA` in the two-level projection.
    pub pair_gap: f64,
    /// Bare gap `E1 - E0`.
    pub bare_gap: f64,
}

impl CdTerm {
    pub fn to_operator(&self) -> Operator {
        Operator::new(crate::linalg::imag_to_complex(&self.s), true)
    }

    pub fn cost(&self) -> f64 {
        self.s.norm()
    }
}

impl CdEngine {
    pub fn new(basis: &SpinBasis, system: &SystemSpec) -> Self {
        let ham = Hamiltonian::new(basis, system);
        let n = basis.dim();
        let mut free_vecs = RMat::zeros(n, n);
        let mut pairs: Vec<(f64, nalgebra::DVector<f64>, usize)> = Vec::with_capacity(n);
        for parity in 0..2 {
            let idx: Vec<usize> = (parity..n).step_by(2).collect();
            let block = RMat::from_fn(idx.len(), idx.len(), |a, b| ham.free()[(idx[a], idx[b])]);
            let (vals, vecs) = eigh_real(&block);
            for (k, &e) in vals.iter().enumerate() {
                let mut full = nalgebra::DVector::<f64>::zeros(n);
                for (a, &row) in idx.iter().enumerate() {
                    full[row] = vecs[(a, k)];
                }
                pairs.push((e, full, parity));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let shift = pairs[0].0;
        let free_energies: Vec<f64> = pairs.iter().map(|p| p.0 - shift).collect();
        for (k, p) in pairs.iter().enumerate() {
            free_vecs.set_column(k, &p.1);
        }
        let mut x_free = free_vecs.transpose() * ham.x() * &free_vecs;
        // parity selection rule: same-parity blocks vanish identically
        for a in 0..n {
            for b in 0..n {
                if pairs[a].2 == pairs[b].2 {
                    x_free[(a, b)] = 0.0;
                }
            }
        }
        let x_free = (&x_free + x_free.transpose()) * 0.5;
        CdEngine {
            hbar: basis.hbar(),
            free_vecs,
            free_energies,
            shift,
            x_free,
            gap_floor: DEFAULT_GAP_FLOOR,
        }
    }

    pub fn with_gap_floor(mut self, gap_floor: f64) -> Self {
        self.gap_floor = gap_floor;
        self
    }

    pub fn frame(&self, alpha: f64) -> RealFrame {
        let n = self.free_energies.len();
        let mut a = &self.x_free * alpha;
        for i in 0..n {
            a[(i, i)] += self.free_energies[i];
        }
        let (vals, w) = jacobi_eigh(&a, 60);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&p, &q| vals[p].total_cmp(&vals[q]));
        let mut ws = RMat::zeros(n, n);
        for (c, &k) in order.iter().enumerate() {
            ws.set_column(c, &w.column(k));
        }
        let x_frame = ws.transpose() * &self.x_free * &ws;
        RealFrame {
            energies: order.iter().map(|&k| vals[k] + self.shift).collect(),
            states: &self.free_vecs * ws,
            x_frame,
        }
    }

    /// CD term for `Ḣ0 = α̇ x'`.
    pub fn term(&self, alpha: f64, alpha_dot: f64) -> Result<CdTerm> {
        let frame = self.frame(alpha);
        let n = frame.energies.len();
        let e = &frame.energies;
        let bare_gap = e[1] - e[0];
        let mut s = RMat::zeros(n, n);
        let mut min_gap = f64::INFINITY;
        if alpha_dot != 0.0 {
            for i in 0..n {
                for j in (i + 1)..n {
                    let gap = e[j] - e[i];
                    let coupling = alpha_dot * frame.x_frame[(i, j)];
                    if gap.abs() <= self.gap_floor {
                        if coupling.abs() > COUPLING_FLOOR {
                            return Err(Error::DegenerateGap { i, j, gap: gap.abs(), coupling: coupling.abs() });
                        }
                        continue;
                    }
                    min_gap = min_gap.min(gap.abs());
                    let v = self.hbar * coupling / gap;
                    s[(i, j)] = v;
                    s[(j, i)] = -v;
                }
            }
        } else {
            min_gap = (1..n).map(|k| e[k] - e[k - 1]).fold(f64::INFINITY, f64::min);
        }
        let h01 = s[(0, 1)];
        let pair_gap = (bare_gap * bare_gap + 4.0 * h01 * h01).sqrt();
        let s = &frame.states * s * frame.states.transpose();
        let s = (&s - s.transpose()) * 0.5;
        Ok(CdTerm { s, min_gap, pair_gap, bare_gap })
    }

    pub fn term_for(&self, protocol: &ProtocolSpec, t: f64) -> Result<CdTerm> {
        let (alpha, _) = control_values(protocol, t)?;
        let (alpha_dot, _) = control_rates(protocol, t)?;
        self.term(alpha, alpha_dot)
    }
}

pub fn sta_cost_profile(
    protocol: &ProtocolSpec,
    system: &SystemSpec,
    basis: &SpinBasis,
    times: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if !protocol.kind.is_quantum() {
        return Err(Error::InvalidParameter {
            field: "protocol.kind",
            reason: "cost profile requires a quantum schedule".into(),
        });
    }
    let engine = CdEngine::new(basis, system);
    times
        .iter()
        .map(|&t| engine.term_for(protocol, t).map(|c| (t, c.cost())))
        .collect()
}
