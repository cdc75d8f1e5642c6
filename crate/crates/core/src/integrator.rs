//! Dormand-Prince 5(4) with FSAL, breakpoints and per-step callbacks.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b*, the embedded 4th-order error weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Clone, Copy, Debug)]
pub struct StepControl {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub initial_step: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Integrates `y' = f(t, y)` from `t0` to `t1`, landing exactly on every
/// breakpoint inside the interval. `on_step(t, y, f(t, y))` runs after each
/// accepted step and may modify `y` in place; the following step then
/// restarts its derivative.
pub fn integrate<F, S>(
    mut f: F,
    t0: f64,
    t1: f64,
    y: &mut [f64],
    breakpoints: &[f64],
    control: &StepControl,
    mut on_step: S,
) -> Result<StepStats>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    S: FnMut(f64, &mut [f64], &[f64]) -> Result<bool>,
{
    let n = y.len();
    let mut stops: Vec<f64> = breakpoints.iter().copied().filter(|&b| b > t0 && b < t1).collect();
    stops.push(t1);
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut stats = StepStats::default();

    let mut t = t0;
    f(t, y, &mut k1)?;
    stats.evaluations += 1;
    let mut h = control
        .initial_step
        .unwrap_or_else(|| initial_step(y, &k1, control))
        .min(control.max_step);
    let mut stop_idx = 0;
    let mut fac_prev_reject = false;

    while stop_idx < stops.len() {
        let stop = stops[stop_idx];
        let remaining = stop - t;
        let mut lands = false;
        let mut step = h;
        if step >= remaining * (1.0 - 1e-12) {
            step = remaining;
            lands = true;
        } else if step > 0.5 * remaining {
            // split the tail evenly instead of leaving a sliver
            step = 0.5 * remaining;
        }
        if step < control.min_step {
            return Err(Error::StepUnderflow { t, step });
        }

        for i in 0..n {
            tmp[i] = y[i] + step * A21 * k1[i];
        }
        f(t + C2 * step, &tmp, &mut k2)?;
        for i in 0..n {
            tmp[i] = y[i] + step * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * step, &tmp, &mut k3)?;
        for i in 0..n {
            tmp[i] = y[i] + step * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * step, &tmp, &mut k4)?;
        for i in 0..n {
            tmp[i] = y[i] + step * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * step, &tmp, &mut k5)?;
        for i in 0..n {
            tmp[i] = y[i] + step * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_next = if lands { stop } else { t + step };
        f(t_next, &tmp, &mut k6)?;
        for i in 0..n {
            y_new[i] = y[i] + step * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        f(t_next, &y_new, &mut k7)?;
        stats.evaluations += 6;

        let mut err = 0.0;
        for i in 0..n {
            let e = step * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = control.abs_tol + control.rel_tol * y[i].abs().max(y_new[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() {
            stats.rejected += 1;
            h = step * 0.1;
            fac_prev_reject = true;
            continue;
        }

        if err <= 1.0 {
            stats.accepted += 1;
            t = t_next;
            y.copy_from_slice(&y_new);
            std::mem::swap(&mut k1, &mut k7);
            let modified = on_step(t, y, &k1)?;
            if modified {
                f(t, y, &mut k1)?;
                stats.evaluations += 1;
            }
            if lands {
                stop_idx += 1;
            }
            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 5.0);
            if fac_prev_reject {
                fac = fac.min(1.0);
            }
            fac_prev_reject = false;
            h = (step * fac).min(control.max_step);
        } else {
            stats.rejected += 1;
            let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            h = step * fac;
            fac_prev_reject = true;
        }
    }
    Ok(stats)
}

fn initial_step(y: &[f64], dy: &[f64], control: &StepControl) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (a, b) in y.iter().zip(dy) {
        let sc = control.abs_tol + control.rel_tol * a.abs();
        d0 += (a / sc) * (a / sc);
        d1 += (b / sc) * (b / sc);
    }
    let n = y.len() as f64;
    let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0.max(control.min_step * 10.0)
}
