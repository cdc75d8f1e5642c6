//! Sturm-sequence bisection for symmetric tridiagonal matrices with a
//! constant off-diagonal.

/// Number of eigenvalues strictly below `x`.
fn count_below(diag: &[f64], off: f64, x: f64) -> usize {
    let off2 = off * off;
    let mut count = 0;
    let mut q = 1.0_f64;
    for (i, &d) in diag.iter().enumerate() {
        q = if i == 0 { d - x } else { d - x - off2 / q };
        if q == 0.0 {
            q = -f64::EPSILON * (d.abs() + off.abs() + x.abs()).max(1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Lowest `count` eigenvalues, ascending.
pub fn lowest_eigenvalues(diag: &[f64], off: f64, count: usize) -> Vec<f64> {
    let n = diag.len();
    let count = count.min(n);
    // Gershgorin bounds
    let lo = diag.iter().fold(f64::INFINITY, |a, &d| a.min(d)) - 2.0 * off.abs() - 1.0;
    let hi = diag.iter().fold(f64::NEG_INFINITY, |a, &d| a.max(d)) + 2.0 * off.abs() + 1.0;
    let mut out = Vec::with_capacity(count);
    let mut lower = lo;
    for k in 0..count {
        let (mut a, mut b) = (lower, hi);
        while b - a > 1e-14 * (a.abs().max(b.abs()).max(1.0)) {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if count_below(diag, off, mid) > k {
                b = mid;
            } else {
                a = mid;
            }
        }
        let e = 0.5 * (a + b);
        out.push(e);
        lower = a;
    }
    out
}
