//! Single-step schemes with embedded error estimates.

use nalgebra::{DMatrix, DVector};

/// Autonomous vector field with an optional Jacobian.
pub(crate) trait System {
    fn dim(&self) -> usize;
    fn rhs(&self, y: &[f64], out: &mut [f64]);
    fn jacobian(&self, y: &[f64]) -> DMatrix<f64>;
}

/// Result of one trial step: new state and scaled error norm (accept iff ≤ 1).
pub(crate) struct Trial {
    pub y: Vec<f64>,
    pub err: f64,
}

pub(crate) fn error_norm(y0: &[f64], y1: &[f64], e: &[f64], rel: f64, abs: f64) -> f64 {
    let n = y0.len().max(1) as f64;
    let s: f64 = y0
        .iter()
        .zip(y1)
        .zip(e)
        .map(|((a, b), e)| {
            let sc = abs + rel * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

pub(crate) fn dopri5<S: System + ?Sized>(sys: &S, y: &[f64], h: f64, rel: f64, abs: f64) -> Trial {
    let n = sys.dim();
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    sys.rhs(y, &mut k[0]);
    for s in 1..7 {
        debug_assert!(C[s] >= 0.0);
        for i in 0..n {
            let mut acc = y[i];
            for (j, kj) in k.iter().enumerate().take(s) {
                acc += h * A[s][j] * kj[i];
            }
            tmp[i] = acc;
        }
        let (_, rest) = k.split_at_mut(s);
        sys.rhs(&tmp, &mut rest[0]);
    }
    let mut y1 = vec![0.0; n];
    let mut e = vec![0.0; n];
    for i in 0..n {
        let mut acc = y[i];
        let mut err = 0.0;
        for s in 0..7 {
            acc += h * B[s] * k[s][i];
            err += h * E[s] * k[s][i];
        }
        y1[i] = acc;
        e[i] = err;
    }
    let err = error_norm(y, &y1, &e, rel, abs);
    Trial { y: y1, err }
}

/// Conservative bound on the negative real stability interval of [`dopri5`].
pub(crate) const DOPRI_STABILITY: f64 = 3.0;

/// Gershgorin bound on the spectral radius.
pub(crate) fn gershgorin(j: &DMatrix<f64>) -> f64 {
    j.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Two-stage L-stable Rosenbrock scheme (order 2) with an embedded
/// linearly-implicit Euler solution for error control.
pub(crate) fn ros2<S: System + ?Sized>(sys: &S, y: &[f64], h: f64, rel: f64, abs: f64) -> Trial {
    let n = sys.dim();
    let gamma = 1.0 + std::f64::consts::FRAC_1_SQRT_2;
    let j = sys.jacobian(y);
    let m = DMatrix::<f64>::identity(n, n) - j * (gamma * h);
    let lu = m.lu();
    let mut f0 = vec![0.0; n];
    sys.rhs(y, &mut f0);
    let k1 = match lu.solve(&DVector::from_vec(f0)) {
        Some(v) => v,
        None => return Trial { y: y.to_vec(), err: f64::INFINITY },
    };
    let y_mid: Vec<f64> = (0..n).map(|i| y[i] + h * k1[i]).collect();
    let mut f1 = vec![0.0; n];
    sys.rhs(&y_mid, &mut f1);
    let rhs2 = DVector::from_vec(f1) - &k1 * 2.0;
    let k2 = match lu.solve(&rhs2) {
        Some(v) => v,
        None => return Trial { y: y.to_vec(), err: f64::INFINITY },
    };
    let y1: Vec<f64> = (0..n).map(|i| y[i] + h * (1.5 * k1[i] + 0.5 * k2[i])).collect();
    let e: Vec<f64> = (0..n).map(|i| 0.5 * h * (k1[i] + k2[i])).collect();
    let err = error_norm(y, &y1, &e, rel, abs);
    Trial { y: y1, err }
}
