//! Adaptive Gauss–Kronrod (7/15) quadrature and a bracketing root finder.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (k, &x) in XGK.iter().take(7).enumerate() {
        let s = f(c - h * x) + f(c + h * x);
        kron += WGK[k] * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol` by recursive
/// bisection. Only interior nodes are sampled, so integrable endpoint
/// singularities are tolerated.
pub(crate) fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (v, e) = gk15(&f, a, b);
    // below this, panel error estimates are dominated by round-off
    let floor = 64.0 * f64::EPSILON * v.abs();
    refine(&f, a, b, v, e, tol, floor, 0)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, v: f64, e: f64, tol: f64, floor: f64, depth: u32) -> f64 {
    if e <= tol.max(floor) || depth >= 60 || (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
        return v;
    }
    let m = 0.5 * (a + b);
    let (vl, el) = gk15(f, a, m);
    let (vr, er) = gk15(f, m, b);
    refine(f, a, m, vl, el, 0.5 * tol, floor, depth + 1) + refine(f, m, b, vr, er, 0.5 * tol, floor, depth + 1)
}

/// Bisection for a sign change of `f` on `[lo, hi]`; returns the midpoint of
/// the final bracket once narrower than `xtol`.
pub(crate) fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Option<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol || mid == lo || mid == hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
