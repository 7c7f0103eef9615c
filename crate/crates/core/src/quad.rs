//! Adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use crate::error::{Error, Result};
use crate::scalar::Real;

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
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy)]
pub struct Quadrature<T> {
    pub value: T,
    pub abs_error: T,
}

fn gk15<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let c = half * (a + b);
    let h = half * (b - a);
    let fc = f(c);
    let mut kron = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = h * T::lit(XGK[j]);
        let s = f(c - dx) + f(c + dx);
        kron = kron + T::lit(WGK[j]) * s;
        if j % 2 == 1 {
            gauss = gauss + T::lit(WG[j / 2]) * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Integrates `f` over `[a, b]` to `max(abs_tol, rel_tol·|I|)`, bisecting the
/// interval with the largest error estimate first.
pub fn integrate<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T, abs_tol: T, rel_tol: T) -> Result<Quadrature<T>> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::NonFinite("quadrature limits".into()));
    }
    if a == b {
        return Ok(Quadrature { value: T::zero(), abs_error: T::zero() });
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut pieces = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if pieces.len() >= MAX_INTERVALS {
            break;
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (lo, hi, pv, pe) = pieces.swap_remove(idx);
        let mid = T::lit(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            pieces.push((lo, hi, pv, pe));
            break;
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        total = total - pv + v1 + v2;
        err = err - pe + e1 + e2;
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
    // re-sum to shed accumulated cancellation
    let value: T = pieces.iter().map(|p| p.2).sum();
    let abs_error: T = pieces.iter().map(|p| p.3).sum();
    if !value.is_finite() {
        return Err(Error::NonFinite("quadrature value".into()));
    }
    Ok(Quadrature { value, abs_error })
}
