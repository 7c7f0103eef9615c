//! Small statistics toolkit: moments, least squares, Kolmogorov–Smirnov.

use serde::Serialize;

use crate::scalar::Real;

/// Sample mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSe<T> {
    pub mean: T,
    pub stderr: T,
    pub n: usize,
}

pub fn mean_se<T: Real>(xs: &[T]) -> MeanSe<T> {
    let n = xs.len();
    if n == 0 {
        return MeanSe { mean: T::nan(), stderr: T::nan(), n };
    }
    let nf = T::nat(n);
    let mean = xs.iter().copied().sum::<T>() / nf;
    if n < 2 {
        return MeanSe { mean, stderr: T::zero(), n };
    }
    let ss: T = xs.iter().map(|&x| (x - mean) * (x - mean)).sum();
    let var = ss / (nf - T::one());
    MeanSe { mean, stderr: (var / nf).sqrt(), n }
}

pub fn variance<T: Real>(xs: &[T]) -> T {
    let m = mean_se(xs);
    m.stderr * m.stderr * T::nat(xs.len())
}

/// Median (average of the middle pair for even length). NaN-free input assumed.
pub fn median<T: Real>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::nan();
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("median of NaN"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        T::lit(0.5) * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Ordinary least squares line `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit<T> {
    pub slope: T,
    pub intercept: T,
    pub r_squared: T,
    /// Standard error of the slope (zero for exact fits or two points).
    pub slope_stderr: T,
}

pub fn ols<T: Real>(xs: &[T], ys: &[T]) -> LinearFit<T> {
    assert_eq!(xs.len(), ys.len(), "ols: length mismatch");
    let n = T::nat(xs.len());
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    let mut syy = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        sxx = sxx + (x - mx) * (x - mx);
        sxy = sxy + (x - mx) * (y - my);
        syy = syy + (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: T = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let r_squared = if syy > T::zero() { T::one() - sse / syy } else { T::one() };
    let dof = xs.len().saturating_sub(2);
    let slope_stderr = if dof > 0 { (sse / T::nat(dof) / sxx).sqrt() } else { T::zero() };
    LinearFit { slope, intercept, r_squared, slope_stderr }
}

/// One-sample KS statistic of `xs` against the continuous CDF `cdf`.
pub fn ks_statistic<T: Real>(xs: &[T], cdf: impl Fn(T) -> T) -> T {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("KS on NaN"));
    let n = T::nat(v.len());
    let mut d = T::zero();
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        let lo = T::nat(i) / n;
        let hi = T::nat(i + 1) / n;
        d = d.max(f - lo).max(hi - f);
    }
    d
}

/// Two-sample KS statistic.
pub fn ks_two_sample<T: Real>(a: &[T], b: &[T]) -> T {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).expect("KS on NaN"));
    b.sort_by(|x, y| x.partial_cmp(y).expect("KS on NaN"));
    let (na, nb) = (T::nat(a.len()), T::nat(b.len()));
    let (mut i, mut j) = (0, 0);
    let mut d = T::zero();
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((T::nat(i) / na - T::nat(j) / nb).abs());
    }
    d
}

const KS_C_ALPHA_1PCT: f64 = 1.627_6;

/// Asymptotic 1% critical value of the one-sample KS statistic
/// (with the Stephens small-sample correction).
pub fn ks_critical_1pct(n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    KS_C_ALPHA_1PCT / (sn + 0.12 + 0.11 / sn)
}

/// Asymptotic 1% critical value of the two-sample KS statistic.
pub fn ks_two_sample_critical_1pct(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    KS_C_ALPHA_1PCT * ((n + m) / (n * m)).sqrt()
}

/// `n` log-equispaced values from `lo` to `hi` inclusive.
pub fn log_space<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    assert!(n >= 2 && lo > T::zero() && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else if i == 0 {
                lo
            } else {
                (a + (b - a) * T::nat(i) / T::nat(n - 1)).exp()
            }
        })
        .collect()
}
