//! Special functions: exponential integral, gamma family, normal CDF.

use crate::scalar::Real;

const MAX_ITER: usize = 500;

/// Exponential integral E₁(x) = ∫ₓ^∞ e^{-u}/u du for x > 0.
///
/// Power series below 1, Lentz continued fraction above. Returns `+∞` at 0
/// and `NaN` for negative input.
pub fn exp_integral_e1<T: Real>(x: T) -> T {
    if x.is_nan() || x < T::zero() {
        return T::nan();
    }
    if x == T::zero() {
        return T::infinity();
    }
    if x < T::one() {
        // E1(x) = -γ - ln x - Σ_{k≥1} (-x)^k / (k k!)
        let mut sum = T::zero();
        let mut term = T::one();
        for k in 1..MAX_ITER {
            let kf = T::nat(k);
            term = term * (-x) / kf;
            let contrib = term / kf;
            sum = sum + contrib;
            if contrib.abs() <= sum.abs() * T::EPS {
                break;
            }
        }
        -T::EULER_GAMMA - x.ln() - sum
    } else {
        if x > T::lit(700.0) {
            return T::zero();
        }
        // E1(x) = e^{-x} / (x + 1 - 1/(x + 3 - 4/(x + 5 - ...)))
        let tiny = T::min_positive_value() / T::EPS;
        let mut b = x + T::one();
        let mut c = T::one() / tiny;
        let mut d = T::one() / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let fi = T::nat(i);
            let a = -fi * fi;
            b = b + T::lit(2.0);
            d = T::one() / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h = h * del;
            if (del - T::one()).abs() <= T::EPS {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma<T: Real>(x: T) -> T {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < T::lit(0.5) {
        // reflection
        let pi = T::PI();
        return (pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut a = T::lit(COEF[0]);
    let t = x + T::lit(7.5);
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a = a + T::lit(c) / (x + T::nat(i));
    }
    T::lit(0.5) * (T::lit(2.0) * T::PI()).ln() + (x + T::lit(0.5)) * t.ln() - t + a.ln()
}

pub fn gamma<T: Real>(x: T) -> T {
    ln_gamma(x).exp()
}

/// Regularized lower incomplete gamma P(a, x), a > 0, x ≥ 0.
pub fn gamma_p<T: Real>(a: T, x: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    if x.is_infinite() {
        return T::one();
    }
    if x < a + T::one() {
        gamma_series(a, x)
    } else {
        T::one() - gamma_cf(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
pub fn gamma_q<T: Real>(a: T, x: T) -> T {
    if x <= T::zero() {
        return T::one();
    }
    if x.is_infinite() {
        return T::zero();
    }
    if x < a + T::one() {
        T::one() - gamma_series(a, x)
    } else {
        gamma_cf(a, x)
    }
}

fn gamma_series<T: Real>(a: T, x: T) -> T {
    let mut ap = a;
    let mut del = T::one() / a;
    let mut sum = del;
    for _ in 0..MAX_ITER {
        ap = ap + T::one();
        del = del * x / ap;
        sum = sum + del;
        if del.abs() < sum.abs() * T::EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_cf<T: Real>(a: T, x: T) -> T {
    let tiny = T::min_positive_value() / T::EPS;
    let mut b = x + T::one() - a;
    let mut c = T::one() / tiny;
    let mut d = T::one() / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let fi = T::nat(i);
        let an = -fi * (fi - a);
        b = b + T::lit(2.0);
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = T::one() / d;
        let del = d * c;
        h = h * del;
        if (del - T::one()).abs() <= T::EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Complementary error function via Q(1/2, x²).
pub fn erfc<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    if x >= T::zero() {
        gamma_q(half, x * x)
    } else {
        T::lit(2.0) - gamma_q(half, x * x)
    }
}

/// Standard normal CDF.
pub fn normal_cdf<T: Real>(z: T) -> T {
    T::lit(0.5) * erfc(-z / T::SQRT_2())
}
