//! Signed log-domain scalar.
//!
//! Internally a value is `sign * m * 2^e` with `m` in `[1, 2)` and an unbounded
//! integer exponent, so products and sums keep full double precision while the
//! range is effectively unlimited. The public view is `(sign, log_magnitude)`.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::f64::consts::LN_2;
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Repr", from = "Repr")]
pub struct LogReal {
    sign: i8,
    mant: f64,
    exp: i64,
}

#[derive(Serialize, Deserialize)]
struct Repr {
    sign: i8,
    log_magnitude: f64,
}

impl From<LogReal> for Repr {
    fn from(x: LogReal) -> Repr {
        Repr { sign: x.sign, log_magnitude: x.log_magnitude() }
    }
}

impl From<Repr> for LogReal {
    fn from(r: Repr) -> LogReal {
        LogReal::from_parts(r.sign, r.log_magnitude)
    }
}

/// `2^e` as a finite product of exactly representable powers.
fn scale2(x: f64, e: i64) -> f64 {
    if e > 2100 {
        return x * f64::INFINITY;
    }
    if e < -2200 {
        return x * 0.0;
    }
    let e = e as i32;
    let h = e / 2;
    x * 2f64.powi(h) * 2f64.powi(e - h)
}

/// Split a finite nonzero `x` into `(m, e)` with `|x| = m 2^e`, `m` in `[1, 2)`.
fn frexp(x: f64) -> (f64, i64) {
    let mut a = x.abs();
    let mut shift = 0;
    if a < f64::MIN_POSITIVE {
        a *= 2f64.powi(64);
        shift = -64;
    }
    let bits = a.to_bits();
    let e = ((bits >> 52) & 0x7ff) as i64 - 1023;
    let m = f64::from_bits((bits & !(0x7ff << 52)) | (1023 << 52));
    (m, e + shift)
}

impl LogReal {
    pub const ZERO: LogReal = LogReal { sign: 0, mant: 0.0, exp: 0 };
    pub const ONE: LogReal = LogReal { sign: 1, mant: 1.0, exp: 0 };

    fn normalized(sign: i8, m: f64, e: i64) -> LogReal {
        if sign == 0 || m == 0.0 {
            return LogReal::ZERO;
        }
        let (mm, ee) = frexp(m);
        LogReal { sign: sign * (m.signum() as i8), mant: mm, exp: e + ee }
    }

    /// Positive value `exp(ln)`.
    pub fn from_ln(ln: f64) -> Self {
        if ln == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        assert!(ln.is_finite(), "from_ln of a non-finite log: {ln}");
        let e = (ln / LN_2).floor();
        let r = ln - e * LN_2;
        Self::normalized(1, r.exp(), e as i64)
    }

    /// `sign * exp(log_magnitude)`.
    pub fn from_parts(sign: i8, log_magnitude: f64) -> Self {
        if sign == 0 {
            Self::ZERO
        } else {
            let x = Self::from_ln(log_magnitude);
            if sign < 0 {
                -x
            } else {
                x
            }
        }
    }

    pub fn from_f64(x: f64) -> Self {
        assert!(x.is_finite(), "from_f64 of a non-finite value: {x}");
        if x == 0.0 {
            Self::ZERO
        } else {
            let (m, e) = frexp(x);
            LogReal { sign: if x > 0.0 { 1 } else { -1 }, mant: m, exp: e }
        }
    }

    pub fn to_f64(self) -> f64 {
        if self.sign == 0 {
            0.0
        } else {
            f64::from(self.sign) * scale2(self.mant, self.exp)
        }
    }

    pub fn sign(self) -> i8 {
        self.sign
    }

    /// Natural log of `|self|`; `-inf` for zero.
    pub fn log_magnitude(self) -> f64 {
        if self.sign == 0 {
            f64::NEG_INFINITY
        } else {
            self.mant.ln() + self.exp as f64 * LN_2
        }
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    pub fn abs(self) -> Self {
        LogReal { sign: self.sign.abs(), ..self }
    }

    /// `self^e` for nonnegative values.
    pub fn powf(self, e: f64) -> Self {
        assert!(self.sign >= 0, "powf of a negative LogReal");
        if self.sign == 0 {
            return if e == 0.0 { Self::ONE } else { Self::ZERO };
        }
        Self::from_ln(e * self.log_magnitude())
    }

    pub fn powi(self, n: i64) -> Self {
        if n == 0 {
            return Self::ONE;
        }
        let mut base = if n < 0 { self.recip() } else { self };
        let mut k = n.unsigned_abs();
        let mut acc = Self::ONE;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            k >>= 1;
        }
        acc
    }

    pub fn sqrt(self) -> Self {
        assert!(self.sign >= 0, "sqrt of a negative LogReal");
        if self.sign == 0 {
            return Self::ZERO;
        }
        if self.exp % 2 == 0 {
            Self::normalized(1, self.mant.sqrt(), self.exp / 2)
        } else {
            Self::normalized(1, (2.0 * self.mant).sqrt(), (self.exp - 1).div_euclid(2))
        }
    }

    pub fn recip(self) -> Self {
        assert!(self.sign != 0, "reciprocal of zero");
        Self::normalized(self.sign, 1.0 / self.mant, -self.exp)
    }

    /// Ordering by magnitude, ignoring sign.
    pub fn cmp_abs(self, other: Self) -> Ordering {
        match (self.sign == 0, other.sign == 0) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            _ => self.exp.cmp(&other.exp).then(self.mant.total_cmp(&other.mant)),
        }
    }

    /// `|self - other| / |other|` as a plain float.
    pub fn rel_diff(self, other: Self) -> f64 {
        if other.is_zero() {
            return if self.is_zero() { 0.0 } else { f64::INFINITY };
        }
        ((self - other) / other).abs().to_f64()
    }

    /// Larger of two values by signed order.
    pub fn max(self, other: Self) -> Self {
        if (self - other).sign >= 0 {
            self
        } else {
            other
        }
    }
}

impl PartialOrd for LogReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(match (*self - *other).sign {
            1 => Ordering::Greater,
            -1 => Ordering::Less,
            _ => Ordering::Equal,
        })
    }
}

/// Signed sum of two log-domain values.
pub fn log_add(a: LogReal, b: LogReal) -> LogReal {
    if a.sign == 0 {
        return b;
    }
    if b.sign == 0 {
        return a;
    }
    let (big, small) = if a.cmp_abs(b).is_ge() { (a, b) } else { (b, a) };
    let d = big.exp - small.exp;
    if d > 1100 {
        return big;
    }
    let m = f64::from(big.sign) * big.mant + f64::from(small.sign) * scale2(small.mant, -d);
    if m == 0.0 {
        return LogReal::ZERO;
    }
    LogReal::normalized(1, m, big.exp)
}

impl Add for LogReal {
    type Output = LogReal;
    fn add(self, rhs: LogReal) -> LogReal {
        log_add(self, rhs)
    }
}

impl Sub for LogReal {
    type Output = LogReal;
    fn sub(self, rhs: LogReal) -> LogReal {
        log_add(self, -rhs)
    }
}

impl Neg for LogReal {
    type Output = LogReal;
    fn neg(self) -> LogReal {
        LogReal { sign: -self.sign, ..self }
    }
}

impl Mul for LogReal {
    type Output = LogReal;
    fn mul(self, rhs: LogReal) -> LogReal {
        if self.sign == 0 || rhs.sign == 0 {
            LogReal::ZERO
        } else {
            LogReal::normalized(self.sign * rhs.sign, self.mant * rhs.mant, self.exp + rhs.exp)
        }
    }
}

impl Div for LogReal {
    type Output = LogReal;
    fn div(self, rhs: LogReal) -> LogReal {
        assert!(rhs.sign != 0, "division by zero");
        if self.sign == 0 {
            LogReal::ZERO
        } else {
            LogReal::normalized(self.sign * rhs.sign, self.mant / rhs.mant, self.exp - rhs.exp)
        }
    }
}

impl Sum for LogReal {
    fn sum<I: Iterator<Item = LogReal>>(iter: I) -> LogReal {
        log_sum(iter)
    }
}

/// Sum of many values, accumulated relative to the largest exponent.
pub fn log_sum<I: IntoIterator<Item = LogReal>>(items: I) -> LogReal {
    let items: Vec<LogReal> = items.into_iter().filter(|x| !x.is_zero()).collect();
    let Some(e) = items.iter().map(|x| x.exp).max() else {
        return LogReal::ZERO;
    };
    let s: f64 = items.iter().map(|x| f64::from(x.sign) * scale2(x.mant, x.exp - e)).sum();
    LogReal::normalized(1, s, e)
}

/// `ln(sum exp(x_i))` over plain logs.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_integers() {
        let s = LogReal::from_f64(2.0) + LogReal::from_f64(3.0);
        assert_eq!(s.to_f64(), 5.0);
        let d = LogReal::from_f64(2.0) - LogReal::from_f64(3.0);
        assert_eq!(d.to_f64(), -1.0);
    }

    #[test]
    fn zero_is_identity_and_absorbing() {
        let x = LogReal::from_f64(-7.25);
        assert_eq!(x + LogReal::ZERO, x);
        assert_eq!(LogReal::ZERO + x, x);
        assert!((x * LogReal::ZERO).is_zero());
        assert!((x - x).is_zero());
        assert_eq!(LogReal::ZERO.log_magnitude(), f64::NEG_INFINITY);
    }

    #[test]
    fn beyond_native_range() {
        let big = LogReal::from_f64(1e300);
        let sq = big * big;
        let s = sq + sq;
        assert_eq!(s.sign(), 1);
        let want = 600.0 * 10f64.ln() + 2f64.ln();
        assert!((s.log_magnitude() - want).abs() <= 1e-13 * want);
        assert_eq!(s.to_f64(), f64::INFINITY);
    }

    #[test]
    fn round_trip_is_exact() {
        for &x in &[1e-300, -3.5e-12, 0.7, -1.0, 42.0, 9.9e307, 5e-324, -2.2e-310] {
            assert_eq!(LogReal::from_f64(x).to_f64(), x);
        }
    }

    #[test]
    fn ln_views() {
        let x = LogReal::from_ln(-1234.5);
        assert!((x.log_magnitude() + 1234.5).abs() < 1e-12);
        assert_eq!(LogReal::from_parts(-1, 0.0).to_f64(), -1.0);
        assert!((LogReal::from_f64(2.0).sqrt().to_f64() - 2f64.sqrt()).abs() < 1e-16);
        assert!((LogReal::from_f64(8.0).sqrt().to_f64() - 8f64.sqrt()).abs() < 1e-15);
        assert_eq!(LogReal::from_f64(3.0).powi(4).to_f64(), 81.0);
        assert_eq!(LogReal::from_f64(2.0).powi(-2).to_f64(), 0.25);
    }

    #[test]
    fn cancellation_keeps_precision() {
        let b = 1.0 - 1e-10;
        let d = LogReal::ONE - LogReal::from_f64(b);
        assert_eq!(d.to_f64(), 1.0 - b);
    }

    #[test]
    fn sum_of_mixed_signs() {
        let v = [3.0, -1.5, 0.25, -0.75];
        let s: LogReal = v.iter().map(|&x| LogReal::from_f64(x)).sum();
        assert_eq!(s.to_f64(), 1.0);
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn serde_view() {
        let x = LogReal::from_f64(-0.5);
        let j = serde_json::to_string(&x).unwrap();
        assert!(j.contains("\"sign\":-1"));
        let y: LogReal = serde_json::from_str(&j).unwrap();
        assert!((y.to_f64() + 0.5).abs() < 1e-16);
    }
}
