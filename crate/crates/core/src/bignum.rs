//! Arbitrary-precision complex numbers with absolute error bounds.
//!
//! Floating arithmetic is done with [`astro_float::BigFloat`]. Error bounds are
//! tracked separately as [`LogBound`], a base-2 logarithm of an upper bound,
//! so that bounds far below `f64::MIN_POSITIVE` stay representable.

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use num_bigint::{BigInt, BigUint, Sign as IntSign};
use num_rational::BigRational;
use num_traits::{Signed, Zero};

pub const RM: RoundingMode = RoundingMode::ToEven;

/// Slack (in log2 units) added on every bound operation so that f64 rounding
/// inside the bound arithmetic never makes a bound too small.
const SLACK: f64 = 1e-9;

/// Unit roundoff used for error accounting at working precision `p`.
///
/// Round-to-nearest gives `2^-p`; we charge `2^(2-p)` so that library
/// transcendentals with a final ulp of slop are also covered.
pub fn unit_roundoff(p: usize) -> LogBound {
    LogBound::pow2(2.0 - p as f64)
}

/// Upper bound stored as `log2(bound)`; `-inf` encodes zero.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LogBound(f64);

impl LogBound {
    pub const ZERO: LogBound = LogBound(f64::NEG_INFINITY);

    pub fn pow2(e: f64) -> Self {
        LogBound(e)
    }

    pub fn from_log2(l: f64) -> Self {
        LogBound(l + SLACK)
    }

    /// Natural-log input, as produced by tail models.
    pub fn from_ln(l: f64) -> Self {
        LogBound(l / std::f64::consts::LN_2 + SLACK)
    }

    pub fn from_f64(x: f64) -> Self {
        assert!(x >= 0.0 && !x.is_nan(), "bound must be nonnegative");
        if x == 0.0 {
            Self::ZERO
        } else {
            LogBound(x.log2() + SLACK)
        }
    }

    /// Upper bound on `|x|`.
    pub fn of(x: &BigFloat) -> Self {
        if x.is_zero() {
            return Self::ZERO;
        }
        let (words, _, _, e, _) = x.as_raw_parts().expect("finite value");
        let top = *words.last().unwrap_or(&0) as f64 + 1.0;
        LogBound(e as f64 + top.log2() - 64.0 + SLACK)
    }

    pub fn log2(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// Saturating conversion; only for diagnostics.
    pub fn to_f64(self) -> f64 {
        self.0.exp2()
    }

    pub fn add(self, other: Self) -> Self {
        let (hi, lo) = if self.0 >= other.0 {
            (self.0, other.0)
        } else {
            (other.0, self.0)
        };
        if lo == f64::NEG_INFINITY {
            return LogBound(hi);
        }
        LogBound(hi + (1.0 + (lo - hi).exp2()).log2() + SLACK)
    }

    pub fn mul(self, other: Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::ZERO;
        }
        LogBound(self.0 + other.0 + SLACK)
    }

    pub fn scale(self, k: f64) -> Self {
        self.mul(LogBound::from_f64(k))
    }

    /// Bound on `sqrt(x^2 + y^2)` from bounds on `|x|` and `|y|`.
    pub fn hypot(self, other: Self) -> Self {
        let (hi, lo) = if self.0 >= other.0 {
            (self.0, other.0)
        } else {
            (other.0, self.0)
        };
        if lo == f64::NEG_INFINITY {
            return LogBound(hi);
        }
        LogBound(hi + 0.5 * (1.0 + (2.0 * (lo - hi)).exp2()).log2() + SLACK)
    }

    /// Whether the bound is a finite number (not `+inf` or NaN).
    pub fn is_finite(self) -> bool {
        self.0 < f64::INFINITY
    }

    pub fn max(self, other: Self) -> Self {
        if self.0 >= other.0 {
            self
        } else {
            other
        }
    }
}

impl std::iter::Sum for LogBound {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(LogBound::ZERO, LogBound::add)
    }
}

pub fn consts() -> Consts {
    Consts::new().expect("constants cache")
}

pub fn pi(p: usize, cc: &mut Consts) -> BigFloat {
    cc.pi(p, RM)
}

pub fn from_i64(x: i64, p: usize) -> BigFloat {
    BigFloat::from_i64(x, p.max(64))
}

/// Exact conversion (precision grows to hold every bit).
pub fn from_bigint(x: &BigInt) -> BigFloat {
    let (sign, digits) = x.to_u64_digits();
    if digits.is_empty() {
        return BigFloat::from_word(0, 64);
    }
    let s = if sign == IntSign::Minus {
        Sign::Neg
    } else {
        Sign::Pos
    };
    let e = (digits.len() * 64) as i32;
    BigFloat::from_words(&digits, s, e)
}

/// `num/den` rounded to precision `p`; relative error at most `2 u(p)`.
pub fn from_rational(x: &BigRational, p: usize) -> BigFloat {
    let num = from_bigint(x.numer());
    if x.denom() == &BigInt::from(1) {
        let mut v = num;
        v.set_precision(p.max(64), RM).expect("precision");
        return v;
    }
    let den = from_bigint(x.denom());
    num.div(&den, p, RM)
}

/// Exact conversion of an integral float to `BigInt`. Fractional bits are truncated.
pub fn to_bigint_trunc(x: &BigFloat) -> BigInt {
    if x.is_zero() {
        return BigInt::zero();
    }
    let (words, _, sign, e, _) = x.as_raw_parts().expect("finite value");
    let mag = BigUint::from_slice(
        &words
            .iter()
            .flat_map(|w| [*w as u32, (*w >> 32) as u32])
            .collect::<Vec<_>>(),
    );
    let shift = e as i64 - 64 * words.len() as i64;
    let mag = if shift >= 0 {
        mag << shift as usize
    } else {
        mag >> (-shift) as usize
    };
    let s = if sign == Sign::Neg {
        IntSign::Minus
    } else {
        IntSign::Plus
    };
    BigInt::from_biguint(s, mag)
}

/// Exact `x + y`. The backend's full-precision ops mishandle zero operands.
pub fn exact_add(x: &BigFloat, y: &BigFloat) -> BigFloat {
    if y.is_zero() {
        x.clone()
    } else if x.is_zero() {
        y.clone()
    } else {
        x.add_full_prec(y)
    }
}

/// Exact `x - y`.
pub fn exact_sub(x: &BigFloat, y: &BigFloat) -> BigFloat {
    exact_add(x, &y.neg())
}

/// Exact `x - floor(x)`.
pub fn frac(x: &BigFloat) -> BigFloat {
    exact_sub(x, &x.floor())
}

/// Nearest integer to `x` and the distance `|x - n|` (exact).
pub fn round_nearest(x: &BigFloat) -> (BigInt, BigFloat) {
    let half = BigFloat::from_f64(0.5, 64);
    let n = exact_add(x, &half).floor();
    let dist = exact_sub(x, &n).abs();
    (to_bigint_trunc(&n), dist)
}

/// Lossy conversion for display and heuristics.
pub fn to_f64(x: &BigFloat) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let (words, _, sign, e, _) = x.as_raw_parts().expect("finite value");
    let top = *words.last().unwrap() as f64;
    let v = top * (e as f64 - 64.0).exp2();
    if sign == Sign::Neg {
        -v
    } else {
        v
    }
}

/// Decimal rendering with `digits` digits after the point, rounded to nearest.
pub fn to_decimal(x: &BigFloat, digits: usize) -> String {
    let scale = from_bigint(&BigInt::from(10u32).pow(digits as u32));
    if x.is_zero() {
        return if digits == 0 {
            "0".into()
        } else {
            format!("0.{}", "0".repeat(digits))
        };
    }
    let scaled = x.mul_full_prec(&scale);
    let (n, _) = round_nearest(&scaled);
    let neg = n.is_negative();
    let s = n.abs().to_string();
    let s = if s.len() <= digits {
        format!("{}{}", "0".repeat(digits + 1 - s.len()), s)
    } else {
        s
    };
    let (int, frac) = s.split_at(s.len() - digits);
    let sign = if neg { "-" } else { "" };
    if digits == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

/// Complex number with `BigFloat` components.
#[derive(Clone, Debug)]
pub struct Complex {
    pub re: BigFloat,
    pub im: BigFloat,
}

impl Complex {
    pub fn new(re: BigFloat, im: BigFloat) -> Self {
        Complex { re, im }
    }

    pub fn zero() -> Self {
        Complex::real(BigFloat::from_word(0, 64))
    }

    pub fn real(re: BigFloat) -> Self {
        Complex {
            re,
            im: BigFloat::from_word(0, 64),
        }
    }

    pub fn add(&self, o: &Self, p: usize) -> Self {
        Complex::new(self.re.add(&o.re, p, RM), self.im.add(&o.im, p, RM))
    }

    pub fn sub(&self, o: &Self, p: usize) -> Self {
        Complex::new(self.re.sub(&o.re, p, RM), self.im.sub(&o.im, p, RM))
    }

    pub fn mul(&self, o: &Self, p: usize) -> Self {
        let re = self
            .re
            .mul(&o.re, p, RM)
            .sub(&self.im.mul(&o.im, p, RM), p, RM);
        let im = self
            .re
            .mul(&o.im, p, RM)
            .add(&self.im.mul(&o.re, p, RM), p, RM);
        Complex::new(re, im)
    }

    pub fn mul_real(&self, r: &BigFloat, p: usize) -> Self {
        Complex::new(self.re.mul(r, p, RM), self.im.mul(r, p, RM))
    }

    pub fn neg(&self) -> Self {
        Complex::new(self.re.neg(), self.im.neg())
    }

    pub fn conj(&self) -> Self {
        Complex::new(self.re.clone(), self.im.neg())
    }

    /// Upper bound on the modulus.
    pub fn abs_bound(&self) -> LogBound {
        LogBound::of(&self.re).hypot(LogBound::of(&self.im))
    }

    pub fn to_f64_pair(&self) -> (f64, f64) {
        (to_f64(&self.re), to_f64(&self.im))
    }
}

/// Whether an error bound rests on the tail model alone or also on an
/// agreement check between two truncation orders.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Certification {
    Heuristic,
    DoubleChecked,
}

/// A complex value with an absolute error bound.
#[derive(Clone, Debug)]
pub struct CertifiedValue {
    pub value: Complex,
    pub err: LogBound,
    pub certified: Certification,
}

impl CertifiedValue {
    pub fn exact(value: Complex) -> Self {
        CertifiedValue {
            value,
            err: LogBound::ZERO,
            certified: Certification::DoubleChecked,
        }
    }

    pub fn with_err(value: Complex, err: LogBound) -> Self {
        CertifiedValue {
            value,
            err,
            certified: Certification::DoubleChecked,
        }
    }

    pub fn zero() -> Self {
        Self::exact(Complex::zero())
    }

    fn weaker(&self, o: &Self) -> Certification {
        self.certified.min(o.certified)
    }

    pub fn add(&self, o: &Self, p: usize) -> Self {
        let value = self.value.add(&o.value, p);
        let err = self
            .err
            .add(o.err)
            .add(unit_roundoff(p).mul(value.abs_bound()));
        CertifiedValue {
            value,
            err,
            certified: self.weaker(o),
        }
    }

    pub fn sub(&self, o: &Self, p: usize) -> Self {
        self.add(&o.neg(), p)
    }

    pub fn neg(&self) -> Self {
        CertifiedValue {
            value: self.value.neg(),
            err: self.err,
            certified: self.certified,
        }
    }

    pub fn mul(&self, o: &Self, p: usize) -> Self {
        let value = self.value.mul(&o.value, p);
        let (mx, my) = (self.value.abs_bound(), o.value.abs_bound());
        let err = mx
            .mul(o.err)
            .add(my.mul(self.err))
            .add(self.err.mul(o.err))
            .add(unit_roundoff(p).scale(5.0).mul(mx).mul(my));
        CertifiedValue {
            value,
            err,
            certified: self.weaker(o),
        }
    }

    /// Multiplication by an exact real.
    pub fn mul_exact_real(&self, r: &BigFloat, p: usize) -> Self {
        let value = self.value.mul_real(r, p);
        let err = self
            .err
            .mul(LogBound::of(r))
            .add(unit_roundoff(p).mul(value.abs_bound()));
        CertifiedValue {
            value,
            err,
            certified: self.certified,
        }
    }

    /// Whether `|value - other| <= err + other.err`, both errors finite.
    pub fn overlaps(&self, other: &Self, p: usize) -> bool {
        if !self.err.is_finite() || !other.err.is_finite() {
            return false;
        }
        let d = self.value.sub(&other.value, p);
        let diff = d.abs_bound();
        let rounding = unit_roundoff(p).mul(diff);
        diff.log2() <= self.err.add(other.err).add(rounding).log2()
    }

    /// Absolute error as a float (saturating).
    pub fn err_f64(&self) -> f64 {
        self.err.to_f64()
    }
}
