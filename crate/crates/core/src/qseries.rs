//! Exact truncated Laurent series in `q` over big rationals.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// `sum_{m >= valuation} coeffs[m - valuation] q^m + O(q^truncation_order)`.
///
/// Coefficients at exponents `>= truncation_order` are unknown, not zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QSeries {
    valuation: i64,
    coeffs: Vec<BigRational>,
    truncation_order: i64,
}

impl QSeries {
    /// Builds a series from coefficients starting at `valuation`; entries at or
    /// beyond `truncation_order` are dropped and leading zeros are stripped.
    pub fn new(valuation: i64, mut coeffs: Vec<BigRational>, truncation_order: i64) -> Self {
        let keep = (truncation_order - valuation).max(0) as usize;
        coeffs.truncate(keep);
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        let lead = coeffs.iter().position(|c| !c.is_zero());
        match lead {
            Some(k) => {
                coeffs.drain(..k);
                QSeries {
                    valuation: valuation + k as i64,
                    coeffs,
                    truncation_order,
                }
            }
            None => QSeries {
                valuation: truncation_order,
                coeffs: Vec::new(),
                truncation_order,
            },
        }
    }

    pub fn from_integers(valuation: i64, coeffs: &[i64], truncation_order: i64) -> Self {
        Self::new(
            valuation,
            coeffs.iter().map(|&c| BigRational::from_integer(c.into())).collect(),
            truncation_order,
        )
    }

    pub fn one(order: i64) -> Self {
        Self::new(0, vec![BigRational::one()], order)
    }

    pub fn valuation(&self) -> i64 {
        self.valuation
    }

    pub fn truncation_order(&self) -> i64 {
        self.truncation_order
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient of `q^m`, or `None` when `m` is beyond the known range.
    pub fn coeff(&self, m: i64) -> Option<BigRational> {
        if m >= self.truncation_order {
            return None;
        }
        if m < self.valuation {
            return Some(BigRational::zero());
        }
        Some(
            self.coeffs
                .get((m - self.valuation) as usize)
                .cloned()
                .unwrap_or_else(BigRational::zero),
        )
    }

    /// `(m, c(m))` for every known exponent from the valuation up.
    pub fn terms(&self) -> impl Iterator<Item = (i64, &BigRational)> {
        let v = self.valuation;
        self.coeffs.iter().enumerate().map(move |(k, c)| (v + k as i64, c))
    }

    /// Dense coefficients from `valuation` to `truncation_order - 1`.
    pub fn dense(&self) -> Vec<BigRational> {
        (self.valuation..self.truncation_order)
            .map(|m| self.coeff(m).unwrap())
            .collect()
    }

    /// Forget coefficients at exponents `>= order`.
    pub fn truncate(&self, order: i64) -> Self {
        Self::new(
            self.valuation,
            self.coeffs.clone(),
            order.min(self.truncation_order),
        )
    }

    /// Multiply by `q^k`.
    pub fn shift(&self, k: i64) -> Self {
        QSeries {
            valuation: self.valuation + k,
            coeffs: self.coeffs.clone(),
            truncation_order: self.truncation_order + k,
        }
    }

    pub fn scale(&self, r: &BigRational) -> Self {
        Self::new(
            self.valuation,
            self.coeffs.iter().map(|c| c * r).collect(),
            self.truncation_order,
        )
    }

    pub fn add(&self, o: &Self) -> Self {
        let v = self.valuation.min(o.valuation);
        let t = self.truncation_order.min(o.truncation_order);
        let coeffs = (v..t)
            .map(|m| self.coeff(m).unwrap() + o.coeff(m).unwrap())
            .collect();
        Self::new(v, coeffs, t)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&-BigRational::one()))
    }

    /// Integer numerators over a common denominator.
    fn integral_parts(&self, len: usize) -> (Vec<BigInt>, BigInt) {
        let den = self
            .coeffs
            .iter()
            .take(len)
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let nums = (0..len)
            .map(|k| match self.coeffs.get(k) {
                Some(c) => c.numer() * (&den / c.denom()),
                None => BigInt::zero(),
            })
            .collect();
        (nums, den)
    }

    fn nonzeros(&self) -> usize {
        self.coeffs.iter().filter(|c| !c.is_zero()).count()
    }

    /// Exact Cauchy product.
    pub fn mul(&self, o: &Self) -> Self {
        if self.nonzeros() > o.nonzeros() {
            return o.mul(self);
        }
        if self.is_zero() || o.is_zero() {
            let t = (self.truncation_order + o.valuation).min(o.truncation_order + self.valuation);
            return Self::new(t, Vec::new(), t);
        }
        let v = self.valuation + o.valuation;
        let t = (self.truncation_order + o.valuation).min(o.truncation_order + self.valuation);
        let len = (t - v).max(0) as usize;
        let (x, dx) = self.integral_parts(len.min(self.coeffs.len()));
        let (y, dy) = o.integral_parts(len.min(o.coeffs.len()));
        let mut acc = vec![BigInt::zero(); len];
        for (i, xi) in x.iter().enumerate() {
            if xi.is_zero() {
                continue;
            }
            for (j, yj) in y.iter().take(len - i).enumerate() {
                if !yj.is_zero() {
                    acc[i + j] += xi * yj;
                }
            }
        }
        let den = dx * dy;
        Self::new(
            v,
            acc.into_iter()
                .map(|n| BigRational::new(n, den.clone()))
                .collect(),
            t,
        )
    }

    /// Exact reciprocal; the truncation order becomes `t - 2v`.
    pub fn inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::ZeroLeadingCoefficient);
        }
        let v = self.valuation;
        let len = (self.truncation_order - v) as usize;
        let (s, den) = self.integral_parts(len);
        // 1/S = sum B_k q^k / S0^(k+1), B_k = -sum_{j=1..k} S_j B_{k-j} S0^(j-1)
        let s0 = s[0].clone();
        let unit = s0.abs().is_one();
        let mut pows = vec![BigInt::one()];
        if !unit {
            for k in 1..len {
                let next = &pows[k - 1] * &s0;
                pows.push(next);
            }
        }
        let mut b: Vec<BigInt> = Vec::with_capacity(len);
        b.push(BigInt::one());
        for k in 1..len {
            let mut acc = BigInt::zero();
            for j in 1..=k {
                if s[j].is_zero() {
                    continue;
                }
                let term = &s[j] * &b[k - j];
                if unit {
                    if s0.is_negative() && (j - 1) % 2 == 1 {
                        acc -= term;
                    } else {
                        acc += term;
                    }
                } else {
                    acc += term * &pows[j - 1];
                }
            }
            b.push(-acc);
        }
        let coeffs = b
            .into_iter()
            .enumerate()
            .map(|(k, bk)| {
                let d = if unit {
                    if s0.is_negative() && k % 2 == 0 {
                        -BigInt::one()
                    } else {
                        BigInt::one()
                    }
                } else {
                    &pows[k] * &s0
                };
                BigRational::new(bk * &den, d)
            })
            .collect();
        Ok(Self::new(-v, coeffs, self.truncation_order - 2 * v))
    }

    /// Non-negative integer power by repeated multiplication.
    /// Exact quotient. The result keeps as many terms as the shorter of the
    /// two relative precisions.
    pub fn div(&self, o: &Self) -> Result<Self> {
        if o.is_zero() {
            return Err(Error::ZeroLeadingCoefficient);
        }
        let v = self.valuation - o.valuation;
        let len = (self.truncation_order - self.valuation)
            .min(o.truncation_order - o.valuation)
            .max(0) as usize;
        if self.is_zero() {
            return Ok(Self::new(v + len as i64, Vec::new(), v + len as i64));
        }
        let (s, ds) = o.integral_parts(len);
        if !s[0].abs().is_one() {
            return Ok(self.mul(&o.inv()?));
        }
        let (x, dx) = self.integral_parts(len);
        let sign = s[0].clone();
        let small: Option<Vec<i64>> = s.iter().map(|c| i64::try_from(c).ok()).collect();
        // x = s * y with s[0] = +-1: y_k = s0 * (x_k - sum_{j>=1} s_j y_{k-j})
        let mut y: Vec<BigInt> = Vec::with_capacity(len);
        for k in 0..len {
            let mut acc = x[k].clone();
            match &small {
                Some(sm) => {
                    for j in 1..=k {
                        if sm[j] != 0 {
                            acc -= &y[k - j] * sm[j];
                        }
                    }
                }
                None => {
                    for j in 1..=k {
                        if !s[j].is_zero() {
                            acc -= &y[k - j] * &s[j];
                        }
                    }
                }
            }
            y.push(acc * &sign);
        }
        let scale = BigRational::new(ds, dx);
        Ok(Self::new(
            v,
            y.into_iter()
                .map(|n| BigRational::from_integer(n) * &scale)
                .collect(),
            v + len as i64,
        ))
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut out = Self::one(self.truncation_order - self.valuation);
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }
}

impl fmt::Display for QSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (m, c) in self.terms() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})q^{m}")?;
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O(q^{})", self.truncation_order)
    }
}

/// `prod_{n>=1} (1 - q^{d n})` to exponents below `order`, i.e. `q^{-d/24} eta(d z)`,
/// expanded by the pentagonal number theorem.
pub fn eta_series(d: u64, order: i64) -> QSeries {
    assert!(d >= 1, "scale must be positive");
    let len = order.max(0) as usize;
    let mut c = vec![0i64; len];
    let d = d as i64;
    for k in 0i64.. {
        let g1 = d * k * (3 * k - 1) / 2;
        if g1 >= order {
            break;
        }
        let sign = if k % 2 == 0 { 1 } else { -1 };
        c[g1 as usize] = sign;
        if k > 0 {
            let g2 = d * k * (3 * k + 1) / 2;
            if g2 < order {
                c[g2 as usize] = sign;
            }
        }
    }
    QSeries::from_integers(0, &c, order)
}

fn sigma1(n: u64) -> u64 {
    let mut s = 0;
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            s += d;
            if d * d != n {
                s += n / d;
            }
        }
        d += 1;
    }
    s
}

/// `E_2(d z) = 1 - 24 sum sigma_1(n) q^{d n}` to exponents below `order`.
pub fn e2_series(d: u64, order: i64) -> QSeries {
    assert!(d >= 1, "scale must be positive");
    let len = order.max(0) as usize;
    let mut c = vec![0i64; len];
    if len > 0 {
        c[0] = 1;
    }
    let mut n = 1u64;
    while ((d * n) as i64) < order {
        c[(d * n) as usize] = -24 * sigma1(n) as i64;
        n += 1;
    }
    QSeries::from_integers(0, &c, order)
}

/// `prefactor * (sum_k w_k E_2(d_k z)) * prod_j eta(s_j z)^{e_j}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EtaQuotientSpec {
    /// `(scale, exponent)` pairs.
    pub etas: Vec<(u64, i64)>,
    /// `(scale, weight)` pairs of the Eisenstein combination; empty means 1.
    pub eisenstein: Vec<(u64, i64)>,
    pub prefactor: BigRational,
}

impl EtaQuotientSpec {
    /// The level-6 weight -2 form
    /// `F = (E2(z) - 2E2(2z) - 3E2(3z) + 6E2(6z)) / (2 (eta(z) eta(2z) eta(3z) eta(6z))^2)`.
    pub fn partition_form() -> Self {
        EtaQuotientSpec {
            etas: vec![(1, -2), (2, -2), (3, -2), (6, -2)],
            eisenstein: vec![(1, 1), (2, -2), (3, -3), (6, 6)],
            prefactor: BigRational::new(1.into(), 2.into()),
        }
    }

    fn validate(&self) -> Result<i64> {
        if self.etas.iter().any(|&(d, e)| d == 0 || e == 0)
            || self.eisenstein.iter().any(|&(d, w)| d == 0 || w == 0)
        {
            return Err(Error::MalformedEtaQuotient("scales must be positive and exponents nonzero"));
        }
        if self.prefactor.is_zero() {
            return Err(Error::MalformedEtaQuotient("zero prefactor"));
        }
        let twist: i64 = self.etas.iter().map(|&(d, e)| d as i64 * e).sum();
        if twist % 24 != 0 {
            return Err(Error::MalformedEtaQuotient("fractional q-power"));
        }
        Ok(twist / 24)
    }

    /// Exact expansion with coefficients known for exponents below `order`.
    pub fn expand(&self, order: i64) -> Result<QSeries> {
        let shift = self.validate()?;
        let inner = order - shift;
        let mut acc = if self.eisenstein.is_empty() {
            QSeries::one(inner)
        } else {
            self.eisenstein
                .iter()
                .map(|&(d, w)| e2_series(d, inner).scale(&BigRational::from_integer(w.into())))
                .reduce(|a, b| a.add(&b))
                .unwrap()
        };
        let mut den = QSeries::one(inner);
        for &(d, e) in &self.etas {
            let eta = eta_series(d, inner).pow(e.unsigned_abs() as u32);
            if e > 0 {
                acc = acc.mul(&eta);
            } else {
                den = den.mul(&eta);
            }
        }
        Ok(acc.div(&den)?.scale(&self.prefactor).shift(shift))
    }
}

/// Exact coefficients `c(m)`, `-1 <= m < order`, of the level-6 form `F`.
pub fn f_coefficients(order: i64) -> QSeries {
    assert!(order >= 1, "order must be positive");
    EtaQuotientSpec::partition_form()
        .expand(order)
        .expect("well-formed eta quotient")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn int(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    /// Multiply out `prod_{n < order} (1 - q^n)` with plain integers.
    fn brute_euler(order: usize) -> Vec<i64> {
        let mut c = vec![0i64; order];
        c[0] = 1;
        for n in 1..order {
            for k in (n..order).rev() {
                c[k] -= c[k - n];
            }
        }
        c
    }

    #[test]
    fn pentagonal_expansion() {
        let eta = eta_series(1, 8);
        let got: Vec<_> = (0..8).map(|m| eta.coeff(m).unwrap()).collect();
        let want: Vec<_> = [1, -1, -1, 0, 0, 1, 0, 1].iter().map(|&x| int(x)).collect();
        assert_eq!(got, want);
        let eta2 = eta_series(2, 5);
        assert_eq!(eta2.dense(), vec![int(1), int(0), int(-1), int(0), int(-1)]);
        // 12 = k(3k-1)/2 at k = 3, so the sign is (-1)^3
        let brute = brute_euler(200);
        assert_eq!(brute[12], -1);
        let eta = eta_series(1, 200);
        for (m, b) in brute.iter().enumerate() {
            assert_eq!(eta.coeff(m as i64).unwrap(), int(*b));
        }
    }

    #[test]
    fn eisenstein_expansions() {
        let e = e2_series(1, 5);
        assert_eq!(e.dense(), [1, -24, -72, -96, -168].map(int).to_vec());
        let e6 = e2_series(6, 8);
        assert_eq!(e6.coeff(6).unwrap(), int(-24));
        for m in 1..6 {
            assert!(e6.coeff(m).unwrap().is_zero());
        }
        let combo = e2_series(1, 4)
            .sub(&e2_series(2, 4).scale(&int(2)))
            .sub(&e2_series(3, 4).scale(&int(3)))
            .add(&e2_series(6, 4).scale(&int(6)));
        assert_eq!(combo.coeff(0).unwrap(), int(2));
    }

    #[test]
    fn unit_and_geometric() {
        let s = eta_series(1, 30);
        assert_eq!(s.mul(&QSeries::one(30)), s);
        let geo = QSeries::from_integers(0, &[1, -1], 20).inv().unwrap();
        for m in 0..20 {
            assert_eq!(geo.coeff(m).unwrap(), int(1));
        }
        assert_eq!(geo.coeff(20), None);
    }

    #[test]
    fn reciprocal_identity() {
        let s = eta_series(1, 50);
        let prod = s.mul(&s.inv().unwrap());
        assert_eq!(prod, QSeries::one(50));
    }

    #[test]
    fn reciprocal_of_non_unit_leading_term() {
        let s = QSeries::new(-2, vec![int(3), int(1), BigRational::new(2.into(), 5.into())], 3);
        let t = s.inv().unwrap();
        assert_eq!(t.valuation(), 2);
        assert_eq!(s.mul(&t), QSeries::one(5));
    }

    #[test]
    fn zero_series_has_no_inverse() {
        let z = QSeries::from_integers(0, &[0, 0, 0], 3);
        assert!(z.is_zero());
        assert_eq!(z.inv(), Err(Error::ZeroLeadingCoefficient));
    }

    #[test]
    fn principal_coefficients_of_f() {
        let f = f_coefficients(4);
        assert_eq!(f.valuation(), -1);
        assert_eq!(f.truncation_order(), 4);
        assert_eq!(f.coeff(-1).unwrap(), int(1));
        assert_eq!(f.coeff(0).unwrap(), int(-10));
        assert_eq!(f.coeff(1).unwrap(), int(-29));
    }

    /// Small hand-sized recomputation of c(1) with plain integers:
    /// numerator N = 2 - 24q + ..., eta product E = 1 - 2q + ...
    #[test]
    fn c1_by_hand() {
        // E2 combination coefficients to q^2
        let s1 = |n: i64| (1..=n).filter(|d| n % d == 0).sum::<i64>();
        let e2 = |d: i64, m: i64| -> i64 {
            if m == 0 {
                1
            } else if m % d == 0 {
                -24 * s1(m / d)
            } else {
                0
            }
        };
        let num: Vec<i64> = (0..3)
            .map(|m| e2(1, m) - 2 * e2(2, m) - 3 * e2(3, m) + 6 * e2(6, m))
            .collect();
        // prod over d in {1,2,3,6} of prod_n (1 - q^{dn})^2, to q^2
        let mut den = vec![1i64, 0, 0];
        for d in [1usize, 2, 3, 6] {
            for _ in 0..2 {
                for n in 1..3 {
                    let step = d * n;
                    for k in (step..3).rev() {
                        den[k] -= den[k - step];
                    }
                }
            }
        }
        // (num / den) / 2 at q^0, q^1, q^2 -> c(-1), c(0), c(1)
        let inv1 = -den[1];
        let inv2 = -den[2] - den[1] * inv1;
        let c1 = (num[2] + num[1] * inv1 + num[0] * inv2) / 2;
        assert_eq!(c1, -29);
        assert_eq!((num[1] + num[0] * inv1) / 2, -10);
    }

    #[test]
    fn half_integral_coefficients() {
        let f = f_coefficients(300);
        for (m, c) in f.terms() {
            assert!((c * int(2)).is_integer(), "c({m}) = {c}");
        }
    }

    #[test]
    fn truncation_consistency() {
        let big = f_coefficients(120);
        for small in [1, 7, 60, 119] {
            assert_eq!(big.truncate(small), f_coefficients(small));
        }
    }

    #[test]
    fn rejects_malformed_quotients() {
        let bad = EtaQuotientSpec {
            etas: vec![(1, 1)],
            eisenstein: vec![],
            prefactor: int(1),
        };
        assert!(matches!(bad.expand(5), Err(Error::MalformedEtaQuotient(_))));
        let zero = EtaQuotientSpec {
            etas: vec![(0, 24)],
            eisenstein: vec![],
            prefactor: int(1),
        };
        assert!(zero.expand(5).is_err());
        // Delta = eta^24 = q - 24 q^2 + 252 q^3
        let delta = EtaQuotientSpec {
            etas: vec![(1, 24)],
            eisenstein: vec![],
            prefactor: int(1),
        }
        .expand(4)
        .unwrap();
        assert_eq!(delta.dense(), vec![int(1), int(-24), int(252)]);
    }

    #[test]
    fn quotient_matches_reciprocal_route() {
        let order = 80;
        let inner = order + 1;
        let num = e2_series(1, inner)
            .sub(&e2_series(2, inner).scale(&int(2)))
            .sub(&e2_series(3, inner).scale(&int(3)))
            .add(&e2_series(6, inner).scale(&int(6)));
        let mut den = QSeries::one(inner);
        for d in [1, 2, 3, 6] {
            den = den.mul(&eta_series(d, inner).pow(2));
        }
        let half = BigRational::new(1.into(), 2.into());
        let via_inv = num.mul(&den.inv().unwrap()).scale(&half).shift(-1);
        assert_eq!(f_coefficients(order), via_inv);
        assert_eq!(
            QSeries::one(3).div(&QSeries::from_integers(0, &[], 0)),
            Err(Error::ZeroLeadingCoefficient)
        );
    }

    proptest! {
        #[test]
        fn product_with_reciprocal_is_one(
            lead in prop_oneof![Just(1i64), Just(-1), 2i64..5],
            rest in proptest::collection::vec(-9i64..10, 0..12),
            val in -3i64..3,
        ) {
            let mut c = vec![lead];
            c.extend(rest);
            let t = val + c.len() as i64;
            let s = QSeries::from_integers(val, &c, t);
            let one = s.mul(&s.inv().unwrap());
            prop_assert_eq!(one, QSeries::one(c.len() as i64));
        }

        #[test]
        fn quotient_undoes_product(
            lead in prop_oneof![Just(1i64), Just(-1), 2i64..5],
            rest in proptest::collection::vec(-9i64..10, 0..12),
            a0 in 1i64..9,
            tail in proptest::collection::vec(-9i64..10, 0..13),
        ) {
            let mut a = vec![a0];
            a.extend(tail);
            let mut c = vec![lead];
            c.extend(rest);
            let y = QSeries::from_integers(1, &c, 1 + c.len() as i64);
            let x = QSeries::from_integers(-1, &a, a.len() as i64 - 1);
            let q = x.mul(&y).div(&y).unwrap();
            let len = a.len().min(c.len()) as i64;
            prop_assert_eq!(q, x.truncate(len - 1));
        }

        #[test]
        fn multiplication_commutes(
            a in proptest::collection::vec(-9i64..10, 1..10),
            b in proptest::collection::vec(-9i64..10, 1..10),
        ) {
            let x = QSeries::from_integers(0, &a, a.len() as i64);
            let y = QSeries::from_integers(-1, &b, b.len() as i64 - 1);
            prop_assert_eq!(x.mul(&y), y.mul(&x));
        }
    }
}
