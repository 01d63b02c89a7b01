//! Certified evaluation of weight -2 forms and of their raised images.
//!
//! For `f = sum c(m) q^m` the raised form `(1/4pi) R_{-2} f` is
//! `sum c(m) (-m - 1/(2 pi y)) q^m`. For the level-6 form `F` this is the
//! weight-0 weak Maass form `P` whose CM traces give `p(n)`.
//!
//! Truncation error is controlled by a coefficient growth model
//! `|c(m)| <= C exp(K sqrt m)` (see [`GrowthModel`]); every evaluation is
//! repeated at `M` and `2M` terms and only marked double-checked when the two
//! agree within their combined error bounds.

use std::sync::{Arc, OnceLock, RwLock};

use astro_float::{BigFloat, Consts};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::bignum::{self, Certification, CertifiedValue, Complex, LogBound, RM};
use crate::error::{Error, Result};
use crate::qseries::{f_coefficients, QSeries};
use crate::quadform::{is_squarefree, AtkinLehnerSigns, HeegnerPoint};

/// Points below this height are rejected.
pub const MIN_IM: f64 = 1e-6;

/// Default number of guard bits on top of the target precision.
pub const DEFAULT_GUARD_BITS: usize = 32;

/// Safety factor applied to the fitted growth constant.
pub const GROWTH_SAFETY: f64 = 16.0;

const FIT_RANGE: i64 = 100;

/// A point of the upper half-plane with a bound on its coordinate error.
#[derive(Clone, Debug)]
pub struct Point {
    pub re: BigFloat,
    pub im: BigFloat,
    pub err: LogBound,
}

impl Point {
    /// Exactly the given binary64 coordinates.
    pub fn from_f64(re: f64, im: f64) -> Self {
        Point {
            re: BigFloat::from_f64(re, 64),
            im: BigFloat::from_f64(im, 64),
            err: LogBound::ZERO,
        }
    }

    pub fn im_f64(&self) -> f64 {
        bignum::to_f64(&self.im)
    }
}

impl From<&HeegnerPoint> for Point {
    fn from(h: &HeegnerPoint) -> Self {
        Point {
            re: h.re.clone(),
            im: h.im.clone(),
            err: h.err,
        }
    }
}

/// `ln |x|` for a nonzero big integer, without overflowing f64.
fn ln_abs_int(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        let v: f64 = x.abs().to_string().parse().unwrap_or(f64::MAX);
        return v.ln();
    }
    let shifted: BigInt = x.abs() >> (bits - 64) as usize;
    let top: f64 = shifted.to_string().parse().unwrap();
    top.ln() + (bits - 64) as f64 * std::f64::consts::LN_2
}

pub(crate) fn ln_abs(c: &BigRational) -> f64 {
    if c.is_zero() {
        return f64::NEG_INFINITY;
    }
    ln_abs_int(c.numer()) - ln_abs_int(c.denom())
}

/// Coefficient bound `|c(m)| <= exp(ln_c + k sqrt m)` for `m >= 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthModel {
    pub ln_c: f64,
    pub k: f64,
}

impl GrowthModel {
    /// Fit `C` on `1 <= m <= 100` and multiply it by [`GROWTH_SAFETY`].
    pub fn fit(series: &QSeries, k: f64) -> Self {
        let top = series.truncation_order().min(FIT_RANGE + 1);
        let ln_c = (1..top)
            .filter_map(|m| series.coeff(m))
            .enumerate()
            .map(|(i, c)| ln_abs(&c) - k * ((i + 1) as f64).sqrt())
            .fold(0.0f64, f64::max)
            + GROWTH_SAFETY.ln();
        GrowthModel { ln_c, k }
    }

    /// The same model with `C` multiplied by `factor`.
    pub fn raised(&self, factor: f64) -> Self {
        GrowthModel {
            ln_c: self.ln_c + factor.ln(),
            k: self.k,
        }
    }

    /// `ln` of a bound on `sum_{m >= start} C e^{K sqrt m} (m + t) e^{-2 pi y m}`.
    pub fn tail_ln(&self, start: usize, y: f64, t: f64) -> f64 {
        let two_pi_y = 2.0 * std::f64::consts::PI * y;
        let term = |m: f64| self.ln_c + self.k * m.sqrt() + (m + t).ln() - two_pi_y * m;
        let start = start.max(1) as f64;
        let mut m = start;
        let mut acc = f64::NEG_INFINITY;
        loop {
            let l = term(m);
            acc = log_add(acc, l);
            let step = term(m + 1.0) - l;
            // the step is decreasing in m, so once it is negative the rest is
            // dominated by a geometric series with ratio e^step
            if step < 0.0 && l < acc - 60.0 {
                let r = step;
                let rest = term(m + 1.0) - (-r.exp()).ln_1p();
                return log_add(acc, rest);
            }
            m += 1.0;
        }
    }

    /// Smallest `M` whose modeled tail is below `2^-bits` at height `y`.
    pub fn terms_for(&self, y: f64, bits: f64) -> usize {
        let t = 1.0 / (2.0 * std::f64::consts::PI * y);
        let goal = -bits * std::f64::consts::LN_2;
        let ok = |m: usize| self.tail_ln(m, y, t) < goal;
        let mut hi = 8usize;
        while !ok(hi) {
            hi *= 2;
        }
        let mut lo = hi / 2;
        if lo == 0 || ok(lo) {
            lo = 0;
        }
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Supplies exact Fourier coefficients up to a requested truncation order.
pub trait CoefficientSource: Send + Sync {
    /// A series whose truncation order is at least `order`.
    fn coefficients(&self, order: i64) -> Result<Arc<QSeries>>;
}

/// A fixed, already computed expansion.
pub struct FixedCoefficients(pub Arc<QSeries>);

impl CoefficientSource for FixedCoefficients {
    fn coefficients(&self, order: i64) -> Result<Arc<QSeries>> {
        if self.0.truncation_order() < order {
            return Err(Error::Truncation {
                needed: order,
                available: self.0.truncation_order(),
            });
        }
        Ok(self.0.clone())
    }
}

/// Memoized coefficients of the level-6 form `F`, grown on demand.
#[derive(Default)]
pub struct PartitionFormSource {
    table: RwLock<Option<Arc<QSeries>>>,
}

impl PartitionFormSource {
    pub fn new() -> Self {
        Self::default()
    }

    /// Seed the memo with a precomputed table (e.g. from a disk cache).
    pub fn with_table(table: QSeries) -> Self {
        PartitionFormSource {
            table: RwLock::new(Some(Arc::new(table))),
        }
    }

    /// The largest table built so far.
    pub fn current(&self) -> Option<Arc<QSeries>> {
        self.table.read().unwrap().clone()
    }
}

impl CoefficientSource for PartitionFormSource {
    fn coefficients(&self, order: i64) -> Result<Arc<QSeries>> {
        if let Some(t) = self.table.read().unwrap().as_ref() {
            if t.truncation_order() >= order {
                return Ok(t.clone());
            }
        }
        let mut guard = self.table.write().unwrap();
        let have = guard.as_ref().map_or(0, |t| t.truncation_order());
        if have >= order {
            return Ok(guard.as_ref().unwrap().clone());
        }
        let target = order.max(2 * have).max(FIT_RANGE + 28);
        log::info!("building coefficient table to order {target}");
        let table = Arc::new(f_coefficients(target));
        *guard = Some(table.clone());
        Ok(table)
    }
}

fn shared_partition_source() -> Arc<PartitionFormSource> {
    static SOURCE: OnceLock<Arc<PartitionFormSource>> = OnceLock::new();
    SOURCE
        .get_or_init(|| Arc::new(PartitionFormSource::new()))
        .clone()
}

/// Truncation order and working precision for `F` at height `im_min`.
pub fn choose_truncation(im_min: f64, target_bits: usize) -> (usize, usize) {
    MaassEvalSpec::partition().choose_truncation(im_min, target_bits)
}

/// Which series to sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    /// `f(z) = sum c(m) q^m`.
    Holomorphic,
    /// `(1/4pi) R_{-2} f = sum c(m) (-m - 1/(2 pi y)) q^m`.
    Raised,
}

/// Everything needed to evaluate a weight -2 form `f` and its raised image.
#[derive(Clone)]
pub struct MaassEvalSpec {
    source: Arc<dyn CoefficientSource>,
    pub level: u64,
    pub signs: Option<AtkinLehnerSigns>,
    pub growth: GrowthModel,
    principal_order: i64,
    ln_head: f64,
    /// Fixed truncation order instead of the modeled one.
    pub terms: Option<usize>,
    /// Fixed working precision instead of the planned one.
    pub precision_bits: Option<usize>,
    pub guard_bits: usize,
}

impl std::fmt::Debug for MaassEvalSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MaassEvalSpec")
            .field("level", &self.level)
            .field("signs", &self.signs)
            .field("growth", &self.growth)
            .field("principal_order", &self.principal_order)
            .finish()
    }
}

impl MaassEvalSpec {
    /// Spec of `F` backed by the process-wide memoized table.
    pub fn partition() -> Self {
        Self::partition_with(shared_partition_source())
    }

    /// Spec of `F` backed by a caller-provided coefficient source.
    pub fn partition_with(source: Arc<dyn CoefficientSource>) -> Self {
        Self::new(source, 6, Some(AtkinLehnerSigns::partition())).expect("F is well formed")
    }

    /// Generic spec. The growth exponent is `4 pi sqrt(k / N)` for a pole of
    /// order `k` at infinity, which also covers poles of the same order at the
    /// other cusps when Atkin-Lehner signs are supplied.
    pub fn new(
        source: Arc<dyn CoefficientSource>,
        level: u64,
        signs: Option<AtkinLehnerSigns>,
    ) -> Result<Self> {
        if level == 0 || !is_squarefree(level) {
            return Err(Error::LevelNotSquarefree(level));
        }
        if let Some(s) = &signs {
            if s.level() != level {
                return Err(Error::NotACharacter(level));
            }
        }
        let head = source.coefficients(1)?;
        let principal_order = -head.valuation();
        if principal_order <= 0 || head.is_zero() {
            return Err(Error::NoPrincipalPart);
        }
        let fit = source
            .coefficients(FIT_RANGE + 1)
            .unwrap_or_else(|_| head.clone());
        let ln_head = (head.valuation()..=0)
            .filter_map(|m| head.coeff(m))
            .map(|c| ln_abs(&c))
            .fold(f64::NEG_INFINITY, f64::max);
        let k = 4.0 * std::f64::consts::PI * (principal_order as f64 / level as f64).sqrt();
        Ok(MaassEvalSpec {
            growth: GrowthModel::fit(&fit, k),
            source,
            level,
            signs,
            principal_order,
            ln_head,
            terms: None,
            precision_bits: None,
            guard_bits: DEFAULT_GUARD_BITS,
        })
    }

    /// Spec over a fixed expansion.
    pub fn from_series(series: QSeries, level: u64, signs: Option<AtkinLehnerSigns>) -> Result<Self> {
        Self::new(Arc::new(FixedCoefficients(Arc::new(series))), level, signs)
    }

    pub fn principal_order(&self) -> i64 {
        self.principal_order
    }

    pub fn coefficients(&self, order: i64) -> Result<Arc<QSeries>> {
        self.source.coefficients(order)
    }

    /// Truncation order and working precision for target absolute accuracy
    /// `2^-target_bits` at points of height at least `im_min`.
    pub fn choose_truncation(&self, im_min: f64, target_bits: usize) -> (usize, usize) {
        let m = self
            .terms
            .unwrap_or_else(|| self.growth.terms_for(im_min, (target_bits + self.guard_bits) as f64));
        let magnitude = self.magnitude_log2(im_min);
        let p = target_bits + self.guard_bits + magnitude.max(0.0).ceil() as usize
            + (2.0 * m as f64 + 2.0).log2().ceil() as usize;
        (m, self.precision_bits.unwrap_or(p))
    }

    /// Modeled `log2 sum |c(m)| (|m| + t) |q|^m` at height `y`.
    fn magnitude_log2(&self, y: f64) -> f64 {
        let two_pi_y = 2.0 * std::f64::consts::PI * y;
        let t = 1.0 / two_pi_y;
        let principal = (1..=self.principal_order)
            .map(|k| self.ln_head + (k as f64 + t).ln() + two_pi_y * k as f64)
            .fold(f64::NEG_INFINITY, log_add);
        let constant = self.ln_head + (t + 1.0).ln();
        let body = self.growth.tail_ln(1, y, t);
        log_add(log_add(principal, constant), body) / std::f64::consts::LN_2
    }

    /// Evaluation plan for a batch of points.
    pub fn plan(&self, ims: &[f64], target_bits: usize) -> Result<EvalPlan> {
        let lo = ims.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ims.iter().copied().fold(0.0f64, f64::max);
        if !(lo >= MIN_IM) {
            return Err(Error::PointTooLow(lo));
        }
        let (terms, p_lo) = self.choose_truncation(lo, target_bits);
        let p_hi = target_bits
            + self.guard_bits
            + self.magnitude_log2(hi).max(0.0).ceil() as usize
            + (2.0 * terms as f64 + 2.0).log2().ceil() as usize;
        let precision = self.precision_bits.unwrap_or(p_lo.max(p_hi));
        Ok(EvalPlan {
            terms,
            precision,
            growth: self.growth,
        })
    }

    /// Coefficients `c(m)` and `m c(m)` for `m < terms`, rounded to `precision`.
    pub fn float_table(&self, terms: usize, precision: usize) -> Result<FloatTable> {
        let series = self.source.coefficients(terms as i64)?;
        let u = bignum::unit_roundoff(precision).scale(2.0);
        let v = series.valuation();
        let rows = (v..terms as i64)
            .map(|m| {
                let c = series.coeff(m).expect("within truncation order");
                let mc = &c * BigRational::from_integer(m.into());
                let cf = bignum::from_rational(&c, precision);
                let mcf = bignum::from_rational(&mc, precision);
                let ce = u.mul(LogBound::of(&cf));
                let mce = u.mul(LogBound::of(&mcf));
                (
                    CertifiedValue::with_err(Complex::real(cf), ce),
                    CertifiedValue::with_err(Complex::real(mcf), mce),
                )
            })
            .collect();
        Ok(FloatTable {
            valuation: v,
            rows,
            precision,
        })
    }
}

/// Truncation order, working precision and tail model for one evaluation batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalPlan {
    pub terms: usize,
    pub precision: usize,
    pub growth: GrowthModel,
}

/// Coefficients rounded to a working precision, shared across points.
pub struct FloatTable {
    valuation: i64,
    rows: Vec<(CertifiedValue, CertifiedValue)>,
    precision: usize,
}

impl FloatTable {
    pub fn precision(&self) -> usize {
        self.precision
    }

    /// Number of exponents available (`max m + 1`).
    pub fn terms(&self) -> usize {
        (self.valuation + self.rows.len() as i64) as usize
    }
}

/// `q = e^{2 pi i z}`, `1/q`, and `1/(2 pi y)`, all certified.
struct Nome {
    q: CertifiedValue,
    q_inv: CertifiedValue,
    t: CertifiedValue,
}

fn nome(z: &Point, p: usize, cc: &mut Consts) -> Nome {
    let u = bignum::unit_roundoff(p);
    let x = bignum::frac(&z.re);
    let two_pi = bignum::pi(p, cc).mul(&BigFloat::from_word(2, 64), p, RM);
    let theta = two_pi.mul(&x, p, RM);
    let (cos, sin) = (theta.cos(p, RM, cc), theta.sin(p, RM, cc));
    let arg = two_pi.mul(&z.im, p, RM);
    let r = arg.neg().exp(p, RM, cc);
    let r_inv = arg.exp(p, RM, cc);
    // rounding in 2 pi, theta, cos/sin, exp, and the final product
    let rel = u.scale(10.0).add(z.err.scale(2.0 * std::f64::consts::PI * 1.000_001));
    let q = Complex::new(cos.mul(&r, p, RM), sin.mul(&r, p, RM));
    let q_inv = Complex::new(cos.mul(&r_inv, p, RM), sin.neg().mul(&r_inv, p, RM));
    let q_err = rel.mul(q.abs_bound());
    let q_inv_err = rel.mul(q_inv.abs_bound());
    let t = BigFloat::from_word(1, 64).div(&arg, p, RM);
    // relative error of 1/(2 pi y): roundings plus the height error over y
    let y_lo = bignum::to_f64(&z.im) * (1.0 - 1e-9);
    let t_rel = u.scale(4.0).add(z.err.scale(1.000_001 / y_lo));
    let t_err = t_rel.mul(LogBound::of(&t));
    Nome {
        q: CertifiedValue::with_err(q, q_err),
        q_inv: CertifiedValue::with_err(q_inv, q_inv_err),
        t: CertifiedValue::with_err(Complex::real(t), t_err),
    }
}

/// Truncated sum with `terms` exponents (`m < terms`), tail bound included.
/// The result is [`Certification::Heuristic`].
pub fn eval_truncated(
    kind: Kind,
    z: &Point,
    table: &FloatTable,
    terms: usize,
    growth: &GrowthModel,
    cc: &mut Consts,
) -> CertifiedValue {
    assert!(terms <= table.terms(), "table too short");
    let p = table.precision;
    let n = Nome::from(z, p, cc);
    let count = (terms as i64 - table.valuation) as usize;
    let mut acc_f = CertifiedValue::zero();
    let mut acc_m = CertifiedValue::zero();
    for (c, mc) in table.rows[..count].iter().rev() {
        acc_f = acc_f.mul(&n.q, p).add(c, p);
        if kind == Kind::Raised {
            acc_m = acc_m.mul(&n.q, p).add(mc, p);
        }
    }
    // shift by q^valuation
    for _ in 0..(-table.valuation) {
        acc_f = acc_f.mul(&n.q_inv, p);
        if kind == Kind::Raised {
            acc_m = acc_m.mul(&n.q_inv, p);
        }
    }
    let y = z.im_f64();
    let (mut value, t) = match kind {
        Kind::Holomorphic => (acc_f, 0.0),
        Kind::Raised => (acc_m.add(&acc_f.mul(&n.t, p), p).neg(), 1.0 / (2.0 * std::f64::consts::PI * y * (1.0 - 1e-9))),
    };
    let tail = LogBound::from_ln(growth.tail_ln(terms, y * (1.0 - 1e-9), t.max(1e-300)));
    value.err = value.err.add(tail);
    value.certified = Certification::Heuristic;
    value
}

impl Nome {
    fn from(z: &Point, p: usize, cc: &mut Consts) -> Self {
        nome(z, p, cc)
    }
}

/// Evaluate at `M` and `2M` terms; on agreement return the `2M` value marked
/// double-checked. On disagreement the growth constant is raised by 16 and
/// the evaluation retried (three times at most).
pub fn eval_checked(
    kind: Kind,
    z: &Point,
    spec: &MaassEvalSpec,
    target_bits: usize,
) -> Result<CertifiedValue> {
    let im = z.im_f64();
    if !(im >= MIN_IM) {
        return Err(Error::PointTooLow(im));
    }
    let mut spec = spec.clone();
    let mut cc = bignum::consts();
    for attempt in 0..4 {
        let plan = spec.plan(&[im], target_bits)?;
        let table = spec.float_table(2 * plan.terms, plan.precision)?;
        let lo = eval_truncated(kind, z, &table, plan.terms, &plan.growth, &mut cc);
        let hi = eval_truncated(kind, z, &table, 2 * plan.terms, &plan.growth, &mut cc);
        if lo.overlaps(&hi, plan.precision) {
            let mut out = hi;
            out.certified = Certification::DoubleChecked;
            return Ok(out);
        }
        log::warn!(
            "certification failure: M vs 2M disagree at im = {im:.3e} (attempt {attempt}); raising growth constant"
        );
        spec.growth = spec.growth.raised(GROWTH_SAFETY);
        if attempt == 3 {
            return Ok(hi);
        }
    }
    unreachable!()
}

/// `F(z)` for the spec's form (holomorphic series).
pub fn eval_f(z: &Point, spec: &MaassEvalSpec, target_bits: usize) -> Result<CertifiedValue> {
    eval_checked(Kind::Holomorphic, z, spec, target_bits)
}

/// `P(z) = -(1/(2 pi i) d/dz + 1/(2 pi y)) F(z)`.
pub fn eval_p(z: &Point, spec: &MaassEvalSpec, target_bits: usize) -> Result<CertifiedValue> {
    eval_checked(Kind::Raised, z, spec, target_bits)
}

/// `(1/4pi) R_{-2} f` for a general weight -2 spec.
pub fn eval_partial_f(z: &Point, spec: &MaassEvalSpec, target_bits: usize) -> Result<CertifiedValue> {
    eval_checked(Kind::Raised, z, spec, target_bits)
}

/// Exact coefficients of the raised series split as
/// `sum hol(m) q^m + (1/(2 pi y)) sum nonhol(m) q^m`.
pub fn raised_coefficients(f: &QSeries) -> (QSeries, QSeries) {
    let v = f.valuation();
    let t = f.truncation_order();
    let hol = (v..t)
        .map(|m| -f.coeff(m).unwrap() * BigRational::from_integer(m.into()))
        .collect();
    let nonhol = (v..t).map(|m| -f.coeff(m).unwrap()).collect();
    (QSeries::new(v, hol, t), QSeries::new(v, nonhol, t))
}
