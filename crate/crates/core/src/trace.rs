//! Traces of `P` over Heegner points, exact `p(n)`, and the polynomials
//! `H_n(x) = prod (x - P(alpha_Q))`.

use std::sync::Arc;

use astro_float::BigFloat;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rayon::prelude::*;

use crate::bignum::{self, Certification, CertifiedValue, Complex, LogBound, RM};
use crate::error::{Error, Result};
use crate::maass::{self, CoefficientSource, EvalPlan, Kind, MaassEvalSpec, Point};
use crate::quadform::{
    atkin_lehner_relocate, gkz_representatives, heegner_forms, heegner_point, Discriminant,
    QuadForm,
};

/// Tolerance for the integrality certificates of `(6D)^k e_k`.
pub const INTEGRALITY_TOL_LOG2: f64 = -20.0;

/// Which Heegner forms enter a trace.
///
/// For non-fundamental `D` the lattice sum behind `Tr(n)` also runs over
/// imprimitive forms: at `n = 24` the primitive forms alone give
/// `575 * 1575 + 23`, and the layer `5 * Q'` (with `Q'` of discriminant `-23`
/// and `b = 5 mod 12`) contributes the missing `-23`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FormSet {
    /// One primitive form per class.
    Primitive,
    /// Primitive forms plus the imprimitive layers `f * Q'`.
    #[default]
    WithImprimitive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceConfig {
    pub relocation: bool,
    pub deterministic_sum: bool,
    pub guard_bits: usize,
    pub precision_bits: Option<usize>,
    pub terms: Option<usize>,
    pub max_retries: u32,
    pub forms: FormSet,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            relocation: false,
            deterministic_sum: true,
            guard_bits: maass::DEFAULT_GUARD_BITS,
            precision_bits: None,
            terms: None,
            max_retries: 4,
            forms: FormSet::WithImprimitive,
        }
    }
}

/// Trace, rounded `p(n)`, and the rounding certificate.
#[derive(Clone, Debug)]
pub struct TraceReport {
    pub n: u64,
    pub d: u64,
    pub forms: Vec<QuadForm>,
    pub values: Vec<CertifiedValue>,
    pub trace: CertifiedValue,
    /// `Some` only when the rounding certifies.
    pub p_n: Option<BigInt>,
    /// `1/2 - (|Tr/D - p| + err/D)`; positive when certified.
    pub rounding_margin: f64,
    pub certified: bool,
    pub target_bits: usize,
    pub plan: EvalPlan,
}

impl TraceReport {
    /// `D * p(n)`, the exact trace.
    pub fn trace_times_d(&self) -> Option<BigInt> {
        self.p_n.as_ref().map(|p| p * BigInt::from(self.d))
    }
}

/// `H_n(x)` with exact rational coefficients in descending powers.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionPolynomial {
    pub n: u64,
    pub degree: usize,
    pub coefficients: Vec<BigRational>,
    /// `s = 6D`; the coefficient of `x^{h-k}` has denominator dividing `s^k`.
    pub denominators_bound_used: u64,
    /// `log2` of the worst certified distance-plus-error per coefficient.
    pub rounding_log2: Vec<f64>,
    pub target_bits: usize,
}

impl PartitionPolynomial {
    /// Evaluate at a certified complex point (Horner).
    pub fn eval(&self, x: &CertifiedValue, p: usize) -> CertifiedValue {
        let mut acc = CertifiedValue::zero();
        for c in &self.coefficients {
            let cf = bignum::from_rational(c, p);
            let e = bignum::unit_roundoff(p).scale(2.0).mul(LogBound::of(&cf));
            acc = acc
                .mul(x, p)
                .add(&CertifiedValue::with_err(Complex::real(cf), e), p);
        }
        acc
    }
}

/// Distances of `s^k e_k` from integers for one scale `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleReport {
    pub scale: u64,
    /// The `s = D` rows are data only; nothing is asserted about them.
    pub exploratory: bool,
    /// Per `k = 1..=h`: `log2(|s^k e_k - nearest| + |im|)`.
    pub distance_log2: Vec<f64>,
    /// Per `k`: `log2` of the propagated error bound.
    pub err_log2: Vec<f64>,
}

impl ScaleReport {
    /// Whether every distance plus error is below `2^tol_log2`.
    pub fn within(&self, tol_log2: f64) -> bool {
        self.distance_log2
            .iter()
            .zip(&self.err_log2)
            .all(|(d, e)| log2_add(*d, *e) < tol_log2)
    }

    /// Worst `log2(distance + err)`.
    pub fn worst_log2(&self) -> f64 {
        self.distance_log2
            .iter()
            .zip(&self.err_log2)
            .map(|(d, e)| log2_add(*d, *e))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegralityReport {
    pub n: u64,
    pub rows: Vec<ScaleReport>,
    /// True when every `s = 6D` row is within [`INTEGRALITY_TOL_LOG2`].
    pub certified: bool,
    pub target_bits: usize,
}

fn log2_add(a: f64, b: f64) -> f64 {
    LogBound::from_log2(a).add(LogBound::from_log2(b)).log2()
}

/// Adaptive precision start for polynomial work.
pub fn initial_target_bits(n: u64, h: usize) -> usize {
    let d = 24 * n - 1;
    let s_bits = ((6 * d) as f64).log2().ceil() as usize;
    let growth = (std::f64::consts::PI * (2.0 * n as f64 / 3.0).sqrt() / std::f64::consts::LN_2).ceil();
    64 + h * s_bits + growth as usize
}

/// `-1/(2m)` from the general trace theorem, for `m = D / (4N)`.
pub fn theorem_normalization(d: u64, level: u64) -> BigRational {
    BigRational::new(BigInt::from(-2 * level as i64), BigInt::from(d))
}

/// Multiplier taking a sum over the Heegner divisor `Z(D/24, 1)` at level
/// `N` to the coefficient of `eta^{-1}`: `3 / (N D)`.
pub fn heegner_divisor_factor(d: u64, level: u64) -> BigRational {
    BigRational::new(BigInt::from(3), BigInt::from(level * d))
}

/// Multiplier taking the bare representative sum to `p(n)`: `1 / D`.
pub fn partition_conversion_factor(d: u64) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(d))
}

/// Evaluates traces with a shared coefficient source.
#[derive(Clone, Debug)]
pub struct Engine {
    spec: MaassEvalSpec,
    config: TraceConfig,
}

impl Default for Engine {
    fn default() -> Self {
        Engine::new(TraceConfig::default())
    }
}

impl Engine {
    pub fn new(config: TraceConfig) -> Self {
        Self::from_spec(MaassEvalSpec::partition(), config)
    }

    pub fn with_source(source: Arc<dyn CoefficientSource>, config: TraceConfig) -> Self {
        Self::from_spec(MaassEvalSpec::partition_with(source), config)
    }

    pub fn from_spec(mut spec: MaassEvalSpec, config: TraceConfig) -> Self {
        spec.guard_bits = config.guard_bits;
        spec.terms = config.terms;
        spec.precision_bits = config.precision_bits;
        Engine { spec, config }
    }

    pub fn config(&self) -> &TraceConfig {
        &self.config
    }

    pub fn spec(&self) -> &MaassEvalSpec {
        &self.spec
    }

    /// The forms summed over for `disc`, in summation order.
    pub fn forms(&self, disc: &Discriminant) -> Result<Vec<QuadForm>> {
        let mut forms = match self.config.forms {
            FormSet::Primitive => gkz_representatives(disc)?,
            FormSet::WithImprimitive => heegner_forms(disc)?,
        };
        if self.config.deterministic_sum {
            forms.sort();
        }
        Ok(forms)
    }

    /// Certified values of the raised form at the CM points of `forms`.
    pub fn evaluate_forms(
        &self,
        forms: &[QuadForm],
        target_bits: usize,
    ) -> Result<(Vec<CertifiedValue>, EvalPlan)> {
        let signs = self.spec.signs.clone();
        // relocation acts on the exact forms; coordinates are recomputed below
        let placed: Vec<(QuadForm, i8)> = forms
            .iter()
            .map(|q| match (&signs, self.config.relocation) {
                (Some(s), true) => {
                    let moved = atkin_lehner_relocate(&heegner_point(q, 64), s);
                    (moved.source, moved.sign)
                }
                _ => (*q, 1),
            })
            .collect();
        let ims: Vec<f64> = placed
            .iter()
            .map(|(q, _)| (-q.discriminant() as f64).sqrt() / (2.0 * q.a as f64))
            .collect();
        let mut spec = self.spec.clone();
        for attempt in 0..4 {
            let plan = spec.plan(&ims, target_bits)?;
            let table = spec.float_table(2 * plan.terms, plan.precision)?;
            let eval_one = |(q, sign): &(QuadForm, i8)| {
                let mut cc = bignum::consts();
                let z = Point::from(&heegner_point(q, plan.precision + 16));
                let lo = maass::eval_truncated(Kind::Raised, &z, &table, plan.terms, &plan.growth, &mut cc);
                let hi = maass::eval_truncated(Kind::Raised, &z, &table, 2 * plan.terms, &plan.growth, &mut cc);
                let ok = lo.overlaps(&hi, plan.precision);
                let mut v = if *sign < 0 { hi.neg() } else { hi };
                if ok {
                    v.certified = Certification::DoubleChecked;
                }
                v
            };
            let values: Vec<CertifiedValue> = placed.par_iter().map(eval_one).collect();
            if values.iter().all(|v| v.certified == Certification::DoubleChecked) || attempt == 3 {
                return Ok((values, plan));
            }
            log::warn!(
                "certification failure: M vs 2M disagree (attempt {attempt}); raising growth constant"
            );
            spec.growth = spec.growth.raised(maass::GROWTH_SAFETY);
        }
        unreachable!()
    }

    fn sum(&self, values: &[CertifiedValue], p: usize) -> CertifiedValue {
        if self.config.deterministic_sum {
            values
                .iter()
                .fold(CertifiedValue::zero(), |acc, v| acc.add(v, p))
        } else {
            values
                .par_iter()
                .cloned()
                .reduce(CertifiedValue::zero, |a, b| a.add(&b, p))
        }
    }

    /// `Tr(n)` with every point evaluated to absolute accuracy `2^-target_bits`.
    pub fn partition_trace(&self, n: u64, target_bits: usize) -> Result<TraceReport> {
        let disc = Discriminant::partition(n)?;
        let d = disc.d();
        let forms = self.forms(&disc)?;
        let (values, plan) = self.evaluate_forms(&forms, target_bits)?;
        let p = plan.precision;
        let trace = self.sum(&values, p);
        let db = bignum::from_i64(d as i64, 64);
        let quotient = trace.value.re.div(&db, p, RM);
        let (rounded, dist) = bignum::round_nearest(&quotient);
        // |Tr/D - p| <= |q - p| + rounding of the quotient + err/D
        let budget = LogBound::of(&dist)
            .add(bignum::unit_roundoff(p).mul(LogBound::of(&quotient)))
            .add(trace.err.scale(1.0 / d as f64));
        let im_ok = LogBound::of(&trace.value.im).log2() <= trace.err.log2();
        let double_checked = trace.certified == Certification::DoubleChecked;
        let margin = 0.5 - budget.to_f64();
        let certified = margin > 0.0 && im_ok && double_checked;
        Ok(TraceReport {
            n,
            d,
            forms,
            values,
            trace,
            p_n: certified.then_some(rounded),
            rounding_margin: margin,
            certified,
            target_bits,
            plan,
        })
    }

    /// Certified `p(n)`, doubling the target on failure.
    pub fn partition(&self, n: u64) -> Result<BigInt> {
        Ok(self.partition_report(n)?.p_n.expect("certified"))
    }

    /// The certified trace report behind [`Engine::partition`].
    pub fn partition_report(&self, n: u64) -> Result<TraceReport> {
        if n == 0 {
            return Err(Error::NonPositiveIndex);
        }
        let mut target = 32;
        let mut best = f64::NEG_INFINITY;
        for _ in 0..=self.config.max_retries {
            let r = self.partition_trace(n, target)?;
            if r.certified {
                return Ok(r);
            }
            best = best.max(r.rounding_margin);
            log::info!("p({n}): rounding not certified at {target} bits, doubling");
            target *= 2;
        }
        Err(Error::Uncertified {
            retries: self.config.max_retries,
            margin: best,
        })
    }

    /// Coefficients of `prod (x - P_i)` (descending) at precision `p`.
    fn product(&self, values: &[CertifiedValue], p: usize) -> Vec<CertifiedValue> {
        let mut coeffs = vec![CertifiedValue::exact(Complex::real(BigFloat::from_word(1, 64)))];
        for v in values {
            let mut next = coeffs.clone();
            next.push(CertifiedValue::zero());
            for k in 1..next.len() {
                next[k] = next[k].sub(&coeffs[k - 1].mul(v, p), p);
            }
            coeffs = next;
        }
        coeffs
    }

    fn poly_precision(&self, values: &[CertifiedValue], plan: &EvalPlan, s: u64) -> usize {
        let mags: f64 = values
            .iter()
            .map(|v| v.value.abs_bound().add(LogBound::pow2(0.0)).log2())
            .sum();
        let h = values.len();
        plan.precision.max(
            self.config.guard_bits
                + mags.ceil() as usize
                + h * ((s as f64).log2().ceil() as usize)
                + 64,
        )
    }

    /// Scaled coefficients `s^k c_k` with their integer roundings.
    fn scaled(
        &self,
        coeffs: &[CertifiedValue],
        s: u64,
        p: usize,
    ) -> Vec<(BigInt, f64, f64)> {
        let mut sk = BigInt::one();
        coeffs
            .iter()
            .skip(1)
            .map(|c| {
                sk *= s;
                let scaled = c.mul_exact_real(&bignum::from_bigint(&sk), p);
                let (n, dist) = bignum::round_nearest(&scaled.value.re);
                let off = LogBound::of(&dist).add(LogBound::of(&scaled.value.im));
                (n, off.log2(), scaled.err.log2())
            })
            .collect()
    }

    /// `H_n(x)` with every coefficient recovered from a certified rounding.
    pub fn hn_polynomial(&self, n: u64) -> Result<PartitionPolynomial> {
        Ok(self.hn_with_values(n)?.0)
    }

    /// `H_n` together with the point values used to build it.
    pub fn hn_with_values(&self, n: u64) -> Result<(PartitionPolynomial, Vec<CertifiedValue>, usize)> {
        if n == 0 {
            return Err(Error::NonPositiveIndex);
        }
        let disc = Discriminant::partition(n)?;
        let d = disc.d();
        let s = 6 * d;
        let forms = self.forms(&disc)?;
        let mut target = initial_target_bits(n, forms.len());
        let mut best = f64::INFINITY;
        for _ in 0..=self.config.max_retries {
            let (values, plan) = self.evaluate_forms(&forms, target)?;
            let p = self.poly_precision(&values, &plan, s);
            let coeffs = self.product(&values, p);
            let scaled = self.scaled(&coeffs, s, p);
            let worst = scaled
                .iter()
                .map(|(_, dist, err)| log2_add(*dist, *err))
                .fold(f64::NEG_INFINITY, f64::max);
            let checked = values.iter().all(|v| v.certified == Certification::DoubleChecked);
            if worst < -1.0 && checked {
                let mut sk = BigInt::one();
                let mut coefficients = vec![BigRational::one()];
                for (num, _, _) in &scaled {
                    sk *= s;
                    coefficients.push(BigRational::new(num.clone(), sk.clone()));
                }
                let poly = PartitionPolynomial {
                    n,
                    degree: forms.len(),
                    coefficients,
                    denominators_bound_used: s,
                    rounding_log2: scaled.iter().map(|(_, a, b)| log2_add(*a, *b)).collect(),
                    target_bits: target,
                };
                return Ok((poly, values, p));
            }
            best = best.min(worst);
            log::info!("H_{n}: rounding not certified at {target} bits (worst 2^{worst:.1}), doubling");
            target *= 2;
        }
        Err(Error::Uncertified {
            retries: self.config.max_retries,
            margin: 0.5 - best.exp2(),
        })
    }

    /// Distances of `(6D)^k e_k` and `D^k e_k` from integers.
    pub fn integrality_report(&self, n: u64) -> Result<IntegralityReport> {
        if n == 0 {
            return Err(Error::NonPositiveIndex);
        }
        let disc = Discriminant::partition(n)?;
        let d = disc.d();
        let forms = self.forms(&disc)?;
        let mut target = initial_target_bits(n, forms.len());
        let mut last = None;
        for _ in 0..=self.config.max_retries {
            let (values, plan) = self.evaluate_forms(&forms, target)?;
            let p = self.poly_precision(&values, &plan, 6 * d);
            let coeffs = self.product(&values, p);
            let rows: Vec<ScaleReport> = [(6 * d, false), (d, true)]
                .iter()
                .map(|&(s, exploratory)| {
                    let sc = self.scaled(&coeffs, s, p);
                    ScaleReport {
                        scale: s,
                        exploratory,
                        distance_log2: sc.iter().map(|r| r.1).collect(),
                        err_log2: sc.iter().map(|r| r.2).collect(),
                    }
                })
                .collect();
            let certified = rows[0].within(INTEGRALITY_TOL_LOG2);
            let report = IntegralityReport {
                n,
                rows,
                certified,
                target_bits: target,
            };
            if certified {
                return Ok(report);
            }
            last = Some(report);
            target *= 2;
        }
        Ok(last.expect("at least one attempt"))
    }
}

/// Bare sum of `(1/4pi) R_{-2} f` over one representative per
/// `Gamma0(N)`-class of Heegner forms of `disc` (imprimitive layers
/// included), each point with weight 1. No normalization is applied; see
/// [`theorem_normalization`] and [`partition_conversion_factor`].
pub fn general_trace(
    spec: &MaassEvalSpec,
    disc: &Discriminant,
    target_bits: usize,
) -> Result<CertifiedValue> {
    if disc.d() == 3 || disc.d() == 4 {
        return Err(Error::StabilizerCorner(disc.level()));
    }
    if spec.level != disc.level() {
        return Err(Error::InvalidHeegnerDatum {
            d: disc.d(),
            r: disc.r(),
            level: disc.level(),
            reason: "level differs from the form's level",
        });
    }
    let engine = Engine::from_spec(spec.clone(), TraceConfig::default());
    let forms = engine.forms(disc)?;
    let (values, plan) = engine.evaluate_forms(&forms, target_bits)?;
    Ok(engine.sum(&values, plan.precision))
}

/// [`Engine::partition_trace`] with the default configuration.
pub fn partition_trace(n: u64, target_bits: usize) -> Result<TraceReport> {
    Engine::default().partition_trace(n, target_bits)
}

/// [`Engine::partition`] with the default configuration.
pub fn partition(n: u64) -> Result<BigInt> {
    Engine::default().partition(n)
}

/// [`Engine::hn_polynomial`] with the default configuration.
pub fn hn_polynomial(n: u64) -> Result<PartitionPolynomial> {
    Engine::default().hn_polynomial(n)
}

/// [`Engine::integrality_report`] with the default configuration.
pub fn integrality_report(n: u64) -> Result<IntegralityReport> {
    Engine::default().integrality_report(n)
}
