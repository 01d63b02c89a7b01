//! Serializable results. Exact numbers are decimal strings; approximations
//! carry an `err` bound next to them.

use std::fmt::Write as _;

use cmtrace_core::bignum::{self, Certification, CertifiedValue};
use cmtrace_core::{PartitionPolynomial, QuadForm, TraceReport};
use num_rational::BigRational;
use serde::Serialize;

/// Digits after the decimal point in rendered approximations.
pub const DIGITS: usize = 30;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Approx {
    pub re: String,
    pub im: String,
    pub err: f64,
    pub certification: &'static str,
}

impl From<&CertifiedValue> for Approx {
    fn from(v: &CertifiedValue) -> Self {
        Approx {
            re: bignum::to_decimal(&v.value.re, DIGITS),
            im: bignum::to_decimal(&v.value.im, DIGITS),
            err: v.err_f64(),
            certification: match v.certified {
                Certification::Heuristic => "heuristic",
                Certification::DoubleChecked => "double-checked",
            },
        }
    }
}

impl Approx {
    fn text(&self) -> String {
        let im = self.im.trim_start_matches('-');
        let sign = if self.im.starts_with('-') { '-' } else { '+' };
        format!("{} {sign} {im}i  (err {:.2e})", self.re, self.err)
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct FormValue {
    pub form: String,
    pub value: Approx,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct PnOutput {
    pub n: u64,
    #[serde(rename = "D")]
    pub d: String,
    pub p: Option<String>,
    #[serde(rename = "trace_times_D")]
    pub trace_times_d: Option<String>,
    pub certified: bool,
    pub trace: Approx,
    pub rounding_margin: f64,
    pub truncation: usize,
    pub precision_bits: usize,
    pub values: Vec<FormValue>,
}

impl From<&TraceReport> for PnOutput {
    fn from(r: &TraceReport) -> Self {
        PnOutput {
            n: r.n,
            d: r.d.to_string(),
            p: r.p_n.as_ref().map(|p| p.to_string()),
            trace_times_d: r.trace_times_d().map(|t| t.to_string()),
            certified: r.certified,
            trace: Approx::from(&r.trace),
            rounding_margin: r.rounding_margin,
            truncation: r.plan.terms,
            precision_bits: r.plan.precision,
            values: r
                .forms
                .iter()
                .zip(&r.values)
                .map(|(q, v)| FormValue {
                    form: q.to_string(),
                    value: Approx::from(v),
                })
                .collect(),
        }
    }
}

impl PnOutput {
    pub fn text(&self) -> String {
        let mut s = String::new();
        match &self.p {
            Some(p) => writeln!(s, "p({}) = {p}", self.n).unwrap(),
            None => writeln!(s, "p({}) = <uncertified>", self.n).unwrap(),
        }
        if let Some(t) = &self.trace_times_d {
            writeln!(s, "Tr({}) = {t}  (D = {})", self.n, self.d).unwrap();
        }
        writeln!(s, "trace  ~ {}", self.trace.text()).unwrap();
        writeln!(
            s,
            "forms: {}, M = {}, precision = {} bits, margin = {:.3}",
            self.values.len(),
            self.truncation,
            self.precision_bits,
            self.rounding_margin
        )
        .unwrap();
        s
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Rational {
    pub num: String,
    pub den: String,
}

impl From<&BigRational> for Rational {
    fn from(r: &BigRational) -> Self {
        Rational {
            num: r.numer().to_string(),
            den: r.denom().to_string(),
        }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct PolyOutput {
    pub n: u64,
    pub degree: usize,
    /// Descending powers, leading coefficient first.
    pub coefficients: Vec<Rational>,
    pub denominator_bound: String,
    pub certified: bool,
}

impl From<&PartitionPolynomial> for PolyOutput {
    fn from(h: &PartitionPolynomial) -> Self {
        PolyOutput {
            n: h.n,
            degree: h.degree,
            coefficients: h.coefficients.iter().map(Rational::from).collect(),
            denominator_bound: h.denominators_bound_used.to_string(),
            certified: true,
        }
    }
}

impl PolyOutput {
    pub fn text(&self) -> String {
        let mut s = format!("H_{}(x) =", self.n);
        for (i, c) in self.coefficients.iter().enumerate() {
            let power = self.degree - i;
            let neg = c.num.starts_with('-');
            let num = c.num.trim_start_matches('-');
            if num == "0" {
                continue;
            }
            let body = if c.den == "1" {
                num.to_string()
            } else {
                format!("({num}/{})", c.den)
            };
            let body = match (power, body.as_str()) {
                (0, _) => body,
                (1, "1") => "x".into(),
                (_, "1") => format!("x^{power}"),
                (1, _) => format!("{body}*x"),
                _ => format!("{body}*x^{power}"),
            };
            if i == 0 {
                write!(s, " {}{body}", if neg { "-" } else { "" }).unwrap();
            } else {
                write!(s, " {} {body}", if neg { '-' } else { '+' }).unwrap();
            }
        }
        s.push('\n');
        s
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct FormEntry {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub primitive: bool,
    pub heegner_point: Approx,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct FormsOutput {
    pub n: u64,
    #[serde(rename = "D")]
    pub d: String,
    pub class_number: usize,
    pub forms: Vec<FormEntry>,
}

impl FormsOutput {
    pub fn new(n: u64, d: u64, class_number: usize, forms: &[QuadForm]) -> Self {
        let forms = forms
            .iter()
            .map(|q| {
                let pt = cmtrace_core::heegner_point(q, 128);
                let v = CertifiedValue::with_err(
                    bignum::Complex::new(pt.re.clone(), pt.im.clone()),
                    pt.err,
                );
                FormEntry {
                    a: q.a,
                    b: q.b,
                    c: q.c,
                    primitive: q.is_primitive(),
                    heegner_point: Approx::from(&v),
                }
            })
            .collect();
        FormsOutput {
            n,
            d: d.to_string(),
            class_number,
            forms,
        }
    }

    pub fn text(&self) -> String {
        let mut s = format!(
            "D = {}, h(-D) = {}, {} forms\n",
            self.d,
            self.class_number,
            self.forms.len()
        );
        for f in &self.forms {
            let re = &f.heegner_point.re[..f.heegner_point.re.len().min(22)];
            let im = &f.heegner_point.im[..f.heegner_point.im.len().min(22)];
            writeln!(
                s,
                "[{}, {}, {}]{}  alpha = {re} + {im}i",
                f.a,
                f.b,
                f.c,
                if f.primitive { "" } else { " (imprimitive)" }
            )
            .unwrap();
        }
        s
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct VerifyRow {
    pub n: u64,
    pub computed: Option<String>,
    pub oracle: String,
    pub matches: bool,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct VerifyOutput {
    pub from: u64,
    pub to: u64,
    pub checked: usize,
    pub matches: usize,
    pub rows: Vec<VerifyRow>,
}

impl VerifyOutput {
    pub fn text(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            writeln!(
                s,
                "{:>5}  {:>24}  {:>24}  {}",
                r.n,
                r.computed.as_deref().unwrap_or("-"),
                r.oracle,
                if r.matches { "ok" } else { "MISMATCH" }
            )
            .unwrap();
        }
        writeln!(s, "{}/{} matches", self.matches, self.checked).unwrap();
        s
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct EvalOutput {
    pub form: String,
    pub point: Approx,
    pub value: Approx,
}

impl EvalOutput {
    pub fn text(&self) -> String {
        format!(
            "alpha = {}\nP(alpha) = {}\n",
            self.point.text(),
            self.value.text()
        )
    }
}
