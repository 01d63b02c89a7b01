use std::sync::Arc;

use anyhow::{bail, Context, Result};
use cmtrace_core::bignum::{Complex, CertifiedValue};
use cmtrace_core::maass::{self, CoefficientSource};
use cmtrace_core::{
    class_number, heegner_point, partition_pentagonal, Discriminant, Engine, Point, QuadForm,
};
use num_bigint::BigInt;
use num_integer::Integer;
use serde::Serialize;

use crate::cache::DiskCachedSource;
use crate::config::{Format, RunConfig};
use crate::output::{
    Approx, EvalOutput, FormsOutput, PnOutput, PolyOutput, VerifyOutput, VerifyRow,
};

/// Accuracy requested by `eval`.
pub const EVAL_TARGET_BITS: usize = 64;

/// Rendered output plus whether everything in it is certified.
pub struct Outcome {
    pub body: String,
    pub ok: bool,
}

fn render<T: Serialize>(value: &T, text: impl FnOnce(&T) -> String, format: Format) -> String {
    match format {
        Format::Text => text(value),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(value).expect("serializable");
            s.push('\n');
            s
        }
    }
}

pub fn engine(config: &RunConfig) -> Engine {
    match &config.cache_dir {
        Some(dir) => {
            let source: Arc<dyn CoefficientSource> = DiskCachedSource::open(dir).into_arc();
            Engine::with_source(source, config.trace_config())
        }
        None => Engine::new(config.trace_config()),
    }
}

pub fn cmd_pn(n: u64, config: &RunConfig) -> Result<Outcome> {
    let report = engine(config).partition_report(n)?;
    let out = PnOutput::from(&report);
    Ok(Outcome {
        ok: out.certified,
        body: render(&out, PnOutput::text, config.format),
    })
}

pub fn cmd_poly(n: u64, config: &RunConfig) -> Result<Outcome> {
    let h = engine(config).hn_polynomial(n)?;
    let out = PolyOutput::from(&h);
    Ok(Outcome {
        ok: out.certified,
        body: render(&out, PolyOutput::text, config.format),
    })
}

pub fn cmd_forms(n: u64, config: &RunConfig) -> Result<Outcome> {
    let disc = Discriminant::partition(n)?;
    let forms = engine(config).forms(&disc)?;
    let out = FormsOutput::new(n, disc.d(), class_number(disc.d())?, &forms);
    Ok(Outcome {
        ok: true,
        body: render(&out, FormsOutput::text, config.format),
    })
}

/// Compare certified `p(n)` for `from..=to` with the pentagonal recurrence.
/// With `perturb`, bit 0 of the first trace is flipped before dividing.
pub fn cmd_verify(from: u64, to: u64, perturb: bool, config: &RunConfig) -> Result<Outcome> {
    if from == 0 || to < from {
        bail!("invalid range {from}..{to}");
    }
    let oracle = partition_pentagonal(to);
    let engine = engine(config);
    let mut rows = Vec::new();
    for n in from..=to {
        let report = engine
            .partition_report(n)
            .with_context(|| format!("p({n})"))?;
        let mut trace = report.trace_times_d();
        if perturb && n == from {
            trace = trace.map(|t| t ^ BigInt::from(1));
        }
        let d = BigInt::from(report.d);
        let computed = trace.and_then(|t| {
            let (q, r) = t.div_rem(&d);
            (r == BigInt::default()).then_some(q)
        });
        let expected = oracle.get(n).expect("in range").clone();
        rows.push(VerifyRow {
            n,
            matches: computed.as_ref() == Some(&expected),
            computed: computed.map(|c| c.to_string()),
            oracle: expected.to_string(),
        });
    }
    let matches = rows.iter().filter(|r| r.matches).count();
    let out = VerifyOutput {
        from,
        to,
        checked: rows.len(),
        matches,
        rows,
    };
    Ok(Outcome {
        ok: out.matches == out.checked,
        body: render(&out, VerifyOutput::text, config.format),
    })
}

/// `P` at the CM point of `[a, b, c]`.
pub fn cmd_eval(a: i64, b: i64, c: i64, config: &RunConfig) -> Result<Outcome> {
    let q = QuadForm::new(a, b, c)?;
    if q.discriminant() >= 0 || a <= 0 {
        bail!("[{a}, {b}, {c}] is not positive definite");
    }
    let engine = engine(config);
    let bits = config.precision_bits.unwrap_or(0).max(EVAL_TARGET_BITS + 64);
    let hp = heegner_point(&q, bits);
    let value = maass::eval_p(&Point::from(&hp), engine.spec(), EVAL_TARGET_BITS)?;
    let point = CertifiedValue::with_err(Complex::new(hp.re.clone(), hp.im.clone()), hp.err);
    let out = EvalOutput {
        form: q.to_string(),
        point: Approx::from(&point),
        value: Approx::from(&value),
    };
    Ok(Outcome {
        ok: out.value.certification == "double-checked",
        body: render(&out, EvalOutput::text, config.format),
    })
}
