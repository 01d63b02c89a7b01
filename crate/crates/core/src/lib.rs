//! Partition numbers as traces of a weak Maass form over Heegner points.
//!
//! `p(n) = Tr(n) / (24n - 1)` where `Tr(n)` sums the weight-0 form `P` over
//! CM points of discriminant `-(24n - 1)` on `X0(6)`. The crate builds the
//! exact Fourier expansion of the weight -2 form `F`, evaluates `P` with
//! tracked error bounds, and rounds the trace (or the symmetric functions
//! of the values) to exact integers and rationals.

pub mod bignum;
pub mod error;
pub mod maass;
pub mod oracle;
pub mod qseries;
pub mod quadform;
pub mod trace;

pub use bignum::{Certification, CertifiedValue, Complex, LogBound};
pub use error::{Error, Result};
pub use maass::{
    choose_truncation, eval_f, eval_p, eval_partial_f, CoefficientSource, FixedCoefficients,
    GrowthModel, MaassEvalSpec, PartitionFormSource, Point,
};
pub use oracle::{partition_pentagonal, partitions_brute, PartitionTable};
pub use qseries::{f_coefficients, EtaQuotientSpec, QSeries};
pub use quadform::{
    class_number, enumerate_reduced, gkz_representatives, heegner_forms, heegner_point, reduce,
    AtkinLehnerSigns, Discriminant, HeegnerPoint, QuadForm,
};
pub use trace::{
    general_trace, hn_polynomial, integrality_report, partition, partition_trace, Engine,
    FormSet, IntegralityReport, PartitionPolynomial, TraceConfig, TraceReport,
};
