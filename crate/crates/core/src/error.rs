use thiserror::Error;

/// Errors surfaced by the core engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("form [{a}, {b}, {c}] is not positive definite")]
    NotPositiveDefinite { a: i64, b: i64, c: i64 },

    #[error("-{0} is not a discriminant (must be 0 or 1 mod 4)")]
    InvalidDiscriminant(u64),

    #[error("invalid Heegner datum (D={d}, r={r}, N={level}): {reason}")]
    InvalidHeegnerDatum {
        d: u64,
        r: i64,
        level: u64,
        reason: &'static str,
    },

    #[error("level {0} is not squarefree")]
    LevelNotSquarefree(u64),

    #[error("representative search exhausted at a <= {bound}: matched {found} of {expected} classes")]
    SearchExhausted {
        bound: i64,
        found: usize,
        expected: usize,
    },

    #[error("no Heegner representatives for D={0}")]
    NoRepresentatives(u64),

    #[error("power series has zero leading coefficient")]
    ZeroLeadingCoefficient,

    #[error("malformed eta quotient: {0}")]
    MalformedEtaQuotient(&'static str),

    #[error("point too close to the real axis (im = {0:e})")]
    PointTooLow(f64),

    #[error("input form has no principal part; its raised image is degenerate")]
    NoPrincipalPart,

    #[error("Atkin-Lehner signs are not a character on the exact divisors of {0}")]
    NotACharacter(u64),

    #[error("stabilizer corner D in {{3, 4}} is not supported at level {0}")]
    StabilizerCorner(u64),

    #[error("coefficient table truncated at order {available}, {needed} required")]
    Truncation { needed: i64, available: i64 },

    #[error("n must be positive")]
    NonPositiveIndex,

    #[error("n = {0} exceeds the enumeration guard")]
    TooLarge(u64),

    #[error("rounding could not be certified after {retries} retries (best margin {margin:.3e})")]
    Uncertified { retries: u32, margin: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
