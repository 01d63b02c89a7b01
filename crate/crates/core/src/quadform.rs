//! Positive definite binary quadratic forms, their reduction theory, level-N
//! Heegner representatives and the associated CM points.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use astro_float::BigFloat;
use num_integer::Integer;

use crate::bignum::{self, LogBound, RM};
use crate::error::{Error, Result};

/// Integral binary quadratic form `a x^2 + b x y + c y^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QuadForm {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl fmt::Display for QuadForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{},{}]", self.a, self.b, self.c)
    }
}

/// Integer 2x2 matrix `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mat2 {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2::new(1, 0, 0, 1);
    pub const S: Mat2 = Mat2::new(0, -1, 1, 0);

    pub const fn new(a: i64, b: i64, c: i64, d: i64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub const fn translation(k: i64) -> Self {
        Mat2::new(1, k, 0, 1)
    }

    pub fn det(&self) -> i64 {
        self.a * self.d - self.b * self.c
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    /// Adjugate, i.e. `det * inverse`.
    pub fn adj(&self) -> Mat2 {
        Mat2::new(self.d, -self.b, -self.c, self.a)
    }
}

impl QuadForm {
    /// Builds a positive definite form.
    pub fn new(a: i64, b: i64, c: i64) -> Result<Self> {
        let q = QuadForm { a, b, c };
        if a > 0 && q.discriminant() < 0 {
            Ok(q)
        } else {
            Err(Error::NotPositiveDefinite { a, b, c })
        }
    }

    pub fn discriminant(&self) -> i64 {
        self.b * self.b - 4 * self.a * self.c
    }

    pub fn content(&self) -> i64 {
        self.a.gcd(&self.b).gcd(&self.c)
    }

    pub fn is_primitive(&self) -> bool {
        self.content() == 1
    }

    pub fn eval(&self, x: i64, y: i64) -> i64 {
        self.a * x * x + self.b * x * y + self.c * y * y
    }

    /// `(Q o g)(x, y) = Q(g (x, y))`; satisfies `(Q o g) o h = Q o (g h)`.
    pub fn act(&self, g: &Mat2) -> QuadForm {
        QuadForm {
            a: self.eval(g.a, g.c),
            b: 2 * self.a * g.a * g.b + self.b * (g.a * g.d + g.b * g.c) + 2 * self.c * g.c * g.d,
            c: self.eval(g.b, g.d),
        }
    }

    pub fn is_reduced(&self) -> bool {
        let QuadForm { a, b, c } = *self;
        b.abs() <= a && a <= c && (b >= 0 || (b.abs() != a && a != c))
    }

    /// Scale all coefficients by `f`.
    pub fn scaled(&self, f: i64) -> QuadForm {
        QuadForm {
            a: self.a * f,
            b: self.b * f,
            c: self.c * f,
        }
    }

    /// The form whose root is `z + k` when `self` has root `z`.
    pub fn translated(&self, k: i64) -> QuadForm {
        self.act(&Mat2::translation(-k))
    }

    /// The form whose root is `g z`, keeping the content of `self`.
    pub fn moved_by(&self, g: &Mat2) -> QuadForm {
        let raw = self.act(&g.adj());
        let scale = raw.content() / self.content();
        let q = QuadForm {
            a: raw.a / scale,
            b: raw.b / scale,
            c: raw.c / scale,
        };
        debug_assert_eq!(q.discriminant(), self.discriminant());
        q
    }
}

/// Reduce `q` under `SL2(Z)`. Returns the reduced form `r` and the witness
/// `g` with `q.act(&g) == r`.
pub fn reduce(q: &QuadForm) -> Result<(QuadForm, Mat2)> {
    if q.a <= 0 || q.discriminant() >= 0 {
        return Err(Error::NotPositiveDefinite {
            a: q.a,
            b: q.b,
            c: q.c,
        });
    }
    let mut f = *q;
    let mut g = Mat2::IDENTITY;
    loop {
        // bring b into (-a, a]
        let k = Integer::div_floor(&(f.a - f.b), &(2 * f.a));
        if k != 0 {
            let t = Mat2::translation(k);
            f = f.act(&t);
            g = g.mul(&t);
        }
        if f.a > f.c || (f.a == f.c && f.b < 0) {
            f = f.act(&Mat2::S);
            g = g.mul(&Mat2::S);
            continue;
        }
        return Ok((f, g));
    }
}

fn check_disc(d: u64) -> Result<()> {
    if d == 0 || !(d % 4 == 0 || d % 4 == 3) {
        return Err(Error::InvalidDiscriminant(d));
    }
    Ok(())
}

/// All reduced forms of discriminant `-d`, primitive or not, sorted.
pub fn enumerate_reduced_all(d: u64) -> Result<Vec<QuadForm>> {
    check_disc(d)?;
    let d = d as i64;
    let mut out = Vec::new();
    let mut a = 1i64;
    while 3 * a * a <= d {
        for b in -a..=a {
            let num = b * b + d;
            if num % (4 * a) != 0 {
                continue;
            }
            let q = QuadForm {
                a,
                b,
                c: num / (4 * a),
            };
            if q.is_reduced() {
                out.push(q);
            }
        }
        a += 1;
    }
    out.sort();
    Ok(out)
}

/// Primitive reduced forms of discriminant `-d`.
pub fn enumerate_reduced(d: u64) -> Result<Vec<QuadForm>> {
    Ok(enumerate_reduced_all(d)?
        .into_iter()
        .filter(QuadForm::is_primitive)
        .collect())
}

/// The class number `h(-d)`.
pub fn class_number(d: u64) -> Result<usize> {
    Ok(enumerate_reduced(d)?.len())
}

pub fn is_squarefree(n: u64) -> bool {
    let mut p = 2u64;
    let mut m = n;
    while p * p <= m {
        if m % (p * p) == 0 {
            return false;
        }
        if m % p == 0 {
            m /= p;
        }
        p += 1;
    }
    true
}

/// Heegner datum: discriminant `-d`, residue `r` with `r^2 = -d (mod 4N)`,
/// and squarefree level `N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Discriminant {
    d: u64,
    r: i64,
    level: u64,
}

impl Discriminant {
    pub fn new(d: u64, r: i64, level: u64) -> Result<Self> {
        let bad = |reason| Error::InvalidHeegnerDatum { d, r, level, reason };
        if level == 0 {
            return Err(bad("level must be positive"));
        }
        if !is_squarefree(level) {
            return Err(Error::LevelNotSquarefree(level));
        }
        check_disc(d)?;
        let m = 4 * level as i128;
        if ((r as i128) * (r as i128) + d as i128).rem_euclid(m) != 0 {
            return Err(bad("r^2 + D is not divisible by 4N"));
        }
        let r = r.rem_euclid(2 * level as i64);
        Ok(Discriminant { d, r, level })
    }

    /// The datum of the partition pipeline: `D = 24n - 1`, `r = 1`, `N = 6`.
    pub fn partition(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::NonPositiveIndex);
        }
        Discriminant::new(24 * n - 1, 1, 6)
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    pub fn r(&self) -> i64 {
        self.r
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    /// Whether `q` has discriminant `-d`, `N | a` and `b = r (mod 2N)`.
    pub fn admits(&self, q: &QuadForm) -> bool {
        let n = self.level as i64;
        q.discriminant() == -(self.d as i64)
            && q.a > 0
            && q.a % n == 0
            && (q.b - self.r).rem_euclid(2 * n) == 0
    }
}

fn isqrt(n: u64) -> u64 {
    let mut x = (n as f64).sqrt() as u64;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

/// One primitive level-N representative per `SL2(Z)` class of discriminant
/// `-d`, found by scanning forms with `N | a`, `b = r (mod 2N)`,
/// `0 <= b < 2a` in increasing `a` and keeping the first hit per class.
pub fn gkz_representatives(disc: &Discriminant) -> Result<Vec<QuadForm>> {
    let expected = class_number(disc.d)?;
    let n = disc.level as i64;
    let d = disc.d as i64;
    // smallest s with 3 s^2 >= d, i.e. ceil(sqrt(d / 3))
    let mut s = isqrt(disc.d / 3);
    while 3 * s * s < disc.d {
        s += 1;
    }
    let mut bound = 2 * n * s as i64;
    let cap = bound << 8;
    let mut seen = HashSet::new();
    let mut reps = Vec::with_capacity(expected);
    let mut a = n;
    while reps.len() < expected {
        if a > bound {
            if bound >= cap {
                return Err(Error::SearchExhausted {
                    bound,
                    found: reps.len(),
                    expected,
                });
            }
            bound *= 2;
            log::debug!("representative search bound raised to {bound}");
        }
        let mut b = disc.r;
        while b < 2 * a {
            let num = b * b + d;
            if num % (4 * a) == 0 {
                let q = QuadForm {
                    a,
                    b,
                    c: num / (4 * a),
                };
                if q.is_primitive() {
                    let (key, _) = reduce(&q)?;
                    if seen.insert(key) {
                        reps.push(q);
                    }
                }
            }
            b += 2 * n;
        }
        a += n;
    }
    if reps.is_empty() {
        return Err(Error::NoRepresentatives(disc.d));
    }
    Ok(reps)
}

/// Every Heegner form of the datum up to `Gamma0(N)`, including imprimitive
/// ones `f * Q'` with `f^2 | d`, `gcd(f, 2N) = 1`.
///
/// The primitive part is [`gkz_representatives`]; each imprimitive layer is
/// the primitive set of `(d / f^2, r / f mod 2N, N)` scaled by `f`.
pub fn heegner_forms(disc: &Discriminant) -> Result<Vec<QuadForm>> {
    let mut out = Vec::new();
    let two_n = 2 * disc.level as i64;
    let mut f = 1u64;
    while f * f <= disc.d {
        if disc.d % (f * f) == 0 && check_disc(disc.d / (f * f)).is_ok() {
            let fi = f as i64;
            if fi.gcd(&two_n) == 1 {
                let inv = mod_inverse(fi, two_n).expect("coprime");
                let r = (disc.r * inv).rem_euclid(two_n);
                let sub = Discriminant::new(disc.d / (f * f), r, disc.level)?;
                out.extend(gkz_representatives(&sub)?.into_iter().map(|q| q.scaled(fi)));
            }
        }
        f += 1;
    }
    Ok(out)
}

fn mod_inverse(x: i64, m: i64) -> Option<i64> {
    let e = x.extended_gcd(&m);
    (e.gcd == 1).then(|| e.x.rem_euclid(m))
}

/// CM point of a form, with an absolute bound on the coordinate error.
#[derive(Clone, Debug)]
pub struct HeegnerPoint {
    pub re: BigFloat,
    pub im: BigFloat,
    /// Bound on `|re - exact re| + |im - exact im|`.
    pub err: LogBound,
    pub precision: usize,
    pub source: QuadForm,
    /// Atkin-Lehner relocation sign: `P(original) = sign * P(this point)`.
    pub sign: i8,
}

/// The root `(-b + i sqrt(d)) / 2a` of `q(x, 1)` in the upper half-plane.
pub fn heegner_point(q: &QuadForm, precision_bits: usize) -> HeegnerPoint {
    let p = precision_bits.max(64);
    let two_a = bignum::from_i64(2 * q.a, p);
    let re = bignum::from_i64(-q.b, p).div(&two_a, p, RM);
    let im = bignum::from_i64(-q.discriminant(), p)
        .sqrt(p, RM)
        .div(&two_a, p, RM);
    let u = bignum::unit_roundoff(p);
    let err = u
        .mul(LogBound::of(&re))
        .add(u.scale(2.0).mul(LogBound::of(&im)));
    HeegnerPoint {
        re,
        im,
        err,
        precision: p,
        source: *q,
        sign: 1,
    }
}

/// Atkin-Lehner sign data: a character on the exact divisors of `N` under
/// `Q * Q' = Q Q' / gcd(Q, Q')^2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtkinLehnerSigns {
    level: u64,
    signs: BTreeMap<u64, i8>,
}

impl AtkinLehnerSigns {
    /// `signs` lists `(Q, s(W_Q))`; missing exact divisors are rejected.
    pub fn new(level: u64, signs: &[(u64, i8)]) -> Result<Self> {
        if !is_squarefree(level) {
            return Err(Error::LevelNotSquarefree(level));
        }
        let map: BTreeMap<u64, i8> = signs.iter().copied().collect();
        let divisors = exact_divisors(level);
        let ok = divisors.iter().all(|q| matches!(map.get(q), Some(1) | Some(-1)))
            && map.len() == divisors.len()
            && map[&1] == 1
            && divisors.iter().all(|&q1| {
                divisors
                    .iter()
                    .all(|&q2| map[&star(q1, q2)] == map[&q1] * map[&q2])
            });
        if !ok {
            return Err(Error::NotACharacter(level));
        }
        Ok(AtkinLehnerSigns { level, signs: map })
    }

    /// Trivial character (every involution acts as `+1`).
    pub fn trivial(level: u64) -> Result<Self> {
        let s: Vec<_> = exact_divisors(level).into_iter().map(|q| (q, 1)).collect();
        Self::new(level, &s)
    }

    /// Signs of the level-6 form `F`: fixed by `W_6`, negated by `W_2`, `W_3`.
    pub fn partition() -> Self {
        Self::new(6, &[(1, 1), (2, -1), (3, -1), (6, 1)]).expect("valid character")
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn sign(&self, q: u64) -> i8 {
        self.signs[&q]
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, i8)> + '_ {
        self.signs.iter().map(|(&q, &s)| (q, s))
    }
}

/// Exact divisors `Q | N` with `gcd(Q, N/Q) = 1`, ascending.
pub fn exact_divisors(n: u64) -> Vec<u64> {
    (1..=n)
        .filter(|q| n % q == 0 && q.gcd(&(n / q)) == 1)
        .collect()
}

/// `Q * Q' = Q Q' / gcd(Q, Q')^2`.
pub fn star(q1: u64, q2: u64) -> u64 {
    let g = q1.gcd(&q2);
    q1 * q2 / (g * g)
}

/// A matrix `[[Q x, y], [N, Q]]` of determinant `Q` representing `W_Q^N`.
pub fn atkin_lehner_matrix(q: u64, level: u64) -> Mat2 {
    let (q, n) = (q as i64, level as i64);
    if q == n {
        return Mat2::new(0, -1, n, 0);
    }
    // Q x - (N/Q) y = 1
    let e = q.extended_gcd(&(n / q));
    debug_assert_eq!(e.gcd, 1);
    let m = Mat2::new(q * e.x, -e.y, n, q);
    debug_assert_eq!(m.det(), q);
    m
}

/// Translate so that `-a < b <= a`.
fn centred(q: &QuadForm) -> QuadForm {
    let k = Integer::div_floor(&(q.a - q.b), &(2 * q.a));
    q.act(&Mat2::translation(k))
}

/// Apply the single involution `W_q` to a point.
pub fn apply_involution(
    pt: &HeegnerPoint,
    q: u64,
    signs: &AtkinLehnerSigns,
) -> HeegnerPoint {
    let w = atkin_lehner_matrix(q, signs.level());
    let mut out = heegner_point(&pt.source.moved_by(&w), pt.precision);
    out.sign = pt.sign * signs.sign(q);
    out
}

/// Move `pt` to the point of largest imaginary part reachable by
/// Atkin-Lehner involutions and integer translations, greedily.
///
/// Works on the exact form: for a fixed discriminant a larger imaginary part
/// is a smaller leading coefficient.
pub fn atkin_lehner_relocate(pt: &HeegnerPoint, signs: &AtkinLehnerSigns) -> HeegnerPoint {
    let level = signs.level();
    let mats: Vec<(u64, Mat2)> = exact_divisors(level)
        .into_iter()
        .filter(|&q| q > 1)
        .map(|q| (q, atkin_lehner_matrix(q, level)))
        .collect();
    let mut form = pt.source;
    let mut sign = pt.sign;
    let mut moved = false;
    loop {
        form = centred(&form);
        // W_Q = [[*, *], [N, Q]] after shifting by t sends y to
        // Q y / |N (z + t) + Q|^2, so only t near -(x + Q/N) matters.
        let best = mats
            .iter()
            .flat_map(|(q, w)| {
                let t0 = Integer::div_floor(
                    &(form.b * level as i64 - 2 * form.a * *q as i64),
                    &(2 * form.a * level as i64),
                );
                (t0 - 1..=t0 + 1).map(move |t| (*q, form.translated(t).moved_by(w)))
            })
            .min_by_key(|(_, f)| f.a);
        match best {
            Some((q, f)) if f.a < form.a => {
                form = f;
                sign *= signs.sign(q);
                moved = true;
            }
            _ => break,
        }
    }
    if !moved {
        return pt.clone();
    }
    let mut out = heegner_point(&form, pt.precision);
    out.sign = sign;
    out
}
