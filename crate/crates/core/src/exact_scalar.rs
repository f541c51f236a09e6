//! Exact scalars for rotation numbers: rationals and quadratic irrationals.
//!
//! Index iteration formulas evaluate `[m·ρ]`, `E(m·ρ)` and `{m·ρ}` at very
//! large `m`, right next to integer thresholds; floating point is useless
//! there. This module supports exactly two scalar classes,
//!
//! * `Rational(p/q)` in lowest terms, and
//! * `Quadratic(a + b·√d)` with rational `a`, `b ≠ 0` and square-free `d ≥ 2`,
//!
//! which covers every rotation number appearing in the audits while keeping
//! all comparisons decidable by integer arithmetic: the sign of `u + v·√d`
//! is settled by comparing `u²` against `v²·d` with sign case analysis.
//!
//! Sums across *different* quadratic fields (as they occur in resonance
//! identities) are handled by [`FieldSum`], which decides equality exactly
//! through linear independence of `√d` over the rationals and decides the
//! sign of a nonzero value by adaptive-precision interval refinement.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScalarError {
    #[error("radicand {0} must be square-free and at least 2")]
    BadRadicand(u32),
    #[error("operands lie in different quadratic fields: sqrt({0}) vs sqrt({1})")]
    FieldMismatch(u32, u32),
    #[error("division by zero")]
    DivisionByZero,
    #[error("cannot parse scalar {input:?}: {reason}")]
    Parse { input: String, reason: String },
}

/// An exact real scalar: a rational or a quadratic irrational `a + b·√d`.
///
/// Values built through the constructors are canonical: rationals are in
/// lowest terms with positive denominator (guaranteed by the underlying
/// representation), and the `Quadratic` variant always has `b ≠ 0` and a
/// square-free radicand `d ≥ 2`, so a quadratic value is never secretly
/// rational. Canonicity is what makes derived equality mathematically
/// correct and `varphi` trivial for irrationals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ExactScalar {
    Rational(BigRational),
    Quadratic { a: BigRational, b: BigRational, d: u32 },
}

impl ExactScalar {
    pub fn zero() -> Self {
        ExactScalar::Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        ExactScalar::Rational(BigRational::one())
    }

    pub fn from_int(n: i64) -> Self {
        ExactScalar::Rational(BigRational::from_integer(n.into()))
    }

    pub fn from_big(n: BigInt) -> Self {
        ExactScalar::Rational(BigRational::from_integer(n))
    }

    pub fn from_ratio(r: BigRational) -> Self {
        ExactScalar::Rational(r)
    }

    /// Exact rational `num/den`. Panics if `den == 0`.
    pub fn rational(num: i64, den: i64) -> Self {
        ExactScalar::Rational(BigRational::new(num.into(), den.into()))
    }

    /// Builds `a + b·√d`, collapsing to `Rational` when `b = 0`.
    pub fn quadratic(a: BigRational, b: BigRational, d: u32) -> Result<Self, ScalarError> {
        if b.is_zero() {
            return Ok(ExactScalar::Rational(a));
        }
        if d < 2 || !is_squarefree(d) {
            return Err(ScalarError::BadRadicand(d));
        }
        Ok(ExactScalar::Quadratic { a, b, d })
    }

    /// Convenience form of [`ExactScalar::quadratic`] with small components.
    pub fn quadratic_i64(
        a_num: i64,
        a_den: i64,
        b_num: i64,
        b_den: i64,
        d: u32,
    ) -> Result<Self, ScalarError> {
        Self::quadratic(
            BigRational::new(a_num.into(), a_den.into()),
            BigRational::new(b_num.into(), b_den.into()),
            d,
        )
    }

    pub fn is_rational(&self) -> bool {
        matches!(self, ExactScalar::Rational(_))
    }

    pub fn is_integer(&self) -> bool {
        match self {
            ExactScalar::Rational(r) => r.is_integer(),
            ExactScalar::Quadratic { .. } => false,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ExactScalar::Rational(r) if r.is_zero())
    }

    pub fn as_ratio(&self) -> Option<&BigRational> {
        match self {
            ExactScalar::Rational(r) => Some(r),
            ExactScalar::Quadratic { .. } => None,
        }
    }

    /// The radicand of the quadratic part, if any.
    pub fn radicand(&self) -> Option<u32> {
        match self {
            ExactScalar::Rational(_) => None,
            ExactScalar::Quadratic { d, .. } => Some(*d),
        }
    }

    fn parts(&self) -> (BigRational, BigRational, Option<u32>) {
        match self {
            ExactScalar::Rational(r) => (r.clone(), BigRational::zero(), None),
            ExactScalar::Quadratic { a, b, d } => (a.clone(), b.clone(), Some(*d)),
        }
    }

    /// Radicand both operands can live under, or an error when they differ.
    fn joint_field(&self, other: &Self) -> Result<Option<u32>, ScalarError> {
        match (self.radicand(), other.radicand()) {
            (None, r) | (r, None) => Ok(r),
            (Some(x), Some(y)) if x == y => Ok(Some(x)),
            (Some(x), Some(y)) => Err(ScalarError::FieldMismatch(x, y)),
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, ScalarError> {
        let d = self.joint_field(other)?;
        let (a1, b1, _) = self.parts();
        let (a2, b2, _) = other.parts();
        match d {
            None => Ok(ExactScalar::Rational(a1 + a2)),
            Some(d) => Self::quadratic(a1 + a2, b1 + b2, d),
        }
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, ScalarError> {
        self.checked_add(&(-other))
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self, ScalarError> {
        let d = self.joint_field(other)?;
        let (a1, b1, _) = self.parts();
        let (a2, b2, _) = other.parts();
        match d {
            None => Ok(ExactScalar::Rational(a1 * a2)),
            Some(d) => {
                // (a1 + b1√d)(a2 + b2√d) = a1a2 + b1b2·d + (a1b2 + b1a2)√d
                let rad = BigRational::from_integer(d.into());
                Self::quadratic(&a1 * &a2 + &b1 * &b2 * rad, a1 * b2 + b1 * a2, d)
            }
        }
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self, ScalarError> {
        self.checked_mul(&other.recip()?)
    }

    /// Multiplicative inverse; errors on zero.
    pub fn recip(&self) -> Result<Self, ScalarError> {
        match self {
            ExactScalar::Rational(r) => {
                if r.is_zero() {
                    Err(ScalarError::DivisionByZero)
                } else {
                    Ok(ExactScalar::Rational(r.recip()))
                }
            }
            ExactScalar::Quadratic { a, b, d } => {
                // 1/(a + b√d) = (a − b√d)/(a² − b²d); the norm is nonzero
                // because √d is irrational and b ≠ 0.
                let rad = BigRational::from_integer((*d).into());
                let norm = a * a - b * b * rad;
                Self::quadratic(a / &norm, -(b / &norm), *d)
            }
        }
    }

    /// `k · self` for an integer `k`.
    pub fn scale(&self, k: i64) -> Self {
        self.scale_big(&BigInt::from(k))
    }

    pub fn scale_big(&self, k: &BigInt) -> Self {
        let kr = BigRational::from_integer(k.clone());
        match self {
            ExactScalar::Rational(r) => ExactScalar::Rational(r * kr),
            ExactScalar::Quadratic { a, b, d } => {
                if k.is_zero() {
                    return Self::zero();
                }
                ExactScalar::Quadratic { a: a * &kr, b: b * &kr, d: *d }
            }
        }
    }

    /// `[self]`, the greatest integer not exceeding the value.
    pub fn floor(&self) -> BigInt {
        match self {
            ExactScalar::Rational(r) => r.floor().to_integer(),
            ExactScalar::Quadratic { a, b, d } => floor_quad(a, b, *d),
        }
    }

    /// `E(self)`, the least integer not below the value.
    pub fn ceil(&self) -> BigInt {
        -(-self).floor()
    }

    /// `E(self) − [self]`: 0 iff the value is an integer, else 1.
    pub fn varphi(&self) -> u8 {
        if self.is_integer() {
            0
        } else {
            1
        }
    }

    /// Fractional part `{self} = self − [self]`, always in `[0, 1)`.
    pub fn fract(&self) -> Self {
        let f = self.floor();
        match self {
            ExactScalar::Rational(r) => {
                ExactScalar::Rational(r - BigRational::from_integer(f))
            }
            ExactScalar::Quadratic { a, b, d } => ExactScalar::Quadratic {
                a: a - BigRational::from_integer(f),
                b: b.clone(),
                d: *d,
            },
        }
    }

    /// `[m·self]` without building the intermediate scalar when `m` is small
    /// enough for machine arithmetic. This is the hot operation of every
    /// index evaluation.
    pub fn floor_mul(&self, m: i64) -> BigInt {
        match self {
            ExactScalar::Rational(r) => {
                if let (Some(p), Some(q)) = (r.numer().to_i64(), r.denom().to_i64()) {
                    if let Some(mp) = p.checked_mul(m) {
                        return BigInt::from(mp.div_euclid(q));
                    }
                }
                (r * BigRational::from_integer(m.into())).floor().to_integer()
            }
            ExactScalar::Quadratic { a, b, d } => {
                if let Some(k) = floor_quad_i64(a, b, *d, m) {
                    return BigInt::from(k);
                }
                let mr = BigRational::from_integer(m.into());
                floor_quad(&(a * &mr), &(b * &mr), *d)
            }
        }
    }

    /// `E(m·self)`.
    pub fn ceil_mul(&self, m: i64) -> BigInt {
        self.floor_mul(m) + BigInt::from(self.varphi_mul(m))
    }

    /// `E(m·self) − [m·self] ∈ {0, 1}`; 0 iff `m·self` is an integer.
    pub fn varphi_mul(&self, m: i64) -> u8 {
        match self {
            ExactScalar::Rational(r) => {
                if (BigInt::from(m) * r.numer()) % r.denom() == BigInt::zero() {
                    0
                } else {
                    1
                }
            }
            // An integer multiple of a quadratic irrational is never integral
            // (m = 0 cannot occur for iterate counts, but handle it anyway).
            ExactScalar::Quadratic { .. } => {
                if m == 0 {
                    0
                } else {
                    1
                }
            }
        }
    }

    /// `{m·self}` as an exact scalar.
    pub fn fract_mul(&self, m: i64) -> Self {
        let scaled = self.scale(m);
        scaled.fract()
    }

    /// Sign of the value: -1, 0, or +1.
    pub fn signum(&self) -> i8 {
        match self {
            ExactScalar::Rational(r) => match r.numer().sign() {
                Sign::Minus => -1,
                Sign::NoSign => 0,
                Sign::Plus => 1,
            },
            ExactScalar::Quadratic { a, b, d } => {
                let (u, v, _) = clear_denominators(a, b);
                match sign_pair(&u, &v, *d) {
                    Ordering::Less => -1,
                    Ordering::Equal => 0,
                    Ordering::Greater => 1,
                }
            }
        }
    }

    pub fn abs(&self) -> Self {
        if self.signum() < 0 {
            -self
        } else {
            self.clone()
        }
    }

    /// Approximate value; for display only, never for decisions.
    pub fn to_f64(&self) -> f64 {
        match self {
            ExactScalar::Rational(r) => ratio_f64(r),
            ExactScalar::Quadratic { a, b, d } => {
                ratio_f64(a) + ratio_f64(b) * (*d as f64).sqrt()
            }
        }
    }
}

fn ratio_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

impl Neg for &ExactScalar {
    type Output = ExactScalar;
    fn neg(self) -> ExactScalar {
        match self {
            ExactScalar::Rational(r) => ExactScalar::Rational(-r),
            ExactScalar::Quadratic { a, b, d } => {
                ExactScalar::Quadratic { a: -a, b: -b, d: *d }
            }
        }
    }
}

impl Neg for ExactScalar {
    type Output = ExactScalar;
    fn neg(self) -> ExactScalar {
        -&self
    }
}

macro_rules! panicking_op {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl $trait for &ExactScalar {
            type Output = ExactScalar;
            fn $method(self, rhs: &ExactScalar) -> ExactScalar {
                self.$checked(rhs).expect("operands in different quadratic fields")
            }
        }
        impl $trait for ExactScalar {
            type Output = ExactScalar;
            fn $method(self, rhs: ExactScalar) -> ExactScalar {
                (&self).$method(&rhs)
            }
        }
    };
}

panicking_op!(Add, add, checked_add);
panicking_op!(Sub, sub, checked_sub);
panicking_op!(Mul, mul, checked_mul);

impl PartialOrd for ExactScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExactScalar {
    /// Total order by real value. Same-field differences reduce to a single
    /// surd sign test; cross-field comparisons square out one radical at a
    /// time, so they stay exact as well.
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExactScalar::Rational(x), ExactScalar::Rational(y)) => x.cmp(y),
            (x, y) => {
                match x.joint_field(y) {
                    Ok(_) => {
                        let diff = x.checked_sub(y).expect("joint field checked");
                        match diff.signum() {
                            -1 => Ordering::Less,
                            0 => Ordering::Equal,
                            _ => Ordering::Greater,
                        }
                    }
                    Err(_) => cmp_cross_field(x, y),
                }
            }
        }
    }
}

/// Sign of `t + u·√p + v·√q` with `p ≠ q`, all parts exact.
fn cmp_cross_field(x: &ExactScalar, y: &ExactScalar) -> Ordering {
    let (ax, bx, dx) = x.parts();
    let (ay, by, dy) = y.parts();
    let (p, q) = (dx.expect("cross-field lhs"), dy.expect("cross-field rhs"));
    let t = ax - ay;
    let u = bx;
    let v = -by;
    // A = u√p + v√q; first its sign, then compare A against −t by squaring.
    let (un, ud) = (u.numer().clone(), u.denom().clone());
    let (vn, vd) = (v.numer().clone(), v.denom().clone());
    // u√p vs −v√q: scale to integers: un·vd·√p vs −vn·ud·√q
    let lhs = &un * &vd;
    let rhs = -(&vn * &ud);
    let sign_a = cmp_scaled_surds(&lhs, p, &rhs, q);
    if t.is_zero() {
        return sign_a;
    }
    let sign_t = if t.is_positive() { Ordering::Greater } else { Ordering::Less };
    match (sign_a, sign_t.reverse()) {
        // A = 0: sign is the sign of t.
        (Ordering::Equal, s) => s.reverse(),
        // A and −t have different signs: A > −t iff A is on the positive side.
        (sa, st) if sa != st => {
            if sa == Ordering::Greater || st == Ordering::Less {
                Ordering::Greater
            } else {
                Ordering::Less
            }
        }
        // Same nonzero side: compare A² = u²p + v²q + 2uv√(pq) against t².
        (sa, _) => {
            let pp = BigRational::from_integer(p.into());
            let qq = BigRational::from_integer(q.into());
            let alpha = &u * &u * pp + &v * &v * qq - &t * &t;
            let beta = BigRational::from_integer(2.into()) * &u * &v;
            let (an, bn, _) = clear_denominators(&alpha, &beta);
            // sign of A² − t² under √(pq); pq may contain square factors,
            // which sign_pair tolerates (it only squares, never normalizes).
            let c = sign_pair(&an, &bn, p * q);
            if sa == Ordering::Greater {
                c
            } else {
                c.reverse()
            }
        }
    }
}

/// Compares `l·√p` with `r·√q` for integers `l, r`.
fn cmp_scaled_surds(l: &BigInt, p: u32, r: &BigInt, q: u32) -> Ordering {
    match (l.sign(), r.sign()) {
        (Sign::NoSign, Sign::NoSign) => Ordering::Equal,
        (Sign::NoSign, Sign::Plus) => Ordering::Less,
        (Sign::NoSign, Sign::Minus) => Ordering::Greater,
        (Sign::Plus, Sign::NoSign) | (Sign::Plus, Sign::Minus) => Ordering::Greater,
        (Sign::Minus, Sign::NoSign) | (Sign::Minus, Sign::Plus) => Ordering::Less,
        (Sign::Plus, Sign::Plus) => (l * l * p).cmp(&(r * r * q)),
        (Sign::Minus, Sign::Minus) => (r * r * q).cmp(&(l * l * p)),
    }
}

// ---------------------------------------------------------------------------
// integer kernels

/// Sign of `u + v·√d` for integers `u, v` (d ≥ 2, not necessarily reduced).
pub(crate) fn sign_pair(u: &BigInt, v: &BigInt, d: u32) -> Ordering {
    match (u.sign(), v.sign()) {
        (Sign::NoSign, Sign::NoSign) => Ordering::Equal,
        (_, Sign::NoSign) => u.cmp(&BigInt::zero()),
        (Sign::NoSign, _) => v.cmp(&BigInt::zero()),
        (Sign::Plus, Sign::Plus) => Ordering::Greater,
        (Sign::Minus, Sign::Minus) => Ordering::Less,
        (Sign::Plus, Sign::Minus) => (u * u).cmp(&(v * v * d)),
        (Sign::Minus, Sign::Plus) => (v * v * d).cmp(&(u * u)),
    }
}

/// Same test on machine words; `None` when the squares would overflow.
#[inline]
pub(crate) fn sign_pair_i128(u: i128, v: i128, d: u32) -> Option<Ordering> {
    if v == 0 {
        return Some(u.cmp(&0));
    }
    if u == 0 {
        return Some(v.cmp(&0));
    }
    if u > 0 && v > 0 {
        return Some(Ordering::Greater);
    }
    if u < 0 && v < 0 {
        return Some(Ordering::Less);
    }
    let u2 = u.checked_mul(u)?;
    let v2d = v.checked_mul(v)?.checked_mul(d as i128)?;
    Some(if u > 0 { u2.cmp(&v2d) } else { v2d.cmp(&u2) })
}

/// Writes `a + b·√d` as `(u + v·√d)/w` with integer `u, v` and `w > 0`.
fn clear_denominators(a: &BigRational, b: &BigRational) -> (BigInt, BigInt, BigInt) {
    let w = a.denom().lcm(b.denom());
    let u = a.numer() * (&w / a.denom());
    let v = b.numer() * (&w / b.denom());
    (u, v, w)
}

/// `[a + b·√d]` by pure integer arithmetic.
///
/// With the value written as `(u + v√d)/w`, an integer square root gives
/// `S = [v√d]`, so `(u+S) div w` is within one of the answer; the final
/// adjustment compares `(k+1)w − u` against `v√d` exactly.
pub(crate) fn floor_quad(a: &BigRational, b: &BigRational, d: u32) -> BigInt {
    if b.is_zero() {
        return (a.numer()).div_floor(a.denom());
    }
    let (u, v, w) = clear_denominators(a, b);
    let vd = &v * &v * d;
    let s = vd.sqrt();
    let s_floor = if v.sign() != Sign::Minus {
        s
    } else if &s * &s == vd {
        -s
    } else {
        -s - 1
    };
    let mut k = (&u + s_floor).div_floor(&w);
    // t ≤ v√d  ⟺  v√d − t ≥ 0
    while sign_pair(&(&u - (&k + 1) * &w), &v, d) != Ordering::Less {
        k += 1;
    }
    k
}

/// Machine-word fast path for `[m·(a + b√d)]`; `None` on overflow risk.
fn floor_quad_i64(a: &BigRational, b: &BigRational, d: u32, m: i64) -> Option<i64> {
    let an = a.numer().to_i128()?;
    let ad = a.denom().to_i128()?;
    let bn = b.numer().to_i128()?;
    let bd = b.denom().to_i128()?;
    let m = m as i128;
    let w = ad.checked_mul(bd / ad.gcd(&bd))?;
    let u = an.checked_mul(w / ad)?.checked_mul(m)?;
    let v = bn.checked_mul(w / bd)?.checked_mul(m)?;
    floor_pair_i128(u, v, w, d)
}

/// `[(u + v·√d)/w]` on machine words; `None` on overflow risk.
#[inline]
pub(crate) fn floor_pair_i128(u: i128, v: i128, w: i128, d: u32) -> Option<i64> {
    debug_assert!(w > 0);
    let vd = v.checked_mul(v)?.checked_mul(d as i128)?;
    let s = vd.isqrt();
    let s_floor = if v >= 0 {
        s
    } else if s * s == vd {
        -s
    } else {
        -s - 1
    };
    let mut k = (u + s_floor).div_euclid(w);
    loop {
        let t = u.checked_sub((k + 1).checked_mul(w)?)?;
        if sign_pair_i128(t, v, d)? != Ordering::Less {
            k += 1;
        } else {
            break;
        }
    }
    k.to_i64()
}

pub(crate) fn is_squarefree(d: u32) -> bool {
    if d == 0 {
        return false;
    }
    let mut m = d as u64;
    let mut p = 2u64;
    while p * p <= m {
        if m % p == 0 {
            m /= p;
            if m % p == 0 {
                return false;
            }
        }
        p += 1;
    }
    true
}

// ---------------------------------------------------------------------------
// formatting and parsing

impl fmt::Display for ExactScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExactScalar::Rational(r) => write_ratio(f, r),
            ExactScalar::Quadratic { a, b, d } => {
                if !a.is_zero() {
                    write_ratio(f, a)?;
                    if b.is_negative() {
                        write!(f, " - ")?;
                    } else {
                        write!(f, " + ")?;
                    }
                    write_surd(f, &b.abs(), *d)
                } else if b.is_negative() {
                    write!(f, "-")?;
                    write_surd(f, &b.abs(), *d)
                } else {
                    write_surd(f, b, *d)
                }
            }
        }
    }
}

fn write_ratio(f: &mut fmt::Formatter<'_>, r: &BigRational) -> fmt::Result {
    if r.is_integer() {
        write!(f, "{}", r.numer())
    } else {
        write!(f, "{}/{}", r.numer(), r.denom())
    }
}

fn write_surd(f: &mut fmt::Formatter<'_>, coeff: &BigRational, d: u32) -> fmt::Result {
    if coeff.is_one() {
        write!(f, "sqrt({d})")
    } else {
        write_ratio(f, coeff)?;
        write!(f, "*sqrt({d})")
    }
}

impl FromStr for ExactScalar {
    type Err = ScalarError;

    /// Accepts `"p/q"`, `"a/b + c/e*sqrt(d)"` and natural reductions of that
    /// shape: plain integers, bare `sqrt(d)`, signed terms in either order.
    fn from_str(s: &str) -> Result<Self, ScalarError> {
        Parser { input: s, rest: s.trim() }.parse()
    }
}

struct Parser<'a> {
    input: &'a str,
    rest: &'a str,
}

struct Term {
    coeff: BigRational,
    radicand: Option<u32>,
}

impl<'a> Parser<'a> {
    fn err(&self, reason: impl Into<String>) -> ScalarError {
        ScalarError::Parse { input: self.input.to_string(), reason: reason.into() }
    }

    fn parse(mut self) -> Result<ExactScalar, ScalarError> {
        let mut a = BigRational::zero();
        let mut b = BigRational::zero();
        let mut d: Option<u32> = None;
        let first = self.term(true)?;
        self.accumulate(first, &mut a, &mut b, &mut d)?;
        while !self.rest.is_empty() {
            let t = self.term(false)?;
            self.accumulate(t, &mut a, &mut b, &mut d)?;
        }
        match d {
            None => Ok(ExactScalar::Rational(a)),
            Some(d) => ExactScalar::quadratic(a, b, d),
        }
    }

    fn accumulate(
        &self,
        t: Term,
        a: &mut BigRational,
        b: &mut BigRational,
        d: &mut Option<u32>,
    ) -> Result<(), ScalarError> {
        match t.radicand {
            None => *a += t.coeff,
            Some(rd) => {
                match d {
                    None => *d = Some(rd),
                    Some(prev) if *prev == rd => {}
                    Some(prev) => return Err(ScalarError::FieldMismatch(*prev, rd)),
                }
                *b += t.coeff;
            }
        }
        Ok(())
    }

    /// One signed term: `[+|-] rational [* sqrt(d)]` or `[+|-] sqrt(d)`.
    fn term(&mut self, leading: bool) -> Result<Term, ScalarError> {
        let mut sign = BigRational::one();
        if let Some(r) = self.rest.strip_prefix('-') {
            sign = -sign;
            self.rest = r.trim_start();
        } else if let Some(r) = self.rest.strip_prefix('+') {
            if leading {
                return Err(self.err("unexpected leading '+'"));
            }
            self.rest = r.trim_start();
        } else if !leading {
            return Err(self.err("expected '+' or '-' between terms"));
        }
        if self.rest.starts_with("sqrt") {
            let d = self.radicand()?;
            return Ok(Term { coeff: sign, radicand: Some(d) });
        }
        let coeff = sign * self.ratio()?;
        if let Some(r) = self.rest.strip_prefix('*') {
            self.rest = r.trim_start();
            if !self.rest.starts_with("sqrt") {
                return Err(self.err("expected sqrt(...) after '*'"));
            }
            let d = self.radicand()?;
            return Ok(Term { coeff, radicand: Some(d) });
        }
        Ok(Term { coeff, radicand: None })
    }

    fn radicand(&mut self) -> Result<u32, ScalarError> {
        let r = self.rest.strip_prefix("sqrt").ok_or_else(|| self.err("expected sqrt"))?;
        let r = r.trim_start();
        let r = r.strip_prefix('(').ok_or_else(|| self.err("expected '(' after sqrt"))?;
        let (digits, rest) = split_digits(r.trim_start());
        if digits.is_empty() {
            return Err(self.err("expected a radicand inside sqrt(...)"));
        }
        let rest = rest.trim_start();
        let rest = rest.strip_prefix(')').ok_or_else(|| self.err("missing ')'"))?;
        self.rest = rest.trim_start();
        let d: u32 = digits
            .parse()
            .map_err(|_| self.err(format!("radicand {digits} out of range")))?;
        if d < 2 || !is_squarefree(d) {
            return Err(ScalarError::BadRadicand(d));
        }
        Ok(d)
    }

    /// Unsigned `p` or `p/q`.
    fn ratio(&mut self) -> Result<BigRational, ScalarError> {
        let (digits, rest) = split_digits(self.rest);
        if digits.is_empty() {
            return Err(self.err("expected a number"));
        }
        let num: BigInt = digits.parse().expect("digits");
        self.rest = rest.trim_start();
        if let Some(r) = self.rest.strip_prefix('/') {
            let (den_digits, rest2) = split_digits(r.trim_start());
            if den_digits.is_empty() {
                return Err(self.err("expected a denominator after '/'"));
            }
            let den: BigInt = den_digits.parse().expect("digits");
            if den.is_zero() {
                return Err(self.err("zero denominator"));
            }
            self.rest = rest2.trim_start();
            Ok(BigRational::new(num, den))
        } else {
            Ok(BigRational::from_integer(num))
        }
    }
}

fn split_digits(s: &str) -> (&str, &str) {
    let end = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    s.split_at(end)
}

impl Serialize for ExactScalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ExactScalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// sums across quadratic fields

/// Outcome of a certified comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertifiedCmp {
    Less,
    Equal,
    Greater,
    /// The interval still straddled the threshold when the precision cap was
    /// reached. Only possible for sign queries on nonzero values with a cap
    /// too small for their magnitude; equality itself is always decided
    /// exactly.
    Inconclusive { bits_used: u32 },
}

/// Exact sum `rational + Σ_d coeff_d·√d` over any number of distinct
/// square-free radicands.
///
/// Equality against a rational is decided coefficientwise: `√d` for distinct
/// square-free `d` are linearly independent over the rationals, so the sum is
/// rational iff every surd coefficient vanishes. The sign of a nonzero sum is
/// decided by interval refinement with doubling precision; the refinement
/// terminates for every nonzero value, the `bits_cap` only guards against
/// unreasonably small thresholds.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FieldSum {
    rational: BigRational,
    surds: BTreeMap<u32, BigRational>,
}

pub const DEFAULT_CMP_BITS: u32 = 4096;

impl FieldSum {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_scalar(s: &ExactScalar) -> Self {
        let mut out = Self::zero();
        out.add_scalar(s);
        out
    }

    pub fn add_rational(&mut self, r: &BigRational) {
        self.rational += r;
    }

    pub fn add_scalar(&mut self, s: &ExactScalar) {
        self.add_weighted(&BigRational::one(), s);
    }

    pub fn sub_scalar(&mut self, s: &ExactScalar) {
        self.add_weighted(&-BigRational::one(), s);
    }

    /// Adds `weight · s`.
    pub fn add_weighted(&mut self, weight: &BigRational, s: &ExactScalar) {
        match s {
            ExactScalar::Rational(r) => self.rational += weight * r,
            ExactScalar::Quadratic { a, b, d } => {
                self.rational += weight * a;
                let entry = self.surds.entry(*d).or_insert_with(BigRational::zero);
                *entry += weight * b;
                if entry.is_zero() {
                    self.surds.remove(d);
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.rational.is_zero() && self.surds.is_empty()
    }

    /// `weight * self` as a new sum.
    pub fn scaled(&self, weight: &BigRational) -> FieldSum {
        if weight.is_zero() {
            return FieldSum::zero();
        }
        FieldSum {
            rational: &self.rational * weight,
            surds: self.surds.iter().map(|(d, c)| (*d, c * weight)).collect(),
        }
    }

    /// The exact rational value, when no surds survive.
    pub fn as_rational(&self) -> Option<&BigRational> {
        if self.surds.is_empty() {
            Some(&self.rational)
        } else {
            None
        }
    }

    pub fn to_f64(&self) -> f64 {
        let mut x = ratio_f64(&self.rational);
        for (d, c) in &self.surds {
            x += ratio_f64(c) * (*d as f64).sqrt();
        }
        x
    }

    /// Certified comparison against a rational threshold.
    pub fn cmp_rational(&self, target: &BigRational, bits_cap: u32) -> CertifiedCmp {
        let mut probe = self.clone();
        probe.rational -= target;
        probe.sign_certified(bits_cap)
    }

    /// Certified sign. Equality is exact; a nonzero sign is certified by an
    /// enclosing interval that excludes zero.
    pub fn sign_certified(&self, bits_cap: u32) -> CertifiedCmp {
        if self.surds.is_empty() {
            return match self.rational.numer().sign() {
                Sign::Minus => CertifiedCmp::Less,
                Sign::NoSign => CertifiedCmp::Equal,
                Sign::Plus => CertifiedCmp::Greater,
            };
        }
        let mut bits = 8u32;
        loop {
            let (lo, hi) = self.enclose(bits);
            if lo.is_positive() {
                return CertifiedCmp::Greater;
            }
            if hi.is_negative() {
                return CertifiedCmp::Less;
            }
            if bits >= bits_cap {
                return CertifiedCmp::Inconclusive { bits_used: bits };
            }
            bits = (bits * 2).min(bits_cap);
        }
    }

    /// Rational enclosure `[lo, hi]` with `√d` known to `bits` fractional bits.
    fn enclose(&self, bits: u32) -> (BigRational, BigRational) {
        let mut lo = self.rational.clone();
        let mut hi = self.rational.clone();
        for (d, c) in &self.surds {
            let (slo, shi) = sqrt_bounds(*d, bits);
            if c.is_positive() {
                lo += c * &slo;
                hi += c * &shi;
            } else {
                lo += c * &shi;
                hi += c * &slo;
            }
        }
        (lo, hi)
    }
}

/// `√d ∈ [lo, hi]` with `hi − lo = 2^-bits`.
fn sqrt_bounds(d: u32, bits: u32) -> (BigRational, BigRational) {
    let scale = BigInt::one() << bits;
    let lo_num = (BigInt::from(d) << (2 * bits)).sqrt();
    let lo = BigRational::new(lo_num.clone(), scale.clone());
    let hi = BigRational::new(lo_num + 1, scale);
    (lo, hi)
}

impl fmt::Display for FieldSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut wrote = false;
        if !self.rational.is_zero() || self.surds.is_empty() {
            write_ratio(f, &self.rational)?;
            wrote = true;
        }
        for (d, c) in &self.surds {
            if wrote {
                if c.is_negative() {
                    write!(f, " - ")?;
                } else {
                    write!(f, " + ")?;
                }
                write_surd(f, &c.abs(), *d)?;
            } else {
                if c.is_negative() {
                    write!(f, "-")?;
                }
                write_surd(f, &c.abs(), *d)?;
                wrote = true;
            }
        }
        Ok(())
    }
}
