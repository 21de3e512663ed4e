//! Coefficient kinds shared by the geometric modules.
//!
//! Four scalar types implement [`Scalar`]: [`BigRational`] (exact rationals),
//! [`Quad`] (exact elements `a + b√d` of a fixed quadratic field), `f64`
//! (hardware floats) and [`PAdic`] (truncated p-adic numbers with tracked
//! precision).  The exterior algebra and the height machinery are generic
//! over this trait, so exactness is decided by the caller's choice of
//! coefficients, not by the algorithms.
//!
//! Norm-like quantities are returned as a [`Magnitude`], which keeps the
//! *square* of an archimedean norm (exact for exact kinds) or an exact
//! p-power exponent, so that equality and threshold tests never go through
//! floating point unless the coefficients themselves are floats.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScalarError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("operation not supported for this scalar kind: {0}")]
    Unsupported(&'static str),
    #[error("p-adic precision exhausted: value known only to O({p}^{bound})")]
    PrecisionExhausted { p: u64, bound: i64 },
    #[error("mixed scalar parameters: {0}")]
    Mixed(&'static str),
}

/// Additive valuation at a finite place: `v_p(0) = +∞`.
#[derive(Debug, Clone, PartialEq)]
pub enum Valuation {
    Finite(BigRational),
    Infinity,
}

impl Valuation {
    pub fn finite(v: i64) -> Self {
        Valuation::Finite(BigRational::from_integer(BigInt::from(v)))
    }
}

/// Ring operations plus the metric hooks the geometry needs.
///
/// `abs_sq` and `signum` refer to the archimedean evaluation of the kind
/// (identity for rationals, the chosen real embedding for `Quad`, the modulus
/// for complex quadratic values); `valuation` refers to a p-adic evaluation.
/// Kinds that lack one of the two evaluations return
/// [`ScalarError::Unsupported`].
pub trait Scalar: Clone + PartialEq + fmt::Debug + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    fn div(&self, rhs: &Self) -> Result<Self, ScalarError>;

    /// Squared modulus of the archimedean evaluation, as a scalar of the
    /// same kind (so it stays exact for exact kinds).
    fn abs_sq(&self) -> Result<Self, ScalarError>;
    /// Sign (−1, 0, +1) of the archimedean evaluation.
    fn signum(&self) -> Result<i8, ScalarError>;
    /// Exact additive valuation at the prime `p`, where meaningful.
    fn valuation(&self, p: u64) -> Result<Valuation, ScalarError>;

    /// Sum a list of same-kind values.  Float kinds sort by magnitude first,
    /// so norms computed from permuted / resigned coordinate lists (as grade
    /// duality produces) are bit-identical.
    fn stable_sum(items: Vec<Self>) -> Self {
        items.into_iter().fold(Self::zero(), |acc, x| acc.add(&x))
    }

    /// Embed a rational constant, when the kind can represent one.
    fn from_ratio(r: &BigRational) -> Option<Self>;
    /// Approximate archimedean value (diagnostics and float fallbacks).
    fn approx_f64(&self) -> Option<f64>;
    /// Natural log of the absolute archimedean value; `None` when absent
    /// or zero.  Implementations must stay accurate for huge inputs.
    fn approx_ln_abs(&self) -> Option<f64>;
}

// ---------------------------------------------------------------------------
// exact rationals

impl Scalar for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn div(&self, rhs: &Self) -> Result<Self, ScalarError> {
        if Zero::is_zero(rhs) {
            return Err(ScalarError::DivisionByZero);
        }
        Ok(self / rhs)
    }
    fn abs_sq(&self) -> Result<Self, ScalarError> {
        Ok(self * self)
    }
    fn signum(&self) -> Result<i8, ScalarError> {
        Ok(ratio_sign(self))
    }
    fn valuation(&self, p: u64) -> Result<Valuation, ScalarError> {
        if Zero::is_zero(self) {
            return Ok(Valuation::Infinity);
        }
        let v = int_valuation(self.numer(), p) - int_valuation(self.denom(), p);
        Ok(Valuation::finite(v))
    }
    fn from_ratio(r: &BigRational) -> Option<Self> {
        Some(r.clone())
    }
    fn approx_f64(&self) -> Option<f64> {
        Some(ratio_to_f64(self))
    }
    fn approx_ln_abs(&self) -> Option<f64> {
        if Zero::is_zero(self) {
            None
        } else {
            Some(ln_ratio_abs(self))
        }
    }
}

// ---------------------------------------------------------------------------
// exact quadratic field elements

/// An exact element `a + b·√d` of ℚ(√d), `d` squarefree and not a square.
///
/// The archimedean evaluation sends `√d` to the positive real root when
/// `d > 0`; for `d < 0` the evaluation is complex and only `abs_sq` is
/// available.  Values with `b = 0` are field-agnostic and combine with any
/// `d`; mixing two genuinely irrational values from different fields is a
/// programming error and panics.
#[derive(Debug, Clone)]
pub struct Quad {
    pub a: BigRational,
    pub b: BigRational,
    pub d: i64,
}

impl Quad {
    pub fn new(a: BigRational, b: BigRational, d: i64) -> Self {
        Quad { a, b, d }
    }
    pub fn from_parts(a: i64, b: i64, d: i64) -> Self {
        Quad::new(
            BigRational::from_integer(BigInt::from(a)),
            BigRational::from_integer(BigInt::from(b)),
            d,
        )
    }
    pub fn rational(a: BigRational, d: i64) -> Self {
        Quad::new(a, Zero::zero(), d)
    }
    /// Galois conjugate `a − b√d`.
    pub fn conj(&self) -> Self {
        Quad::new(self.a.clone(), -&self.b, self.d)
    }
    /// Field norm `a² − d·b²` (a rational number).
    pub fn field_norm(&self) -> BigRational {
        &self.a * &self.a - BigRational::from_integer(BigInt::from(self.d)) * &self.b * &self.b
    }
    fn merged_d(&self, rhs: &Self) -> i64 {
        if self.d == rhs.d || Zero::is_zero(&rhs.b) {
            self.d
        } else if Zero::is_zero(&self.b) {
            rhs.d
        } else {
            panic!("mixed quadratic fields: sqrt({}) vs sqrt({})", self.d, rhs.d)
        }
    }
}

impl PartialEq for Quad {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a
            && self.b == other.b
            && (self.d == other.d || Zero::is_zero(&self.b))
    }
}

impl Scalar for Quad {
    fn zero() -> Self {
        Quad::new(Zero::zero(), Zero::zero(), 0)
    }
    fn one() -> Self {
        Quad::new(One::one(), Zero::zero(), 0)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(&self.a) && Zero::is_zero(&self.b)
    }
    fn add(&self, rhs: &Self) -> Self {
        Quad::new(&self.a + &rhs.a, &self.b + &rhs.b, self.merged_d(rhs))
    }
    fn sub(&self, rhs: &Self) -> Self {
        Quad::new(&self.a - &rhs.a, &self.b - &rhs.b, self.merged_d(rhs))
    }
    fn mul(&self, rhs: &Self) -> Self {
        let d = self.merged_d(rhs);
        let dd = BigRational::from_integer(BigInt::from(d));
        Quad::new(
            &self.a * &rhs.a + &dd * &self.b * &rhs.b,
            &self.a * &rhs.b + &self.b * &rhs.a,
            d,
        )
    }
    fn neg(&self) -> Self {
        Quad::new(-&self.a, -&self.b, self.d)
    }
    fn div(&self, rhs: &Self) -> Result<Self, ScalarError> {
        if Scalar::is_zero(rhs) {
            return Err(ScalarError::DivisionByZero);
        }
        let n = rhs.field_norm();
        let prod = self.mul(&rhs.conj());
        Ok(Quad::new(prod.a / &n, prod.b / &n, self.merged_d(rhs)))
    }
    fn abs_sq(&self) -> Result<Self, ScalarError> {
        if self.d >= 0 {
            // real embedding: |x|² = x²
            Ok(self.mul(self))
        } else {
            // complex: |a + b√d|² = a² − d·b², a rational value
            Ok(Quad::rational(self.field_norm(), self.d))
        }
    }
    fn signum(&self) -> Result<i8, ScalarError> {
        if self.d < 0 && !Zero::is_zero(&self.b) {
            return Err(ScalarError::Unsupported("sign of a complex value"));
        }
        let sa = ratio_sign(&self.a);
        let sb = ratio_sign(&self.b);
        if sb == 0 {
            return Ok(sa);
        }
        if sa == 0 || sa == sb {
            return Ok(sb);
        }
        // opposite signs: compare a² against d·b²
        let lhs = (&self.a * &self.a) - BigRational::from_integer(BigInt::from(self.d)) * &self.b * &self.b;
        Ok(match ratio_sign(&lhs) {
            0 => 0, // impossible for squarefree non-square d unless a=b=0
            s if s > 0 => sa,
            _ => sb,
        })
    }
    fn valuation(&self, _p: u64) -> Result<Valuation, ScalarError> {
        Err(ScalarError::Unsupported(
            "finite-place valuations of quadratic elements live in the number-field layer",
        ))
    }
    fn from_ratio(r: &BigRational) -> Option<Self> {
        Some(Quad::rational(r.clone(), 0))
    }
    fn approx_f64(&self) -> Option<f64> {
        if self.d < 0 && !Zero::is_zero(&self.b) {
            return None;
        }
        let root = (self.d.max(0) as f64).sqrt();
        Some(ratio_to_f64(&self.a) + ratio_to_f64(&self.b) * root)
    }
    fn approx_ln_abs(&self) -> Option<f64> {
        if Scalar::is_zero(self) {
            return None;
        }
        if self.d < 0 {
            // ln |z| = ln(a² − d b²) / 2, no cancellation
            return Some(ln_ratio_abs(&self.field_norm()) / 2.0);
        }
        if Zero::is_zero(&self.b) {
            return Some(ln_ratio_abs(&self.a));
        }
        let sa = ratio_sign(&self.a);
        let sb = ratio_sign(&self.b);
        if sa == 0 || sa == sb {
            // same-sign parts: direct sum is cancellation-free on ln scale
            let root = (self.d as f64).sqrt();
            let la = if sa == 0 { f64::NEG_INFINITY } else { ln_ratio_abs(&self.a) };
            let lb = ln_ratio_abs(&self.b) + root.ln();
            return Some(ln_add_exp(la, lb));
        }
        // opposite signs: go through the conjugate, which is cancellation-free
        // ln|x| = ln|N(x)| − ln|x̄|
        let conj = self.conj();
        let ln_conj = conj.approx_ln_abs()?;
        Some(ln_ratio_abs(&self.field_norm()) - ln_conj)
    }
}

// ---------------------------------------------------------------------------
// hardware floats

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn div(&self, rhs: &Self) -> Result<Self, ScalarError> {
        if *rhs == 0.0 {
            return Err(ScalarError::DivisionByZero);
        }
        Ok(self / rhs)
    }
    fn abs_sq(&self) -> Result<Self, ScalarError> {
        Ok(self * self)
    }
    fn signum(&self) -> Result<i8, ScalarError> {
        Ok(if *self > 0.0 {
            1
        } else if *self < 0.0 {
            -1
        } else {
            0
        })
    }
    fn valuation(&self, _p: u64) -> Result<Valuation, ScalarError> {
        Err(ScalarError::Unsupported("p-adic valuation of a float"))
    }
    fn stable_sum(mut items: Vec<Self>) -> Self {
        items.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap_or(Ordering::Equal));
        items.iter().sum()
    }
    fn from_ratio(r: &BigRational) -> Option<Self> {
        Some(ratio_to_f64(r))
    }
    fn approx_f64(&self) -> Option<f64> {
        Some(*self)
    }
    fn approx_ln_abs(&self) -> Option<f64> {
        if *self == 0.0 {
            None
        } else {
            Some(self.abs().ln())
        }
    }
}

// ---------------------------------------------------------------------------
// truncated p-adic numbers

/// A p-adic number known to finite precision.
///
/// Representation: exactly zero, or `p^v·(u + O(p^e))` with `p ∤ u`, or
/// `O(p^bound)` when cancellation has eaten the leading unit.  Arithmetic
/// tracks precision; asking for the valuation of an `O(p^bound)` value is a
/// [`ScalarError::PrecisionExhausted`] rather than a guess.
#[derive(Debug, Clone, PartialEq)]
pub struct PAdic {
    p: u64,
    repr: PAdicRepr,
}

#[derive(Debug, Clone, PartialEq)]
enum PAdicRepr {
    Zero,
    Unit { v: i64, unit: BigUint, prec: u32 },
    Small { bound: i64 },
}

impl PAdic {
    pub fn zero_at(p: u64) -> Self {
        PAdic { p, repr: PAdicRepr::Zero }
    }

    /// `O(p^bound)`: a value only known to be divisible by `p^bound`.
    pub fn small(p: u64, bound: i64) -> Self {
        PAdic { p, repr: PAdicRepr::Small { bound } }
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    /// Digits of precision on the leading unit (`None` for exact zero /
    /// unresolved values).
    pub fn precision(&self) -> Option<u32> {
        match &self.repr {
            PAdicRepr::Unit { prec, .. } => Some(*prec),
            _ => None,
        }
    }

    /// Exact embedding of a rational number to `prec` unit digits.
    pub fn from_rational(r: &BigRational, p: u64, prec: u32) -> Self {
        assert!(prec > 0, "need at least one digit of precision");
        if Zero::is_zero(r) {
            return PAdic::zero_at(p);
        }
        let vn = int_valuation(r.numer(), p);
        let vd = int_valuation(r.denom(), p);
        let pk = BigInt::from(p).pow(prec);
        let num = strip_p(r.numer(), p, vn);
        let den = strip_p(r.denom(), p, vd);
        let den_inv = mod_inverse(&den, &pk).expect("denominator is a unit mod p^k");
        let unit = (num * den_inv) % &pk;
        let unit = ((unit % &pk) + &pk) % &pk;
        PAdic {
            p,
            repr: PAdicRepr::Unit {
                v: vn - vd,
                unit: unit.to_biguint().unwrap(),
                prec,
            },
        }
    }

    pub fn from_i64(x: i64, p: u64, prec: u32) -> Self {
        PAdic::from_rational(&BigRational::from_integer(BigInt::from(x)), p, prec)
    }

    fn check_same_p(&self, rhs: &Self) -> u64 {
        assert_eq!(self.p, rhs.p, "mixed p-adic primes {} vs {}", self.p, rhs.p);
        self.p
    }

    fn normalize(p: u64, v: i64, raw: BigUint, prec: u32) -> Self {
        // raw is the unit part before stripping; may be divisible by p or zero
        if raw.is_zero() {
            return PAdic::small(p, v + prec as i64);
        }
        let raw_int = BigInt::from(raw);
        let shift = int_valuation(&raw_int, p);
        if shift >= prec as i64 {
            return PAdic::small(p, v + prec as i64);
        }
        let unit = strip_p(&raw_int, p, shift);
        let new_prec = prec - shift as u32;
        let pk = BigInt::from(p).pow(new_prec);
        let unit = ((unit % &pk) + &pk) % &pk;
        PAdic {
            p,
            repr: PAdicRepr::Unit {
                v: v + shift,
                unit: unit.to_biguint().unwrap(),
                prec: new_prec,
            },
        }
    }
}

impl Scalar for PAdic {
    fn zero() -> Self {
        // prime 0 acts as a wildcard resolved on first combination
        PAdic { p: 0, repr: PAdicRepr::Zero }
    }
    fn one() -> Self {
        PAdic {
            p: 0,
            repr: PAdicRepr::Unit { v: 0, unit: BigUint::one(), prec: u32::MAX },
        }
    }
    fn is_zero(&self) -> bool {
        matches!(self.repr, PAdicRepr::Zero)
    }
    fn add(&self, rhs: &Self) -> Self {
        if Scalar::is_zero(self) {
            return rhs.clone();
        }
        if Scalar::is_zero(rhs) {
            return self.clone();
        }
        let p = self.check_same_p(rhs);
        use PAdicRepr::*;
        match (&self.repr, &rhs.repr) {
            (Zero, _) | (_, Zero) => unreachable!("handled above"),
            (Small { bound: b1 }, Small { bound: b2 }) => PAdic::small(p, *b1.min(b2)),
            (Small { bound }, Unit { v, unit, prec }) | (Unit { v, unit, prec }, Small { bound }) => {
                if *v < *bound {
                    let keep = ((*bound - *v) as u64).min(*prec as u64) as u32;
                    let pk = BigUint::from(p).pow(keep);
                    PAdic {
                        p,
                        repr: Unit { v: *v, unit: unit % &pk, prec: keep },
                    }
                } else {
                    PAdic::small(p, *bound)
                }
            }
            (Unit { v: v1, unit: u1, prec: e1 }, Unit { v: v2, unit: u2, prec: e2 }) => {
                let (v1, u1, e1, v2, u2, e2) = if v1 <= v2 {
                    (*v1, u1, *e1, *v2, u2, *e2)
                } else {
                    (*v2, u2, *e2, *v1, u1, *e1)
                };
                let shift = (v2 - v1) as u64;
                // combined precision on the p^{v1} scale
                let prec = (e1 as u64).min(shift + e2 as u64);
                if prec == 0 {
                    return PAdic::small(p, v1);
                }
                let prec = prec.min(u32::MAX as u64) as u32;
                let pk = BigUint::from(p).pow(prec);
                let shifted = if shift >= prec as u64 {
                    BigUint::zero()
                } else {
                    (u2 * BigUint::from(p).pow(shift as u32)) % &pk
                };
                let raw = (u1 % &pk + shifted) % &pk;
                PAdic::normalize(p, v1, raw, prec)
            }
        }
    }
    fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }
    fn mul(&self, rhs: &Self) -> Self {
        if Scalar::is_zero(self) || Scalar::is_zero(rhs) {
            let p = if self.p != 0 { self.p } else { rhs.p };
            return PAdic::zero_at(p);
        }
        let p = self.check_same_p(rhs);
        use PAdicRepr::*;
        match (&self.repr, &rhs.repr) {
            (Zero, _) | (_, Zero) => unreachable!("handled above"),
            (Small { bound: b1 }, Small { bound: b2 }) => PAdic::small(p, b1 + b2),
            (Small { bound }, Unit { v, .. }) | (Unit { v, .. }, Small { bound }) => {
                PAdic::small(p, bound + v)
            }
            (Unit { v: v1, unit: u1, prec: e1 }, Unit { v: v2, unit: u2, prec: e2 }) => {
                let prec = (*e1).min(*e2);
                let pk = BigUint::from(p).pow(prec);
                PAdic {
                    p,
                    repr: Unit { v: v1 + v2, unit: (u1 * u2) % &pk, prec },
                }
            }
        }
    }
    fn neg(&self) -> Self {
        use PAdicRepr::*;
        match &self.repr {
            Zero | Small { .. } => self.clone(),
            Unit { v, unit, prec } => {
                let pk = BigUint::from(self.p).pow(*prec);
                PAdic {
                    p: self.p,
                    repr: Unit { v: *v, unit: (&pk - unit % &pk) % &pk, prec: *prec },
                }
            }
        }
    }
    fn div(&self, rhs: &Self) -> Result<Self, ScalarError> {
        use PAdicRepr::*;
        match &rhs.repr {
            Zero => Err(ScalarError::DivisionByZero),
            Small { bound } => Err(ScalarError::PrecisionExhausted { p: rhs.p, bound: *bound }),
            Unit { v: v2, unit: u2, prec: e2 } => {
                if Scalar::is_zero(self) {
                    return Ok(PAdic::zero_at(rhs.p));
                }
                let p = self.check_same_p(rhs);
                match &self.repr {
                    Zero => unreachable!(),
                    Small { bound } => Ok(PAdic::small(p, bound - v2)),
                    Unit { v: v1, unit: u1, prec: e1 } => {
                        let prec = (*e1).min(*e2);
                        let pk = BigInt::from(p).pow(prec);
                        let inv = mod_inverse(&BigInt::from(u2.clone()), &pk)
                            .expect("unit is invertible mod p^k");
                        let q = (BigInt::from(u1.clone()) * inv) % &pk;
                        let q = ((q % &pk) + &pk) % &pk;
                        Ok(PAdic {
                            p,
                            repr: Unit { v: v1 - v2, unit: q.to_biguint().unwrap(), prec },
                        })
                    }
                }
            }
        }
    }
    fn abs_sq(&self) -> Result<Self, ScalarError> {
        Err(ScalarError::Unsupported("archimedean modulus of a p-adic value"))
    }
    fn signum(&self) -> Result<i8, ScalarError> {
        Err(ScalarError::Unsupported("archimedean sign of a p-adic value"))
    }
    fn valuation(&self, p: u64) -> Result<Valuation, ScalarError> {
        if self.p != 0 && p != self.p {
            return Err(ScalarError::Mixed("valuation requested at a different prime"));
        }
        match &self.repr {
            PAdicRepr::Zero => Ok(Valuation::Infinity),
            PAdicRepr::Unit { v, .. } => Ok(Valuation::finite(*v)),
            PAdicRepr::Small { bound } => {
                Err(ScalarError::PrecisionExhausted { p: self.p, bound: *bound })
            }
        }
    }
    fn from_ratio(_r: &BigRational) -> Option<Self> {
        None // needs a prime and a precision; use PAdic::from_rational
    }
    fn approx_f64(&self) -> Option<f64> {
        None
    }
    fn approx_ln_abs(&self) -> Option<f64> {
        None
    }
}

// ---------------------------------------------------------------------------
// magnitudes

/// A nonnegative size kept in exact form where the scalar kind allows.
///
/// `Sqrt(s)` is the value √s with `s` the exact squared norm; `PPow` is the
/// value `p^(−e)` with an exact rational exponent (`e = None` encodes 0).
#[derive(Debug, Clone, PartialEq)]
pub enum Magnitude<S: Scalar> {
    Sqrt(S),
    PPow { p: u64, exp: Option<BigRational> },
}

impl<S: Scalar> Magnitude<S> {
    pub fn one_arch() -> Self {
        Magnitude::Sqrt(S::one())
    }

    pub fn ppow(p: u64, val: Valuation) -> Self {
        match val {
            Valuation::Finite(e) => Magnitude::PPow { p, exp: Some(e) },
            Valuation::Infinity => Magnitude::PPow { p, exp: None },
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Magnitude::Sqrt(s) => s.is_zero(),
            Magnitude::PPow { exp, .. } => exp.is_none(),
        }
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self, ScalarError> {
        match (self, rhs) {
            (Magnitude::Sqrt(a), Magnitude::Sqrt(b)) => Ok(Magnitude::Sqrt(a.mul(b))),
            (Magnitude::PPow { p: p1, exp: e1 }, Magnitude::PPow { p: p2, exp: e2 }) => {
                if p1 != p2 {
                    return Err(ScalarError::Mixed("magnitudes at different primes"));
                }
                Ok(Magnitude::PPow {
                    p: *p1,
                    exp: match (e1, e2) {
                        (Some(a), Some(b)) => Some(a + b),
                        _ => None,
                    },
                })
            }
            _ => Err(ScalarError::Mixed("archimedean and p-adic magnitudes")),
        }
    }

    pub fn div(&self, rhs: &Self) -> Result<Self, ScalarError> {
        match (self, rhs) {
            (Magnitude::Sqrt(a), Magnitude::Sqrt(b)) => {
                if b.is_zero() {
                    return Err(ScalarError::DivisionByZero);
                }
                Ok(Magnitude::Sqrt(a.div(b)?))
            }
            (Magnitude::PPow { p: p1, exp: e1 }, Magnitude::PPow { p: p2, exp: e2 }) => {
                if p1 != p2 {
                    return Err(ScalarError::Mixed("magnitudes at different primes"));
                }
                let b = e2.as_ref().ok_or(ScalarError::DivisionByZero)?;
                Ok(Magnitude::PPow {
                    p: *p1,
                    exp: e1.as_ref().map(|a| a - b),
                })
            }
            _ => Err(ScalarError::Mixed("archimedean and p-adic magnitudes")),
        }
    }

    /// Exact comparison of two magnitudes of the same flavor.
    pub fn cmp(&self, rhs: &Self) -> Result<Ordering, ScalarError> {
        match (self, rhs) {
            (Magnitude::Sqrt(a), Magnitude::Sqrt(b)) => {
                let s = a.sub(b).signum()?;
                Ok(s.cmp(&0))
            }
            (Magnitude::PPow { p: p1, exp: e1 }, Magnitude::PPow { p: p2, exp: e2 }) => {
                if p1 != p2 {
                    return Err(ScalarError::Mixed("magnitudes at different primes"));
                }
                // p^{-e}: larger exponent = smaller value; None = zero
                Ok(match (e1, e2) {
                    (None, None) => Ordering::Equal,
                    (None, Some(_)) => Ordering::Less,
                    (Some(_), None) => Ordering::Greater,
                    (Some(a), Some(b)) => b.cmp(a),
                })
            }
            _ => Err(ScalarError::Mixed("archimedean and p-adic magnitudes")),
        }
    }

    /// Compare against a nonnegative rational threshold, exactly for exact
    /// kinds.  (For `PPow` the comparison is exact when `t` is 0 or 1, and
    /// goes through logs otherwise.)
    pub fn cmp_ratio(&self, t: &BigRational) -> Result<Ordering, ScalarError> {
        match self {
            Magnitude::Sqrt(s) => {
                if t.is_negative() {
                    return Ok(Ordering::Greater);
                }
                let t2 = S::from_ratio(&(t * t))
                    .ok_or(ScalarError::Unsupported("rational threshold for this kind"))?;
                let sign = s.sub(&t2).signum()?;
                Ok(sign.cmp(&0))
            }
            Magnitude::PPow { p, exp } => {
                if t.is_negative() || Zero::is_zero(t) {
                    return Ok(if exp.is_none() && Zero::is_zero(t) {
                        Ordering::Equal
                    } else {
                        Ordering::Greater
                    });
                }
                match exp {
                    None => Ok(Ordering::Less),
                    Some(e) => {
                        if t == &<BigRational as One>::one() {
                            return Ok(ratio_sign(e).cmp(&0).reverse());
                        }
                        let lhs = -(ratio_to_f64(e)) * (*p as f64).ln();
                        let rhs = ln_ratio_abs(t);
                        Ok(lhs.partial_cmp(&rhs).unwrap_or(Ordering::Equal))
                    }
                }
            }
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Magnitude::Sqrt(s) => s.approx_f64().map(|x| x.max(0.0).sqrt()).unwrap_or(f64::NAN),
            Magnitude::PPow { p, exp } => match exp {
                None => 0.0,
                Some(e) => (-(ratio_to_f64(e)) * (*p as f64).ln()).exp(),
            },
        }
    }

    /// Natural log of the magnitude (`-inf` for zero).
    pub fn ln(&self) -> f64 {
        match self {
            Magnitude::Sqrt(s) => match s.approx_ln_abs() {
                Some(l) => l / 2.0,
                None => f64::NEG_INFINITY,
            },
            Magnitude::PPow { p, exp } => match exp {
                None => f64::NEG_INFINITY,
                Some(e) => -(ratio_to_f64(e)) * (*p as f64).ln(),
            },
        }
    }
}

// ---------------------------------------------------------------------------
// rational parsing / formatting / approximate logs

/// Parse an exact rational from `"p/q"`, integer, or decimal notation
/// (decimals are exact: `"0.25"` → 1/4; scientific `"1e-3"` accepted).
pub fn parse_ratio(s: &str) -> Result<BigRational, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty number".into());
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num.trim().parse().map_err(|e| format!("bad numerator {num:?}: {e}"))?;
        let d: BigInt = den.trim().parse().map_err(|e| format!("bad denominator {den:?}: {e}"))?;
        if d.is_zero() {
            return Err("zero denominator".into());
        }
        return Ok(BigRational::new(n, d));
    }
    // split exponent
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => {
            let e: i64 = s[i + 1..]
                .parse()
                .map_err(|e| format!("bad exponent in {s:?}: {e}"))?;
            (&s[..i], e)
        }
        None => (s, 0),
    };
    let (int_part, frac_part) = match mant.find('.') {
        Some(i) => (&mant[..i], &mant[i + 1..]),
        None => (mant, ""),
    };
    let digits = format!("{int_part}{frac_part}");
    let n: BigInt = if digits.is_empty() || digits == "-" || digits == "+" {
        return Err(format!("no digits in {s:?}"));
    } else {
        digits.parse().map_err(|e| format!("bad number {s:?}: {e}"))?
    };
    let scale = frac_part.len() as i64 - exp;
    let ten = BigInt::from(10);
    Ok(if scale >= 0 {
        BigRational::new(n, ten.pow(scale as u32))
    } else {
        BigRational::from_integer(n * ten.pow((-scale) as u32))
    })
}

/// Render as `"p/q"` (or a bare integer when the denominator is 1).
pub fn format_ratio(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn ratio_sign(r: &BigRational) -> i8 {
    if r.is_positive() {
        1
    } else if r.is_negative() {
        -1
    } else {
        0
    }
}

/// f64 value of a big rational, accurate even when parts overflow f64.
pub fn ratio_to_f64(r: &BigRational) -> f64 {
    if Zero::is_zero(r) {
        return 0.0;
    }
    if let Some(x) = r.to_f64() {
        if x.is_finite() && x != 0.0 {
            return x;
        }
    }
    let sign = if r.is_negative() { -1.0 } else { 1.0 };
    sign * ln_ratio_abs(r).exp()
}

/// Natural log of |r| for a nonzero rational, accurate for huge values.
pub fn ln_ratio_abs(r: &BigRational) -> f64 {
    assert!(!Zero::is_zero(r), "log of zero");
    ln_bigint_abs(r.numer()) - ln_bigint_abs(r.denom())
}

/// Natural log of |n| for a nonzero big integer.
pub fn ln_bigint_abs(n: &BigInt) -> f64 {
    assert!(!n.is_zero(), "log of zero");
    let bits = n.bits();
    if bits <= 900 {
        n.to_f64().unwrap().abs().ln()
    } else {
        let shift = bits - 64;
        let top = n.magnitude() >> shift;
        top.to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
    }
}

/// log(e^a + e^b) without overflow.
fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// v_p of a nonzero integer.
pub fn int_valuation(n: &BigInt, p: u64) -> i64 {
    assert!(!n.is_zero(), "valuation of zero");
    let p = BigInt::from(p);
    let mut n = n.clone();
    let mut v = 0;
    loop {
        let (q, r) = num_integer::Integer::div_rem(&n, &p);
        if r.is_zero() {
            v += 1;
            n = q;
        } else {
            return v;
        }
    }
}

fn strip_p(n: &BigInt, p: u64, v: i64) -> BigInt {
    let p = BigInt::from(p);
    let mut n = n.clone();
    for _ in 0..v {
        n /= &p;
    }
    n
}

/// Modular inverse via extended Euclid; `None` when not coprime.
pub fn mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let a = ((a % m) + m) % m;
    let e = num_integer::Integer::extended_gcd(&a, m);
    if e.gcd.is_one() {
        Some(((e.x % m) + m) % m)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn parses_decimal_and_fraction_forms() {
        assert_eq!(parse_ratio("0.25").unwrap(), q(1, 4));
        assert_eq!(parse_ratio("-5/7").unwrap(), q(-5, 7));
        assert_eq!(parse_ratio("3").unwrap(), q(3, 1));
        assert_eq!(parse_ratio("1e-3").unwrap(), q(1, 1000));
        assert_eq!(parse_ratio("2.5e2").unwrap(), q(250, 1));
        assert!(parse_ratio("1/0").is_err());
    }

    #[test]
    fn quad_sign_is_exact_near_cancellation() {
        // 7/5 − √2 < 0 < 3/2 − √2 … exactly
        let x = Quad::new(q(7, 5), q(-1, 1), 2);
        assert_eq!(x.signum().unwrap(), -1);
        let y = Quad::new(q(3, 2), q(-1, 1), 2);
        assert_eq!(y.signum().unwrap(), 1);
        // 99/70 is a famous √2 over-approximation: 99/70 − √2 > 0
        let z = Quad::new(q(99, 70), q(-1, 1), 2);
        assert_eq!(z.signum().unwrap(), 1);
    }

    #[test]
    fn quad_ln_survives_cancellation() {
        // 99/70 − √2 ≈ 7.2e-5: direct f64 subtraction is fine, but the
        // conjugate route must agree to high accuracy
        let x = Quad::new(q(99, 70), q(-1, 1), 2);
        let direct = (99.0 / 70.0 - 2.0_f64.sqrt()).abs().ln();
        let got = x.approx_ln_abs().unwrap();
        assert!((got - direct).abs() < 1e-9, "{got} vs {direct}");
    }

    #[test]
    fn padic_tracks_cancellation() {
        let p = 5;
        let a = PAdic::from_i64(26, p, 4); // 1 + 5^2 has valuation 0
        let b = PAdic::from_i64(1, p, 4);
        let d = a.sub(&b); // 25: valuation 2
        assert_eq!(d.valuation(p).unwrap(), Valuation::finite(2));
        // cancelling to the precision limit leaves an unresolved value
        let c = PAdic::from_i64(625 + 1, p, 4).sub(&PAdic::from_i64(1, p, 4));
        // 625 = 5^4 is O(p^4) at 4 digits of precision
        assert!(matches!(
            c.valuation(p),
            Err(ScalarError::PrecisionExhausted { bound: 4, .. })
        ));
    }

    #[test]
    fn padic_division_by_units() {
        let p = 7;
        let a = PAdic::from_rational(&q(3, 2), p, 6);
        let b = PAdic::from_i64(5, p, 6);
        let c = a.div(&b).unwrap().mul(&b);
        // c should equal a to the working precision
        assert_eq!(c.sub(&a).valuation(p).err().is_some(), true);
    }

    #[test]
    fn magnitude_exact_comparisons() {
        let m1: Magnitude<BigRational> = Magnitude::Sqrt(q(2, 1)); // √2
        let m2: Magnitude<BigRational> = Magnitude::Sqrt(q(9, 4)); // 3/2
        assert_eq!(m1.cmp(&m2).unwrap(), Ordering::Less);
        assert_eq!(m2.cmp_ratio(&q(3, 2)).unwrap(), Ordering::Equal);
        assert_eq!(m1.cmp_ratio(&q(7, 5)).unwrap(), Ordering::Greater);

        let z: Magnitude<BigRational> = Magnitude::PPow { p: 2, exp: Some(q(1, 1)) };
        assert_eq!(z.cmp_ratio(&q(1, 1)).unwrap(), Ordering::Less); // 1/2 < 1
    }

    #[test]
    fn ln_of_huge_rationals() {
        let big = BigInt::from(10).pow(500);
        let r = BigRational::from_integer(big);
        let l = ln_ratio_abs(&r);
        assert!((l - 500.0 * 10f64.ln()).abs() < 1e-9);
    }
}
