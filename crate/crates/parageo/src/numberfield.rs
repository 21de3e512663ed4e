//! Number-field contexts: ℚ and quadratic fields, their places, normalized
//! absolute values, projective heights, and approximation targets.
//!
//! A [`FieldContext`] is either ℚ or ℚ(√D) for a squarefree `D`.  Places
//! carry local degrees and metrics; finite places of a quadratic field are
//! classified split / inert / ramified, with split completions realized by
//! Hensel-lifted square roots of `D` so that valuations of field elements
//! can be read off exactly.  Heights are computed projectively: coordinates
//! are cleared to algebraic integers, the content ideal is normalized away
//! via a Hermite normal form, and the archimedean part is kept as an exact
//! rational `H^{2d}` so equal heights compare equal.
//!
//! An [`ApproximationTarget`] bundles a field, a distinguished place `w`
//! and a nonzero vector ξ over the completion at `w`; it evaluates the
//! twisted distance functionals (log scale) that the minima machinery
//! consumes.

use crate::exterior::{GradedVector, PlaceMetric};
use crate::lattice::row_hnf;
use crate::scalar::{
    format_ratio, int_valuation, ln_ratio_abs, parse_ratio, ratio_to_f64, Magnitude,
    PAdic, Quad, Scalar, ScalarError, Valuation,
};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error("not a valid quadratic field parameter: {0}")]
    BadField(String),
    #[error("no such place: {0}")]
    BadPlace(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("zero vector has no height or distance")]
    ZeroVector,
    #[error("rank-deficient basis")]
    RankDeficient,
    #[error(transparent)]
    Scalar(#[from] ScalarError),
}

// ---------------------------------------------------------------------------
// fields

/// ℚ or a quadratic field ℚ(√D), with its ring of integers ℤ[ω].
#[derive(Debug, Clone, PartialEq)]
pub enum FieldContext {
    Rational,
    Quadratic { d: i64 },
}

impl FieldContext {
    pub fn rational() -> Self {
        FieldContext::Rational
    }

    pub fn quadratic(d: i64) -> Result<Self, FieldError> {
        if d == 0 || d == 1 {
            return Err(FieldError::BadField(format!("D = {d} is not a quadratic field")));
        }
        if !is_squarefree(d) {
            return Err(FieldError::BadField(format!("D = {d} is not squarefree")));
        }
        Ok(FieldContext::Quadratic { d })
    }

    /// Absolute degree `d = [K : ℚ]`.
    pub fn degree(&self) -> u32 {
        match self {
            FieldContext::Rational => 1,
            FieldContext::Quadratic { .. } => 2,
        }
    }

    pub fn d_param(&self) -> Option<i64> {
        match self {
            FieldContext::Rational => None,
            FieldContext::Quadratic { d } => Some(*d),
        }
    }

    /// Field discriminant: `D` for `D ≡ 1 (mod 4)`, else `4D`.
    pub fn discriminant(&self) -> i64 {
        match self {
            FieldContext::Rational => 1,
            FieldContext::Quadratic { d } => {
                if d.rem_euclid(4) == 1 {
                    *d
                } else {
                    4 * d
                }
            }
        }
    }

    /// Second element of the integral basis (1, ω):
    /// ω = √D, or (1+√D)/2 when D ≡ 1 (mod 4).
    pub fn omega(&self) -> Result<Quad, FieldError> {
        match self {
            FieldContext::Rational => Err(FieldError::BadField("ℚ has no ω".into())),
            FieldContext::Quadratic { d } => Ok(if d.rem_euclid(4) == 1 {
                Quad::new(half(), half(), *d)
            } else {
                Quad::from_parts(0, 1, *d)
            }),
        }
    }

    /// Trace and norm of ω (so ω² = t·ω − n).
    fn omega_trace_norm(&self) -> (i64, BigRational) {
        match self {
            FieldContext::Rational => (0, BigRational::from_integer(BigInt::from(0))),
            FieldContext::Quadratic { d } => {
                if d.rem_euclid(4) == 1 {
                    (1, BigRational::new(BigInt::from(1 - d), BigInt::from(4)))
                } else {
                    (0, BigRational::from_integer(BigInt::from(-d)))
                }
            }
        }
    }

    /// Coordinates (u, v) of `x` in the basis (1, ω): `x = u + v·ω`.
    pub fn omega_coords(&self, x: &Quad) -> Result<(BigRational, BigRational), FieldError> {
        match self {
            FieldContext::Rational => {
                if !Zero::is_zero(&x.b) {
                    return Err(FieldError::BadField("irrational value over ℚ".into()));
                }
                Ok((x.a.clone(), BigRational::from_integer(BigInt::from(0))))
            }
            FieldContext::Quadratic { d } => {
                if !Zero::is_zero(&x.b) && x.d != *d {
                    return Err(FieldError::BadField(format!(
                        "value lives in ℚ(√{}), not ℚ(√{d})",
                        x.d
                    )));
                }
                // ω = w_a + w_b √D  ⇒  √D = (ω − w_a)/w_b
                let om = self.omega()?;
                let v = &x.b / &om.b;
                let u = &x.a - &v * &om.a;
                Ok((u, v))
            }
        }
    }

    pub fn from_omega_coords(&self, u: &BigRational, v: &BigRational) -> Result<Quad, FieldError> {
        match self {
            FieldContext::Rational => {
                if !Zero::is_zero(v) {
                    return Err(FieldError::BadField("ℚ has no ω".into()));
                }
                Ok(Quad::rational(u.clone(), 0))
            }
            FieldContext::Quadratic { d } => {
                let om = self.omega()?;
                Ok(Quad::new(u + v * &om.a, v * &om.b, *d))
            }
        }
    }

    /// Whether `x` is an algebraic integer of this field.
    pub fn is_integral(&self, x: &Quad) -> Result<bool, FieldError> {
        let (u, v) = self.omega_coords(x)?;
        Ok(u.denom().is_one() && v.denom().is_one())
    }

    /// Archimedean places: two real embeddings (√D ↦ ±√D) for real
    /// quadratic fields, one complex place for imaginary ones, one place
    /// for ℚ.
    pub fn archimedean_places(&self) -> Vec<Place> {
        match self {
            FieldContext::Rational => vec![Place {
                field_degree: 1,
                kind: PlaceKind::RationalInfinite,
            }],
            FieldContext::Quadratic { d } if *d > 0 => vec![
                Place { field_degree: 2, kind: PlaceKind::Real { conjugate: false } },
                Place { field_degree: 2, kind: PlaceKind::Real { conjugate: true } },
            ],
            FieldContext::Quadratic { .. } => {
                vec![Place { field_degree: 2, kind: PlaceKind::Complex }]
            }
        }
    }

    /// Splitting behavior of an odd prime / of 2 in the quadratic field.
    pub fn splitting(&self, p: u64) -> Result<SplittingType, FieldError> {
        let FieldContext::Quadratic { d } = self else {
            return Err(FieldError::BadField("splitting types concern quadratic fields".into()));
        };
        if p < 2 {
            return Err(FieldError::BadPlace(format!("{p} is not a prime")));
        }
        if p == 2 {
            return Ok(match d.rem_euclid(8) {
                1 => SplittingType::Split,
                5 => SplittingType::Inert,
                _ => SplittingType::Ramified, // disc = 4D even
            });
        }
        if (*d).rem_euclid(p as i64) == 0 {
            return Ok(SplittingType::Ramified);
        }
        Ok(if is_quadratic_residue(*d, p) {
            SplittingType::Split
        } else {
            SplittingType::Inert
        })
    }

    /// All places above the rational prime `p`.
    pub fn places_above(&self, p: u64) -> Result<Vec<Place>, FieldError> {
        if p < 2 {
            return Err(FieldError::BadPlace(format!("{p} is not a prime")));
        }
        match self {
            FieldContext::Rational => Ok(vec![Place {
                field_degree: 1,
                kind: PlaceKind::Finite { p, data: FiniteData::Rational },
            }]),
            FieldContext::Quadratic { .. } => {
                let s = self.splitting(p)?;
                Ok(match s {
                    SplittingType::Split => vec![
                        Place {
                            field_degree: 2,
                            kind: PlaceKind::Finite {
                                p,
                                data: FiniteData::Quadratic { splitting: s, conjugate: false },
                            },
                        },
                        Place {
                            field_degree: 2,
                            kind: PlaceKind::Finite {
                                p,
                                data: FiniteData::Quadratic { splitting: s, conjugate: true },
                            },
                        },
                    ],
                    _ => vec![Place {
                        field_degree: 2,
                        kind: PlaceKind::Finite {
                            p,
                            data: FiniteData::Quadratic { splitting: s, conjugate: false },
                        },
                    }],
                })
            }
        }
    }

    /// Fundamental unit > 1 of the ring of integers (real quadratic only).
    pub fn fundamental_unit(&self) -> Option<Quad> {
        let FieldContext::Quadratic { d } = self else { return None };
        if *d < 0 {
            return None;
        }
        if d.rem_euclid(4) == 1 {
            // minimal y ≥ 1 with x² − D y² = ±4 gives (x + y√D)/2
            for y in 1i64..200_000 {
                let dy2 = BigInt::from(*d) * y * y;
                for s in [-4i64, 4] {
                    let t = &dy2 + BigInt::from(s);
                    if t.is_positive() {
                        let x = t.sqrt();
                        if &x * &x == t {
                            return Some(Quad::new(
                                BigRational::new(x, BigInt::from(2)),
                                BigRational::new(BigInt::from(y), BigInt::from(2)),
                                *d,
                            ));
                        }
                    }
                }
            }
        }
        // continued-fraction solution of x² − D y² = ±1
        pell_unit(*d)
    }

    /// Embed `x` under the real embedding selected by `conjugate`.
    pub fn embed(&self, x: &Quad, conjugate: bool) -> Quad {
        if conjugate {
            x.conj()
        } else {
            x.clone()
        }
    }

    /// Normalized absolute value `|x|_v` (so that `|p|_v = 1/p` below `p`
    /// and archimedean places restrict to the usual absolute value).
    /// Exact: archimedean values come back as √ of an exact square,
    /// finite ones as exact prime powers (possibly half-integral exponent).
    pub fn abs_at(&self, x: &Quad, place: &Place) -> Result<Magnitude<Quad>, FieldError> {
        match &place.kind {
            PlaceKind::RationalInfinite | PlaceKind::Real { .. } => {
                let y = self.embed(
                    x,
                    matches!(place.kind, PlaceKind::Real { conjugate: true }),
                );
                Ok(Magnitude::Sqrt(y.mul(&y)))
            }
            PlaceKind::Complex => {
                // |x|² = x·x̄ = field norm (positive for imaginary fields)
                Ok(Magnitude::Sqrt(Quad::rational(x.field_norm(), x.d)))
            }
            PlaceKind::Finite { p, data } => {
                let v = self.finite_valuation(x, *p, data)?;
                Ok(Magnitude::ppow(*p, v))
            }
        }
    }

    /// Exact additive valuation of `x` at a finite place, normalized so
    /// that `|x|_v = p^{−val}` extends `|·|_p` (ramified and inert places
    /// can give half-integral values).
    pub fn finite_valuation(
        &self,
        x: &Quad,
        p: u64,
        data: &FiniteData,
    ) -> Result<Valuation, FieldError> {
        if Scalar::is_zero(x) {
            return Ok(Valuation::Infinity);
        }
        match data {
            FiniteData::Rational => {
                if !Zero::is_zero(&x.b) {
                    return Err(FieldError::BadField("irrational value over ℚ".into()));
                }
                Ok(Scalar::valuation(&x.a, p)?)
            }
            FiniteData::Quadratic { splitting, conjugate } => match splitting {
                SplittingType::Inert | SplittingType::Ramified => {
                    // |x|_v = |N(x)|_p^{1/2} in both cases
                    let n = x.field_norm();
                    let v = int_valuation(n.numer(), p) - int_valuation(n.denom(), p);
                    Ok(Valuation::Finite(BigRational::new(BigInt::from(v), BigInt::from(2))))
                }
                SplittingType::Split => {
                    let FieldContext::Quadratic { d } = self else {
                        return Err(FieldError::BadField("split place over ℚ".into()));
                    };
                    // embed into ℚ_p via the Hensel root, retrying with more
                    // digits if cancellation exhausts the precision
                    let mut prec = 24u32;
                    loop {
                        let mut root = hensel_sqrt(*d, p, prec)?;
                        if *conjugate {
                            root = root.neg();
                        }
                        let xa = PAdic::from_rational(&x.a, p, prec);
                        let xb = PAdic::from_rational(&x.b, p, prec);
                        let val = xa.add(&xb.mul(&root));
                        match Scalar::valuation(&val, p) {
                            Ok(v) => return Ok(v),
                            Err(ScalarError::PrecisionExhausted { .. }) if prec < (1 << 16) => {
                                prec *= 2;
                            }
                            Err(e) => return Err(e.into()),
                        }
                    }
                }
            },
        }
    }

    /// Sup-norm of a vector at a finite place / Euclidean norm at an
    /// archimedean one, as an exact magnitude.
    pub fn vector_norm_at(&self, x: &[Quad], place: &Place) -> Result<Magnitude<Quad>, FieldError> {
        match &place.kind {
            PlaceKind::RationalInfinite | PlaceKind::Real { .. } => {
                let conj = matches!(place.kind, PlaceKind::Real { conjugate: true });
                let squares: Vec<Quad> = x
                    .iter()
                    .filter(|c| !Scalar::is_zero(*c))
                    .map(|c| {
                        let e = self.embed(c, conj);
                        e.mul(&e)
                    })
                    .collect();
                Ok(Magnitude::Sqrt(Scalar::stable_sum(squares)))
            }
            PlaceKind::Complex => {
                let squares: Vec<Quad> = x
                    .iter()
                    .filter(|c| !Scalar::is_zero(*c))
                    .map(|c| Quad::rational(c.field_norm(), c.d))
                    .collect();
                Ok(Magnitude::Sqrt(Scalar::stable_sum(squares)))
            }
            PlaceKind::Finite { p, data } => {
                let mut best: Option<BigRational> = None;
                for c in x {
                    match self.finite_valuation(c, *p, data)? {
                        Valuation::Infinity => {}
                        Valuation::Finite(v) => {
                            best = Some(match best {
                                None => v,
                                Some(b) => b.min(v),
                            })
                        }
                    }
                }
                Ok(Magnitude::ppow(
                    *p,
                    match best {
                        Some(v) => Valuation::Finite(v),
                        None => Valuation::Infinity,
                    },
                ))
            }
        }
    }

    /// Norm of the content ideal generated by the coordinates, for a vector
    /// of algebraic integers (cleared of denominators).  For ℚ this is the
    /// gcd of the integer coordinates.
    fn content_norm(&self, x: &[Quad]) -> Result<BigInt, FieldError> {
        match self {
            FieldContext::Rational => {
                let mut g = BigInt::from(0);
                for c in x {
                    let (u, _) = self.omega_coords(c)?;
                    assert!(u.denom().is_one(), "content of a non-integral vector");
                    g = g.gcd(u.numer());
                }
                if g.is_zero() {
                    return Err(FieldError::ZeroVector);
                }
                Ok(g)
            }
            FieldContext::Quadratic { .. } => {
                let (t, n) = self.omega_trace_norm();
                let t = BigInt::from(t);
                let n = n.numer().clone(); // ω-norm is integral for integers
                let mut rows: Vec<Vec<BigInt>> = Vec::with_capacity(2 * x.len());
                for c in x {
                    let (u, v) = self.omega_coords(c)?;
                    assert!(
                        u.denom().is_one() && v.denom().is_one(),
                        "content of a non-integral vector"
                    );
                    let (u, v) = (u.numer().clone(), v.numer().clone());
                    // c = u + vω  and  ω·c = −n·v + (u + t·v)·ω
                    rows.push(vec![u.clone(), v.clone()]);
                    rows.push(vec![-&n * &v, &u + &t * &v]);
                }
                let h = row_hnf(rows);
                if h.len() != 2 {
                    return Err(FieldError::ZeroVector);
                }
                Ok((&h[0][0] * &h[1][1]).abs())
            }
        }
    }

    /// Projective height of a nonzero vector over the field, as an exact
    /// value of `H^{2d}`.  Scaling-invariant: `H(λx) = H(x)` for `λ ∈ K^×`.
    pub fn height_vector(&self, x: &[Quad]) -> Result<HeightValue, FieldError> {
        if x.iter().all(|c| Scalar::is_zero(c)) {
            return Err(FieldError::ZeroVector);
        }
        // clear denominators (height is projective, so this is free)
        let mut lcm = BigInt::one();
        for c in x {
            let (u, v) = self.omega_coords(c)?;
            lcm = lcm.lcm(u.denom());
            lcm = lcm.lcm(v.denom());
        }
        let scale = Quad::rational(BigRational::from_integer(lcm), 0);
        let y: Vec<Quad> = x.iter().map(|c| c.mul(&scale)).collect();

        let content = self.content_norm(&y)?;
        let content2 = BigRational::from_integer(&content * &content);
        match self {
            FieldContext::Rational => {
                // H² = ‖y‖² / content²
                let s: BigRational = y
                    .iter()
                    .map(|c| &c.a * &c.a)
                    .fold(BigRational::from_integer(0.into()), |acc, t| acc + t);
                Ok(HeightValue { sq2d: s / content2, degree: 1 })
            }
            FieldContext::Quadratic { d } => {
                let sum_sq = y
                    .iter()
                    .fold(<Quad as Scalar>::zero(), |acc, c| acc.add(&c.mul(c)));
                let sq2d = if *d > 0 {
                    // H⁴ = N(Σ yᵢ²) / content²   (both embeddings contribute)
                    sum_sq.field_norm() / content2
                } else {
                    // one complex place of local degree 2:
                    // H² = S / content with S = Σ N(yᵢ);  H⁴ = S² / content²
                    let s = y
                        .iter()
                        .map(|c| c.field_norm())
                        .fold(BigRational::from_integer(0.into()), |acc, t| acc + t);
                    &s * &s / content2
                };
                Ok(HeightValue { sq2d, degree: 2 })
            }
        }
    }

    /// Height of the subspace spanned by `basis`, via the Plücker vector.
    /// Satisfies `H(V) = H(V^⊥)` exactly.
    pub fn height_subspace(&self, basis: &[Vec<Quad>]) -> Result<HeightValue, FieldError> {
        if basis.is_empty() {
            return Err(FieldError::RankDeficient);
        }
        let vecs: Vec<GradedVector<Quad>> = basis
            .iter()
            .map(|b| GradedVector::vector(b.clone()))
            .collect();
        let w = crate::exterior::wedge_all(&vecs)
            .map_err(|e| FieldError::Parse(e.to_string()))?;
        if w.is_zero() {
            return Err(FieldError::RankDeficient);
        }
        self.height_vector(w.coords())
    }
}

/// Projective height kept as the exact rational `H^{2d}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightValue {
    pub sq2d: BigRational,
    pub degree: u32,
}

impl HeightValue {
    pub fn ln(&self) -> f64 {
        ln_ratio_abs(&self.sq2d) / (2.0 * self.degree as f64)
    }
    pub fn to_f64(&self) -> f64 {
        self.ln().exp()
    }
    /// Exact comparison (requires equal degrees).
    pub fn cmp_exact(&self, other: &HeightValue) -> std::cmp::Ordering {
        assert_eq!(self.degree, other.degree, "heights over different fields");
        self.sq2d.cmp(&other.sq2d)
    }
}

// ---------------------------------------------------------------------------
// places

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplittingType {
    Split,
    Inert,
    Ramified,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FiniteData {
    Rational,
    Quadratic { splitting: SplittingType, conjugate: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlaceKind {
    RationalInfinite,
    Real { conjugate: bool },
    Complex,
    Finite { p: u64, data: FiniteData },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Place {
    pub field_degree: u32,
    pub kind: PlaceKind,
}

impl Place {
    /// Local degree `d_v = [K_v : ℚ_v]`.
    pub fn local_degree(&self) -> u32 {
        match &self.kind {
            PlaceKind::RationalInfinite => 1,
            PlaceKind::Real { .. } => 1,
            PlaceKind::Complex => 2,
            PlaceKind::Finite { data, .. } => match data {
                FiniteData::Rational => 1,
                FiniteData::Quadratic { splitting: SplittingType::Split, .. } => 1,
                FiniteData::Quadratic { .. } => 2,
            },
        }
    }

    pub fn is_archimedean(&self) -> bool {
        !matches!(self.kind, PlaceKind::Finite { .. })
    }

    pub fn metric(&self) -> PlaceMetric {
        match &self.kind {
            PlaceKind::Finite { p, .. } => PlaceMetric::NonArchimedean { p: *p },
            _ => PlaceMetric::Archimedean,
        }
    }

    pub fn residue_prime(&self) -> Option<u64> {
        match &self.kind {
            PlaceKind::Finite { p, .. } => Some(*p),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            PlaceKind::RationalInfinite => "inf".into(),
            PlaceKind::Real { conjugate } => format!("inf{}", u8::from(*conjugate)),
            PlaceKind::Complex => "inf0".into(),
            PlaceKind::Finite { p, data } => match data {
                FiniteData::Rational => format!("p{p}"),
                FiniteData::Quadratic { splitting: SplittingType::Split, conjugate } => {
                    format!("p{p}{}", if *conjugate { "-" } else { "+" })
                }
                FiniteData::Quadratic { .. } => format!("p{p}"),
            },
        }
    }
}

// ---------------------------------------------------------------------------
// p-adic square roots

/// Legendre-symbol test via Euler's criterion (p odd prime).
fn is_quadratic_residue(d: i64, p: u64) -> bool {
    let a = BigInt::from(d).mod_floor(&BigInt::from(p));
    if a.is_zero() {
        return true;
    }
    let e = (p - 1) / 2;
    mod_pow(&a, &BigInt::from(e), &BigInt::from(p)) == BigInt::one()
}

fn mod_pow(base: &BigInt, exp: &BigInt, m: &BigInt) -> BigInt {
    let mut result = BigInt::one();
    let mut b = base.mod_floor(m);
    let mut e = exp.clone();
    let two = BigInt::from(2);
    while e.is_positive() {
        if e.is_odd() {
            result = (&result * &b).mod_floor(m);
        }
        b = (&b * &b).mod_floor(m);
        e /= &two;
    }
    result
}

/// Square root of `a` mod odd prime `p` (Tonelli–Shanks); `a` must be a QR.
fn sqrt_mod_p(a: u64, p: u64) -> Option<u64> {
    if a == 0 {
        return Some(0);
    }
    let pb = BigInt::from(p);
    let ab = BigInt::from(a);
    if p % 4 == 3 {
        let r = mod_pow(&ab, &BigInt::from((p + 1) / 4), &pb);
        let r = r.to_u64().unwrap();
        return (mul_mod(r, r, p) == a).then_some(r);
    }
    // Tonelli–Shanks
    let mut q = p - 1;
    let mut s = 0;
    while q % 2 == 0 {
        q /= 2;
        s += 1;
    }
    // find a non-residue z
    let mut z = 2;
    while is_quadratic_residue(z as i64, p) {
        z += 1;
    }
    let mut m = s;
    let mut c = mod_pow(&BigInt::from(z), &BigInt::from(q), &pb).to_u64().unwrap();
    let mut t = mod_pow(&ab, &BigInt::from(q), &pb).to_u64().unwrap();
    let mut r = mod_pow(&ab, &BigInt::from((q + 1) / 2), &pb).to_u64().unwrap();
    while t != 1 {
        let mut i = 0;
        let mut tt = t;
        while tt != 1 {
            tt = mul_mod(tt, tt, p);
            i += 1;
            if i == m {
                return None;
            }
        }
        let mut b = c;
        for _ in 0..(m - i - 1) {
            b = mul_mod(b, b, p);
        }
        m = i;
        c = mul_mod(b, b, p);
        t = mul_mod(t, c, p);
        r = mul_mod(r, b, p);
    }
    Some(r)
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

/// The canonical Hensel lift of √D in ℚ_p to `prec` digits, as a p-adic
/// unit.  "Canonical" pins the sign deterministically: for odd `p` the root
/// whose residue mod p is smaller; for `p = 2` the root ≡ 1 (mod 4).
pub fn hensel_sqrt(d: i64, p: u64, prec: u32) -> Result<PAdic, FieldError> {
    if p == 2 {
        if d.rem_euclid(8) != 1 {
            return Err(FieldError::BadPlace(format!("√{d} does not exist in ℚ_2")));
        }
        // lift through powers of 2: r ≡ 1 (mod 4) picks the branch
        let dd = BigInt::from(d);
        let mut r = BigInt::one();
        for k in 3..=(prec + 2) {
            let modulus = BigInt::one() << (k as usize + 1);
            let diff = (&r * &r - &dd).mod_floor(&modulus);
            if !diff.is_zero() {
                r += BigInt::one() << (k as usize - 1);
            }
        }
        let modulus = BigInt::one() << prec as usize;
        let r = r.mod_floor(&modulus);
        return Ok(PAdic::from_rational(
            &BigRational::from_integer(r),
            p,
            prec,
        ));
    }
    let a = BigInt::from(d).mod_floor(&BigInt::from(p)).to_u64().unwrap();
    let r0 = sqrt_mod_p(a, p)
        .ok_or_else(|| FieldError::BadPlace(format!("√{d} does not exist in ℚ_{p}")))?;
    let r0 = r0.min(p - r0); // canonical branch
    // quadratic Hensel lifting: double precision each round
    let dd = BigInt::from(d);
    let mut r = BigInt::from(r0);
    let mut k = 1u32;
    while k < prec {
        k = (2 * k).min(prec);
        let pk = BigInt::from(p).pow(k);
        let f = (&r * &r - &dd).mod_floor(&pk);
        let deriv = (BigInt::from(2) * &r).mod_floor(&pk);
        let inv = crate::scalar::mod_inverse(&deriv, &pk)
            .expect("2r is a unit for odd p");
        r = (&r - f * inv).mod_floor(&pk);
    }
    Ok(PAdic::from_rational(&BigRational::from_integer(r), p, prec))
}

// ---------------------------------------------------------------------------
// square-free and Pell helpers

fn is_squarefree(d: i64) -> bool {
    let mut n = d.unsigned_abs();
    let mut f = 2u64;
    while f * f <= n {
        if n % f == 0 {
            n /= f;
            if n % f == 0 {
                return false;
            }
        }
        f += 1;
    }
    true
}

/// Smallest solution of x² − D y² = ±1 with x, y ≥ 1, via the continued
/// fraction of √D.
fn pell_unit(d: i64) -> Option<Quad> {
    let a0 = (d as f64).sqrt().floor() as i64;
    if a0 * a0 == d {
        return None; // not a field
    }
    let (mut m, mut den, mut a) = (0i64, 1i64, a0);
    let (mut h_prev, mut h) = (BigInt::one(), BigInt::from(a0));
    let (mut k_prev, mut k) = (BigInt::zero(), BigInt::one());
    for _ in 0..10_000 {
        let lhs = &h * &h - BigInt::from(d) * &k * &k;
        if lhs == BigInt::one() || lhs == -BigInt::one() {
            return Some(Quad::new(
                BigRational::from_integer(h),
                BigRational::from_integer(k),
                d,
            ));
        }
        m = den * a - m;
        den = (d - m * m) / den;
        a = (a0 + m) / den;
        let h_next = BigInt::from(a) * &h + &h_prev;
        let k_next = BigInt::from(a) * &k + &k_prev;
        h_prev = std::mem::replace(&mut h, h_next);
        k_prev = std::mem::replace(&mut k, k_next);
    }
    None
}

fn half() -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(2))
}

// ---------------------------------------------------------------------------
// real-expression parser (ξ coordinates)

/// A parsed coordinate value: always a float, plus an exact quadratic-field
/// form when the expression stays inside one ℚ(√m).
#[derive(Debug, Clone)]
pub struct XiValue {
    pub text: String,
    pub quad: Option<Quad>,
    pub value: f64,
}

impl XiValue {
    pub fn from_quad(x: Quad) -> Self {
        let value = x.approx_f64().unwrap_or(f64::NAN);
        XiValue { text: String::new(), quad: Some(x), value }
    }

    pub fn rational(&self) -> Option<BigRational> {
        match &self.quad {
            Some(q) if Zero::is_zero(&q.b) => Some(q.a.clone()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
struct EvalNum {
    quad: Option<Quad>,
    f: f64,
}

impl EvalNum {
    fn from_ratio(r: BigRational) -> Self {
        EvalNum { f: ratio_to_f64(&r), quad: Some(Quad::rational(r, 0)) }
    }
    fn bin(self, other: EvalNum, op: char) -> Result<EvalNum, FieldError> {
        let f = match op {
            '+' => self.f + other.f,
            '-' => self.f - other.f,
            '*' => self.f * other.f,
            '/' => {
                if other.f == 0.0 {
                    return Err(FieldError::Parse("division by zero".into()));
                }
                self.f / other.f
            }
            _ => unreachable!(),
        };
        let quad = match (self.quad, other.quad) {
            (Some(a), Some(b)) if compatible(&a, &b) => match op {
                '+' => Some(a.add(&b)),
                '-' => Some(a.sub(&b)),
                '*' => Some(a.mul(&b)),
                '/' => a.div(&b).ok(),
                _ => unreachable!(),
            },
            _ => None,
        };
        Ok(EvalNum { quad, f })
    }
    fn neg(self) -> EvalNum {
        EvalNum { f: -self.f, quad: self.quad.map(|q| Scalar::neg(&q)) }
    }
    fn sqrt(self) -> Result<EvalNum, FieldError> {
        if self.f < 0.0 {
            return Err(FieldError::Parse("square root of a negative value".into()));
        }
        let quad = match &self.quad {
            Some(q) if Zero::is_zero(&q.b) && !q.a.is_negative() => sqrt_of_ratio(&q.a),
            _ => None,
        };
        Ok(EvalNum { f: self.f.sqrt(), quad })
    }
    fn pow(self, e: BigRational) -> Result<EvalNum, FieldError> {
        let ef = ratio_to_f64(&e);
        let f = self.f.powf(ef);
        if !f.is_finite() {
            return Err(FieldError::Parse("power does not evaluate".into()));
        }
        // integer exponents stay exact; odd/2 exponents go through sqrt
        if e.denom().is_one() {
            let n = e.numer().to_i64().unwrap_or(i64::MAX);
            if n.unsigned_abs() <= 64 {
                if let Some(q) = &self.quad {
                    let mut acc = <Quad as Scalar>::one();
                    for _ in 0..n.unsigned_abs() {
                        acc = acc.mul(q);
                    }
                    let acc = if n < 0 {
                        <Quad as Scalar>::one().div(&acc).ok()
                    } else {
                        Some(acc)
                    };
                    return Ok(EvalNum { quad: acc, f });
                }
            }
            return Ok(EvalNum { quad: None, f });
        }
        if *e.denom() == BigInt::from(2) {
            let n = e.numer().to_i64().unwrap_or(i64::MAX);
            if n.unsigned_abs() <= 64 {
                let whole = self.clone().pow(BigRational::from_integer(BigInt::from(n)))?;
                return whole.sqrt();
            }
        }
        Ok(EvalNum { quad: None, f })
    }
}

fn compatible(a: &Quad, b: &Quad) -> bool {
    a.d == b.d || Zero::is_zero(&a.b) || Zero::is_zero(&b.b)
}

/// √(p/q) as an exact `s·√m` when the squarefree part `m` is small enough.
fn sqrt_of_ratio(r: &BigRational) -> Option<Quad> {
    if Zero::is_zero(r) {
        return Some(Quad::rational(BigRational::from_integer(0.into()), 0));
    }
    // √(p/q) = √(pq)/q
    let pq = r.numer() * r.denom();
    let (mut square, mut free) = (BigInt::one(), BigInt::one());
    let mut n = pq.clone();
    let mut f = BigInt::from(2);
    while &f * &f <= n {
        let mut count = 0;
        while (&n % &f).is_zero() {
            n /= &f;
            count += 1;
        }
        if count > 0 {
            square *= f.pow(count / 2);
            if count % 2 == 1 {
                free *= &f;
            }
        }
        f += 1;
    }
    free *= &n; // leftover prime
    let m = free.to_i64()?;
    let coeff = BigRational::new(square, r.denom().clone());
    if m == 1 {
        Some(Quad::rational(coeff, 0))
    } else {
        Some(Quad::new(BigRational::from_integer(0.into()), coeff, m))
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }
    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }
    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        Some(c)
    }
    fn expect(&mut self, c: u8) -> Result<(), FieldError> {
        if self.bump() == Some(c) {
            Ok(())
        } else {
            Err(FieldError::Parse(format!(
                "expected '{}' at position {}",
                c as char, self.pos
            )))
        }
    }

    fn expr(&mut self) -> Result<EvalNum, FieldError> {
        let mut acc = self.term()?;
        while let Some(c) = self.peek() {
            if c == b'+' || c == b'-' {
                self.bump();
                let rhs = self.term()?;
                acc = acc.bin(rhs, c as char)?;
            } else {
                break;
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<EvalNum, FieldError> {
        let mut acc = self.factor()?;
        while let Some(c) = self.peek() {
            if c == b'*' || c == b'/' {
                self.bump();
                let rhs = self.factor()?;
                acc = acc.bin(rhs, c as char)?;
            } else {
                break;
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<EvalNum, FieldError> {
        match self.peek() {
            Some(b'-') => {
                self.bump();
                Ok(self.factor()?.neg())
            }
            Some(b'+') => {
                self.bump();
                self.factor()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<EvalNum, FieldError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.bump();
            let e = self.exponent()?;
            return base.pow(e);
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<BigRational, FieldError> {
        // integer, or a parenthesized rational like (1/4) or (-3/2)
        if self.peek() == Some(b'(') {
            self.bump();
            let neg = if self.peek() == Some(b'-') {
                self.bump();
                true
            } else {
                false
            };
            let num = self.integer()?;
            let e = if self.peek() == Some(b'/') {
                self.bump();
                let den = self.integer()?;
                if den.is_zero() {
                    return Err(FieldError::Parse("zero exponent denominator".into()));
                }
                BigRational::new(num, den)
            } else {
                BigRational::from_integer(num)
            };
            self.expect(b')')?;
            Ok(if neg { -e } else { e })
        } else {
            let neg = if self.peek() == Some(b'-') {
                self.bump();
                true
            } else {
                false
            };
            let n = self.integer()?;
            let e = BigRational::from_integer(n);
            Ok(if neg { -e } else { e })
        }
    }

    fn integer(&mut self) -> Result<BigInt, FieldError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(FieldError::Parse(format!("expected digits at {start}")));
        }
        std::str::from_utf8(&self.s[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|e| FieldError::Parse(format!("{e}")))
    }

    fn atom(&mut self) -> Result<EvalNum, FieldError> {
        match self.peek() {
            Some(b'(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                self.skip_ws();
                let start = self.pos;
                while self.pos < self.s.len() {
                    let ch = self.s[self.pos];
                    if ch.is_ascii_digit() || ch == b'.' {
                        self.pos += 1;
                    } else if (ch == b'e' || ch == b'E')
                        && self.pos + 1 < self.s.len()
                        && (self.s[self.pos + 1].is_ascii_digit()
                            || ((self.s[self.pos + 1] == b'+' || self.s[self.pos + 1] == b'-')
                                && self.pos + 2 < self.s.len()
                                && self.s[self.pos + 2].is_ascii_digit()))
                    {
                        self.pos += 2; // consume 'e' and sign/first digit
                        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                            self.pos += 1;
                        }
                        break;
                    } else {
                        break;
                    }
                }
                let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                let r = parse_ratio(text).map_err(FieldError::Parse)?;
                Ok(EvalNum::from_ratio(r))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                self.skip_ws();
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphabetic() {
                    self.pos += 1;
                }
                let word = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                if word.eq_ignore_ascii_case("sqrt") {
                    self.expect(b'(')?;
                    let inner = self.expr()?;
                    self.expect(b')')?;
                    inner.sqrt()
                } else {
                    Err(FieldError::Parse(format!("unknown function {word:?}")))
                }
            }
            other => Err(FieldError::Parse(format!(
                "unexpected input at position {}: {other:?}",
                self.pos
            ))),
        }
    }
}

/// Parse a coordinate expression: rationals, decimals, `sqrt(…)`,
/// rational powers `x^(p/q)`, parentheses and `+ − * /`.
pub fn parse_xi_expr(s: &str) -> Result<XiValue, FieldError> {
    let mut p = Parser { s: s.as_bytes(), pos: 0 };
    let v = p.expr()?;
    p.skip_ws();
    if p.pos != p.s.len() {
        return Err(FieldError::Parse(format!(
            "trailing input at position {} in {s:?}",
            p.pos
        )));
    }
    Ok(XiValue { text: s.trim().to_string(), quad: v.quad, value: v.f })
}

// ---------------------------------------------------------------------------
// approximation targets

/// A field, a distinguished place `w`, and a nonzero target vector ξ over
/// the completion `K_w`.
#[derive(Debug, Clone)]
pub struct ApproximationTarget {
    pub field: FieldContext,
    pub place: Place,
    pub xi: Vec<XiValue>,
}

impl ApproximationTarget {
    pub fn new(
        field: FieldContext,
        place: Place,
        xi: Vec<XiValue>,
    ) -> Result<Self, FieldError> {
        if xi.is_empty() {
            return Err(FieldError::Parse("ξ must have at least one coordinate".into()));
        }
        if !place.is_archimedean() {
            // finite completions need exact coordinates
            if xi.iter().any(|x| x.rational().is_none()) {
                return Err(FieldError::Parse(
                    "coordinates of ξ at a finite place must be rational".into(),
                ));
            }
        } else if xi.iter().all(|x| x.value == 0.0) {
            return Err(FieldError::ZeroVector);
        }
        Ok(ApproximationTarget { field, place, xi })
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    /// ξ as exact rationals (available iff every coordinate is rational).
    pub fn xi_rationals(&self) -> Option<Vec<BigRational>> {
        self.xi.iter().map(|x| x.rational()).collect()
    }

    /// ξ as floats (archimedean places).
    pub fn xi_floats(&self) -> Vec<f64> {
        self.xi.iter().map(|x| x.value).collect()
    }

    /// log ‖ξ‖ at the distinguished place.
    pub fn ln_xi_norm(&self) -> Result<f64, FieldError> {
        if self.place.is_archimedean() {
            let s: f64 = self.xi.iter().map(|x| x.value * x.value).sum();
            Ok(0.5 * s.ln())
        } else {
            let p = self.place.residue_prime().unwrap();
            let xs = self
                .xi_rationals()
                .ok_or_else(|| FieldError::Parse("ξ must be rational at a finite place".into()))?;
            let mut best: Option<i64> = None;
            for x in &xs {
                if !Zero::is_zero(x) {
                    let v = int_valuation(x.numer(), p) - int_valuation(x.denom(), p);
                    best = Some(best.map_or(v, |b| b.min(v)));
                }
            }
            let v = best.ok_or(FieldError::ZeroVector)?;
            Ok(-(v as f64) * (p as f64).ln())
        }
    }

    /// log of the inner product |x·ξ|_w for a vector over the field
    /// (`None` encodes an exact zero).  Uses exact arithmetic when ξ is
    /// expressible in the field, floats otherwise.
    pub fn ln_inner_at_w(&self, x: &[Quad]) -> Result<Option<f64>, FieldError> {
        assert_eq!(x.len(), self.dim(), "dimension mismatch");
        if self.place.is_archimedean() {
            let conj = matches!(self.place.kind, PlaceKind::Real { conjugate: true });
            // exact path: all ξ coordinates live in one quadratic field
            if let Some(dot) = self.exact_dot(x) {
                if Scalar::is_zero(&dot) {
                    return Ok(None);
                }
                return Ok(dot.approx_ln_abs());
            }
            let mut s = 0.0;
            for (xi, c) in self.xi.iter().zip(x) {
                let e = self.field.embed(c, conj);
                s += xi.value * e.approx_f64().ok_or(FieldError::Parse("complex embed".into()))?;
            }
            if s == 0.0 {
                return Ok(None);
            }
            Ok(Some(s.abs().ln()))
        } else {
            let p = self.place.residue_prime().unwrap();
            let xs = self.xi_rationals().unwrap();
            // x·ξ is an element of the field; take |·|_w
            let mut dot = <Quad as Scalar>::zero();
            for (xi, c) in xs.iter().zip(x) {
                dot = dot.add(&c.mul(&Quad::rational(xi.clone(), 0)));
            }
            let PlaceKind::Finite { data, .. } = &self.place.kind else { unreachable!() };
            match self.field.finite_valuation(&dot, p, data)? {
                Valuation::Infinity => Ok(None),
                Valuation::Finite(v) => Ok(Some(-ratio_to_f64(&v) * (p as f64).ln())),
            }
        }
    }

    fn exact_dot(&self, x: &[Quad]) -> Option<Quad> {
        let conj = matches!(self.place.kind, PlaceKind::Real { conjugate: true });
        let mut acc = <Quad as Scalar>::zero();
        for (xi, c) in self.xi.iter().zip(x) {
            let q = xi.quad.as_ref()?;
            let e = self.field.embed(c, conj);
            if !compatible(q, &e) {
                return None;
            }
            acc = acc.add(&q.mul(&e));
        }
        Some(acc)
    }

    /// log D_ξ(x): the twisted distance functional
    /// `(|x·ξ|_w / ‖ξ‖_w)^{d_w/d} · ∏_{v≠w} ‖x‖_v^{d_v/d}` on log scale.
    /// Returns `None` when x·ξ = 0 exactly.
    pub fn ln_d_xi(&self, x: &[Quad]) -> Result<Option<f64>, FieldError> {
        let Some(inner) = self.ln_inner_at_w(x)? else {
            return Ok(None);
        };
        let d = self.field.degree() as f64;
        let dw = self.place.local_degree() as f64;
        let w_part = (dw / d) * (inner - self.ln_xi_norm()?);
        Ok(Some(w_part + self.ln_other_norms(x)?))
    }

    /// log D*_ξ(x): as `ln_d_xi` but with ‖x ∧ ξ‖_w in place of |x·ξ|_w.
    pub fn ln_d_star_xi(&self, x: &[Quad]) -> Result<Option<f64>, FieldError> {
        let d = self.field.degree() as f64;
        let dw = self.place.local_degree() as f64;
        let Some(wedge) = self.ln_wedge_at_w(x)? else {
            return Ok(None);
        };
        let w_part = (dw / d) * (wedge - self.ln_xi_norm()?);
        Ok(Some(w_part + self.ln_other_norms(x)?))
    }

    /// log ‖x ∧ ξ‖_w (`None` when x is proportional to ξ).
    pub fn ln_wedge_at_w(&self, x: &[Quad]) -> Result<Option<f64>, FieldError> {
        assert_eq!(x.len(), self.dim(), "dimension mismatch");
        if self.place.is_archimedean() {
            let conj = matches!(self.place.kind, PlaceKind::Real { conjugate: true });
            let xs: Vec<f64> = x
                .iter()
                .map(|c| {
                    self.field
                        .embed(c, conj)
                        .approx_f64()
                        .ok_or(FieldError::Parse("complex embed".into()))
                })
                .collect::<Result<_, _>>()?;
            let xi = self.xi_floats();
            let mut sq = Vec::new();
            for i in 0..xs.len() {
                for j in i + 1..xs.len() {
                    let c = xs[i] * xi[j] - xs[j] * xi[i];
                    sq.push(c * c);
                }
            }
            let s = <f64 as Scalar>::stable_sum(sq);
            if s == 0.0 {
                return Ok(None);
            }
            Ok(Some(0.5 * s.ln()))
        } else {
            let p = self.place.residue_prime().unwrap();
            let xs = self.xi_rationals().unwrap();
            let PlaceKind::Finite { data, .. } = &self.place.kind else { unreachable!() };
            let mut best: Option<BigRational> = None;
            for i in 0..x.len() {
                for j in i + 1..x.len() {
                    let c = x[i]
                        .mul(&Quad::rational(xs[j].clone(), 0))
                        .sub(&x[j].mul(&Quad::rational(xs[i].clone(), 0)));
                    match self.field.finite_valuation(&c, p, data)? {
                        Valuation::Infinity => {}
                        Valuation::Finite(v) => {
                            best = Some(match best {
                                None => v,
                                Some(b) => b.min(v),
                            })
                        }
                    }
                }
            }
            match best {
                None => Ok(None),
                Some(v) => Ok(Some(-ratio_to_f64(&v) * (p as f64).ln())),
            }
        }
    }

    /// `Σ_{v≠w} (d_v/d) log ‖x‖_v` over all places of the field.
    /// Requires integral coordinates (the finite part is computed from the
    /// content ideal).
    fn ln_other_norms(&self, x: &[Quad]) -> Result<f64, FieldError> {
        for c in x {
            if !self.field.is_integral(c)? {
                return Err(FieldError::Parse(
                    "distance functionals need integral coordinates".into(),
                ));
            }
        }
        let d = self.field.degree() as f64;
        let mut total = 0.0;
        // archimedean places other than w
        for v in self.field.archimedean_places() {
            if v == self.place {
                continue;
            }
            let n = self.field.vector_norm_at(x, &v)?;
            total += (v.local_degree() as f64 / d) * n.ln();
        }
        // finite part: ∏_{v finite} ‖x‖_v^{d_v} = 1/N(content)
        let content = self.field.content_norm(x)?;
        total -= ln_ratio_abs(&BigRational::from_integer(content)) / d;
        // if w itself is finite, divide its factor back out
        if let PlaceKind::Finite { p, data } = &self.place.kind {
            let n = self.field.vector_norm_at(x, &self.place)?;
            let _ = (p, data);
            total -= (self.place.local_degree() as f64 / d) * n.ln();
        }
        Ok(total)
    }

    /// log of the projective height of `x`.
    pub fn ln_height(&self, x: &[Quad]) -> Result<f64, FieldError> {
        Ok(self.field.height_vector(x)?.ln())
    }

    // -- JSON ----------------------------------------------------------------

    /// Parse a target from its JSON description:
    /// `{"field": {"kind": "rational"} | {"kind": "quadratic", "D": 2},
    ///   "place": {"kind": "inf", "index": 0} | {"kind": "finite", "p": 7, "root": "+"},
    ///   "xi": ["1", "2^(1/4)"]}`.
    pub fn from_json(text: &str) -> Result<Self, FieldError> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| FieldError::Parse(e.to_string()))?;
        Self::from_json_value(&v)
    }

    pub fn from_json_value(v: &serde_json::Value) -> Result<Self, FieldError> {
        let field_v = v
            .get("field")
            .ok_or_else(|| FieldError::Parse("missing \"field\"".into()))?;
        let field = match field_v.get("kind").and_then(|k| k.as_str()) {
            Some("rational") => FieldContext::rational(),
            Some("quadratic") => {
                let d = field_v
                    .get("D")
                    .and_then(|d| d.as_i64())
                    .ok_or_else(|| FieldError::Parse("quadratic field needs integer \"D\"".into()))?;
                FieldContext::quadratic(d)?
            }
            other => return Err(FieldError::Parse(format!("unknown field kind {other:?}"))),
        };
        let place_v = v
            .get("place")
            .ok_or_else(|| FieldError::Parse("missing \"place\"".into()))?;
        let place = match place_v.get("kind").and_then(|k| k.as_str()) {
            Some("inf") => {
                let idx = place_v.get("index").and_then(|i| i.as_u64()).unwrap_or(0);
                let arch = field.archimedean_places();
                arch.get(idx as usize)
                    .cloned()
                    .ok_or_else(|| FieldError::BadPlace(format!("no archimedean place {idx}")))?
            }
            Some("finite") => {
                let p = place_v
                    .get("p")
                    .and_then(|p| p.as_u64())
                    .ok_or_else(|| FieldError::Parse("finite place needs prime \"p\"".into()))?;
                let places = field.places_above(p)?;
                if places.len() == 1 {
                    places.into_iter().next().unwrap()
                } else {
                    let root = place_v.get("root").and_then(|r| r.as_str()).unwrap_or("+");
                    let want_conj = match root {
                        "+" => false,
                        "-" => true,
                        other => {
                            return Err(FieldError::Parse(format!("bad root selector {other:?}")))
                        }
                    };
                    places
                        .into_iter()
                        .find(|pl| {
                            matches!(
                                &pl.kind,
                                PlaceKind::Finite {
                                    data: FiniteData::Quadratic { conjugate, .. },
                                    ..
                                } if *conjugate == want_conj
                            )
                        })
                        .unwrap()
                }
            }
            other => return Err(FieldError::Parse(format!("unknown place kind {other:?}"))),
        };
        let xi_v = v
            .get("xi")
            .and_then(|x| x.as_array())
            .ok_or_else(|| FieldError::Parse("missing \"xi\" array".into()))?;
        let xi: Vec<XiValue> = xi_v
            .iter()
            .map(|c| match c {
                serde_json::Value::String(s) => parse_xi_expr(s),
                serde_json::Value::Number(n) => parse_xi_expr(&n.to_string()),
                other => Err(FieldError::Parse(format!("bad ξ coordinate {other}"))),
            })
            .collect::<Result<_, _>>()?;
        ApproximationTarget::new(field, place, xi)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let field = match &self.field {
            FieldContext::Rational => serde_json::json!({"kind": "rational"}),
            FieldContext::Quadratic { d } => serde_json::json!({"kind": "quadratic", "D": d}),
        };
        let place = match &self.place.kind {
            PlaceKind::RationalInfinite => serde_json::json!({"kind": "inf", "index": 0}),
            PlaceKind::Real { conjugate } => {
                serde_json::json!({"kind": "inf", "index": u8::from(*conjugate)})
            }
            PlaceKind::Complex => serde_json::json!({"kind": "inf", "index": 0}),
            PlaceKind::Finite { p, data } => match data {
                FiniteData::Quadratic { splitting: SplittingType::Split, conjugate } => {
                    serde_json::json!({"kind": "finite", "p": p,
                                       "root": if *conjugate { "-" } else { "+" }})
                }
                _ => serde_json::json!({"kind": "finite", "p": p}),
            },
        };
        let xi: Vec<String> = self
            .xi
            .iter()
            .map(|x| {
                if x.text.is_empty() {
                    match &x.quad {
                        Some(q) if Zero::is_zero(&q.b) => format_ratio(&q.a),
                        _ => format!("{}", x.value),
                    }
                } else {
                    x.text.clone()
                }
            })
            .collect();
        serde_json::json!({"field": field, "place": place, "xi": xi})
    }
}
