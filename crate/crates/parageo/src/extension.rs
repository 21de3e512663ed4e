//! Extension of scalars between ℚ and a real quadratic field.
//!
//! A basis `α = (α_1, …, α_d)` of `K/ℚ` turns a target `ξ ∈ K_w^n` at a
//! degree-one archimedean place `w` into the extended target
//! `Ξ = (α_1ξ, …, α_dξ) ∈ ℝ^{dn}` over ℚ.  The accompanying linear map
//! `T(x_1, …, x_d) = Σ α_j x_j` identifies `ℚ^{dn}` with `K^n` and carries
//! `ℤ^{dn}` onto `O_K^n` when `α` is an integral basis.  This module houses
//! the map, the extended target, and three verification layers:
//!
//! * [`verify_profile_transfer`] — the parametric minima of `Ξ` at
//!   parameter `dq` track those of `ξ` at `q` (in blocks of `d`), and the
//!   dual minima track up to the drift `(d−1)q`;
//! * [`exponent_transfer`] and the extended exponent identity — exact
//!   arithmetic on the four approximation exponents under extension;
//! * [`pullback_comparability_check`] — the successive minima of a convex
//!   body over `K` agree, in blocks of `d` and up to bounded ratios, with
//!   those of its pullback under `T` over ℚ, established by direct
//!   enumeration on both sides.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::minima::{self, EnumerationBudget, MinimaError, ProfileForm};
use crate::numberfield::{
    ApproximationTarget, FieldContext, FieldError, Place, PlaceKind, XiValue,
};
use crate::scalar::{format_ratio, parse_ratio, ratio_to_f64, Quad, Scalar};

fn rone() -> BigRational {
    One::one()
}

fn rzero() -> BigRational {
    Zero::zero()
}

#[derive(Debug, Error)]
pub enum ExtensionError {
    #[error("field error: {0}")]
    Field(#[from] FieldError),
    #[error("minima error: {0}")]
    Minima(#[from] MinimaError),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("profile not certified exact: {0}")]
    Inexact(String),
    #[error("enumeration budget exhausted: {0}")]
    Budget(String),
}

// ---------------------------------------------------------------------------
// the extension datum

/// A basis of `K/ℚ` together with a distinguished degree-one archimedean
/// place `w`, packaged with the coordinate matrices of the induced linear
/// map `T : ℚ^{dn} → K^n`.
#[derive(Debug, Clone)]
pub struct ScalarExtension {
    pub field: FieldContext,
    pub place: Place,
    /// The basis `α`, as field elements (`(1)` over ℚ).
    pub alpha: Vec<Quad>,
    /// `d × d` rational matrix: column `j` holds the coordinates of `α_j`
    /// in the integral basis `(1, ω)` (just `(α_1)` over ℚ).
    coeff: Vec<Vec<BigRational>>,
    /// Determinant of `coeff` (nonzero by construction).
    coeff_det: BigRational,
}

impl ScalarExtension {
    /// The degenerate extension ℚ/ℚ with `α = (1)`.
    pub fn rational() -> Self {
        let field = FieldContext::rational();
        let place = field.archimedean_places()[0].clone();
        ScalarExtension {
            field,
            place,
            alpha: vec![<Quad as Scalar>::one()],
            coeff: vec![vec![rone()]],
            coeff_det: rone(),
        }
    }

    /// A real quadratic field `ℚ(√D)` with its integral basis `(1, ω)` and
    /// the embedding sending `√D` to the positive root.
    pub fn real_quadratic(d: i64) -> Result<Self, ExtensionError> {
        let field = FieldContext::quadratic(d)?;
        if d < 0 {
            return Err(ExtensionError::Contract(
                "the distinguished place must have local degree one; \
                 imaginary quadratic fields only offer a complex place"
                    .into(),
            ));
        }
        let omega = field.omega()?;
        let alpha = vec![<Quad as Scalar>::one(), omega];
        Self::with_basis(field, alpha)
    }

    /// An arbitrary ℚ-basis `α` of `K` (rejected when the `α_j` are
    /// linearly dependent over ℚ).  The distinguished place is the
    /// embedding sending `√D` to the positive root.
    pub fn with_basis(field: FieldContext, alpha: Vec<Quad>) -> Result<Self, ExtensionError> {
        let d = field.degree() as usize;
        if alpha.len() != d {
            return Err(ExtensionError::Contract(format!(
                "a basis of a degree-{d} field needs {d} elements, got {}",
                alpha.len()
            )));
        }
        if matches!(field, FieldContext::Quadratic { d } if d < 0) {
            return Err(ExtensionError::Contract(
                "the distinguished place must have local degree one; \
                 imaginary quadratic fields only offer a complex place"
                    .into(),
            ));
        }
        let mut coeff = vec![vec![rzero(); d]; d];
        for (j, a) in alpha.iter().enumerate() {
            let (u, v) = field.omega_coords(a)?;
            coeff[0][j] = u;
            if d == 2 {
                coeff[1][j] = v;
            } else if !Zero::is_zero(&v) {
                return Err(ExtensionError::Contract("irrational basis element over ℚ".into()));
            }
        }
        let coeff_det = det_rat(&coeff);
        if Zero::is_zero(&coeff_det) {
            return Err(ExtensionError::Contract(
                "the proposed α are linearly dependent over ℚ".into(),
            ));
        }
        let place = field.archimedean_places()[0].clone();
        Ok(ScalarExtension { field, place, alpha, coeff, coeff_det })
    }

    /// Degree `d = [K : ℚ]`.
    pub fn d(&self) -> usize {
        self.alpha.len()
    }

    /// Whether `α` generates the full ring of integers over ℤ (each `α_j`
    /// integral and the coordinate determinant a unit).
    pub fn is_integral_basis(&self) -> Result<bool, ExtensionError> {
        for a in &self.alpha {
            if !self.field.is_integral(a)? {
                return Ok(false);
            }
        }
        let one = rone();
        Ok(self.coeff_det == one || self.coeff_det == -&one)
    }

    /// Index data of the lattice map in ambient dimension `n`: the image
    /// `T(ℤ^{dn})` sits inside (a fraction of) `O_K^n` with covolume ratio
    /// `|det|^n` relative to it.
    pub fn lattice_index(&self, n: usize) -> BigRational {
        let mut out = rone();
        let a = self.coeff_det.abs();
        for _ in 0..n {
            out = out * &a;
        }
        out
    }

    /// The `dn × dn` rational matrix of `T` in coordinates: input blocks
    /// `x_1, …, x_d` of length `n`, output blocks the `(1, ω)`-coordinates
    /// of the image (Kronecker product of the basis matrix with `I_n`).
    pub fn t_matrix(&self, n: usize) -> Vec<Vec<BigRational>> {
        let d = self.d();
        let mut m = vec![vec![rzero(); d * n]; d * n];
        for i in 0..d {
            for j in 0..d {
                for c in 0..n {
                    m[i * n + c][j * n + c] = self.coeff[i][j].clone();
                }
            }
        }
        m
    }

    /// `T(x_1, …, x_d) = Σ_j α_j x_j` as a vector of field elements.
    pub fn t_apply(&self, x: &[BigRational]) -> Result<Vec<Quad>, ExtensionError> {
        let d = self.d();
        if x.is_empty() || x.len() % d != 0 {
            return Err(ExtensionError::Contract(format!(
                "input length {} is not a multiple of the degree {d}",
                x.len()
            )));
        }
        let n = x.len() / d;
        let mut out = vec![<Quad as Scalar>::zero(); n];
        for (j, a) in self.alpha.iter().enumerate() {
            for c in 0..n {
                let term = a.mul(&Quad::rational(x[j * n + c].clone(), 0));
                out[c] = out[c].add(&term);
            }
        }
        Ok(out)
    }

    /// Inverse of [`Self::t_apply`]: the unique rational coordinates with
    /// `T(x) = y`.  When `α` is an integral basis, integral `y` come back
    /// as integer coordinates.
    pub fn t_invert(&self, y: &[Quad]) -> Result<Vec<BigRational>, ExtensionError> {
        let d = self.d();
        let n = y.len();
        let mut out = vec![rzero(); d * n];
        for (c, yc) in y.iter().enumerate() {
            let (u, v) = self.field.omega_coords(yc)?;
            match d {
                1 => {
                    out[c] = u / &self.coeff[0][0];
                }
                2 => {
                    // solve the 2×2 system coeff · (x₁, x₂) = (u, v)
                    let det = &self.coeff_det;
                    let x1 = (&u * &self.coeff[1][1] - &v * &self.coeff[0][1]) / det;
                    let x2 = (&v * &self.coeff[0][0] - &u * &self.coeff[1][0]) / det;
                    out[c] = x1;
                    out[n + c] = x2;
                }
                _ => unreachable!("degrees are 1 or 2"),
            }
        }
        Ok(out)
    }

    /// Image of `α_j` under the distinguished embedding.
    fn alpha_at_w(&self, j: usize) -> Quad {
        let conj = matches!(self.place.kind, PlaceKind::Real { conjugate: true });
        self.field.embed(&self.alpha[j], conj)
    }

    /// The extended point `Ξ = (α_1ξ, …, α_dξ)` as coordinate values over
    /// ℝ, exact whenever a product stays inside one quadratic field.
    pub fn extend_point(&self, xi: &[XiValue]) -> Result<Vec<XiValue>, ExtensionError> {
        if xi.is_empty() {
            return Err(ExtensionError::Contract("ξ must be nonzero".into()));
        }
        let mut out = Vec::with_capacity(self.d() * xi.len());
        for j in 0..self.d() {
            let aw = self.alpha_at_w(j);
            for x in xi {
                out.push(scale_value(&aw, x));
            }
        }
        Ok(out)
    }

    /// The extended target over ℚ at the real place, built from a target
    /// over `(K, w)`.
    pub fn extend_target(
        &self,
        target: &ApproximationTarget,
    ) -> Result<ApproximationTarget, ExtensionError> {
        if target.field.d_param() != self.field.d_param() {
            return Err(ExtensionError::Contract(
                "the target lives over a different field than the extension".into(),
            ));
        }
        if target.place != self.place {
            return Err(ExtensionError::Contract(
                "the target's distinguished place differs from the extension's".into(),
            ));
        }
        if !self.place.is_archimedean() || self.place.local_degree() != 1 {
            return Err(ExtensionError::Contract(
                "extension needs an archimedean place of local degree one".into(),
            ));
        }
        let xi_ext = self.extend_point(&target.xi)?;
        let field = FieldContext::rational();
        let place = field.archimedean_places()[0].clone();
        Ok(ApproximationTarget::new(field, place, xi_ext)?)
    }
}

/// Product `a·x` of an embedded field element with a coordinate value,
/// exact when both sides live in one quadratic field.
fn scale_value(a: &Quad, x: &XiValue) -> XiValue {
    let quad = x.quad.as_ref().and_then(|q| {
        let ok = Zero::is_zero(&a.b) || Zero::is_zero(&q.b) || a.d == q.d;
        ok.then(|| a.mul(q))
    });
    let value = match &quad {
        Some(q) => q.approx_f64().unwrap_or(f64::NAN),
        None => a.approx_f64().unwrap_or(f64::NAN) * x.value,
    };
    let label = if x.text.is_empty() {
        x.quad.as_ref().map(quad_label).unwrap_or_else(|| format!("{}", x.value))
    } else {
        x.text.clone()
    };
    XiValue { text: format!("({})*({label})", quad_label(a)), quad, value }
}

/// Readable rendering of a quadratic number for labels.
fn quad_label(x: &Quad) -> String {
    if Zero::is_zero(&x.b) {
        return format_ratio(&x.a);
    }
    let root = format!("sqrt({})", x.d);
    let b = if x.b == rone() {
        root
    } else if x.b == -rone() {
        format!("-{root}")
    } else {
        format!("{}*{root}", format_ratio(&x.b))
    };
    if Zero::is_zero(&x.a) {
        b
    } else if x.b.is_negative() {
        format!("{}{b}", format_ratio(&x.a))
    } else {
        format!("{}+{b}", format_ratio(&x.a))
    }
}

/// Determinant of a small rational matrix by Gaussian elimination.
fn det_rat(m: &[Vec<BigRational>]) -> BigRational {
    let n = m.len();
    let mut a: Vec<Vec<BigRational>> = m.to_vec();
    let mut det = rone();
    for k in 0..n {
        let Some(p) = (k..n).find(|&i| !Zero::is_zero(&a[i][k])) else {
            return rzero();
        };
        if p != k {
            a.swap(k, p);
            det = -det;
        }
        det = det * &a[k][k];
        let pivot = a[k][k].clone();
        for i in k + 1..n {
            if Zero::is_zero(&a[i][k]) {
                continue;
            }
            let f = &a[i][k] / &pivot;
            for j in k..n {
                let v = &a[i][j] - &f * &a[k][j];
                a[i][j] = v;
            }
        }
    }
    det
}

// ---------------------------------------------------------------------------
// profile transfer

/// Outcome of the block-transfer verification of the minima profiles under
/// extension of scalars.
#[derive(Debug, Clone)]
pub struct ProfileTransferReport {
    pub d: usize,
    pub ambient: usize,
    pub q_grid: Vec<f64>,
    /// `sup |L_{Ξ, d(i−1)+j}(dq) − L_{ξ, i}(q)|` over the grid and indices.
    pub sup_gap: f64,
    /// `sup |L*_{Ξ, d(i−1)+j}(dq) − L*_{ξ, i}(q) − (d−1)q|` likewise.
    pub sup_gap_dual: f64,
    /// Per-grid-point gaps `(q, primal, dual)`.
    pub gaps: Vec<(f64, f64, f64)>,
    /// The sup over the later half of the grid exceeds the sup over the
    /// earlier half by at most 0.5, in both families (boundedness rather
    /// than growth).
    pub horizon_stable: bool,
    /// Every underlying profile was certified exact.
    pub exact: bool,
}

impl ProfileTransferReport {
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::json!({
            "d": self.d,
            "ambient": self.ambient,
            "grid": self.q_grid,
            "sup_gap": self.sup_gap,
            "sup_gap_dual": self.sup_gap_dual,
            "gaps": self.gaps.iter().map(|(q, a, b)| serde_json::json!([q, a, b])).collect::<Vec<_>>(),
            "horizon_stable": self.horizon_stable,
            "exact": self.exact,
        })
    }
}

fn half_sups(gaps: &[(f64, f64, f64)]) -> ((f64, f64), (f64, f64)) {
    let mid = gaps.len().div_ceil(2);
    let sup = |rows: &[(f64, f64, f64)]| {
        rows.iter().fold((0.0f64, 0.0f64), |(a, b), (_, x, y)| (a.max(*x), b.max(*y)))
    };
    (sup(&gaps[..mid]), sup(&gaps[mid..]))
}

/// Compare the minima profile of the extended target at parameter `dq`
/// against the profile of the base target at `q`, in both the primal and
/// the dual family.  The `m`-th extended minimum with `m = d(i−1)+j` is
/// matched to the `i`-th base minimum; the dual family carries the extra
/// drift `(d−1)q`.  Both profiles must be certified exact.
pub fn verify_profile_transfer(
    ext: &ScalarExtension,
    xi: &[XiValue],
    q_grid: &[f64],
    budget: &EnumerationBudget,
) -> Result<ProfileTransferReport, ExtensionError> {
    if q_grid.is_empty() {
        return Err(ExtensionError::Contract("the parameter grid is empty".into()));
    }
    let target_k = ApproximationTarget::new(ext.field.clone(), ext.place.clone(), xi.to_vec())?;
    let target_q = ext.extend_target(&target_k)?;
    let d = ext.d();
    let n = target_k.dim();
    let dq_grid: Vec<f64> = q_grid.iter().map(|q| d as f64 * q).collect();

    let base = minima::profile(&target_k, &ProfileForm::Grade(1), q_grid, budget)?;
    let ext_p = minima::profile(&target_q, &ProfileForm::Grade(1), &dq_grid, budget)?;
    let base_dual = minima::profile(&target_k, &ProfileForm::Star, q_grid, budget)?;
    let ext_dual = minima::profile(&target_q, &ProfileForm::Star, &dq_grid, budget)?;
    for (p, name) in [
        (&base, "base"),
        (&ext_p, "extended"),
        (&base_dual, "base dual"),
        (&ext_dual, "extended dual"),
    ] {
        if !p.exact {
            return Err(ExtensionError::Inexact(format!(
                "the {name} profile is not certified on the full grid"
            )));
        }
    }

    let mut gaps = Vec::with_capacity(q_grid.len());
    for (t, &q) in q_grid.iter().enumerate() {
        let mut g = 0.0f64;
        let mut gd = 0.0f64;
        for i in 1..=n {
            for j in 1..=d {
                let m = d * (i - 1) + j - 1;
                g = g.max((ext_p.values[t][m] - base.values[t][i - 1]).abs());
                gd = gd.max(
                    (ext_dual.values[t][m] - base_dual.values[t][i - 1] - (d as f64 - 1.0) * q)
                        .abs(),
                );
            }
        }
        gaps.push((q, g, gd));
    }
    let sup_gap = gaps.iter().map(|g| g.1).fold(0.0f64, f64::max);
    let sup_gap_dual = gaps.iter().map(|g| g.2).fold(0.0f64, f64::max);
    let ((e1, e2), (l1, l2)) = half_sups(&gaps);
    let horizon_stable = l1 <= e1 + 0.5 && l2 <= e2 + 0.5;
    Ok(ProfileTransferReport {
        d,
        ambient: n,
        q_grid: q_grid.to_vec(),
        sup_gap,
        sup_gap_dual,
        gaps,
        horizon_stable,
        exact: true,
    })
}

// ---------------------------------------------------------------------------
// exponent transfer

/// A rational number or `+∞`, the value space of approximation exponents.
#[derive(Debug, Clone, PartialEq)]
pub enum ExtendedRational {
    Finite(BigRational),
    Infinite,
}

impl ExtendedRational {
    pub fn from_int(x: i64) -> Self {
        ExtendedRational::Finite(BigRational::from_integer(BigInt::from(x)))
    }

    pub fn parse(s: &str) -> Result<Self, ExtensionError> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t == "∞" {
            return Ok(ExtendedRational::Infinite);
        }
        parse_ratio(t)
            .map(ExtendedRational::Finite)
            .map_err(|e| ExtensionError::Contract(format!("bad exponent value {s:?}: {e}")))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            ExtendedRational::Finite(r) => ratio_to_f64(r),
            ExtendedRational::Infinite => f64::INFINITY,
        }
    }
}

impl std::fmt::Display for ExtendedRational {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExtendedRational::Finite(r) => write!(f, "{}", format_ratio(r)),
            ExtendedRational::Infinite => write!(f, "inf"),
        }
    }
}

/// The four standard exponents of a point (ordinary and uniform, direct
/// and dual).
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentQuartet {
    pub omega: ExtendedRational,
    pub omega_hat: ExtendedRational,
    pub lambda: ExtendedRational,
    pub lambda_hat: ExtendedRational,
}

fn rat_usize(d: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(d))
}

/// `ω ↦ d(ω + 1) − 1`, fixing `+∞`.
fn transfer_omega_like(x: &ExtendedRational, d: usize) -> ExtendedRational {
    match x {
        ExtendedRational::Infinite => ExtendedRational::Infinite,
        ExtendedRational::Finite(r) => {
            ExtendedRational::Finite(rat_usize(d) * (r + rone()) - rone())
        }
    }
}

/// `λ ↦ 1 / (d(1/λ + 1) − 1)`, with the limit conventions at `0` and `∞`.
fn transfer_lambda_like(x: &ExtendedRational, d: usize) -> ExtendedRational {
    match x {
        ExtendedRational::Infinite => {
            // 1/λ = 0, so the image is 1/(d − 1)
            if d == 1 {
                ExtendedRational::Infinite
            } else {
                ExtendedRational::Finite(BigRational::new(BigInt::one(), BigInt::from(d as i64 - 1)))
            }
        }
        ExtendedRational::Finite(r) if Zero::is_zero(r) => ExtendedRational::Finite(rzero()),
        ExtendedRational::Finite(r) => {
            let inv = rone() / r;
            let t = rat_usize(d) * (inv + rone()) - rone();
            if Zero::is_zero(&t) {
                ExtendedRational::Infinite
            } else {
                ExtendedRational::Finite(rone() / t)
            }
        }
    }
}

/// Exact transfer of the four exponents under extension by a degree-`d`
/// basis: `ω`-type exponents map by `x ↦ d(x+1)−1`, `λ`-type exponents map
/// by the same law applied to their reciprocals.
pub fn exponent_transfer(x: &ExponentQuartet, d: usize) -> ExponentQuartet {
    assert!(d >= 1, "the degree is at least 1");
    ExponentQuartet {
        omega: transfer_omega_like(&x.omega, d),
        omega_hat: transfer_omega_like(&x.omega_hat, d),
        lambda: transfer_lambda_like(&x.lambda, d),
        lambda_hat: transfer_lambda_like(&x.lambda_hat, d),
    }
}

/// Exact residual of the extended two-exponent identity in dimension 3:
/// `(1/λ̂ − (2d−1)) − d²/(ω̂ − (2d−1))`, computed in the quadratic field of
/// the inputs.  Zero exactly when the pair lies on the transferred
/// identity curve.  Errors on the poles `λ̂ = 0` and `ω̂ = 2d−1`.
pub fn uniform_identity_residual(
    omega_hat: &Quad,
    lambda_hat: &Quad,
    d: usize,
) -> Result<Quad, ExtensionError> {
    let m = Quad::rational(BigRational::from_integer(BigInt::from(2 * d as i64 - 1)), 0);
    let inv_lam = <Quad as Scalar>::one()
        .div(lambda_hat)
        .map_err(|_| ExtensionError::Contract("λ̂ must be nonzero".into()))?;
    let den = omega_hat.sub(&m);
    let d2 = Quad::rational(BigRational::from_integer(BigInt::from((d * d) as i64)), 0);
    let rhs = d2
        .div(&den)
        .map_err(|_| ExtensionError::Contract("ω̂ sits on the pole 2d − 1".into()))?;
    Ok(inv_lam.sub(&m).sub(&rhs))
}

/// Float form of [`uniform_identity_residual`] for measured exponents.
pub fn uniform_identity_residual_f64(omega_hat: f64, lambda_hat: f64, d: usize) -> f64 {
    let m = 2.0 * d as f64 - 1.0;
    1.0 / lambda_hat - m - (d as f64) * (d as f64) / (omega_hat - m)
}

/// The extremal exponent pair attained by extending the golden-ratio
/// extremum from dimension 3: `ω̂ = d(γ²+1) − 1` and `λ̂ = 1/(dγ² − 1)`
/// where `γ` is the golden ratio, as exact elements of `ℚ(√5)`.
pub fn golden_extremal_exponents(d: usize) -> (Quad, Quad) {
    // γ² = (3 + √5)/2
    let g2 = Quad::new(
        BigRational::new(BigInt::from(3), BigInt::from(2)),
        BigRational::new(BigInt::one(), BigInt::from(2)),
        5,
    );
    let dd = Quad::rational(BigRational::from_integer(BigInt::from(d as i64)), 0);
    let one = <Quad as Scalar>::one();
    let omega_hat = dd.mul(&g2.add(&one)).sub(&one);
    let lambda_hat = one.div(&dd.mul(&g2).sub(&one)).expect("dγ² − 1 > 0");
    (omega_hat, lambda_hat)
}

// ---------------------------------------------------------------------------
// pullback comparability

/// Successive-minima lists of one slab-and-ball body over `K` and of its
/// pullback over ℚ, at one parameter value.
#[derive(Debug, Clone)]
pub struct PullbackRow {
    pub q: f64,
    /// Minima of the pullback body over ℤ^{dn} (`dn` entries).
    pub lambda_pullback: Vec<f64>,
    /// Minima of the body over `O_K^n` (`n` entries).
    pub lambda_field: Vec<f64>,
    /// `max_{i,j} |ln λ_{d(i−1)+j}(pullback) − ln λ_i(field)|`.
    pub deviation: f64,
}

/// Outcome of the pullback comparability check across a parameter ladder.
#[derive(Debug, Clone)]
pub struct PullbackReport {
    pub d: usize,
    pub ambient: usize,
    pub rows: Vec<PullbackRow>,
    pub sup_deviation: f64,
    /// Deviations on the later half of the ladder stay within 0.5 of the
    /// earlier half's sup.
    pub horizon_stable: bool,
    /// `λ_{d(i−1)+1} ≤ λ_{di}` holds along every row (sorted minima).
    pub ordered: bool,
}

impl PullbackReport {
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::json!({
            "d": self.d,
            "ambient": self.ambient,
            "sup_deviation": self.sup_deviation,
            "horizon_stable": self.horizon_stable,
            "ordered": self.ordered,
            "rows": self.rows.iter().map(|r| serde_json::json!({
                "q": r.q,
                "lambda_pullback": r.lambda_pullback,
                "lambda_field": r.lambda_field,
                "deviation": r.deviation,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Incremental row echelon over the rationals for exact independence tests.
struct RatEchelon {
    rows: Vec<Vec<BigRational>>,
}

impl RatEchelon {
    fn new() -> Self {
        RatEchelon { rows: Vec::new() }
    }
    fn try_add(&mut self, mut v: Vec<BigRational>) -> bool {
        for row in &self.rows {
            let lead = row.iter().position(|x| !Zero::is_zero(x)).unwrap();
            if !Zero::is_zero(&v[lead]) {
                let f = &v[lead] / &row[lead];
                for (vi, ri) in v.iter_mut().zip(row) {
                    *vi -= &f * ri;
                }
            }
        }
        if v.iter().all(Zero::is_zero) {
            return false;
        }
        self.rows.push(v);
        true
    }
}

/// Incremental row echelon over the field for exact `K`-independence.
struct FieldEchelon {
    rows: Vec<Vec<Quad>>,
}

impl FieldEchelon {
    fn new() -> Self {
        FieldEchelon { rows: Vec::new() }
    }
    fn try_add(&mut self, mut v: Vec<Quad>) -> bool {
        for row in &self.rows {
            let lead = row.iter().position(|x| !Scalar::is_zero(x)).unwrap();
            if !Scalar::is_zero(&v[lead]) {
                let f = v[lead].div(&row[lead]).expect("pivot is nonzero");
                for (vi, ri) in v.iter_mut().zip(row.iter()) {
                    *vi = vi.sub(&f.mul(ri));
                }
            }
        }
        if v.iter().all(Scalar::is_zero) {
            return false;
        }
        self.rows.push(v);
        true
    }
}

/// Compare the successive minima of the slab-and-ball body of `ξ` over `K`
/// at each ladder parameter `q` with those of its coordinate pullback over
/// ℚ.  The body constrains every archimedean embedding by 1 and the slab
/// `|y_w·ξ|/‖ξ‖ ≤ e^{−dq}` at the distinguished place; integrality covers
/// the finite places (`α` must be an integral basis, so the pullback
/// lattice is exactly ℤ^{dn}).  Both minima lists come from one certified
/// enumeration: the pullback side selects ℚ-independent coordinate
/// vectors, the field side `K`-independent images.
pub fn pullback_comparability_check(
    ext: &ScalarExtension,
    xi: &[XiValue],
    q_ladder: &[f64],
    budget: &EnumerationBudget,
) -> Result<PullbackReport, ExtensionError> {
    if q_ladder.is_empty() {
        return Err(ExtensionError::Contract("the parameter ladder is empty".into()));
    }
    if !ext.is_integral_basis()? {
        return Err(ExtensionError::Contract(
            "the pullback lattice is ℤ^{dn} only for an integral basis α".into(),
        ));
    }
    let target = ApproximationTarget::new(ext.field.clone(), ext.place.clone(), xi.to_vec())?;
    let n = target.dim();
    let d = ext.d();
    let conj_w = matches!(ext.place.kind, PlaceKind::Real { conjugate: true });
    let alpha_w: Vec<f64> = (0..d)
        .map(|j| ext.alpha_at_w(j).approx_f64().unwrap_or(f64::NAN))
        .collect();
    let alpha_wbar: Option<Vec<f64>> = (d == 2).then(|| {
        (0..d)
            .map(|j| ext.field.embed(&ext.alpha[j], !conj_w).approx_f64().unwrap_or(f64::NAN))
            .collect()
    });
    let xi_w = target.xi_floats();
    let xi_norm = target.ln_xi_norm()?.exp();

    let mut rows = Vec::with_capacity(q_ladder.len());
    for &q in q_ladder {
        rows.push(pullback_minima_at(
            ext,
            n,
            q,
            &alpha_w,
            alpha_wbar.as_deref(),
            &xi_w,
            xi_norm,
            budget,
        )?);
    }
    let sup_deviation = rows.iter().map(|r| r.deviation).fold(0.0f64, f64::max);
    let mid = rows.len().div_ceil(2);
    let early = rows[..mid].iter().map(|r| r.deviation).fold(0.0f64, f64::max);
    let late = rows[mid..].iter().map(|r| r.deviation).fold(0.0f64, f64::max);
    let horizon_stable = late <= early + 0.5;
    let ordered = rows.iter().all(|r| {
        (1..=n).all(|i| r.lambda_pullback[d * (i - 1)] <= r.lambda_pullback[d * i - 1] + 1e-12)
    });
    Ok(PullbackReport { d, ambient: n, rows, sup_deviation, horizon_stable, ordered })
}

/// One parameter value of the pullback check: adaptive box enumeration of
/// every lattice vector whose archimedean embeddings stay below the
/// current cap, greedy extraction of both minima lists, doubling the cap
/// until both lists are complete (every candidate beating an accepted
/// minimum lies inside the enumerated box, so the lists are certified).
#[allow(clippy::too_many_arguments)]
fn pullback_minima_at(
    ext: &ScalarExtension,
    n: usize,
    q: f64,
    alpha_w: &[f64],
    alpha_wbar: Option<&[f64]>,
    xi_w: &[f64],
    xi_norm: f64,
    budget: &EnumerationBudget,
) -> Result<PullbackRow, ExtensionError> {
    let d = ext.d();
    let dn = d * n;
    let slab_scale = ((d as f64) * q).exp();
    // the dn minima multiply to ≍ e^{dq}, so they cluster near e^{dq/dn};
    // start a little above that and grow gently until both lists close
    let mut cap = (0.75 * q).exp().max(2.0);
    let cap_limit = budget.max_height_log.exp();

    loop {
        // integer candidates of one component's embedding box (the box is
        // the same for every component)
        let comp = component_box(alpha_w, alpha_wbar, cap);
        let total = (comp.len() as f64).powi(n as i32);
        if total > budget.max_candidates as f64 {
            return Err(ExtensionError::Budget(format!(
                "{total:.3e} box points at cap {cap:.3e} exceed the candidate budget"
            )));
        }

        // walk the product of component boxes, keeping only vectors whose
        // full gauge (embeddings and slab) clears the cap
        let mut cands: Vec<(f64, Vec<i64>)> = Vec::new();
        let mut idx = vec![0usize; n];
        'outer: loop {
            let mut arch = 0.0f64;
            let mut dot = 0.0f64;
            for c in 0..n {
                let (_, yw, ybar) = &comp[idx[c]];
                arch = arch.max(yw.abs()).max(ybar.abs());
                dot += yw * xi_w[c];
            }
            let gauge = arch.max(slab_scale * dot.abs() / xi_norm);
            if gauge <= cap * (1.0 + 1e-12) {
                let mut coords = Vec::with_capacity(dn);
                let mut all_zero = true;
                for c in 0..n {
                    for &v in &comp[idx[c]].0 {
                        if v != 0 {
                            all_zero = false;
                        }
                        coords.push(v);
                    }
                }
                if !all_zero {
                    cands.push((gauge, reorder_block_major(&coords, n, d)));
                }
            }
            // odometer over the component indices
            for c in 0..n {
                idx[c] += 1;
                if idx[c] < comp.len() {
                    continue 'outer;
                }
                idx[c] = 0;
            }
            break;
        }
        cands.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

        // greedy extraction of both minima lists
        let mut rat = RatEchelon::new();
        let mut fld = FieldEchelon::new();
        let mut lam_q: Vec<f64> = Vec::with_capacity(dn);
        let mut lam_k: Vec<f64> = Vec::with_capacity(n);
        for (gauge, x) in &cands {
            if lam_q.len() == dn && lam_k.len() == n {
                break;
            }
            let xr: Vec<BigRational> =
                x.iter().map(|&v| BigRational::from_integer(BigInt::from(v))).collect();
            if lam_q.len() < dn && rat.try_add(xr.clone()) {
                lam_q.push(*gauge);
            }
            if lam_k.len() < n {
                let y = ext.t_apply(&xr)?;
                if fld.try_add(y) {
                    lam_k.push(*gauge);
                }
            }
        }
        if lam_q.len() == dn && lam_k.len() == n {
            let deviation = (1..=n)
                .flat_map(|i| (1..=d).map(move |j| (i, j)))
                .map(|(i, j)| (lam_q[d * (i - 1) + j - 1].ln() - lam_k[i - 1].ln()).abs())
                .fold(0.0f64, f64::max);
            return Ok(PullbackRow {
                q,
                lambda_pullback: lam_q,
                lambda_field: lam_k,
                deviation,
            });
        }
        cap *= 1.5;
        if cap > cap_limit {
            return Err(ExtensionError::Budget(format!(
                "embedding cap exceeded e^{} before both minima lists completed",
                budget.max_height_log
            )));
        }
    }
}

/// Integer points of one component's embedding box: tuples `x ∈ ℤ^d` with
/// `|Σ_j α_j(w)·x_j| ≤ cap` at each real embedding, together with the two
/// embedding values.
fn component_box(
    alpha_w: &[f64],
    alpha_wbar: Option<&[f64]>,
    cap: f64,
) -> Vec<(Vec<i64>, f64, f64)> {
    let d = alpha_w.len();
    match d {
        1 => {
            let a = alpha_w[0];
            let bound = (cap / a.abs()).floor() as i64;
            (-bound..=bound)
                .map(|x| (vec![x], a * x as f64, a * x as f64))
                .collect()
        }
        2 => {
            let (a1, a2) = (alpha_w[0], alpha_w[1]);
            let ab = alpha_wbar.expect("degree-2 extensions carry both embeddings");
            let (b1, b2) = (ab[0], ab[1]);
            let det = a1 * b2 - a2 * b1;
            // |x₂| ≤ (|b₁| + |a₁|)·cap / |det| from the inverse matrix row
            let x2_bound = ((b1.abs() + a1.abs()) * cap / det.abs() + 1e-9).floor() as i64;
            let mut list = Vec::new();
            for x2 in -x2_bound..=x2_bound {
                // cap bands in both embeddings pin x₁ to an interval
                let (lo1, hi1) = band(a1, a2 * x2 as f64, cap);
                let (lo2, hi2) = band(b1, b2 * x2 as f64, cap);
                let lo = lo1.max(lo2).ceil() as i64;
                let hi = hi1.min(hi2).floor() as i64;
                for x1 in lo..=hi {
                    let yw = a1 * x1 as f64 + a2 * x2 as f64;
                    let ybar = b1 * x1 as f64 + b2 * x2 as f64;
                    if yw.abs() <= cap * (1.0 + 1e-12) && ybar.abs() <= cap * (1.0 + 1e-12) {
                        list.push((vec![x1, x2], yw, ybar));
                    }
                }
            }
            list
        }
        _ => unreachable!("degrees are 1 or 2"),
    }
}

/// Solutions of `|a·x + t| ≤ cap` as a real interval for `x`.
fn band(a: f64, t: f64, cap: f64) -> (f64, f64) {
    let lo = (-cap - t) / a;
    let hi = (cap - t) / a;
    if lo <= hi {
        (lo - 1e-9, hi + 1e-9)
    } else {
        (hi - 1e-9, lo + 1e-9)
    }
}

/// Reorder per-component tuples `(x_{1,c}, …, x_{d,c})_c` into the
/// block-major layout `(x_1 | … | x_d)` the `T`-matrix uses.
fn reorder_block_major(coords: &[i64], n: usize, d: usize) -> Vec<i64> {
    let mut out = vec![0i64; n * d];
    for c in 0..n {
        for j in 0..d {
            out[j * n + c] = coords[c * d + j];
        }
    }
    out
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minima::q_grid;
    use crate::numberfield::parse_xi_expr;

    fn rq(n: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(n))
    }

    fn xi(parts: &[&str]) -> Vec<XiValue> {
        parts.iter().map(|p| parse_xi_expr(p).unwrap()).collect()
    }

    #[test]
    fn extending_a_point_orders_blocks() {
        let ext = ScalarExtension::real_quadratic(2).unwrap();
        assert_eq!(ext.d(), 2);
        let point = xi(&["1", "2^(1/4)"]);
        let big = ext.extend_point(&point).unwrap();
        let theta = 2f64.powf(0.25);
        let expect = [1.0, theta, 2f64.sqrt(), 2f64.sqrt() * theta];
        assert_eq!(big.len(), 4);
        for (v, e) in big.iter().zip(expect) {
            assert!((v.value - e).abs() < 1e-12, "{} vs {e}", v.value);
        }
        // exactness is preserved where the product stays quadratic
        assert!(big[0].quad.is_some());
        assert!(big[1].quad.is_none());
        assert!(big[2].quad.is_some());
        assert!(big[3].quad.is_none());
    }

    #[test]
    fn extending_over_the_rationals_is_identity() {
        let ext = ScalarExtension::rational();
        let point = xi(&["1", "(1+sqrt(5))/2"]);
        let same = ext.extend_point(&point).unwrap();
        assert_eq!(same.len(), 2);
        for (a, b) in same.iter().zip(&point) {
            assert_eq!(a.value, b.value);
            assert_eq!(a.quad.as_ref().unwrap(), b.quad.as_ref().unwrap());
        }
    }

    #[test]
    fn extension_multiplies_norms() {
        let ext = ScalarExtension::real_quadratic(2).unwrap();
        let point = xi(&["1", "2^(1/4)"]);
        let big = ext.extend_point(&point).unwrap();
        let norm = |vs: &[f64]| vs.iter().map(|v| v * v).sum::<f64>().sqrt();
        let xi_n = norm(&point.iter().map(|v| v.value).collect::<Vec<_>>());
        let alpha_n = norm(&[1.0, 2f64.sqrt()]);
        let big_n = norm(&big.iter().map(|v| v.value).collect::<Vec<_>>());
        assert!((big_n - alpha_n * xi_n).abs() < 1e-12);
    }

    #[test]
    fn t_maps_are_mutually_inverse() {
        let ext = ScalarExtension::real_quadratic(2).unwrap();
        let x: Vec<BigRational> = [1, -2, 3, 5].iter().map(|&v| rq(v)).collect();
        let y = ext.t_apply(&x).unwrap();
        // componentwise: y_c = x_{1,c} + √2·x_{2,c}
        assert_eq!(y[0], Quad::from_parts(1, 3, 2));
        assert_eq!(y[1], Quad::from_parts(-2, 5, 2));
        let back = ext.t_invert(&y).unwrap();
        assert_eq!(back, x);
        // the coordinate matrix agrees with the componentwise map
        let m = ext.t_matrix(2);
        for (r, row) in m.iter().enumerate() {
            let s: BigRational = row.iter().zip(&x).map(|(a, b)| a * b).sum();
            let (u, v) = ext.field.omega_coords(&y[r % 2]).unwrap();
            assert_eq!(s, if r < 2 { u } else { v });
        }
    }

    #[test]
    fn integral_basis_spans_the_integer_image() {
        let ext = ScalarExtension::real_quadratic(2).unwrap();
        assert!(ext.is_integral_basis().unwrap());
        assert_eq!(ext.lattice_index(2), rq(1));
        // oracle: the full 4×4 coordinate matrix has determinant ±1
        let det4 = det_rat(&ext.t_matrix(2));
        assert_eq!(det4.abs(), rq(1));

        // a rational but non-integral basis: index shrinks by |det|ⁿ
        let field = FieldContext::quadratic(2).unwrap();
        let half_root = Quad::new(rzero(), BigRational::new(BigInt::from(1), BigInt::from(2)), 2);
        let ext2 = ScalarExtension::with_basis(field.clone(), vec![<Quad as Scalar>::one(), half_root]).unwrap();
        assert!(!ext2.is_integral_basis().unwrap());
        assert_eq!(ext2.lattice_index(2), BigRational::new(BigInt::from(1), BigInt::from(4)));

        // dependent elements are rejected
        let err = ScalarExtension::with_basis(field, vec![<Quad as Scalar>::one(), Quad::from_parts(2, 0, 2)]);
        assert!(matches!(err, Err(ExtensionError::Contract(_))));
    }

    #[test]
    fn inner_products_commute_with_the_map() {
        // x·Ξ = T(x)·ξ exactly, coordinate identity of the two pairings
        let ext = ScalarExtension::real_quadratic(2).unwrap();
        let point = vec![
            XiValue::from_quad(Quad::from_parts(1, 0, 2)),
            XiValue::from_quad(Quad::from_parts(1, 1, 2)),
        ];
        let big = ext.extend_point(&point).unwrap();
        let x: Vec<BigRational> = [2, -1, 1, 3].iter().map(|&v| rq(v)).collect();
        let lhs = x
            .iter()
            .zip(&big)
            .fold(<Quad as Scalar>::zero(), |acc, (c, v)| {
                acc.add(&v.quad.as_ref().unwrap().mul(&Quad::rational(c.clone(), 0)))
            });
        let y = ext.t_apply(&x).unwrap();
        let rhs = y
            .iter()
            .zip(&point)
            .fold(<Quad as Scalar>::zero(), |acc, (yc, v)| {
                acc.add(&yc.mul(v.quad.as_ref().unwrap()))
            });
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn exponent_transfer_formulas() {
        let q = ExponentQuartet {
            omega: ExtendedRational::from_int(1),
            omega_hat: ExtendedRational::from_int(1),
            lambda: ExtendedRational::from_int(1),
            lambda_hat: ExtendedRational::from_int(1),
        };
        let t = exponent_transfer(&q, 2);
        assert_eq!(t.omega_hat, ExtendedRational::from_int(3));
        assert_eq!(t.lambda_hat, ExtendedRational::Finite(BigRational::new(BigInt::one(), BigInt::from(3))));
        // degree one is the identity
        assert_eq!(exponent_transfer(&q, 1), q);
        // infinities follow the limit conventions
        let inf = ExponentQuartet {
            omega: ExtendedRational::Infinite,
            omega_hat: ExtendedRational::Infinite,
            lambda: ExtendedRational::Infinite,
            lambda_hat: ExtendedRational::Infinite,
        };
        let ti = exponent_transfer(&inf, 2);
        assert_eq!(ti.omega, ExtendedRational::Infinite);
        assert_eq!(ti.lambda, ExtendedRational::Finite(rq(1)));
        assert_eq!(exponent_transfer(&inf, 1).lambda, ExtendedRational::Infinite);
    }

    #[test]
    fn identity_residual_vanishes_on_transferred_pairs() {
        // the classical dimension-3 pair ω̂ = 2, λ̂ = 1/2 …
        let om = Quad::rational(rq(2), 0);
        let lam = Quad::rational(BigRational::new(BigInt::one(), BigInt::from(2)), 0);
        let r1 = uniform_identity_residual(&om, &lam, 1).unwrap();
        assert!(Scalar::is_zero(&r1));
        // … transfers to ω̂ = 5, λ̂ = 1/5 at degree 2, still on the curve
        let om2 = Quad::rational(rq(5), 0);
        let lam2 = Quad::rational(BigRational::new(BigInt::one(), BigInt::from(5)), 0);
        let r2 = uniform_identity_residual(&om2, &lam2, 2).unwrap();
        assert!(Scalar::is_zero(&r2));
        // matching the rational transfer arithmetic
        let base = ExponentQuartet {
            omega: ExtendedRational::from_int(2),
            omega_hat: ExtendedRational::from_int(2),
            lambda: ExtendedRational::Finite(BigRational::new(BigInt::one(), BigInt::from(2))),
            lambda_hat: ExtendedRational::Finite(BigRational::new(BigInt::one(), BigInt::from(2))),
        };
        let t = exponent_transfer(&base, 2);
        assert_eq!(t.omega_hat, ExtendedRational::from_int(5));
        assert_eq!(t.lambda_hat, ExtendedRational::Finite(BigRational::new(BigInt::one(), BigInt::from(5))));
    }

    #[test]
    fn golden_extremal_pairs_sit_on_the_curve() {
        // degree 1 recovers the golden-ratio extremum (γ², 1/γ)
        let (om1, lam1) = golden_extremal_exponents(1);
        let g2 = Quad::new(
            BigRational::new(BigInt::from(3), BigInt::from(2)),
            BigRational::new(BigInt::one(), BigInt::from(2)),
            5,
        );
        assert_eq!(om1, g2);
        // 1/γ = γ − 1 = (−1 + √5)/2
        let inv_gamma = Quad::new(
            BigRational::new(BigInt::from(-1), BigInt::from(2)),
            BigRational::new(BigInt::one(), BigInt::from(2)),
            5,
        );
        assert_eq!(lam1, inv_gamma);
        for d in 1..=3usize {
            let (om, lam) = golden_extremal_exponents(d);
            let r = uniform_identity_residual(&om, &lam, d).unwrap();
            assert!(Scalar::is_zero(&r), "exact residual at degree {d}");
            let rf = uniform_identity_residual_f64(
                om.approx_f64().unwrap(),
                lam.approx_f64().unwrap(),
                d,
            );
            assert!(rf.abs() < 1e-12, "float residual {rf} at degree {d}");
        }
    }

    #[test]
    fn transfer_over_the_rationals_is_exactly_zero() {
        let ext = ScalarExtension::rational();
        let point = xi(&["1", "(1+sqrt(5))/2"]);
        let grid = q_grid(0.0, 4.0, 0.5);
        let report =
            verify_profile_transfer(&ext, &point, &grid, &EnumerationBudget::default()).unwrap();
        assert_eq!(report.d, 1);
        assert_eq!(report.sup_gap, 0.0);
        assert_eq!(report.sup_gap_dual, 0.0);
        assert!(report.horizon_stable);
    }

    #[test]
    fn transfer_tracks_over_a_real_quadratic_field() {
        let ext = ScalarExtension::real_quadratic(2).unwrap();
        let point = xi(&["1", "2^(1/4)"]);
        let grid = q_grid(0.0, 2.5, 0.5);
        let report =
            verify_profile_transfer(&ext, &point, &grid, &EnumerationBudget::default()).unwrap();
        assert!(report.exact);
        assert!(report.sup_gap.is_finite() && report.sup_gap < 10.0, "gap {}", report.sup_gap);
        assert!(
            report.sup_gap_dual.is_finite() && report.sup_gap_dual < 10.0,
            "dual gap {}",
            report.sup_gap_dual
        );
    }

    #[test]
    fn pullback_of_the_unit_ball_over_sqrt_two() {
        let ext = ScalarExtension::real_quadratic(2).unwrap();
        let point = xi(&["1"]);
        let report =
            pullback_comparability_check(&ext, &point, &[0.0], &EnumerationBudget::default())
                .unwrap();
        let row = &report.rows[0];
        // field side: 1 ∈ O_K realizes the first minimum of the unit ball
        assert_eq!(row.lambda_field.len(), 1);
        assert!((row.lambda_field[0] - 1.0).abs() < 1e-9);
        // pullback side: (1, 0) then (0, 1) with embeddings (±√2)
        assert_eq!(row.lambda_pullback.len(), 2);
        assert!((row.lambda_pullback[0] - 1.0).abs() < 1e-9);
        assert!((row.lambda_pullback[1] - 2f64.sqrt()).abs() < 1e-9);
        assert!((row.deviation - 2f64.sqrt().ln()).abs() < 1e-9);
        assert!(report.ordered);
    }

    #[test]
    fn degenerate_pullback_lists_coincide() {
        let ext = ScalarExtension::rational();
        let point = xi(&["1", "(1+sqrt(5))/2"]);
        let report =
            pullback_comparability_check(&ext, &point, &[0.0, 2.0], &EnumerationBudget::default())
                .unwrap();
        for row in &report.rows {
            assert_eq!(row.lambda_pullback, row.lambda_field);
            assert_eq!(row.deviation, 0.0);
        }
        assert_eq!(report.sup_deviation, 0.0);
    }

    #[test]
    fn pullback_stays_comparable_in_two_dimensions() {
        let ext = ScalarExtension::real_quadratic(2).unwrap();
        let point = xi(&["1", "2^(1/4)"]);
        let report =
            pullback_comparability_check(&ext, &point, &[0.0, 1.0], &EnumerationBudget::default())
                .unwrap();
        assert!(report.ordered);
        assert!(report.sup_deviation.is_finite());
        for row in &report.rows {
            assert_eq!(row.lambda_pullback.len(), 4);
            assert_eq!(row.lambda_field.len(), 2);
        }
    }

    #[test]
    fn block_transposition_leaves_values_invariant() {
        // for ξ = (1, ξ₀, ξ₀²) the extended coordinates grouped by basis
        // element are a permutation of those grouped by power; minima
        // functionals see the same values either way
        let ext = ScalarExtension::real_quadratic(2).unwrap();
        let xi0 = Quad::from_parts(1, 1, 2); // 1 + √2
        let point = vec![
            XiValue::from_quad(<Quad as Scalar>::one()),
            XiValue::from_quad(xi0.clone()),
            XiValue::from_quad(xi0.mul(&xi0)),
        ];
        let big = ext.extend_point(&point).unwrap();
        let (n, d) = (3usize, 2usize);
        // transpose m = (j−1)n + i  ↦  (i−1)d + j
        let perm: Vec<usize> = (0..n * d)
            .map(|m| {
                let (j, i) = (m / n, m % n);
                i * d + j
            })
            .collect();
        let mut transposed = vec![big[0].clone(); n * d];
        for (m, &p) in perm.iter().enumerate() {
            transposed[p] = big[m].clone();
        }
        let field = FieldContext::rational();
        let place = field.archimedean_places()[0].clone();
        let t1 = ApproximationTarget::new(field.clone(), place.clone(), big).unwrap();
        let t2 = ApproximationTarget::new(field, place, transposed).unwrap();
        let cands: Vec<Vec<BigRational>> = vec![
            [1, 0, 0, 0, 0, 0].iter().map(|&v| rq(v)).collect(),
            [1, -1, 2, 0, 3, 1].iter().map(|&v| rq(v)).collect(),
            [0, 2, -1, 1, 0, -2].iter().map(|&v| rq(v)).collect(),
        ];
        for x in &cands {
            let mut px = vec![rzero(); x.len()];
            for (m, &p) in perm.iter().enumerate() {
                px[p] = x[m].clone();
            }
            for q in [0.5, 1.5, 3.0] {
                let a = minima::l_value(&t1, &ProfileForm::Grade(1), x, q).unwrap();
                let b = minima::l_value(&t2, &ProfileForm::Grade(1), &px, q).unwrap();
                assert!((a - b).abs() < 1e-12, "{a} vs {b} at q = {q}");
            }
        }
    }

    #[test]
    fn extended_rational_round_trips() {
        assert_eq!(ExtendedRational::parse("inf").unwrap(), ExtendedRational::Infinite);
        let r = ExtendedRational::parse("3/4").unwrap();
        assert_eq!(r, ExtendedRational::Finite(BigRational::new(BigInt::from(3), BigInt::from(4))));
        assert_eq!(format!("{r}"), "3/4");
        assert_eq!(format!("{}", ExtendedRational::Infinite), "inf");
        assert!(ExtendedRational::parse("x").is_err());
    }
}
