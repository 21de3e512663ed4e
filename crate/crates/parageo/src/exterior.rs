//! Exterior algebra with norms and projective distances at one place.
//!
//! Grade-`k` elements of ⋀ᵏ(Kⁿ) are stored as coordinate vectors over the
//! lexicographically ordered `k`-element subsets of `{1, …, n}` (so for
//! `n = 3` the grade-2 basis order is `e₁∧e₂, e₁∧e₃, e₂∧e₃`).  All operations
//! are generic over the coefficient kind, so the same code runs exactly over
//! the rationals and approximately over floats.
//!
//! The metric at a place enters through [`PlaceMetric`]: the Euclidean /
//! Hermitian norm at an archimedean place, the max of `p`-adic absolute
//! values at a finite one.  Projective distances, orthogonal complements and
//! the almost-orthogonality test are built on top of wedge norms.

use crate::scalar::{Magnitude, Scalar, ScalarError, Valuation};
use num_rational::BigRational;
use num_traits::One;
use std::cmp::Ordering;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExteriorError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("zero vector where a nonzero one is required")]
    ZeroVector,
    #[error("rank-deficient input")]
    RankDeficient,
    #[error(transparent)]
    Scalar(#[from] ScalarError),
}

/// The local metric attached to a place.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaceMetric {
    Archimedean,
    NonArchimedean { p: u64 },
}

impl PlaceMetric {
    /// The defect constant: 1 at archimedean places, 0 at finite ones.
    /// Triangle-type bounds degrade by factors of `2^delta`.
    pub fn delta(&self) -> u32 {
        match self {
            PlaceMetric::Archimedean => 1,
            PlaceMetric::NonArchimedean { .. } => 0,
        }
    }
}

// ---------------------------------------------------------------------------
// subset combinatorics

/// Binomial coefficient, asserting the result fits a `usize`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    usize::try_from(acc).expect("binomial overflows usize")
}

/// All `k`-element subsets of `{1, …, n}` in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(binomial(n, k));
    let mut cur = Vec::with_capacity(k);
    fn rec(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        let remaining = k - cur.len();
        for v in start..=(n + 1 - remaining) {
            cur.push(v);
            rec(n, k, v + 1, cur, out);
            cur.pop();
        }
    }
    rec(n, k, 1, &mut cur, &mut out);
    out
}

/// Rank of a sorted subset in the lexicographic order of `k_subsets(n, k)`.
pub fn subset_rank(subset: &[usize], n: usize) -> usize {
    let k = subset.len();
    let mut rank = 0;
    let mut prev = 0;
    for (i, &a) in subset.iter().enumerate() {
        for v in prev + 1..a {
            rank += binomial(n - v, k - i - 1);
        }
        prev = a;
    }
    rank
}

/// Parity sign of merging two disjoint sorted index sets:
/// (−1)^{#{(a, b) ∈ I×J : a > b}}.
fn merge_sign(i: &[usize], j: &[usize]) -> i8 {
    let mut inversions = 0usize;
    for &a in i {
        for &b in j {
            if a > b {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

// ---------------------------------------------------------------------------
// graded vectors

/// An element of ⋀ᵏ(Kⁿ) in lexicographic subset coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedVector<S: Scalar> {
    n: usize,
    k: usize,
    coords: Vec<S>,
}

impl<S: Scalar> GradedVector<S> {
    pub fn new(n: usize, k: usize, coords: Vec<S>) -> Result<Self, ExteriorError> {
        if k > n {
            return Err(ExteriorError::Shape(format!("grade {k} exceeds dimension {n}")));
        }
        let want = binomial(n, k);
        if coords.len() != want {
            return Err(ExteriorError::Shape(format!(
                "grade-{k} element in dimension {n} needs {want} coordinates, got {}",
                coords.len()
            )));
        }
        Ok(GradedVector { n, k, coords })
    }

    /// A grade-1 vector.
    pub fn vector(coords: Vec<S>) -> Self {
        let n = coords.len();
        GradedVector { n, k: 1, coords }
    }

    /// The basis blade `e_{i₁} ∧ … ∧ e_{i_k}` for sorted 1-based indices.
    pub fn basis_blade(n: usize, indices: &[usize]) -> Result<Self, ExteriorError> {
        if indices.windows(2).any(|w| w[0] >= w[1])
            || indices.iter().any(|&i| i == 0 || i > n)
        {
            return Err(ExteriorError::Shape(format!(
                "blade indices must be sorted, distinct, in 1..={n}: {indices:?}"
            )));
        }
        let mut coords = vec![S::zero(); binomial(n, indices.len())];
        coords[subset_rank(indices, n)] = S::one();
        Ok(GradedVector { n, k: indices.len(), coords })
    }

    pub fn zero(n: usize, k: usize) -> Self {
        GradedVector { n, k, coords: vec![S::zero(); binomial(n, k)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn grade(&self) -> usize {
        self.k
    }
    pub fn coords(&self) -> &[S] {
        &self.coords
    }
    pub fn into_coords(self) -> Vec<S> {
        self.coords
    }
    pub fn coord(&self, subset: &[usize]) -> &S {
        &self.coords[subset_rank(subset, self.n)]
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    fn check_same_shape(&self, rhs: &Self) -> Result<(), ExteriorError> {
        if self.n != rhs.n || self.k != rhs.k {
            return Err(ExteriorError::Shape(format!(
                "(n={}, k={}) vs (n={}, k={})",
                self.n, self.k, rhs.n, rhs.k
            )));
        }
        Ok(())
    }

    pub fn add(&self, rhs: &Self) -> Result<Self, ExteriorError> {
        self.check_same_shape(rhs)?;
        let coords = self
            .coords
            .iter()
            .zip(&rhs.coords)
            .map(|(a, b)| a.add(b))
            .collect();
        Ok(GradedVector { n: self.n, k: self.k, coords })
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self, ExteriorError> {
        self.check_same_shape(rhs)?;
        let coords = self
            .coords
            .iter()
            .zip(&rhs.coords)
            .map(|(a, b)| a.sub(b))
            .collect();
        Ok(GradedVector { n: self.n, k: self.k, coords })
    }

    pub fn scale(&self, c: &S) -> Self {
        GradedVector {
            n: self.n,
            k: self.k,
            coords: self.coords.iter().map(|x| x.mul(c)).collect(),
        }
    }

    pub fn negate(&self) -> Self {
        GradedVector {
            n: self.n,
            k: self.k,
            coords: self.coords.iter().map(|x| x.neg()).collect(),
        }
    }

    /// Exterior product.  Result grade is the sum of the grades.
    pub fn wedge(&self, rhs: &Self) -> Result<Self, ExteriorError> {
        if self.n != rhs.n {
            return Err(ExteriorError::Shape(format!(
                "wedge of elements in dimensions {} and {}",
                self.n, rhs.n
            )));
        }
        let (j, k, n) = (self.k, rhs.k, self.n);
        if j + k > n {
            return Err(ExteriorError::Shape(format!(
                "wedge grade {j}+{k} exceeds dimension {n}"
            )));
        }
        let mut out = vec![S::zero(); binomial(n, j + k)];
        let left = k_subsets(n, j);
        let right = k_subsets(n, k);
        let mut merged = Vec::with_capacity(j + k);
        for (ri, i_set) in left.iter().enumerate() {
            if self.coords[ri].is_zero() {
                continue;
            }
            'outer: for (rj, j_set) in right.iter().enumerate() {
                if rhs.coords[rj].is_zero() {
                    continue;
                }
                // disjointness + merge
                merged.clear();
                let (mut a, mut b) = (0, 0);
                while a < i_set.len() || b < j_set.len() {
                    match (i_set.get(a), j_set.get(b)) {
                        (Some(&x), Some(&y)) if x == y => continue 'outer,
                        (Some(&x), Some(&y)) if x < y => {
                            merged.push(x);
                            a += 1;
                        }
                        (Some(_), Some(&y)) => {
                            merged.push(y);
                            b += 1;
                        }
                        (Some(&x), None) => {
                            merged.push(x);
                            a += 1;
                        }
                        (None, Some(&y)) => {
                            merged.push(y);
                            b += 1;
                        }
                        (None, None) => unreachable!(),
                    }
                }
                let sign = merge_sign(i_set, j_set);
                let term = self.coords[ri].mul(&rhs.coords[rj]);
                let term = if sign < 0 { term.neg() } else { term };
                let slot = subset_rank(&merged, n);
                out[slot] = out[slot].add(&term);
            }
        }
        Ok(GradedVector { n, k: j + k, coords: out })
    }

    /// Interior product `y ⌟ X` of a grade-1 vector against this element;
    /// lowers the grade by one.  For grade-2 this is
    /// `y ⌟ (a∧b) = (y·a)b − (y·b)a`.
    pub fn contract(&self, y: &Self) -> Result<Self, ExteriorError> {
        if y.k != 1 || y.n != self.n {
            return Err(ExteriorError::Shape(format!(
                "contraction needs a grade-1 vector in dimension {}, got grade {} in dimension {}",
                self.n, y.k, y.n
            )));
        }
        if self.k == 0 {
            return Err(ExteriorError::Shape("cannot contract a scalar".into()));
        }
        let n = self.n;
        let mut out = vec![S::zero(); binomial(n, self.k - 1)];
        let lower = k_subsets(n, self.k - 1);
        let mut with_i = Vec::with_capacity(self.k);
        for (rj, j_set) in lower.iter().enumerate() {
            let mut acc = Vec::new();
            for i in 1..=n {
                if j_set.binary_search(&i).is_ok() {
                    continue;
                }
                if y.coords[i - 1].is_zero() {
                    continue;
                }
                with_i.clear();
                with_i.extend_from_slice(j_set);
                let pos = with_i.partition_point(|&x| x < i);
                with_i.insert(pos, i);
                let c = &self.coords[subset_rank(&with_i, n)];
                if c.is_zero() {
                    continue;
                }
                let term = y.coords[i - 1].mul(c);
                // sign (−1)^{position of i in J ∪ {i}}, zero-based
                acc.push(if pos % 2 == 1 { term.neg() } else { term });
            }
            out[rj] = S::stable_sum(acc);
        }
        Ok(GradedVector { n, k: self.k - 1, coords: out })
    }

    /// Hodge-style duality ⋀ᵏ → ⋀ⁿ⁻ᵏ: on basis blades,
    /// `e_I ↦ ε(I) e_{I^c}` with `ε(I) = (−1)^{Σ_t (I[t] − t)}`, so that
    /// `X ∧ hodge(X) = (X·X) e_{1…n}`.
    pub fn hodge(&self) -> Self {
        let n = self.n;
        let mut out = vec![S::zero(); binomial(n, n - self.k)];
        for (ri, i_set) in k_subsets(n, self.k).iter().enumerate() {
            if self.coords[ri].is_zero() {
                continue;
            }
            let mut parity = 0usize;
            for (t, &a) in i_set.iter().enumerate() {
                parity += a - (t + 1);
            }
            let comp: Vec<usize> = (1..=n).filter(|v| i_set.binary_search(v).is_err()).collect();
            let val = if parity % 2 == 1 {
                self.coords[ri].neg()
            } else {
                self.coords[ri].clone()
            };
            out[subset_rank(&comp, n)] = val;
        }
        GradedVector { n, k: n - self.k, coords: out }
    }

    /// Coordinatewise inner product of two same-shape elements.
    pub fn dot(&self, rhs: &Self) -> Result<S, ExteriorError> {
        self.check_same_shape(rhs)?;
        let terms: Vec<S> = self
            .coords
            .iter()
            .zip(&rhs.coords)
            .filter(|(a, b)| !a.is_zero() && !b.is_zero())
            .map(|(a, b)| a.mul(b))
            .collect();
        Ok(S::stable_sum(terms))
    }

    /// Norm at a place: the Euclidean norm of the coordinate vector at an
    /// archimedean place, the max of `p`-adic absolute values at a finite
    /// one.  Exact for exact coefficient kinds.
    pub fn norm_at(&self, metric: PlaceMetric) -> Result<Magnitude<S>, ExteriorError> {
        match metric {
            PlaceMetric::Archimedean => {
                let squares: Result<Vec<S>, ScalarError> = self
                    .coords
                    .iter()
                    .filter(|c| !c.is_zero())
                    .map(|c| c.abs_sq())
                    .collect();
                Ok(Magnitude::Sqrt(S::stable_sum(squares?)))
            }
            PlaceMetric::NonArchimedean { p } => {
                let mut best: Option<BigRational> = None;
                for c in &self.coords {
                    match c.valuation(p)? {
                        Valuation::Infinity => {}
                        Valuation::Finite(v) => {
                            best = Some(match best {
                                None => v,
                                Some(b) => b.min(v),
                            });
                        }
                    }
                }
                Ok(Magnitude::ppow(
                    p,
                    match best {
                        Some(v) => Valuation::Finite(v),
                        None => Valuation::Infinity,
                    },
                ))
            }
        }
    }

    /// Reinterpret the coordinate list as a grade-1 vector in dimension
    /// `C(n, k)` (used to wedge Plücker coordinate vectors as plain vectors).
    pub fn flatten(&self) -> GradedVector<S> {
        GradedVector {
            n: self.coords.len(),
            k: 1,
            coords: self.coords.clone(),
        }
    }
}

/// Wedge a sequence of elements left to right.
pub fn wedge_all<S: Scalar>(parts: &[GradedVector<S>]) -> Result<GradedVector<S>, ExteriorError> {
    let mut iter = parts.iter();
    let first = iter.next().ok_or_else(|| ExteriorError::Shape("empty wedge".into()))?;
    let mut acc = first.clone();
    for p in iter {
        acc = acc.wedge(p)?;
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// projective distances

/// Projective distance `‖x ∧ y‖ / (‖x‖·‖y‖)` between the lines (or, for
/// higher grades, the flattened coordinate directions) spanned by `x` and
/// `y`.  Errors on zero input.
pub fn dist<S: Scalar>(
    x: &GradedVector<S>,
    y: &GradedVector<S>,
    metric: PlaceMetric,
) -> Result<Magnitude<S>, ExteriorError> {
    if x.dim() != y.dim() || x.grade() != y.grade() {
        return Err(ExteriorError::Shape(format!(
            "dist between (n={}, k={}) and (n={}, k={})",
            x.dim(),
            x.grade(),
            y.dim(),
            y.grade()
        )));
    }
    if x.is_zero() || y.is_zero() {
        return Err(ExteriorError::ZeroVector);
    }
    let (fx, fy) = (x.flatten(), y.flatten());
    let w = fx.wedge(&fy)?;
    let num = w.norm_at(metric)?;
    let den = fx.norm_at(metric)?.mul(&fy.norm_at(metric)?)?;
    Ok(num.div(&den)?)
}

/// Distance from the line of `x` to the subspace spanned by `basis`:
/// `‖x ∧ (b₁∧…∧b_m)‖ / (‖x‖·‖b₁∧…∧b_m‖)`.  Errors when the basis is
/// dependent or `x` is zero.
pub fn dist_point_subspace<S: Scalar>(
    x: &GradedVector<S>,
    basis: &[GradedVector<S>],
    metric: PlaceMetric,
) -> Result<Magnitude<S>, ExteriorError> {
    if x.is_zero() {
        return Err(ExteriorError::ZeroVector);
    }
    let span = wedge_all(basis)?;
    if span.is_zero() {
        return Err(ExteriorError::RankDeficient);
    }
    let num = x.wedge(&span)?.norm_at(metric)?;
    let den = x.norm_at(metric)?.mul(&span.norm_at(metric)?)?;
    Ok(num.div(&den)?)
}

/// Distance between two subspaces of equal dimension, computed on their
/// Plücker coordinate vectors wedged as plain vectors.
pub fn dist_subspaces<S: Scalar>(
    basis1: &[GradedVector<S>],
    basis2: &[GradedVector<S>],
    metric: PlaceMetric,
) -> Result<Magnitude<S>, ExteriorError> {
    if basis1.len() != basis2.len() {
        return Err(ExteriorError::Shape(format!(
            "subspace dimensions differ: {} vs {}",
            basis1.len(),
            basis2.len()
        )));
    }
    let x = wedge_all(basis1)?;
    let y = wedge_all(basis2)?;
    if x.is_zero() || y.is_zero() {
        return Err(ExteriorError::RankDeficient);
    }
    dist(&x, &y, metric)
}

/// Basis of the orthogonal complement `{v : b·v = 0 for all b}` of the span
/// of `basis`, over an exact coefficient kind with division.  Errors when
/// `basis` is rank-deficient.
pub fn orthogonal_complement<S: Scalar>(
    basis: &[GradedVector<S>],
) -> Result<Vec<GradedVector<S>>, ExteriorError> {
    let m = basis.len();
    if m == 0 {
        return Err(ExteriorError::Shape("empty basis".into()));
    }
    let n = basis[0].dim();
    for b in basis {
        if b.grade() != 1 || b.dim() != n {
            return Err(ExteriorError::Shape("complement needs grade-1 vectors".into()));
        }
    }
    let rows: Vec<Vec<S>> = basis.iter().map(|b| b.coords().to_vec()).collect();
    let null = crate::lattice::nullspace(&rows).map_err(ExteriorError::Scalar)?;
    if null.len() != n - m {
        return Err(ExteriorError::RankDeficient);
    }
    Ok(null.into_iter().map(GradedVector::vector).collect())
}

/// Almost-orthogonality test: every vector is nonzero and for `j ≥ 2` the
/// distance from `x_j` to the span of its predecessors is at least
/// `1 − δ/2^{j−1}`, with `δ` the metric defect (1 archimedean, 0 finite).
/// Dependent sequences come back `false`, not as an error.
pub fn is_almost_orthogonal<S: Scalar>(
    seq: &[GradedVector<S>],
    metric: PlaceMetric,
) -> Result<bool, ExteriorError> {
    if seq.is_empty() {
        return Err(ExteriorError::Shape("empty sequence".into()));
    }
    if seq.iter().any(|x| x.is_zero()) {
        return Ok(false);
    }
    let delta = BigRational::from_integer(metric.delta().into());
    for j in 2..=seq.len() {
        let threshold: BigRational = <BigRational as One>::one()
            - &delta / BigRational::from_integer((1i64 << (j - 1)).into());
        let d = match dist_point_subspace(&seq[j - 1], &seq[..j - 1], metric) {
            Ok(d) => d,
            Err(ExteriorError::RankDeficient) => return Ok(false),
            Err(e) => return Err(e),
        };
        if d.cmp_ratio(&threshold)? == Ordering::Less {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn rv(coords: &[i64]) -> GradedVector<BigRational> {
        GradedVector::vector(
            coords
                .iter()
                .map(|&c| BigRational::from_integer(BigInt::from(c)))
                .collect(),
        )
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn subset_order_and_rank_agree() {
        let subs = k_subsets(4, 2);
        assert_eq!(subs[0], vec![1, 2]);
        assert_eq!(subs[5], vec![3, 4]);
        for (i, s) in subs.iter().enumerate() {
            assert_eq!(subset_rank(s, 4), i);
        }
    }

    #[test]
    fn wedge_of_three_vectors() {
        let x = rv(&[1, 2, 0]);
        let y = rv(&[0, 1, 1]);
        let w = x.wedge(&y).unwrap();
        assert_eq!(w.coords(), &[q(1, 1), q(1, 1), q(2, 1)]);
        // x ∧ x = 0, antisymmetry
        assert!(x.wedge(&x).unwrap().is_zero());
        let yx = y.wedge(&x).unwrap();
        assert_eq!(yx, w.negate());
    }

    #[test]
    fn contraction_matches_direct_expansion() {
        // y ⌟ (e1∧e2) = (y·e1)e2 − (y·e2)e1
        let y = rv(&[1, 1]);
        let blade = GradedVector::<BigRational>::basis_blade(2, &[1, 2]).unwrap();
        let c = blade.contract(&y).unwrap();
        assert_eq!(c.coords(), &[q(-1, 1), q(1, 1)]);
    }

    #[test]
    fn hodge_signs_in_dimension_three() {
        let e1 = GradedVector::<BigRational>::basis_blade(3, &[1]).unwrap();
        let e2 = GradedVector::<BigRational>::basis_blade(3, &[2]).unwrap();
        let e12 = GradedVector::<BigRational>::basis_blade(3, &[1, 2]).unwrap();
        assert_eq!(e1.hodge(), GradedVector::basis_blade(3, &[2, 3]).unwrap());
        assert_eq!(
            e2.hodge(),
            GradedVector::<BigRational>::basis_blade(3, &[1, 3]).unwrap().negate()
        );
        assert_eq!(e12.hodge(), GradedVector::basis_blade(3, &[3]).unwrap());
    }

    #[test]
    fn hodge_pairs_with_wedge() {
        // (X ∧ Y)·e_{1..n} = hodge(X)·Y for complementary grades
        let x = rv(&[3, -1, 2]).wedge(&rv(&[0, 5, 1])).unwrap();
        let y = rv(&[7, 2, -4]);
        let top = x.wedge(&y).unwrap();
        let lhs = top.coords()[0].clone();
        let rhs = x.hodge().dot(&y).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn norms_at_both_kinds_of_places() {
        let x = rv(&[3, 4]);
        let n = x.norm_at(PlaceMetric::Archimedean).unwrap();
        assert_eq!(n.cmp_ratio(&q(5, 1)).unwrap(), Ordering::Equal);
        // ‖(4, 6)‖_2 = max(|4|_2, |6|_2) = 1/2
        let y = rv(&[4, 6]);
        let m = y.norm_at(PlaceMetric::NonArchimedean { p: 2 }).unwrap();
        assert_eq!(m.cmp_ratio(&q(1, 2)).unwrap(), Ordering::Equal);
    }

    #[test]
    fn projective_distances() {
        // dist((1,0), (1,1)) = 1/√2
        let d = dist(&rv(&[1, 0]), &rv(&[1, 1]), PlaceMetric::Archimedean).unwrap();
        let d2 = d.mul(&d).unwrap();
        assert_eq!(d2.cmp_ratio(&q(1, 2)).unwrap(), Ordering::Equal);
        // dist((1,1,1), span{e1}) = √(2/3)
        let dp = dist_point_subspace(&rv(&[1, 1, 1]), &[rv(&[1, 0, 0])], PlaceMetric::Archimedean)
            .unwrap();
        let dp2 = dp.mul(&dp).unwrap();
        assert_eq!(dp2.cmp_ratio(&q(2, 3)).unwrap(), Ordering::Equal);
    }

    #[test]
    fn complement_is_orthogonal_and_full_rank() {
        let basis = vec![rv(&[1, 2, 0, -1]), rv(&[0, 1, 1, 3])];
        let comp = orthogonal_complement(&basis).unwrap();
        assert_eq!(comp.len(), 2);
        for b in &basis {
            for c in &comp {
                assert!(Scalar::is_zero(&b.dot(c).unwrap()));
            }
        }
        assert!(!wedge_all(&comp).unwrap().is_zero());
    }

    #[test]
    fn almost_orthogonality_thresholds() {
        // dist((1,0),(1,1)) = 1/√2 ≥ 1/2: passes at the archimedean place
        let ok = is_almost_orthogonal(&[rv(&[1, 0]), rv(&[1, 1])], PlaceMetric::Archimedean)
            .unwrap();
        assert!(ok);
        // a dependent pair fails rather than erroring
        let dep = is_almost_orthogonal(&[rv(&[1, 0]), rv(&[2, 0])], PlaceMetric::Archimedean)
            .unwrap();
        assert!(!dep);
        // at a finite place δ = 0 forces dist ≥ 1: (1,0),(1,1) has
        // dist_2 = 1 (wedge has unit 2-adic norm), so it passes
        let p2 = PlaceMetric::NonArchimedean { p: 2 };
        assert!(is_almost_orthogonal(&[rv(&[1, 0]), rv(&[1, 1])], p2).unwrap());
        // (1,0),(1,2) has wedge = 2·e12: dist_2 = 1/2 < 1 fails
        assert!(!is_almost_orthogonal(&[rv(&[1, 0]), rv(&[1, 2])], p2).unwrap());
    }

    #[test]
    fn dist_duality_on_complements() {
        // dist(V₁, V₂) = dist(V₁^⊥, V₂^⊥) exactly, on lines in 3-space
        let v1 = vec![rv(&[1, 2, 2])];
        let v2 = vec![rv(&[2, -1, 1])];
        let d = dist_subspaces(&v1, &v2, PlaceMetric::Archimedean).unwrap();
        let c1 = orthogonal_complement(&v1).unwrap();
        let c2 = orthogonal_complement(&v2).unwrap();
        let dc = dist_subspaces(&c1, &c2, PlaceMetric::Archimedean).unwrap();
        let d2 = d.mul(&d).unwrap();
        let dc2 = dc.mul(&dc).unwrap();
        assert_eq!(d2.cmp(&dc2).unwrap(), Ordering::Equal);
    }
}
