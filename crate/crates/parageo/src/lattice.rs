//! Internal linear algebra and lattice utilities.
//!
//! Exact Gaussian elimination generic over the coefficient kind (used for
//! nullspaces, solves and independence tracking), integer Hermite normal
//! form for ideal norms, and a small floating-point LLL + Fincke–Pohst
//! enumerator for positive-definite quadratic forms.  Enumeration results
//! are always re-filtered exactly by callers; the float layer only has to
//! be complete, not tight.

use crate::scalar::{Scalar, ScalarError};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

// ---------------------------------------------------------------------------
// exact elimination over a scalar kind

/// Reduce `rows` in place to reduced row echelon form; returns pivot columns.
pub fn rref<S: Scalar>(rows: &mut [Vec<S>]) -> Result<Vec<usize>, ScalarError> {
    let nrows = rows.len();
    if nrows == 0 {
        return Ok(vec![]);
    }
    let ncols = rows[0].len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == nrows {
            break;
        }
        // choose the candidate with the largest approximate magnitude; for
        // exact kinds any nonzero pivot works, for floats this is partial
        // pivoting
        let mut best: Option<(usize, f64)> = None;
        for i in r..nrows {
            if rows[i][c].is_zero() {
                continue;
            }
            let mag = rows[i][c]
                .abs_sq()
                .ok()
                .and_then(|s| s.approx_f64())
                .unwrap_or(1.0);
            if best.map_or(true, |(_, m)| mag > m) {
                best = Some((i, mag));
            }
        }
        let Some((pi, _)) = best else { continue };
        rows.swap(r, pi);
        let inv_pivot = S::one().div(&rows[r][c])?;
        for x in rows[r].iter_mut() {
            *x = x.mul(&inv_pivot);
        }
        for i in 0..nrows {
            if i != r && !rows[i][c].is_zero() {
                let f = rows[i][c].clone();
                for j in 0..ncols {
                    let t = rows[r][j].mul(&f);
                    rows[i][j] = rows[i][j].sub(&t);
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    Ok(pivots)
}

pub fn rank<S: Scalar>(rows: &[Vec<S>]) -> Result<usize, ScalarError> {
    let mut m = rows.to_vec();
    Ok(rref(&mut m)?.len())
}

/// Basis of `{v : A v = 0}` for the matrix with the given rows.
pub fn nullspace<S: Scalar>(rows: &[Vec<S>]) -> Result<Vec<Vec<S>>, ScalarError> {
    if rows.is_empty() {
        return Ok(vec![]);
    }
    let ncols = rows[0].len();
    let mut m = rows.to_vec();
    let pivots = rref(&mut m)?;
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    let mut basis = Vec::with_capacity(free.len());
    for &f in &free {
        let mut v = vec![S::zero(); ncols];
        v[f] = S::one();
        for (i, &p) in pivots.iter().enumerate() {
            v[p] = m[i][f].neg();
        }
        basis.push(v);
    }
    Ok(basis)
}

/// Solve `A x = b`; `None` when inconsistent.  Free variables are set to 0.
pub fn solve<S: Scalar>(a: &[Vec<S>], b: &[S]) -> Result<Option<Vec<S>>, ScalarError> {
    let nrows = a.len();
    assert_eq!(nrows, b.len(), "matrix/vector size mismatch");
    if nrows == 0 {
        return Ok(Some(vec![]));
    }
    let ncols = a[0].len();
    let mut aug: Vec<Vec<S>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();
    let pivots = rref(&mut aug)?;
    if pivots.contains(&ncols) {
        return Ok(None); // pivot in the augmented column: inconsistent
    }
    let mut x = vec![S::zero(); ncols];
    for (i, &p) in pivots.iter().enumerate() {
        x[p] = aug[i][ncols].clone();
    }
    Ok(Some(x))
}

/// Matrix inverse; `None` for singular input.
pub fn invert<S: Scalar>(a: &[Vec<S>]) -> Result<Option<Vec<Vec<S>>>, ScalarError> {
    let n = a.len();
    let mut aug: Vec<Vec<S>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            assert_eq!(row.len(), n, "inverse of a non-square matrix");
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { S::one() } else { S::zero() }));
            r
        })
        .collect();
    let pivots = rref(&mut aug)?;
    if pivots.len() != n || pivots.iter().enumerate().any(|(i, &p)| i != p) {
        return Ok(None);
    }
    Ok(Some(aug.into_iter().map(|row| row[n..].to_vec()).collect()))
}

/// Incremental rank tracker: feed vectors, learn which ones extend the span.
/// Exact for exact coefficient kinds.
pub struct IndependenceTracker<S: Scalar> {
    dim: usize,
    // rows in echelon form, keyed by pivot column
    rows: Vec<(usize, Vec<S>)>,
}

impl<S: Scalar> IndependenceTracker<S> {
    pub fn new(dim: usize) -> Self {
        IndependenceTracker { dim, rows: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Returns whether `v` is independent from everything added so far;
    /// if it is, it joins the span.
    pub fn try_add(&mut self, v: &[S]) -> Result<bool, ScalarError> {
        assert_eq!(v.len(), self.dim, "vector dimension mismatch");
        let mut w = v.to_vec();
        for (p, row) in &self.rows {
            if !w[*p].is_zero() {
                let f = w[*p].clone();
                for j in 0..self.dim {
                    let t = row[j].mul(&f);
                    w[j] = w[j].sub(&t);
                }
            }
        }
        let Some(p) = w.iter().position(|x| !x.is_zero()) else {
            return Ok(false);
        };
        let inv = S::one().div(&w[p])?;
        for x in w.iter_mut() {
            *x = x.mul(&inv);
        }
        self.rows.push((p, w));
        self.rows.sort_by_key(|(p, _)| *p);
        Ok(true)
    }
}

// ---------------------------------------------------------------------------
// integer Hermite normal form

/// Row-style Hermite normal form of the lattice spanned by the given rows:
/// upper-trapezoidal, positive pivots, entries above a pivot reduced into
/// `[0, pivot)`.  Zero rows are dropped, so the result has `rank` rows.
pub fn row_hnf(mut m: Vec<Vec<BigInt>>) -> Vec<Vec<BigInt>> {
    if m.is_empty() {
        return m;
    }
    let ncols = m[0].len();
    let nrows = m.len();
    let mut row = 0;
    for col in 0..ncols {
        if row == nrows {
            break;
        }
        // gcd-eliminate everything below `row` in this column
        loop {
            let pivot = (row..nrows)
                .filter(|&i| !m[i][col].is_zero())
                .min_by_key(|&i| m[i][col].abs());
            let Some(pi) = pivot else { break };
            m.swap(row, pi);
            let mut dirty = false;
            for i in row + 1..nrows {
                if !m[i][col].is_zero() {
                    let q = m[i][col].div_floor(&m[row][col]);
                    for j in 0..ncols {
                        let t = &m[row][j] * &q;
                        m[i][j] -= t;
                    }
                    if !m[i][col].is_zero() {
                        dirty = true;
                    }
                }
            }
            if !dirty {
                break;
            }
        }
        if m[row][col].is_zero() {
            continue; // no pivot in this column
        }
        if m[row][col].is_negative() {
            for x in m[row].iter_mut() {
                *x = -&*x;
            }
        }
        for i in 0..row {
            let q = m[i][col].div_floor(&m[row][col]);
            if !q.is_zero() {
                for j in 0..ncols {
                    let t = &m[row][j] * &q;
                    m[i][j] -= t;
                }
            }
        }
        row += 1;
    }
    m.truncate(row);
    m
}

// ---------------------------------------------------------------------------
// floating-point LLL on a Gram matrix

fn gram_of_transform(u: &[Vec<i64>], g: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = g.len();
    let mut ug = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += u[i][k] as f64 * g[k][j];
            }
            ug[i][j] = s;
        }
    }
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += ug[i][k] * u[j][k] as f64;
            }
            out[i][j] = s;
        }
    }
    out
}

/// Gram–Schmidt data (μ coefficients and squared GSO norms) from a Gram
/// matrix, without vector coordinates.
fn gso(g: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = g.len();
    let mut mu = vec![vec![0.0; n]; n];
    let mut r = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = g[i][j];
            for k in 0..j {
                s -= mu[j][k] * r[i][k];
            }
            r[i][j] = s;
            if i != j {
                mu[i][j] = if b[j].abs() > 0.0 { s / b[j] } else { 0.0 };
            }
        }
        b[i] = r[i][i];
    }
    (mu, b)
}

/// LLL-reduce the lattice described by a positive-definite Gram matrix.
/// Returns the unimodular transform `U` whose rows express the reduced
/// basis in the original one (reduced Gram = `U G Uᵀ`).
pub fn lll_gram(g: &[Vec<f64>], delta: f64) -> Vec<Vec<i64>> {
    let n = g.len();
    let mut u: Vec<Vec<i64>> = (0..n)
        .map(|i| (0..n).map(|j| i64::from(i == j)).collect())
        .collect();
    if n <= 1 {
        return u;
    }
    let mut cur = g.to_vec();
    let mut k = 1;
    let mut steps = 0;
    while k < n {
        steps += 1;
        if steps > 20_000 {
            break; // float stall guard: U is still unimodular, just less reduced
        }
        // size-reduce row k against rows k-1 .. 0
        for j in (0..k).rev() {
            let (mu, _) = gso(&cur);
            let q = mu[k][j].round();
            if q != 0.0 && q.abs() < 9.0e18 {
                let qi = q as i64;
                for t in 0..n {
                    u[k][t] -= qi.saturating_mul(u[j][t]);
                }
                cur = gram_of_transform(&u, g);
            }
        }
        let (mu, b) = gso(&cur);
        if b[k] >= (delta - mu[k][k - 1] * mu[k][k - 1]) * b[k - 1] {
            k += 1;
        } else {
            u.swap(k, k - 1);
            cur = gram_of_transform(&u, g);
            k = k.max(2) - 1;
        }
    }
    u
}

/// Upper-triangular Cholesky factor `R` with `G = Rᵀ R`; `None` when the
/// matrix is not numerically positive definite.
pub fn cholesky(g: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = g.len();
    let mut r = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let mut s = g[i][j];
            for k in 0..i {
                s -= r[k][i] * r[k][j];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                r[i][i] = s.sqrt();
            } else {
                r[i][j] = s / r[i][i];
            }
        }
    }
    Some(r)
}

/// Result of a Fincke–Pohst enumeration.  `truncated` means the point cap
/// was hit and the list is incomplete.
#[derive(Debug, Clone)]
pub struct FpResult {
    pub points: Vec<Vec<i64>>,
    pub truncated: bool,
}

/// All integer points `x ≠ 0` with `Q(x) = xᵀ G x ≤ bound`, up to sign
/// (the first nonzero coordinate is normalized positive).  The Gram matrix
/// must be positive definite.  The bound is inflated by a small relative
/// margin so borderline points survive float rounding; callers re-check
/// candidates exactly.
pub fn enumerate_quadratic_form(g: &[Vec<f64>], bound: f64, max_points: usize) -> FpResult {
    let n = g.len();
    let u = lll_gram(g, 0.99);
    let cur = gram_of_transform(&u, g);
    let Some(r) = cholesky(&cur) else {
        return FpResult { points: vec![], truncated: true };
    };
    let bound = bound * (1.0 + 1e-3) + 1e-12;
    let mut points = Vec::new();
    let mut truncated = false;
    let mut y = vec![0i64; n];

    // recursive bound-and-branch from the last coordinate down
    fn descend(
        level: usize,
        rest: f64,
        r: &[Vec<f64>],
        y: &mut Vec<i64>,
        u: &[Vec<i64>],
        points: &mut Vec<Vec<i64>>,
        truncated: &mut bool,
        max_points: usize,
    ) {
        if *truncated {
            return;
        }
        let n = r.len();
        let i = level - 1;
        // linear part S_i = Σ_{j>i} R[i][j] y_j
        let s: f64 = (i + 1..n).map(|j| r[i][j] * y[j] as f64).sum();
        let radius = rest.max(0.0).sqrt();
        let lo = ((-radius - s) / r[i][i]).ceil() as i64;
        let hi = ((radius - s) / r[i][i]).floor() as i64;
        for v in lo..=hi {
            y[i] = v;
            let term = r[i][i] * v as f64 + s;
            let used = term * term;
            if used > rest + 1e-9 {
                continue;
            }
            if i == 0 {
                // map back to original coordinates: x = Uᵀ y
                let mut x = vec![0i64; n];
                for t in 0..n {
                    let mut acc = 0i64;
                    for k in 0..n {
                        acc += u[k][t] * y[k];
                    }
                    x[t] = acc;
                }
                if let Some(first) = x.iter().find(|&&c| c != 0) {
                    if *first > 0 {
                        if points.len() >= max_points {
                            *truncated = true;
                            return;
                        }
                        points.push(x);
                    }
                }
            } else {
                descend(level - 1, rest - used, r, y, u, points, truncated, max_points);
            }
        }
        y[i] = 0;
    }

    descend(n, bound, &r, &mut y, &u, &mut points, &mut truncated, max_points);
    points.sort();
    FpResult { points, truncated }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn nullspace_annihilates_rows() {
        let rows = vec![
            vec![q(1, 1), q(2, 1), q(0, 1), q(-1, 1)],
            vec![q(0, 1), q(1, 1), q(1, 1), q(3, 1)],
        ];
        let ns = nullspace(&rows).unwrap();
        assert_eq!(ns.len(), 2);
        for v in &ns {
            for r in &rows {
                let dot = r
                    .iter()
                    .zip(v)
                    .fold(q(0, 1), |acc, (a, b)| acc + a * b);
                assert!(num_traits::Zero::is_zero(&dot));
            }
        }
    }

    #[test]
    fn solve_and_invert_roundtrip() {
        let a = vec![
            vec![q(2, 1), q(1, 1)],
            vec![q(5, 1), q(3, 1)],
        ];
        let b = vec![q(1, 1), q(2, 1)];
        let x = solve(&a, &b).unwrap().unwrap();
        // 2x + y = 1, 5x + 3y = 2 → x = 1, y = −1
        assert_eq!(x, vec![q(1, 1), q(-1, 1)]);
        let inv = invert(&a).unwrap().unwrap();
        assert_eq!(inv[0], vec![q(3, 1), q(-1, 1)]);
        assert_eq!(inv[1], vec![q(-5, 1), q(2, 1)]);
    }

    #[test]
    fn tracker_counts_rank() {
        let mut t = IndependenceTracker::<BigRational>::new(3);
        assert!(t.try_add(&[q(1, 1), q(0, 1), q(1, 1)]).unwrap());
        assert!(t.try_add(&[q(0, 1), q(1, 1), q(0, 1)]).unwrap());
        assert!(!t.try_add(&[q(2, 1), q(3, 1), q(2, 1)]).unwrap());
        assert_eq!(t.rank(), 2);
    }

    #[test]
    fn hnf_of_redundant_generators() {
        let m = vec![
            vec![BigInt::from(2), BigInt::from(0)],
            vec![BigInt::from(0), BigInt::from(2)],
            vec![BigInt::from(1), BigInt::from(1)],
        ];
        let h = row_hnf(m);
        assert_eq!(h.len(), 2);
        assert_eq!(h[0], vec![BigInt::from(1), BigInt::from(1)]);
        assert_eq!(h[1], vec![BigInt::from(0), BigInt::from(2)]);
    }

    #[test]
    fn lll_shortens_a_skewed_basis() {
        // basis rows (1, 0) and (1000, 1): Gram is badly skewed
        let g = vec![vec![1.0, 1000.0], vec![1000.0, 1000001.0]];
        let u = lll_gram(&g, 0.99);
        let red = gram_of_transform(&u, &g);
        assert!(red[0][0] <= 1.0 + 1e-9);
        assert!(red[1][1] <= 1.0 + 1e-9 || red[1][1] < g[1][1]);
        // determinant preserved: |det U| = 1 on 2x2 integer matrix
        let det = u[0][0] * u[1][1] - u[0][1] * u[1][0];
        assert_eq!(det.abs(), 1);
    }

    #[test]
    fn enumeration_finds_all_short_points() {
        let g = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let r = enumerate_quadratic_form(&g, 4.0, 1000);
        assert!(!r.truncated);
        let expect: Vec<Vec<i64>> = vec![
            vec![0, 1],
            vec![0, 2],
            vec![1, -1],
            vec![1, 0],
            vec![1, 1],
            vec![2, 0],
        ];
        assert_eq!(r.points, expect);
    }

    #[test]
    fn enumeration_respects_skewed_forms() {
        // Q(x, y) = x² + 100 (x + y)²: short points have y ≈ −x
        let g = vec![vec![101.0, 100.0], vec![100.0, 100.0]];
        let r = enumerate_quadratic_form(&g, 9.0, 1000);
        assert!(!r.truncated);
        assert!(r.points.contains(&vec![1, -1]));
        assert!(r.points.contains(&vec![2, -2]));
        for p in &r.points {
            let x = p[0] as f64;
            let y = p[1] as f64;
            let v = x * x + 100.0 * (x + y) * (x + y);
            assert!(v <= 9.1, "point {p:?} has value {v}");
        }
    }
}
