//! The n-system calculus: piecewise-linear models of parametric minima.
//!
//! An n-system is a continuous map `P : [q₀, ∞) → ℝⁿ` with nondecreasing
//! components summing to `q`, moving between consecutive switch points by
//! keeping all components flat except one, which rises with slope 1
//! (crossing flat components is allowed).  At each switch the record stores
//! the sorted values, the sorted index `k` of the component that rises next
//! (`rise_out`), and the sorted index `l` where the previous riser landed
//! (`rise_in`, absent at the first switch).  The third structural condition
//! is that each rise ends strictly above the value at which the next rise
//! starts.
//!
//! Systems may stop at a finite horizon, continue by an additive periodic
//! tail (the last `m` switches repeat shifted by `Δq` in time and `Δv` in
//! value), or continue by a self-similar tail (the last `m` switches repeat
//! scaled by a ratio `ρ > 1`).  The self-similar kind is what non-constant
//! ratio spectra (`liminf ≠ limsup` of `P_j(q)/q`) require; additive tails
//! always produce constant ratios.
//!
//! All arithmetic is exact over `BigRational`.

use crate::scalar::{format_ratio, parse_ratio, ratio_to_f64};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::fmt;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NSystemError {
    #[error("invalid n-system: {0:?}")]
    Invalid(Vec<Violation>),
    #[error("q = {q} outside the domain [{lo}, {hi}]")]
    OutsideDomain { q: String, lo: String, hi: String },
    #[error("P₁ is bounded; point-side exponents are undefined")]
    BoundedFirstComponent,
    #[error("operation not supported: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("rigidify contract violated: {0}")]
    Contract(String),
}

/// A named invariant violation (data, not an error).
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Switch index the violation is anchored to (`None` for global issues).
    pub switch: Option<usize>,
    /// Which condition failed: "S1-order", "S1-sum", "S2", "S3", "shape",
    /// "tail".
    pub condition: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.switch {
            Some(i) => write!(f, "switch {}: {}: {}", i, self.condition, self.detail),
            None => write!(f, "{}: {}", self.condition, self.detail),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Switch {
    pub q: BigRational,
    /// Sorted (nondecreasing) component values at `q`.
    pub values: Vec<BigRational>,
    /// Sorted index (1-based) of the component that rises after `q`.
    pub k: usize,
    /// Sorted index (1-based) where the previous rise ended; `None` at the
    /// first switch.
    pub l: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tail {
    /// The system stops at the last switch.
    Finite,
    /// The last `m` switches repeat with `q ↦ q + Δq`, `values ↦ values + Δv`.
    Periodic { m: usize, dq: BigRational, dv: Vec<BigRational> },
    /// The last `m` switches repeat with `q ↦ ρq`, `values ↦ ρ·values`.
    Geometric { m: usize, ratio: BigRational },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NSystem {
    pub n: usize,
    pub q0: BigRational,
    pub switches: Vec<Switch>,
    pub tail: Tail,
    pub mesh: Option<BigRational>,
}

// a concrete segment of the graph: rise of sorted index `k` on [q_lo, q_hi)
#[derive(Debug, Clone)]
pub(crate) struct Segment {
    pub q_lo: BigRational,
    pub values: Vec<BigRational>,
    pub k: usize,
    /// `None` on the last segment of a finite system (degenerate, q_hi = q_lo).
    pub q_hi: Option<BigRational>,
}

fn rz() -> BigRational {
    BigRational::zero()
}

fn sorted(values: &[BigRational]) -> Vec<BigRational> {
    let mut v = values.to_vec();
    v.sort();
    v
}

impl NSystem {
    pub fn new(
        n: usize,
        switches: Vec<Switch>,
        tail: Tail,
        mesh: Option<BigRational>,
    ) -> Result<Self, NSystemError> {
        let q0 = switches
            .first()
            .map(|s| s.q.clone())
            .ok_or_else(|| NSystemError::Parse("a system needs at least one switch".into()))?;
        let sys = NSystem { n, q0, switches, tail, mesh };
        let violations = sys.validate();
        if violations.is_empty() {
            Ok(sys)
        } else {
            Err(NSystemError::Invalid(violations))
        }
    }

    /// Build without validating (for constructions that validate later).
    pub fn new_unchecked(
        n: usize,
        switches: Vec<Switch>,
        tail: Tail,
        mesh: Option<BigRational>,
    ) -> Self {
        let q0 = switches.first().map(|s| s.q.clone()).unwrap_or_else(rz);
        NSystem { n, q0, switches, tail, mesh }
    }

    /// Largest representable q (`None` for systems that continue forever).
    pub fn horizon(&self) -> Option<BigRational> {
        match self.tail {
            Tail::Finite => self.switches.last().map(|s| s.q.clone()),
            _ => None,
        }
    }

    // -- validation -----------------------------------------------------------

    /// Check every structural invariant; violations come back as data.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.n;
        if n == 0 || self.switches.is_empty() {
            out.push(Violation {
                switch: None,
                condition: "shape",
                detail: "empty system".into(),
            });
            return out;
        }
        // per-switch shape and S1
        for (i, s) in self.switches.iter().enumerate() {
            if s.values.len() != n {
                out.push(Violation {
                    switch: Some(i),
                    condition: "shape",
                    detail: format!("expected {n} values, got {}", s.values.len()),
                });
                continue;
            }
            if s.k == 0 || s.k > n {
                out.push(Violation {
                    switch: Some(i),
                    condition: "shape",
                    detail: format!("rise_out index {} out of range", s.k),
                });
            }
            match (i, &s.l) {
                (0, Some(_)) => out.push(Violation {
                    switch: Some(i),
                    condition: "shape",
                    detail: "first switch cannot have a rise_in index".into(),
                }),
                (_, Some(l)) if *l == 0 || *l > n => out.push(Violation {
                    switch: Some(i),
                    condition: "shape",
                    detail: format!("rise_in index {l} out of range"),
                }),
                (i, None) if i > 0 => out.push(Violation {
                    switch: Some(i),
                    condition: "shape",
                    detail: "missing rise_in index".into(),
                }),
                _ => {}
            }
            if s.values.first().map(|v| v.is_negative()).unwrap_or(false) {
                out.push(Violation {
                    switch: Some(i),
                    condition: "S1-order",
                    detail: "negative component".into(),
                });
            }
            if s.values.windows(2).any(|w| w[0] > w[1]) {
                out.push(Violation {
                    switch: Some(i),
                    condition: "S1-order",
                    detail: "values not sorted ascending".into(),
                });
            }
            let sum: BigRational = s.values.iter().fold(rz(), |a, b| a + b);
            if sum != s.q {
                out.push(Violation {
                    switch: Some(i),
                    condition: "S1-sum",
                    detail: format!("Σ values = {}, q = {}", format_ratio(&sum), format_ratio(&s.q)),
                });
            }
        }
        if !out.is_empty() {
            return out; // downstream checks assume shapes are sane
        }
        // monotone switch times
        for (i, w) in self.switches.windows(2).enumerate() {
            if w[0].q >= w[1].q {
                out.push(Violation {
                    switch: Some(i + 1),
                    condition: "shape",
                    detail: "switch times must increase strictly".into(),
                });
            }
        }
        if !out.is_empty() {
            return out;
        }
        // S2 (consecutive consistency) and S3 (rise interlocking) over the
        // stored switches plus enough simulated tail to cover the seam
        let sim = self.simulated_switches_for_validation();
        match sim {
            Err(mut v) => out.append(&mut v),
            Ok(seq) => {
                for i in 0..seq.len() - 1 {
                    let (a, b) = (&seq[i], &seq[i + 1]);
                    let len = &b.q - &a.q;
                    let mut expect = a.values.clone();
                    expect[a.k - 1] += &len;
                    let end_value = expect[a.k - 1].clone();
                    let expect = sorted(&expect);
                    if expect != b.values {
                        out.push(Violation {
                            switch: Some(i),
                            condition: "S2",
                            detail: format!(
                                "rising index {} from q={} does not reproduce the next switch",
                                a.k,
                                format_ratio(&a.q)
                            ),
                        });
                        continue;
                    }
                    // rise_in consistency: the riser must land at index l
                    if let Some(l) = b.l {
                        if b.values[l - 1] != end_value {
                            out.push(Violation {
                                switch: Some(i + 1),
                                condition: "S2",
                                detail: format!(
                                    "rise_in index {l} does not hold the riser's end value"
                                ),
                            });
                        }
                        // S3: this rise must end strictly above the start of
                        // the next one
                        if b.values[l - 1] <= b.values[b.k - 1] {
                            out.push(Violation {
                                switch: Some(i + 1),
                                condition: "S3",
                                detail: format!(
                                    "rise ends at {} which is not strictly above the next start {}",
                                    format_ratio(&b.values[l - 1]),
                                    format_ratio(&b.values[b.k - 1])
                                ),
                            });
                        }
                    }
                }
            }
        }
        // tail-specific closure conditions
        match &self.tail {
            Tail::Finite => {}
            Tail::Periodic { m, dq, dv } => {
                if *m == 0 || *m > self.switches.len() {
                    out.push(Violation {
                        switch: None,
                        condition: "tail",
                        detail: format!("period length {m} out of range"),
                    });
                } else {
                    if !dq.is_positive() {
                        out.push(Violation {
                            switch: None,
                            condition: "tail",
                            detail: "period q-shift must be positive".into(),
                        });
                    }
                    if dv.len() != self.n {
                        out.push(Violation {
                            switch: None,
                            condition: "tail",
                            detail: "value shift has wrong dimension".into(),
                        });
                    } else {
                        let sum: BigRational = dv.iter().fold(rz(), |a, b| a + b);
                        if &sum != dq {
                            out.push(Violation {
                                switch: None,
                                condition: "tail",
                                detail: "Σ Δv must equal Δq".into(),
                            });
                        }
                        if dv.windows(2).any(|w| w[0] > w[1]) {
                            out.push(Violation {
                                switch: None,
                                condition: "tail",
                                detail: "Δv must be nondecreasing for later periods to stay sorted"
                                    .into(),
                            });
                        }
                        // S3 margins must not decay under the shift: each
                        // (l, k) comparison changes by Δv_l − Δv_k per period
                        let start = self.switches.len() - m;
                        for (j, s) in self.switches[start..].iter().enumerate() {
                            if let (Some(l), k) = (s.l, s.k) {
                                if dv[l - 1] < dv[k - 1] {
                                    out.push(Violation {
                                        switch: Some(start + j),
                                        condition: "tail",
                                        detail: "S3 margin shrinks every period and eventually fails"
                                            .into(),
                                    });
                                }
                            }
                        }
                    }
                }
            }
            Tail::Geometric { m, ratio } => {
                if *m == 0 || *m > self.switches.len() {
                    out.push(Violation {
                        switch: None,
                        condition: "tail",
                        detail: format!("period length {m} out of range"),
                    });
                } else if ratio <= &BigRational::one() {
                    out.push(Violation {
                        switch: None,
                        condition: "tail",
                        detail: "self-similar ratio must exceed 1".into(),
                    });
                } else if self.switches[self.switches.len() - *m]
                    .q
                    .is_negative()
                    || self.switches[self.switches.len() - *m].q.is_zero()
                {
                    out.push(Violation {
                        switch: None,
                        condition: "tail",
                        detail: "self-similar pattern must start at positive q".into(),
                    });
                }
            }
        }
        out
    }

    /// The stored switches plus two simulated tail periods (for seam checks).
    fn simulated_switches_for_validation(&self) -> Result<Vec<Switch>, Vec<Violation>> {
        let mut seq = self.switches.clone();
        match &self.tail {
            Tail::Finite => {}
            Tail::Periodic { m, dq, dv } => {
                if *m == 0 || *m > seq.len() || dv.len() != self.n || !dq.is_positive() {
                    return Ok(seq); // shape issues reported by the tail checks
                }
                let start = seq.len() - m;
                for period in 1..=2 {
                    for i in 0..*m {
                        let base = &self.switches[start + i];
                        let shift_q = dq * BigRational::from_integer(BigInt::from(period));
                        let values: Vec<BigRational> = base
                            .values
                            .iter()
                            .zip(dv)
                            .map(|(v, d)| v + d * BigRational::from_integer(BigInt::from(period)))
                            .collect();
                        if values.windows(2).any(|w| w[0] > w[1]) {
                            return Err(vec![Violation {
                                switch: Some(start + i),
                                condition: "tail",
                                detail: "shifted switch values lose their ordering".into(),
                            }]);
                        }
                        seq.push(Switch {
                            q: &base.q + shift_q,
                            values,
                            k: base.k,
                            l: if period == 1 && i == 0 && base.l.is_none() {
                                None
                            } else {
                                base.l
                            },
                        });
                    }
                }
            }
            Tail::Geometric { m, ratio } => {
                if *m == 0 || *m > seq.len() || ratio <= &BigRational::one() {
                    return Ok(seq);
                }
                let start = seq.len() - m;
                for period in 1..=2u32 {
                    let factor = ratio.pow(period as i32);
                    for i in 0..*m {
                        let base = &self.switches[start + i];
                        seq.push(Switch {
                            q: &base.q * &factor,
                            values: base.values.iter().map(|v| v * &factor).collect(),
                            k: base.k,
                            l: base.l,
                        });
                    }
                }
            }
        }
        // The first simulated switch after the stored ones needs an l to be
        // S3-checked; periodic tails inherit it from the pattern, but if the
        // pattern's first switch is the system's first switch (l = None) we
        // cannot check the seam — report it.
        if !matches!(self.tail, Tail::Finite) {
            let first_tail_idx = self.switches.len();
            if seq.len() > first_tail_idx && seq[first_tail_idx].l.is_none() {
                return Err(vec![Violation {
                    switch: Some(first_tail_idx - 1),
                    condition: "tail",
                    detail: "tail pattern lacks a rise_in index at the seam".into(),
                }]);
            }
        }
        Ok(seq)
    }

    // -- evaluation -----------------------------------------------------------

    /// The segment containing `q` (its left switch, values, rising index).
    pub(crate) fn segment_at(&self, q: &BigRational) -> Result<Segment, NSystemError> {
        let outside = |q: &BigRational| NSystemError::OutsideDomain {
            q: format_ratio(q),
            lo: format_ratio(&self.q0),
            hi: self
                .horizon()
                .map(|h| format_ratio(&h))
                .unwrap_or_else(|| "∞".into()),
        };
        if q < &self.q0 {
            return Err(outside(q));
        }
        // find the last stored switch with q_i ≤ q
        let idx = self.switches.partition_point(|s| &s.q <= q);
        if idx < self.switches.len() {
            let s = &self.switches[idx - 1];
            return Ok(Segment {
                q_lo: s.q.clone(),
                values: s.values.clone(),
                k: s.k,
                q_hi: Some(self.switches[idx].q.clone()),
            });
        }
        // beyond the last stored switch
        match &self.tail {
            Tail::Finite => {
                let last = self.switches.last().unwrap();
                if q == &last.q {
                    Ok(Segment {
                        q_lo: last.q.clone(),
                        values: last.values.clone(),
                        k: last.k,
                        q_hi: None,
                    })
                } else {
                    Err(outside(q))
                }
            }
            Tail::Periodic { m, dq, dv } => {
                let start = self.switches.len() - m;
                let base_q = &self.switches[start].q;
                // period count: largest t ≥ 0 with base_q + t·dq ≤ q
                let t = ((q - base_q) / dq).floor();
                let shift_q = dq * &t;
                let shift_v: Vec<BigRational> = dv.iter().map(|d| d * &t).collect();
                // locate within the shifted pattern
                let mut i = 0;
                while i + 1 < *m && &(&self.switches[start + i + 1].q + &shift_q) <= q {
                    i += 1;
                }
                let s = &self.switches[start + i];
                let q_lo = &s.q + &shift_q;
                let q_hi = if i + 1 < *m {
                    &self.switches[start + i + 1].q + &shift_q
                } else {
                    base_q + dq * (&t + BigRational::one())
                };
                debug_assert!(&q_lo <= q && q < &q_hi || q == &q_lo);
                Ok(Segment {
                    q_lo,
                    values: s
                        .values
                        .iter()
                        .zip(&shift_v)
                        .map(|(v, sh)| v + sh)
                        .collect(),
                    k: s.k,
                    q_hi: Some(q_hi),
                })
            }
            Tail::Geometric { m, ratio } => {
                let start = self.switches.len() - m;
                let base_q = self.switches[start].q.clone();
                let mut factor = BigRational::one();
                // largest t ≥ 0 with base_q·ρ^t ≤ q
                while &(&base_q * &factor * ratio) <= q {
                    factor *= ratio;
                }
                let mut i = 0;
                while i + 1 < *m && &(&self.switches[start + i + 1].q * &factor) <= q {
                    i += 1;
                }
                let s = &self.switches[start + i];
                let q_lo = &s.q * &factor;
                let q_hi = if i + 1 < *m {
                    &self.switches[start + i + 1].q * &factor
                } else {
                    &base_q * &factor * ratio
                };
                Ok(Segment {
                    q_lo,
                    values: s.values.iter().map(|v| v * &factor).collect(),
                    k: s.k,
                    q_hi: Some(q_hi),
                })
            }
        }
    }

    /// Exact value `P(q)` (sorted components).
    pub fn evaluate(&self, q: &BigRational) -> Result<Vec<BigRational>, NSystemError> {
        let seg = self.segment_at(q)?;
        let mut v = seg.values;
        v[seg.k - 1] += q - &seg.q_lo;
        v.sort();
        Ok(v)
    }

    pub fn evaluate_f64(&self, q: f64) -> Result<Vec<f64>, NSystemError> {
        let qr = BigRational::from_float(q)
            .ok_or_else(|| NSystemError::Parse(format!("non-finite q {q}")))?;
        Ok(self.evaluate(&qr)?.iter().map(ratio_to_f64).collect())
    }

    // -- duality ----------------------------------------------------------------

    /// The dual map `P*(q) = (q − P_n(q), …, q − P_1(q))`.
    pub fn dual(&self) -> DualSystem {
        DualSystem { primal: self.clone() }
    }

    // -- rigidity ----------------------------------------------------------------

    /// True iff every switch (including all tail repetitions) carries
    /// pairwise-distinct positive multiples of `mesh`.
    pub fn is_rigid(&self, mesh: &BigRational) -> bool {
        self.is_rigid_from(mesh, &self.q0)
    }

    /// Rigidity restricted to switches with `q ≥ from` (and, when `from`
    /// falls inside a segment, the interpolated values at `from` itself).
    pub fn is_rigid_from(&self, mesh: &BigRational, from: &BigRational) -> bool {
        if !mesh.is_positive() {
            return false;
        }
        let distinct_multiples = |values: &[BigRational]| -> bool {
            values.windows(2).all(|w| w[0] < w[1])
                && values
                    .iter()
                    .all(|v| v.is_positive() && (v / mesh).denom().is_one())
        };
        if from > &self.q0 {
            match self.evaluate(from) {
                Ok(v) => {
                    if !distinct_multiples(&v) {
                        return false;
                    }
                }
                Err(_) => return false,
            }
        }
        for s in &self.switches {
            if &s.q >= from && !distinct_multiples(&s.values) {
                return false;
            }
        }
        match &self.tail {
            Tail::Finite => true,
            Tail::Periodic { dv, .. } => {
                // shifts must stay on the mesh for every later period
                dv.iter().all(|d| (d / mesh).denom().is_one())
            }
            Tail::Geometric { m, ratio } => {
                // multiples stay multiples for all powers iff ρ is an integer
                if !ratio.denom().is_one() {
                    return false;
                }
                let start = self.switches.len() - m;
                self.switches[start..]
                    .iter()
                    .all(|s| distinct_multiples(&s.values))
            }
        }
    }

    // -- critical points -----------------------------------------------------------

    /// Switch times and riser/flat crossing times inside `[lo, hi]`,
    /// deduplicated and sorted (endpoints included).  These are exactly the
    /// break points of q ↦ P(q) and of the partial-sum functions.
    pub fn critical_points(
        &self,
        lo: &BigRational,
        hi: &BigRational,
    ) -> Result<Vec<BigRational>, NSystemError> {
        let mut out = vec![lo.clone(), hi.clone()];
        let mut q = lo.clone();
        let mut guard = 0usize;
        while &q < hi {
            guard += 1;
            if guard > 100_000 {
                return Err(NSystemError::Unsupported(
                    "critical-point scan exceeded its iteration budget".into(),
                ));
            }
            let seg = self.segment_at(&q)?;
            let seg_hi = match &seg.q_hi {
                Some(h) => h.clone(),
                None => break,
            };
            if &seg.q_lo > lo && &seg.q_lo < hi {
                out.push(seg.q_lo.clone());
            }
            // crossings: riser value = flat value
            let start = &seg.values[seg.k - 1];
            for (j, v) in seg.values.iter().enumerate() {
                if j == seg.k - 1 || v <= start {
                    continue;
                }
                let cross = &seg.q_lo + (v - start);
                if &cross > lo && &cross < hi && cross < seg_hi && cross > seg.q_lo {
                    out.push(cross);
                }
            }
            q = seg_hi;
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    // -- rigidification -----------------------------------------------------------

    /// The q from which a rigidified system is guaranteed rigid:
    /// `(n² − n + 1)·c′/2`, the midpoint of the template's final rise.
    pub fn rigid_onset(n: usize, c_prime: &BigRational) -> BigRational {
        let count = BigInt::from((n * n - n + 1) as i64);
        c_prime * BigRational::new(count, BigInt::from(2))
    }

    /// Rebuild the system as a rigid one of mesh `c′/2`: a canonical template
    /// prefix up to `t_n = (1 + … + n)c′`, then a greedy chase of this
    /// system's values on the mesh grid.  The output contract is machine
    /// checked before returning: (1) the output validates, (2) it is rigid of
    /// mesh `c′/2` from `rigid_onset` on, (3) `sup_q max_k |L_k − R_k| ≤
    /// 4n²c′` over the comparable window, (4) the bottom component rises with
    /// slope 1 on `[q₀, q₀ + c′/2]`.  Any failed clause is an error; nothing
    /// is silently accepted.
    pub fn rigidify(&self, c_prime: &BigRational) -> Result<NSystem, NSystemError> {
        if !c_prime.is_positive() {
            return Err(NSystemError::Parse("mesh parameter must be positive".into()));
        }
        if self.n < 2 {
            return Err(NSystemError::Unsupported("rigidification needs n ≥ 2".into()));
        }
        let violations = self.validate();
        if !violations.is_empty() {
            return Err(NSystemError::Invalid(violations));
        }
        if matches!(self.tail, Tail::Geometric { .. }) {
            return Err(NSystemError::Unsupported(
                "rigidification of self-similar tails is not supported".into(),
            ));
        }
        let n = self.n;
        let two = BigRational::from_integer(BigInt::from(2));
        let chi = c_prime / &two;
        let ri = |i: usize| BigRational::from_integer(BigInt::from(i as i64));

        // template prefix: switches at t_i = (1 + … + i)c′ for i < n
        let mut switches: Vec<Switch> = Vec::new();
        let mut t = rz();
        for i in 0..n {
            if i > 0 {
                t += c_prime * ri(i);
            }
            let mut values = vec![rz(); n - i];
            for j in 1..=i {
                values.push(c_prime * ri(j));
            }
            switches.push(Switch {
                q: t.clone(),
                values,
                k: n - i,
                l: if i > 0 { Some(n) } else { None },
            });
        }
        // greedy state at t_n with values (c′, …, nc′)
        let mut q = &t + c_prime * ri(n);
        let mut v: Vec<BigRational> = (1..=n).map(|i| c_prime * ri(i)).collect();
        let mut prev_l = n;
        let mut prev_end = v[n - 1].clone();

        let horizon = self.horizon();
        let tail_anchor = match &self.tail {
            Tail::Periodic { m, .. } => Some(self.switches[self.switches.len() - m].q.clone()),
            _ => None,
        };
        let mut seen: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
        let mut states: Vec<(BigRational, Vec<BigRational>)> = Vec::new();
        let mut body: Vec<Switch> = Vec::new();
        let tail;
        let mut iterations = 0usize;
        loop {
            iterations += 1;
            if iterations > 100_000 {
                return Err(NSystemError::Contract(
                    "greedy mesh chase found no periodic closure".into(),
                ));
            }
            // cycle detection once the reference data is itself periodic
            let sig = match (&self.tail, &tail_anchor, &horizon) {
                (Tail::Periodic { dq, dv, .. }, Some(anchor), _) if &q >= anchor => {
                    let s = ((&q - anchor) / dq).floor();
                    let phase = &q - anchor - &s * dq;
                    let w: Vec<String> = v
                        .iter()
                        .zip(dv)
                        .map(|(x, d)| format_ratio(&(x - &s * d)))
                        .collect();
                    Some(format!("{}|{}|{}", format_ratio(&phase), w.join(","), prev_l))
                }
                (Tail::Finite, _, Some(h)) if &q > h => {
                    let diffs: Vec<String> =
                        v.iter().map(|x| format_ratio(&(x - &v[0]))).collect();
                    Some(format!("{}|{}", diffs.join(","), prev_l))
                }
                _ => None,
            };
            if let Some(sig) = sig {
                if let Some(&idx) = seen.get(&sig) {
                    let (q_a, v_a) = &states[idx];
                    let m = body.len() - idx;
                    let dq = &q - q_a;
                    let dv: Vec<BigRational> =
                        v.iter().zip(v_a).map(|(b, a)| b - a).collect();
                    tail = Tail::Periodic { m, dq, dv };
                    break;
                }
                seen.insert(sig, body.len());
            }
            states.push((q.clone(), v.clone()));
            // reference values to chase (sorted-slot-wise); below the input's
            // domain or beyond a finite horizon we climb in balance instead
            let reference = if &q >= &self.q0 && horizon.as_ref().map_or(true, |h| &q <= h) {
                Some(self.evaluate(&q)?)
            } else {
                None
            };
            // pick the most-lagging component that interlocks (S3)
            let mut pick: Option<(usize, BigRational)> = None;
            for j in 0..n {
                if v[j] >= prev_end {
                    continue;
                }
                let deficit = match &reference {
                    Some(l) => &l[j] - &v[j],
                    None => -&v[j],
                };
                if pick.as_ref().map_or(true, |(_, best)| &deficit > best) {
                    pick = Some((j, deficit));
                }
            }
            let (k, _) = pick.expect("the bottom component is always eligible");
            // target: the reference value rounded up to the mesh, at least
            // one mesh step up, above the other components' minimum, and
            // distinct from every other value
            let mut target = match &reference {
                Some(l) => (&l[k] / &chi).ceil() * &chi,
                None => &v[n - 1] + &chi,
            };
            let floor = &v[k] + &chi;
            if target < floor {
                target = floor;
            }
            let other_min = v
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, x)| x.clone())
                .min()
                .unwrap();
            while target <= other_min || v.iter().enumerate().any(|(j, x)| j != k && *x == target)
            {
                target += &chi;
            }
            body.push(Switch { q: q.clone(), values: v.clone(), k: k + 1, l: Some(prev_l) });
            q += &target - &v[k];
            v[k] = target.clone();
            v.sort();
            prev_l = v.iter().rposition(|x| x == &target).unwrap() + 1;
            prev_end = target;
        }
        switches.extend(body);
        let out = NSystem::new_unchecked(n, switches, tail, Some(chi.clone()));
        self.check_rigid_contract(&out, c_prime)?;
        Ok(out)
    }

    /// Machine check of the four rigidification clauses (exact arithmetic).
    fn check_rigid_contract(
        &self,
        out: &NSystem,
        c_prime: &BigRational,
    ) -> Result<(), NSystemError> {
        let n = self.n;
        let chi = c_prime / BigRational::from_integer(BigInt::from(2));
        let onset = NSystem::rigid_onset(n, c_prime);
        // (1) structural validity
        let violations = out.validate();
        if !violations.is_empty() {
            return Err(NSystemError::Contract(format!(
                "output failed validation: {}",
                violations[0]
            )));
        }
        // (2) rigid of mesh c′/2 from the onset
        if !out.is_rigid_from(&chi, &onset) {
            return Err(NSystemError::Contract(format!(
                "output is not rigid of mesh {} from q = {}",
                format_ratio(&chi),
                format_ratio(&onset)
            )));
        }
        // (3) sup-distance over the comparable window
        let budget = c_prime * BigRational::from_integer(BigInt::from((4 * n * n) as i64));
        let w_lo = self.q0.clone();
        let w_hi = match (&self.tail, &out.tail) {
            (Tail::Finite, _) => self.horizon().unwrap(),
            (Tail::Periodic { m: m_l, dq: dq_l, .. }, Tail::Periodic { m: m_r, dq: dq_r, .. }) => {
                let anchor_l = self.switches[self.switches.len() - m_l].q.clone();
                let anchor_r = out.switches[out.switches.len() - m_r].q.clone();
                let sync = anchor_l.max(anchor_r);
                sync + rational_lcm(dq_l, dq_r)
            }
            _ => {
                return Err(NSystemError::Contract(
                    "cannot bound the comparison window for this tail".into(),
                ))
            }
        };
        let mut qs = self.critical_points(&w_lo, &w_hi)?;
        qs.extend(out.critical_points(&w_lo, &w_hi)?);
        qs.sort();
        qs.dedup();
        for q in &qs {
            let l = self.evaluate(q)?;
            let r = out.evaluate(q)?;
            for j in 0..n {
                let gap = (&l[j] - &r[j]).abs();
                if gap > budget {
                    return Err(NSystemError::Contract(format!(
                        "|L_{} − R_{}| = {} at q = {} exceeds the budget {}",
                        j + 1,
                        j + 1,
                        format_ratio(&gap),
                        format_ratio(q),
                        format_ratio(&budget)
                    )));
                }
            }
        }
        // (4) the bottom component rises with slope 1 on [q₀, q₀ + c′/2]
        // (its slopes never exceed 1, so the endpoint increment decides)
        let lo = out.evaluate(&onset)?;
        let hi = out.evaluate(&(&onset + &chi))?;
        if &hi[0] - &lo[0] != chi {
            return Err(NSystemError::Contract(
                "the bottom component does not rise with slope 1 after the onset".into(),
            ));
        }
        Ok(())
    }

    // -- exponents -----------------------------------------------------------------

    /// Ratio spectra and approximation exponents of the system.
    /// Exact for periodic and self-similar tails; finite-horizon systems get
    /// window estimates (`exact = false`).
    pub fn exponents(&self) -> Result<ExponentReport, NSystemError> {
        // P₁ must be unbounded
        match &self.tail {
            Tail::Periodic { dv, .. } => {
                if !dv[0].is_positive() {
                    return Err(NSystemError::BoundedFirstComponent);
                }
            }
            Tail::Geometric { m, .. } => {
                let start = self.switches.len() - m;
                if !self.switches[start].values[0].is_positive() {
                    return Err(NSystemError::BoundedFirstComponent);
                }
            }
            Tail::Finite => {}
        }
        let n = self.n;
        match &self.tail {
            Tail::Periodic { dq, dv, .. } => {
                // ratios converge: P_j(q)/q → Δv_j/Δq for every component
                let phi: Vec<BigRational> = dv.iter().map(|d| d / dq).collect();
                let mut psi = Vec::with_capacity(n);
                let mut acc = rz();
                for p in &phi {
                    acc += p;
                    psi.push(acc.clone());
                }
                Ok(ExponentReport::from_bounds(
                    phi.clone(),
                    phi,
                    psi.clone(),
                    psi,
                    true,
                ))
            }
            Tail::Geometric { m, ratio } => {
                // P(ρq) = ρP(q) exactly: one period determines everything
                let start = self.switches.len() - m;
                let lo = self.switches[start].q.clone();
                let hi = &lo * ratio;
                let qs = self.critical_points(&lo, &hi)?;
                self.window_bounds(&qs).map(|(pl, pu, sl, su)| {
                    ExponentReport::from_bounds(pl, pu, sl, su, true)
                })
            }
            Tail::Finite => {
                let hi = self.horizon().unwrap();
                let lo: BigRational = &hi / BigRational::from_integer(2.into());
                let lo = lo.max(self.q0.clone());
                if lo >= hi {
                    return Err(NSystemError::Unsupported(
                        "horizon too short for exponent estimation".into(),
                    ));
                }
                let qs = self.critical_points(&lo, &hi)?;
                self.window_bounds(&qs).map(|(pl, pu, sl, su)| {
                    ExponentReport::from_bounds(pl, pu, sl, su, false)
                })
            }
        }
    }

    /// min/max of `P_j(q)/q` and of partial sums over the given q values.
    #[allow(clippy::type_complexity)]
    fn window_bounds(
        &self,
        qs: &[BigRational],
    ) -> Result<
        (Vec<BigRational>, Vec<BigRational>, Vec<BigRational>, Vec<BigRational>),
        NSystemError,
    > {
        let n = self.n;
        let mut phi_lo: Vec<Option<BigRational>> = vec![None; n];
        let mut phi_hi: Vec<Option<BigRational>> = vec![None; n];
        let mut psi_lo: Vec<Option<BigRational>> = vec![None; n];
        let mut psi_hi: Vec<Option<BigRational>> = vec![None; n];
        for q in qs {
            if !q.is_positive() {
                continue;
            }
            let v = self.evaluate(q)?;
            let mut acc = rz();
            for j in 0..n {
                let r = &v[j] / q;
                upd(&mut phi_lo[j], &mut phi_hi[j], &r);
                acc += &v[j];
                let s = &acc / q;
                upd(&mut psi_lo[j], &mut psi_hi[j], &s);
            }
        }
        let unwrapv = |v: Vec<Option<BigRational>>| -> Vec<BigRational> {
            v.into_iter().map(|x| x.unwrap()).collect()
        };
        Ok((unwrapv(phi_lo), unwrapv(phi_hi), unwrapv(psi_lo), unwrapv(psi_hi)))
    }

    // -- scalar extension ---------------------------------------------------------

    /// Extension of scalars on the system side: the generalized system
    /// `R_{d(i−1)+j}(q) = P_i(q/d)`, an nd-component map with slopes 0 and
    /// 1/d.  `d = 1` returns the input unchanged.
    pub fn extend_scalars(&self, d: usize) -> GeneralizedSystem {
        GeneralizedSystem { base: self.clone(), d }
    }

    // -- JSON -----------------------------------------------------------------------

    pub fn from_json(text: &str) -> Result<Self, NSystemError> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| NSystemError::Parse(e.to_string()))?;
        Self::from_json_value(&v)
    }

    pub fn from_json_value(v: &serde_json::Value) -> Result<Self, NSystemError> {
        let n = v
            .get("n")
            .and_then(|x| x.as_u64())
            .ok_or_else(|| NSystemError::Parse("missing \"n\"".into()))? as usize;
        let switches_v = v
            .get("switches")
            .and_then(|x| x.as_array())
            .ok_or_else(|| NSystemError::Parse("missing \"switches\" array".into()))?;
        let mut switches = Vec::with_capacity(switches_v.len());
        for (i, sv) in switches_v.iter().enumerate() {
            let q = ratio_field(sv, "q")?;
            let values = sv
                .get("values")
                .and_then(|x| x.as_array())
                .ok_or_else(|| NSystemError::Parse(format!("switch {i}: missing values")))?
                .iter()
                .map(json_ratio)
                .collect::<Result<Vec<_>, _>>()?;
            let k = sv
                .get("k")
                .and_then(|x| x.as_u64())
                .ok_or_else(|| NSystemError::Parse(format!("switch {i}: missing k")))?
                as usize;
            let l = match sv.get("l") {
                None | Some(serde_json::Value::Null) => None,
                Some(x) => Some(x.as_u64().ok_or_else(|| {
                    NSystemError::Parse(format!("switch {i}: bad l"))
                })? as usize),
            };
            switches.push(Switch { q, values, k, l });
        }
        let tail = match v.get("tail") {
            None => Tail::Finite,
            Some(tv) => match tv.get("kind").and_then(|x| x.as_str()) {
                Some("finite") | None => Tail::Finite,
                Some("periodic") => {
                    let m = tv
                        .get("m")
                        .and_then(|x| x.as_u64())
                        .ok_or_else(|| NSystemError::Parse("periodic tail needs m".into()))?
                        as usize;
                    let dq = ratio_field(tv, "dq")?;
                    let dv = tv
                        .get("dv")
                        .and_then(|x| x.as_array())
                        .ok_or_else(|| NSystemError::Parse("periodic tail needs dv".into()))?
                        .iter()
                        .map(json_ratio)
                        .collect::<Result<Vec<_>, _>>()?;
                    Tail::Periodic { m, dq, dv }
                }
                Some("geometric") => {
                    let m = tv
                        .get("m")
                        .and_then(|x| x.as_u64())
                        .ok_or_else(|| NSystemError::Parse("geometric tail needs m".into()))?
                        as usize;
                    let ratio = ratio_field(tv, "ratio")?;
                    Tail::Geometric { m, ratio }
                }
                Some(other) => {
                    return Err(NSystemError::Parse(format!("unknown tail kind {other:?}")))
                }
            },
        };
        let mesh = match v.get("mesh") {
            None | Some(serde_json::Value::Null) => None,
            Some(x) => Some(json_ratio(x)?),
        };
        Ok(NSystem::new_unchecked(n, switches, tail, mesh))
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let switches: Vec<serde_json::Value> = self
            .switches
            .iter()
            .map(|s| {
                let mut obj = serde_json::json!({
                    "q": format_ratio(&s.q),
                    "values": s.values.iter().map(format_ratio).collect::<Vec<_>>(),
                    "k": s.k,
                });
                if let Some(l) = s.l {
                    obj["l"] = serde_json::json!(l);
                }
                obj
            })
            .collect();
        let tail = match &self.tail {
            Tail::Finite => serde_json::json!({"kind": "finite"}),
            Tail::Periodic { m, dq, dv } => serde_json::json!({
                "kind": "periodic",
                "m": m,
                "dq": format_ratio(dq),
                "dv": dv.iter().map(format_ratio).collect::<Vec<_>>(),
            }),
            Tail::Geometric { m, ratio } => serde_json::json!({
                "kind": "geometric",
                "m": m,
                "ratio": format_ratio(ratio),
            }),
        };
        let mut out = serde_json::json!({
            "n": self.n,
            "q0": format_ratio(&self.q0),
            "switches": switches,
            "tail": tail,
        });
        if let Some(mesh) = &self.mesh {
            out["mesh"] = serde_json::json!(format_ratio(mesh));
        }
        out
    }
}

fn upd(lo: &mut Option<BigRational>, hi: &mut Option<BigRational>, r: &BigRational) {
    match lo {
        None => *lo = Some(r.clone()),
        Some(v) if r < v => *lo = Some(r.clone()),
        _ => {}
    }
    match hi {
        None => *hi = Some(r.clone()),
        Some(v) if r > v => *hi = Some(r.clone()),
        _ => {}
    }
}

/// Least common multiple of two positive rationals (smallest positive value
/// that is an integer multiple of both).
fn rational_lcm(a: &BigRational, b: &BigRational) -> BigRational {
    use num_integer::Integer;
    let den = a.denom().lcm(b.denom());
    let an = a.numer() * (&den / a.denom());
    let bn = b.numer() * (&den / b.denom());
    BigRational::new(an.lcm(&bn), den)
}

fn json_ratio(v: &serde_json::Value) -> Result<BigRational, NSystemError> {
    match v {
        serde_json::Value::String(s) => parse_ratio(s).map_err(NSystemError::Parse),
        serde_json::Value::Number(n) => {
            parse_ratio(&n.to_string()).map_err(NSystemError::Parse)
        }
        other => Err(NSystemError::Parse(format!("expected a number, got {other}"))),
    }
}

fn ratio_field(v: &serde_json::Value, key: &str) -> Result<BigRational, NSystemError> {
    json_ratio(
        v.get(key)
            .ok_or_else(|| NSystemError::Parse(format!("missing \"{key}\"")))?,
    )
}

// ---------------------------------------------------------------------------
// duals

/// The dual `P*(q) = (q − P_n(q), …, q − P_1(q))` of an n-system, kept as a
/// wrapper so the involution `(P*)* = P` is exact.  The dual of an n-system
/// is generally not an n-system (n−1 components rise at once), but it is
/// evaluated and serialized in the same switch format.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSystem {
    pub primal: NSystem,
}

impl DualSystem {
    pub fn evaluate(&self, q: &BigRational) -> Result<Vec<BigRational>, NSystemError> {
        let p = self.primal.evaluate(q)?;
        Ok(p.iter().rev().map(|v| q - v).collect())
    }

    /// The dual of the dual: the original system back, exactly.
    pub fn dual(&self) -> NSystem {
        self.primal.clone()
    }

    /// Switch records of the dual map (values transformed; the single flat
    /// component replaces the single riser).
    pub fn to_json_value(&self) -> serde_json::Value {
        let n = self.primal.n;
        let switches: Vec<serde_json::Value> = self
            .primal
            .switches
            .iter()
            .map(|s| {
                let values: Vec<String> = s
                    .values
                    .iter()
                    .rev()
                    .map(|v| format_ratio(&(&s.q - v)))
                    .collect();
                serde_json::json!({
                    "q": format_ratio(&s.q),
                    "values": values,
                    "flat": n + 1 - s.k,
                })
            })
            .collect();
        serde_json::json!({
            "n": n,
            "q0": format_ratio(&self.primal.q0),
            "kind": "dual",
            "switches": switches,
        })
    }
}

// ---------------------------------------------------------------------------
// generalized systems (extension of scalars)

/// The image of an n-system under extension of scalars by degree `d`:
/// an nd-component map whose components rise with slope 1/d, with
/// `R_{d(i−1)+j}(q) = P_i(q/d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedSystem {
    pub base: NSystem,
    pub d: usize,
}

impl GeneralizedSystem {
    pub fn components(&self) -> usize {
        self.base.n * self.d
    }

    pub fn slope(&self) -> BigRational {
        BigRational::new(BigInt::one(), BigInt::from(self.d as i64))
    }

    pub fn evaluate(&self, q: &BigRational) -> Result<Vec<BigRational>, NSystemError> {
        let inner = q / BigRational::from_integer(BigInt::from(self.d as i64));
        let p = self.base.evaluate(&inner)?;
        let mut out = Vec::with_capacity(self.components());
        for v in p {
            for _ in 0..self.d {
                out.push(v.clone());
            }
        }
        Ok(out)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": "generalized",
            "n": self.components(),
            "slope": format_ratio(&self.slope()),
            "base": self.base.to_json_value(),
            "d": self.d,
        })
    }
}

// ---------------------------------------------------------------------------
// exponent reports

/// A possibly-infinite exponent value.
#[derive(Debug, Clone, PartialEq)]
pub enum ExtReal {
    Finite(BigRational),
    PosInf,
}

impl ExtReal {
    /// 1/x − 1 with 1/0 = ∞.
    fn recip_minus_one(x: &BigRational) -> ExtReal {
        if x.is_zero() {
            ExtReal::PosInf
        } else {
            ExtReal::Finite(x.recip() - BigRational::one())
        }
    }
    pub fn to_f64(&self) -> f64 {
        match self {
            ExtReal::Finite(r) => ratio_to_f64(r),
            ExtReal::PosInf => f64::INFINITY,
        }
    }
    pub fn as_ratio(&self) -> Option<&BigRational> {
        match self {
            ExtReal::Finite(r) => Some(r),
            ExtReal::PosInf => None,
        }
    }
    pub fn render(&self) -> String {
        match self {
            ExtReal::Finite(r) => format_ratio(r),
            ExtReal::PosInf => "inf".into(),
        }
    }
}

/// Ratio spectra of a system and the derived approximation exponents.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentReport {
    /// Exact values (periodic tails) or window estimates (finite horizon).
    pub exact: bool,
    /// liminf / limsup of `P_j(q)/q`, j = 1..n.
    pub phi_lower: Vec<BigRational>,
    pub phi_upper: Vec<BigRational>,
    /// liminf / limsup of `(P_1 + … + P_j)(q)/q`, j = 1..n.
    pub psi_lower: Vec<BigRational>,
    pub psi_upper: Vec<BigRational>,
    /// ω = 1/φ̲₁ − 1, ω̂ = 1/φ̄₁ − 1, λ = φ̄_n/(1−φ̄_n), λ̂ = φ̲_n/(1−φ̲_n).
    pub omega: ExtReal,
    pub omega_hat: ExtReal,
    pub lambda: ExtReal,
    pub lambda_hat: ExtReal,
    /// Intermediate exponents ω_j = 1/ψ̲_{n−1−j} − 1 (j = 0..n−2); the ends
    /// reproduce λ and ω.
    pub omega_k: Vec<ExtReal>,
    pub omega_hat_k: Vec<ExtReal>,
}

impl ExponentReport {
    fn from_bounds(
        phi_lower: Vec<BigRational>,
        phi_upper: Vec<BigRational>,
        psi_lower: Vec<BigRational>,
        psi_upper: Vec<BigRational>,
        exact: bool,
    ) -> Self {
        let n = phi_lower.len();
        let one = BigRational::one();
        let omega = ExtReal::recip_minus_one(&phi_lower[0]);
        let omega_hat = ExtReal::recip_minus_one(&phi_upper[0]);
        let lam = |phi_n: &BigRational| -> ExtReal {
            let denom = &one - phi_n;
            if denom.is_zero() {
                ExtReal::PosInf
            } else {
                ExtReal::Finite(phi_n / denom)
            }
        };
        let lambda = lam(&phi_upper[n - 1]);
        let lambda_hat = lam(&phi_lower[n - 1]);
        let mut omega_k = Vec::with_capacity(n - 1);
        let mut omega_hat_k = Vec::with_capacity(n - 1);
        for j in 0..n - 1 {
            omega_k.push(ExtReal::recip_minus_one(&psi_lower[n - 2 - j]));
            omega_hat_k.push(ExtReal::recip_minus_one(&psi_upper[n - 2 - j]));
        }
        ExponentReport {
            exact,
            phi_lower,
            phi_upper,
            psi_lower,
            psi_upper,
            omega,
            omega_hat,
            lambda,
            lambda_hat,
            omega_k,
            omega_hat_k,
        }
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let rl = |v: &[BigRational]| -> Vec<String> { v.iter().map(format_ratio).collect() };
        let el = |v: &[ExtReal]| -> Vec<String> { v.iter().map(|e| e.render()).collect() };
        serde_json::json!({
            "exact": self.exact,
            "phi_lower": rl(&self.phi_lower),
            "phi_upper": rl(&self.phi_upper),
            "psi_lower": rl(&self.psi_lower),
            "psi_upper": rl(&self.psi_upper),
            "omega": self.omega.render(),
            "omega_hat": self.omega_hat.render(),
            "lambda": self.lambda.render(),
            "lambda_hat": self.lambda_hat.render(),
            "omega_k": el(&self.omega_k),
            "omega_hat_k": el(&self.omega_hat_k),
        })
    }
}

// ---------------------------------------------------------------------------
// canonical constructions

/// The canonical template system: switches at `t_i = (1 + … + i)·c′` with
/// values `(0, …, 0, c′, 2c′, …, i·c′)`, continued by a balanced periodic
/// tail after `t_n`.  Its restriction to `[t_n, ∞)` is rigid of mesh `c′`.
pub fn template_system(n: usize, c_prime: &BigRational) -> NSystem {
    assert!(n >= 2 && c_prime.is_positive());
    let mut switches = Vec::with_capacity(n + 1);
    let mut t = rz();
    for i in 0..=n {
        if i > 0 {
            t += c_prime * BigRational::from_integer(BigInt::from(i as i64));
        }
        let mut values = vec![rz(); n - i];
        for j in 1..=i {
            values.push(c_prime * BigRational::from_integer(BigInt::from(j as i64)));
        }
        let k = if i < n { n - i } else { 1 };
        let l = if i > 0 { Some(n) } else { None };
        switches.push(Switch { q: t.clone(), values, k, l });
    }
    let dq = c_prime * BigRational::from_integer(BigInt::from(n as i64));
    let dv = vec![c_prime.clone(); n];
    NSystem::new_unchecked(n, switches, Tail::Periodic { m: 1, dq, dv }, Some(c_prime.clone()))
}

/// The classic 2-system with one rise per doubling period: switches at
/// `q = 3·2^i` with values `(2^i, 2^{i+1})`.  Its ratio spectrum is
/// genuinely non-constant: (ω, ω̂, λ, λ̂) = (2, 1, 2, 1).
pub fn doubling_system() -> NSystem {
    let r = |x: i64| BigRational::from_integer(BigInt::from(x));
    NSystem::new_unchecked(
        2,
        vec![
            Switch { q: r(3), values: vec![r(1), r(2)], k: 1, l: None },
            Switch { q: r(6), values: vec![r(2), r(4)], k: 1, l: Some(2) },
        ],
        Tail::Geometric { m: 1, ratio: r(2) },
        Some(r(1)),
    )
}

/// A self-similar 3-system family: from sorted start values `(a, ρa, c)`
/// with `ρa ≤ c < ρ²a`, rise the bottom component to `ρ²a`, then the middle
/// one to `ρc`; the state returns to `ρ·(a, ρa, c)`.  Valid for every such
/// parameter choice, with non-constant ratio spectrum.
pub fn self_similar_3system(
    a: &BigRational,
    c: &BigRational,
    ratio: &BigRational,
) -> Result<NSystem, NSystemError> {
    let b = a * ratio;
    if !(a.is_positive() && ratio > &BigRational::one() && &b <= c && c < &(&b * ratio)) {
        return Err(NSystemError::Parse(
            "need a > 0, ρ > 1 and ρa ≤ c < ρ²a".into(),
        ));
    }
    let q1 = a + &b + c;
    let t1 = &b * ratio; // bottom rises a → ρb = ρ²a
    let q2 = &q1 + (&t1 - a);
    let q3 = &q1 * ratio; // middle rises c → ρc, landing at ρ·(a, b, c)
    // state after the first rise: sorted (b, c, ρ²a); the riser sits on top
    let s0 = Switch { q: q1, values: vec![a.clone(), b.clone(), c.clone()], k: 1, l: None };
    let s1 = Switch {
        q: q2,
        values: vec![b.clone(), c.clone(), t1.clone()],
        k: 2,
        l: Some(3),
    };
    let s2 = Switch {
        q: q3,
        values: vec![b.clone(), &b * ratio, c * ratio],
        k: 1,
        l: Some(3),
    };
    NSystem::new(
        3,
        vec![s0, s1, s2],
        Tail::Geometric { m: 2, ratio: ratio.clone() },
        None,
    )
}

// ---------------------------------------------------------------------------
// random generation

/// A random valid finite-horizon system: a seeded walk of structurally legal
/// rises on the half-integer grid.
pub fn random_valid_system(n: usize, seed: u64, steps: usize) -> NSystem {
    let mut rng = StdRng::seed_from_u64(seed);
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    // start from the staircase (1, 2, …, n)·1
    let mut values: Vec<BigRational> = (1..=n)
        .map(|i| BigRational::from_integer(BigInt::from(i as i64)))
        .collect();
    let mut q: BigRational = values.iter().fold(rz(), |a, b| a + b);
    let mut prev_end: Option<BigRational> = None;
    let mut prev_l: Option<usize> = None;
    let mut switches = Vec::with_capacity(steps + 1);
    for _ in 0..steps {
        // candidates: strictly below the previous end (S3)
        let candidates: Vec<usize> = (0..n)
            .filter(|&j| match &prev_end {
                None => true,
                Some(e) => &values[j] < e,
            })
            .collect();
        let k = candidates[rng.gen_range(0..candidates.len())];
        // pick a target: a few half-steps above the start, above the minimum
        // of the other components so the walk never jams
        let other_min = values
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .map(|(_, v)| v.clone())
            .min()
            .unwrap();
        let mut target = &values[k]
            + &half * BigRational::from_integer(BigInt::from(rng.gen_range(1..=8)));
        while target <= other_min {
            target += &half;
        }
        switches.push(Switch { q: q.clone(), values: values.clone(), k: k + 1, l: prev_l });
        let rise = &target - &values[k];
        q += &rise;
        values[k] = target.clone();
        values.sort();
        // the riser's landing index (highest among equals)
        let land = values.iter().rposition(|v| v == &target).unwrap() + 1;
        prev_l = Some(land);
        prev_end = Some(target);
    }
    switches.push(Switch { q: q.clone(), values: values.clone(), k: 1, l: prev_l });
    NSystem::new_unchecked(n, switches, Tail::Finite, None)
}

/// A random valid system with an additive periodic tail: a seeded burn-in
/// walk followed by a balanced closing cycle (each component rises past the
/// top once per period, which always interlocks).
pub fn random_periodic_system(n: usize, seed: u64) -> NSystem {
    let mut rng = StdRng::seed_from_u64(seed);
    let burn = rng.gen_range(2..6);
    let base = random_valid_system(n, seed.wrapping_add(1), burn);
    let mut switches = base.switches;
    // the walk's final state becomes the cycle's first switch (its
    // placeholder rise index is overwritten with the cycle rule: bottom up)
    let mut cursor = switches.pop().unwrap();
    let mut values = cursor.values.clone();
    let mut q = cursor.q.clone();
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    // closing cycle: rise the bottom component past the top by a random
    // offset pattern; the bottom is always strictly below the previous end
    // (the current top), so this interlocks for any offsets
    let offsets: Vec<BigRational> = (0..n)
        .map(|_| &half * BigRational::from_integer(BigInt::from(rng.gen_range(1..=4))))
        .collect();
    // one transient pass locks the state onto the cycle's track (every value
    // becomes "previous top plus a partial offset sum"); the second pass then
    // repeats with the exact constant shift Σ offsets per component
    let mut cycle = Vec::new();
    for pass in 0..2 {
        for offset in &offsets {
            cursor.k = 1;
            if pass == 0 {
                switches.push(cursor.clone());
            } else {
                cycle.push(cursor.clone());
            }
            let top = values[n - 1].clone();
            let target = &top + offset;
            let rise = &target - &values[0];
            q += &rise;
            values.remove(0);
            values.push(target);
            cursor = Switch { q: q.clone(), values: values.clone(), k: 1, l: Some(n) };
        }
    }
    let m = cycle.len();
    let dq = &q - &cycle[0].q;
    let dv: Vec<BigRational> = values
        .iter()
        .zip(&cycle[0].values)
        .map(|(a, b)| a - b)
        .collect();
    switches.extend(cycle);
    NSystem::new_unchecked(n, switches, Tail::Periodic { m, dq, dv }, None)
}

/// A random self-similar 3-system from the `(a, ρa, c; ρ)` family.
pub fn random_self_similar_3system(seed: u64) -> NSystem {
    let mut rng = StdRng::seed_from_u64(seed);
    let a = BigRational::from_integer(BigInt::from(rng.gen_range(1..4)));
    // ρ ∈ {5/4, 3/2, 7/4, 2, 9/4, 5/2}
    let ratio = BigRational::new(BigInt::from(rng.gen_range(5..11)), BigInt::from(4));
    let b = &a * &ratio;
    let hi = &b * &ratio;
    // c strictly between ρa and ρ²a (quarter-integer grid)
    let span = &hi - &b;
    let c = &b
        + &span * BigRational::new(BigInt::from(rng.gen_range(0..4)), BigInt::from(4));
    let c = if c >= hi { &hi - BigRational::new(BigInt::one(), BigInt::from(8)) } else { c };
    self_similar_3system(&a, &c, &ratio).expect("family parameters are valid by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(x: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(x))
    }
    fn rq(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn template_is_valid_and_matches_switch_values() {
        let sys = template_system(3, &r(1));
        assert!(sys.validate().is_empty(), "{:?}", sys.validate());
        // t_i = 0, 1, 3, 6 with values (0,0,0), (0,0,1), (0,1,2), (1,2,3)
        assert_eq!(sys.evaluate(&r(3)).unwrap(), vec![r(0), r(1), r(2)]);
        assert_eq!(sys.evaluate(&r(6)).unwrap(), vec![r(1), r(2), r(3)]);
        // rigid of mesh 1 from t_n on
        assert!(sys.is_rigid_from(&r(1), &r(6)));
        assert!(!sys.is_rigid(&r(1))); // the zero prefix is not rigid
    }

    #[test]
    fn doubling_system_evaluates_and_is_rigid() {
        let sys = doubling_system();
        assert!(sys.validate().is_empty(), "{:?}", sys.validate());
        assert_eq!(sys.evaluate(&r(4)).unwrap(), vec![r(2), r(2)]);
        assert_eq!(sys.evaluate(&r(6)).unwrap(), vec![r(2), r(4)]);
        assert_eq!(sys.evaluate(&r(12)).unwrap(), vec![r(4), r(8)]);
        assert_eq!(sys.evaluate(&r(48)).unwrap(), vec![r(16), r(32)]);
        assert!(sys.is_rigid(&r(1)));
        assert!(!sys.is_rigid(&r(2))); // odd multiples appear
    }

    #[test]
    fn s3_violations_are_reported() {
        // two rises where the second starts above the first one's end
        let sys = NSystem::new_unchecked(
            2,
            vec![
                Switch { q: r(3), values: vec![r(1), r(2)], k: 1, l: None },
                // rise 1 → 2 ends at 2; next rise starts at 2: not strictly below
                Switch { q: r(4), values: vec![r(2), r(2)], k: 2, l: Some(1) },
            ],
            Tail::Finite,
            None,
        );
        let v = sys.validate();
        assert!(
            v.iter().any(|x| x.condition == "S3" || x.condition == "S2"),
            "expected a structural violation, got {v:?}"
        );
    }

    #[test]
    fn sum_matches_q_on_a_grid() {
        let sys = random_periodic_system(3, 7);
        assert!(sys.validate().is_empty(), "{:?}", sys.validate());
        let mut q = sys.q0.clone();
        for _ in 0..60 {
            let v = sys.evaluate(&q).unwrap();
            let sum: BigRational = v.iter().fold(r(0), |a, b| a + b);
            assert_eq!(sum, q);
            assert!(v.windows(2).all(|w| w[0] <= w[1]));
            q += rq(3, 4);
        }
    }

    #[test]
    fn dual_is_an_involution_and_fixes_2systems() {
        let sys = random_periodic_system(2, 11);
        let dual = sys.dual();
        let mut q = sys.q0.clone();
        for _ in 0..25 {
            let p = sys.evaluate(&q).unwrap();
            let d = dual.evaluate(&q).unwrap();
            assert_eq!(p, d, "2-systems are self-dual");
            q += rq(5, 8);
        }
        // template 3-system at t_2: values (0, 1, 2), dual (1, 2, 3)
        let t3 = template_system(3, &r(1));
        let d3 = t3.dual();
        assert_eq!(d3.evaluate(&r(3)).unwrap(), vec![r(1), r(2), r(3)]);
        // involution: dual of the dual is the primal, exactly
        assert_eq!(d3.dual(), t3);
    }

    #[test]
    fn doubling_exponents_are_the_known_quadruple() {
        let sys = doubling_system();
        let e = sys.exponents().unwrap();
        assert!(e.exact);
        assert_eq!(e.phi_lower, vec![rq(1, 3), rq(1, 2)]);
        assert_eq!(e.phi_upper, vec![rq(1, 2), rq(2, 3)]);
        assert_eq!(e.omega, ExtReal::Finite(r(2)));
        assert_eq!(e.omega_hat, ExtReal::Finite(r(1)));
        assert_eq!(e.lambda, ExtReal::Finite(r(2)));
        assert_eq!(e.lambda_hat, ExtReal::Finite(r(1)));
    }

    #[test]
    fn balanced_periodic_exponents_hit_dirichlet() {
        let sys = template_system(3, &r(1));
        let e = sys.exponents().unwrap();
        assert!(e.exact);
        for j in 0..3 {
            assert_eq!(e.phi_lower[j], rq(1, 3));
            assert_eq!(e.phi_upper[j], rq(1, 3));
        }
        assert_eq!(e.omega, ExtReal::Finite(r(2)));
        assert_eq!(e.omega_hat, ExtReal::Finite(r(2)));
        assert_eq!(e.lambda, ExtReal::Finite(rq(1, 2)));
        assert_eq!(e.lambda_hat, ExtReal::Finite(rq(1, 2)));
        // ω_k endpoints reproduce λ and ω
        assert_eq!(e.omega_k[0], e.lambda);
        assert_eq!(e.omega_k[2 - 1], e.omega);
    }

    #[test]
    fn self_similar_3system_fixture_spectrum() {
        // start (1, 2, 3), ratio 2: switches (6,(1,2,3)) and (9,(2,3,4))
        let sys = self_similar_3system(&r(1), &r(3), &r(2)).unwrap();
        assert_eq!(sys.evaluate(&r(12)).unwrap(), vec![r(2), r(4), r(6)]);
        assert_eq!(sys.evaluate(&r(18)).unwrap(), vec![r(4), r(6), r(8)]);
        let e = sys.exponents().unwrap();
        assert_eq!(e.phi_lower[0], rq(1, 6));
        assert_eq!(e.phi_upper[0], rq(2, 7));
        assert_eq!(e.phi_lower[2], rq(3, 8));
        assert_eq!(e.phi_upper[2], rq(1, 2));
        // the n = 3 interlocking identity, exactly:
        // (1 − 2φ̄₁)(1 − 2φ̲₃) = φ̄₁·φ̲₃
        let lhs = (r(1) - r(2) * &e.phi_upper[0]) * (r(1) - r(2) * &e.phi_lower[2]);
        let rhs = &e.phi_upper[0] * &e.phi_lower[2];
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn extension_of_scalars_duplicates_components() {
        let sys = doubling_system();
        let ext = sys.extend_scalars(2);
        assert_eq!(ext.components(), 4);
        assert_eq!(ext.slope(), rq(1, 2));
        // R(12) = P(6) duplicated = (2, 2, 4, 4)
        assert_eq!(ext.evaluate(&r(12)).unwrap(), vec![r(2), r(2), r(4), r(4)]);
        // component sum equals q
        let v = ext.evaluate(&r(20)).unwrap();
        let sum: BigRational = v.iter().fold(r(0), |a, b| a + b);
        assert_eq!(sum, r(20));
        // d = 1 keeps evaluations identical
        let id = sys.extend_scalars(1);
        assert_eq!(id.evaluate(&r(7)).unwrap(), sys.evaluate(&r(7)).unwrap());
    }

    #[test]
    fn json_round_trip_preserves_evaluation() {
        let sys = random_periodic_system(3, 23);
        let text = serde_json::to_string(&sys.to_json_value()).unwrap();
        let back = NSystem::from_json(&text).unwrap();
        assert!(back.validate().is_empty());
        let mut q = sys.q0.clone();
        for _ in 0..20 {
            assert_eq!(sys.evaluate(&q).unwrap(), back.evaluate(&q).unwrap());
            q += rq(7, 8);
        }
    }

    #[test]
    fn random_generators_produce_valid_systems() {
        for seed in 0..30u64 {
            let s1 = random_valid_system(3, seed, 8);
            assert!(s1.validate().is_empty(), "seed {seed}: {:?}", s1.validate());
            let s2 = random_periodic_system(3, seed);
            assert!(s2.validate().is_empty(), "seed {seed}: {:?}", s2.validate());
            let s3 = random_self_similar_3system(seed);
            assert!(s3.validate().is_empty(), "seed {seed}: {:?}", s3.validate());
        }
    }

    #[test]
    fn rigidify_template_meets_every_clause() {
        let sys = template_system(3, &r(1));
        let out = sys.rigidify(&r(1)).unwrap();
        assert!(out.validate().is_empty());
        // rigid of mesh 1/2 from (n² − n + 1)/2 = 7/2 on
        let onset = NSystem::rigid_onset(3, &r(1));
        assert_eq!(onset, rq(7, 2));
        assert!(out.is_rigid_from(&rq(1, 2), &onset));
        // the bottom component rises with slope 1 right after the onset
        let a = out.evaluate(&onset).unwrap();
        let b = out.evaluate(&(onset + rq(1, 2))).unwrap();
        assert_eq!(&b[0] - &a[0], rq(1, 2));
    }

    #[test]
    fn rigidify_tracks_random_periodic_systems() {
        for seed in [1u64, 5, 9] {
            let sys = random_periodic_system(3, seed);
            let out = sys.rigidify(&r(1)).unwrap_or_else(|e| {
                panic!("seed {seed}: rigidify failed: {e}");
            });
            assert!(out.is_rigid_from(&rq(1, 2), &NSystem::rigid_onset(3, &r(1))));
            // spot-check the sup clause on a few grid points
            let budget = r(36); // 4n²c′ for n = 3, c′ = 1
            let mut q = sys.q0.clone();
            for _ in 0..40 {
                let l = sys.evaluate(&q).unwrap();
                let rv = out.evaluate(&q).unwrap();
                for j in 0..3 {
                    assert!((&l[j] - &rv[j]).abs() <= budget);
                }
                q += rq(2, 3);
            }
        }
    }

    #[test]
    fn rigidify_closes_finite_inputs_into_periodic_outputs() {
        let sys = random_valid_system(3, 4, 6);
        let out = sys.rigidify(&rq(1, 2)).unwrap();
        assert!(matches!(out.tail, Tail::Periodic { .. }));
        assert!(out.is_rigid_from(&rq(1, 4), &NSystem::rigid_onset(3, &rq(1, 2))));
    }

    #[test]
    fn rigidify_rejects_self_similar_tails() {
        let sys = doubling_system();
        assert!(matches!(
            sys.rigidify(&r(1)),
            Err(NSystemError::Unsupported(_))
        ));
    }

    #[test]
    fn evaluation_outside_domain_errors() {
        let sys = random_valid_system(2, 3, 4);
        let h = sys.horizon().unwrap();
        assert!(sys.evaluate(&(h + r(1))).is_err());
        assert!(sys.evaluate(&(sys.q0.clone() - r(1))).is_err());
    }
}
