//! The acceptance gate: eleven end-to-end checks, one per `criterion_*`
//! test, so the harness prints a pass/fail line for each.  Every numeric
//! tolerance below is frozen from a calibration run of the independent
//! brute-force routes; the measured value is recorded next to each constant.
//!
//! The suite is budgeted per criterion and asserts its own wall-clock
//! ceilings, so a performance regression fails loudly rather than silently
//! stretching CI.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use parageo::construct::{
    build_chain, derive_schedule, synthesize_point, verify, ConstructionConstants, VerifyMode,
};
use parageo::extension::{
    exponent_transfer, golden_extremal_exponents, pullback_comparability_check,
    uniform_identity_residual, uniform_identity_residual_f64, verify_profile_transfer,
    ExponentQuartet, ExtendedRational, ScalarExtension,
};
use parageo::exterior::{
    dist_subspaces, orthogonal_complement, wedge_all, GradedVector, PlaceMetric,
};
use parageo::minima::{
    duality_sum_check, oracle_profile, profile, q_grid, EnumerationBudget, MinimaProfile,
    ProfileForm,
};
use parageo::nsystem::{
    doubling_system, random_periodic_system, random_valid_system, template_system, NSystem,
    Switch, Tail,
};
use parageo::numberfield::{parse_xi_expr, ApproximationTarget, FieldContext};
use parageo::scalar::{Magnitude, Quad, Scalar};

// frozen tolerances, one calibration note each
/// Accelerated vs brute-force minima (measured: exact agreement, 0.0).
const ORACLE_MATCH: f64 = 1e-9;
/// Top-grade vs star profile (measured: 2.6e-12 on the widest grid).
const GRADE_DUALITY: f64 = 1e-10;
/// Allowed growth of sum gaps when the horizon doubles (measured: 6e-4).
const HORIZON_GROWTH: f64 = 0.5;
/// Absolute cap on the duality sum rule (measured: 0.33).
const SUM_RULE_CAP: f64 = 2.0;
/// Cap on the extension-transfer gap families (measured: 0.38 / 0.52).
const TRANSFER_CAP: f64 = 2.0;
/// Cap on the pullback deviation ladder (measured: 0.35).
const PULLBACK_CAP: f64 = 1.0;
/// Enumeration tracking bound for the desk-scale base (measured: 0.96).
const HEURISTIC_TRACKING: f64 = 3.0;

// ---------------------------------------------------------------------------
// shared scaffolding

/// Deterministic splitmix64 stream for reproducible random instances.
struct Rng(u64);

impl Rng {
    fn new(seed: u64) -> Self {
        Rng(seed)
    }
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }
    fn int(&mut self, lo: i64, hi: i64) -> i64 {
        lo + (self.next() % ((hi - lo + 1) as u64)) as i64
    }
}

fn rq(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn ri(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

// `Scalar` shadows the `num_traits` methods on `BigRational`; route the few
// uses through helpers so call sites stay unambiguous
fn is_zero_rat(r: &BigRational) -> bool {
    Zero::is_zero(r)
}

fn rone() -> BigRational {
    One::one()
}

fn rzero() -> BigRational {
    Zero::zero()
}

fn rational_target(coords: &[&str]) -> ApproximationTarget {
    let field = FieldContext::rational();
    let place = field.archimedean_places()[0].clone();
    let xi = coords.iter().map(|s| parse_xi_expr(s).unwrap()).collect();
    ApproximationTarget::new(field, place, xi).unwrap()
}

/// Point and star profiles on a shared grid, computed once per target and
/// reused across criteria (the structure, duality, and oracle checks all
/// read the same curves).
struct Bundle {
    grid: Vec<f64>,
    point: MinimaProfile,
    star: MinimaProfile,
}

fn bundle(cell: &'static OnceLock<Bundle>, coords: &[&str], qmax: f64) -> &'static Bundle {
    cell.get_or_init(|| {
        let t = rational_target(coords);
        let grid = q_grid(0.0, qmax, 0.25);
        let budget = EnumerationBudget::default();
        let point = profile(&t, &ProfileForm::Grade(1), &grid, &budget).unwrap();
        let star = profile(&t, &ProfileForm::Star, &grid, &budget).unwrap();
        Bundle { grid, point, star }
    })
}

static GOLDEN: OnceLock<Bundle> = OnceLock::new();
static DEGENERATE: OnceLock<Bundle> = OnceLock::new();

fn golden_bundle() -> &'static Bundle {
    bundle(&GOLDEN, &["1", "1.6180339887"], 12.0)
}

fn degenerate_bundle() -> &'static Bundle {
    bundle(&DEGENERATE, &["1", "0"], 12.0)
}

// ---------------------------------------------------------------------------
// 1. exterior algebra

#[test]
fn criterion_01_hadamard_hodge_isometry_and_distance_duality() {
    let start = Instant::now();
    let mut rng = Rng::new(0xEC7E);

    let rand_vec = |rng: &mut Rng, n: usize| -> GradedVector<BigRational> {
        loop {
            let coords: Vec<BigRational> = (0..n).map(|_| ri(rng.int(-9, 9))).collect();
            if coords.iter().any(|c| !is_zero_rat(c)) {
                return GradedVector::vector(coords);
            }
        }
    };

    // Hadamard on 1000 instances, with equality exactly on orthogonal pairs
    let mut forced_orthogonal = 0;
    for trial in 0..1000 {
        let n = 2 + trial % 5; // dimensions 2..=6
        let x = rand_vec(&mut rng, n);
        let y = if trial % 4 == 0 {
            // project a random vector onto x^⊥ so equality cases are hit
            let y0 = rand_vec(&mut rng, n);
            let proj = y0
                .scale(&x.dot(&x).unwrap())
                .sub(&x.scale(&x.dot(&y0).unwrap()))
                .unwrap();
            if proj.is_zero() {
                continue; // y0 was parallel to x; the plain branch covers it
            }
            forced_orthogonal += 1;
            proj
        } else {
            rand_vec(&mut rng, n)
        };
        let lhs = {
            let w = x.wedge(&y).unwrap();
            w.dot(&w).unwrap()
        };
        let rhs = x.dot(&x).unwrap() * y.dot(&y).unwrap();
        assert!(lhs <= rhs, "Hadamard fails at trial {trial}: {lhs} > {rhs}");
        let orthogonal = is_zero_rat(&x.dot(&y).unwrap());
        assert_eq!(
            lhs == rhs,
            orthogonal,
            "equality must hold exactly for orthogonal pairs (trial {trial})"
        );
    }
    assert!(forced_orthogonal >= 200, "only {forced_orthogonal} equality cases exercised");

    // the hodge map preserves the exact squared norm on every grade
    for trial in 0..300 {
        let n = 2 + trial % 5;
        let k = 1 + (rng.next() as usize) % n;
        let dim = parageo::exterior::binomial(n, k);
        let coords: Vec<BigRational> = (0..dim).map(|_| ri(rng.int(-9, 9))).collect();
        let x = GradedVector::new(n, k, coords).unwrap();
        let h = x.hodge();
        assert_eq!(
            x.dot(&x).unwrap(),
            h.dot(&h).unwrap(),
            "hodge isometry broke at n = {n}, k = {k}"
        );
    }

    // dist(V₁, V₂) = dist(V₁^⊥, V₂^⊥), exactly, on 200 subspace pairs
    let mut checked = 0;
    while checked < 200 {
        let n = 3 + (rng.next() as usize) % 4; // 3..=6
        let m = 1 + (rng.next() as usize) % (n - 1);
        let b1: Vec<_> = (0..m).map(|_| rand_vec(&mut rng, n)).collect();
        let b2: Vec<_> = (0..m).map(|_| rand_vec(&mut rng, n)).collect();
        if wedge_all(&b1).unwrap().is_zero() || wedge_all(&b2).unwrap().is_zero() {
            continue;
        }
        let c1 = orthogonal_complement(&b1).unwrap();
        let c2 = orthogonal_complement(&b2).unwrap();
        let direct = dist_subspaces(&b1, &b2, PlaceMetric::Archimedean).unwrap();
        let dual = dist_subspaces(&c1, &c2, PlaceMetric::Archimedean).unwrap();
        assert_eq!(direct, dual, "distance duality broke for n = {n}, m = {m}");
        checked += 1;
    }

    println!("criterion 1 finished in {:?}", start.elapsed());
    assert!(start.elapsed() < Duration::from_secs(10));
}

// ---------------------------------------------------------------------------
// 2. number fields

#[test]
fn criterion_02_product_formula_and_height_dualities() {
    let start = Instant::now();
    let k2 = FieldContext::quadratic(2).unwrap();
    let mut rng = Rng::new(0x2F0E);

    // product formula for 500 elements of ℚ(√2)^×: the archimedean part
    // contributes |N(x)| exactly, so the formula reads |N(x)| = ∏ p^{s_p}
    // with s_p the degree-weighted finite exponents
    let unit = Quad::from_parts(1, 1, 2); // 1 + √2
    let mut checked = 0;
    while checked < 500 {
        let x = match checked % 10 {
            0 => {
                // a unit power: empty finite support, norm ±1
                let mut u = unit.clone();
                for _ in 0..rng.int(0, 3) {
                    u = u.mul(&unit);
                }
                u
            }
            1 => Quad::rational(rq(rng.int(-30, 30), rng.int(1, 20)), 2),
            _ => {
                let den = rng.int(1, 20);
                Quad::new(rq(rng.int(-30, 30), den), rq(rng.int(-30, 30), den), 2)
            }
        };
        if Scalar::is_zero(&x) {
            continue;
        }
        let norm = x.field_norm();

        // archimedean: |x|_w · |x|_w̄ squares to N(x)²
        let places = k2.archimedean_places();
        let arch = k2
            .abs_at(&x, &places[0])
            .unwrap()
            .mul(&k2.abs_at(&x, &places[1]).unwrap())
            .unwrap();
        let arch_sq = match arch {
            Magnitude::Sqrt(s) => {
                assert!(is_zero_rat(&s.b), "the norm product must be rational");
                s.a
            }
            _ => unreachable!("archimedean magnitudes are square roots"),
        };
        assert_eq!(arch_sq, &norm * &norm);

        // finite: collect degree-weighted exponents over the support
        let mut finite = rone();
        let support = (norm.numer() * norm.denom()).abs();
        for p in prime_factors(&support) {
            let mut s = rzero();
            for v in k2.places_above(p).unwrap() {
                match k2.abs_at(&x, &v).unwrap() {
                    Magnitude::PPow { exp: Some(e), .. } => {
                        s += BigRational::from_integer(BigInt::from(v.local_degree())) * e;
                    }
                    other => panic!("finite place gave {other:?}"),
                }
            }
            assert!(s.denom().is_one(), "weighted exponent sum must be integral");
            let e = i32::try_from(s.numer()).unwrap();
            finite *= BigRational::from_integer(BigInt::from(p)).pow(e);
        }
        assert_eq!(
            norm.abs(),
            finite,
            "product formula fails for {x:?}: |N| = {} vs finite part {finite}",
            norm.abs()
        );
        checked += 1;
    }

    // H(V) = H(V^⊥) on 100 random subspaces of ℚ⁴ (exact)
    let kq = FieldContext::rational();
    let mut checked = 0;
    while checked < 100 {
        let m = 1 + (rng.next() as usize) % 3;
        let basis: Vec<Vec<Quad>> = (0..m)
            .map(|_| (0..4).map(|_| Quad::from_parts(rng.int(-6, 6), 0, 0)).collect())
            .collect();
        let gv: Vec<GradedVector<Quad>> =
            basis.iter().map(|b| GradedVector::vector(b.clone())).collect();
        if wedge_all(&gv).unwrap().is_zero() {
            continue;
        }
        let comp: Vec<Vec<Quad>> = orthogonal_complement(&gv)
            .unwrap()
            .iter()
            .map(|c| c.coords().to_vec())
            .collect();
        let h = kq.height_subspace(&basis).unwrap();
        let hc = kq.height_subspace(&comp).unwrap();
        assert_eq!(h.sq2d, hc.sq2d, "rational height duality broke (m = {m})");
        checked += 1;
    }

    // … and of ℚ(√2)³ (within 1e-10 relative)
    let mut checked = 0;
    while checked < 100 {
        let m = 1 + (rng.next() as usize) % 2;
        let basis: Vec<Vec<Quad>> = (0..m)
            .map(|_| {
                (0..3)
                    .map(|_| Quad::from_parts(rng.int(-4, 4), rng.int(-4, 4), 2))
                    .collect()
            })
            .collect();
        let gv: Vec<GradedVector<Quad>> =
            basis.iter().map(|b| GradedVector::vector(b.clone())).collect();
        if wedge_all(&gv).unwrap().is_zero() {
            continue;
        }
        let comp: Vec<Vec<Quad>> = orthogonal_complement(&gv)
            .unwrap()
            .iter()
            .map(|c| c.coords().to_vec())
            .collect();
        let h = k2.height_subspace(&basis).unwrap();
        let hc = k2.height_subspace(&comp).unwrap();
        let rel = (h.ln() - hc.ln()).abs() / h.ln().abs().max(1.0);
        assert!(rel <= 1e-10, "field height duality off by {rel}");
        checked += 1;
    }

    // two-path heights: the content-ideal route must equal the all-places
    // product, exactly, for 100 integral vectors over each field
    let mut checked = 0;
    while checked < 100 {
        let x: Vec<Quad> =
            (0..4).map(|_| Quad::from_parts(rng.int(-25, 25), 0, 0)).collect();
        if x.iter().all(|c| Scalar::is_zero(c)) {
            continue;
        }
        let via_content = kq.height_vector(&x).unwrap();
        let via_places = all_places_height(&kq, &x);
        assert_eq!(via_content.sq2d, via_places, "two-path (ℚ) mismatch");
        checked += 1;
    }
    let mut checked = 0;
    while checked < 100 {
        let x: Vec<Quad> = (0..3)
            .map(|_| Quad::from_parts(rng.int(-20, 20), rng.int(-20, 20), 2))
            .collect();
        if x.iter().all(|c| Scalar::is_zero(c)) {
            continue;
        }
        let via_content = k2.height_vector(&x).unwrap();
        let via_places = all_places_height(&k2, &x);
        assert_eq!(via_content.sq2d, via_places, "two-path (ℚ(√2)) mismatch");
        checked += 1;
    }

    println!("criterion 2 finished in {:?}", start.elapsed());
    assert!(start.elapsed() < Duration::from_secs(30));
}

/// `H^{2d}` assembled place by place: the degree-weighted archimedean norms
/// times `p^{−2·s_p}` over the finite support of the coordinate norms.
fn all_places_height(field: &FieldContext, x: &[Quad]) -> BigRational {
    let places = field.archimedean_places();
    let arch = places
        .iter()
        .map(|w| field.vector_norm_at(x, w).unwrap())
        .reduce(|a, b| a.mul(&b).unwrap())
        .unwrap();
    // each real place enters with local degree 1, so the 2d-th power of the
    // archimedean part is exactly the radicand of the reduced product
    let arch2d = match arch {
        Magnitude::Sqrt(s) => {
            assert!(is_zero_rat(&s.b), "the product over conjugate places is rational");
            s.a
        }
        _ => unreachable!(),
    };

    let mut g = BigInt::zero();
    for c in x {
        let n = c.field_norm();
        assert!(n.denom().is_one(), "two-path check expects integral coordinates");
        g = g.gcd(n.numer());
    }
    let mut finite = rone();
    for p in prime_factors(&g.abs()) {
        let mut s = rzero();
        for v in field.places_above(p).unwrap() {
            if let Magnitude::PPow { exp: Some(e), .. } = field.vector_norm_at(x, &v).unwrap() {
                s += BigRational::from_integer(BigInt::from(v.local_degree())) * e;
            }
        }
        assert!(s.denom().is_one());
        let e = i32::try_from(s.numer()).unwrap();
        finite *= BigRational::from_integer(BigInt::from(p)).pow(-2 * e);
    }
    arch2d * finite
}

fn prime_factors(n: &BigInt) -> Vec<u64> {
    let mut out = Vec::new();
    let mut n = u64::try_from(n).expect("support fits in u64 for these scales");
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            out.push(p);
            while n % p == 0 {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

// ---------------------------------------------------------------------------
// 3. n-systems

#[test]
fn criterion_03_validator_duality_and_rigidification() {
    let start = Instant::now();

    // the template family and the doubling system validate cleanly
    for n in 2..=6 {
        let sys = template_system(n, &ri(1));
        assert!(sys.validate().is_empty(), "template n = {n}: {:?}", sys.validate());
    }
    assert!(doubling_system().validate().is_empty());

    // seeded violations are rejected with the right condition name
    let s1_order = NSystem::new_unchecked(
        2,
        vec![Switch { q: ri(3), values: vec![ri(2), ri(1)], k: 1, l: None }],
        Tail::Finite,
        None,
    );
    assert!(s1_order.validate().iter().any(|v| v.condition == "S1-order"));

    let s1_sum = NSystem::new_unchecked(
        2,
        vec![Switch { q: ri(3), values: vec![ri(1), ri(1)], k: 1, l: None }],
        Tail::Finite,
        None,
    );
    assert!(s1_sum.validate().iter().any(|v| v.condition == "S1-sum"));

    let s2 = NSystem::new_unchecked(
        2,
        vec![
            Switch { q: ri(3), values: vec![ri(1), ri(2)], k: 2, l: None },
            // the designated rise 2 → 3 is not reflected here
            Switch { q: ri(4), values: vec![ri(2), ri(2)], k: 1, l: Some(2) },
        ],
        Tail::Finite,
        None,
    );
    assert!(s2.validate().iter().any(|v| v.condition == "S2"), "{:?}", s2.validate());

    let s3 = NSystem::new_unchecked(
        2,
        vec![
            Switch { q: ri(3), values: vec![ri(1), ri(2)], k: 1, l: None },
            // the rise lands exactly at the next riser's start: not interlocked
            Switch { q: ri(4), values: vec![ri(2), ri(2)], k: 2, l: Some(1) },
        ],
        Tail::Finite,
        None,
    );
    assert!(s3.validate().iter().any(|v| v.condition == "S3"), "{:?}", s3.validate());

    // duality is an involution
    for seed in 0..50 {
        let n = 2 + (seed as usize) % 3;
        let sys = random_valid_system(n, seed, 12);
        assert_eq!(sys.dual().dual(), sys, "double dual differs at seed {seed}");
    }

    // the dual map fixes every 2-system pointwise on a dense grid
    for seed in 0..20 {
        let sys = random_valid_system(2, seed, 12);
        let dual = sys.dual();
        let mut q = sys.q0.clone();
        for _ in 0..80 {
            assert_eq!(
                dual.evaluate(&q).unwrap(),
                sys.evaluate(&q).unwrap(),
                "2-system dual moved a value at q = {q}"
            );
            q += rq(1, 4);
        }
    }

    // rigidification: all four output clauses on 50 random 3-systems
    let one = ri(1);
    let half = rq(1, 2);
    let onset = NSystem::rigid_onset(3, &one);
    let bound = ri(36); // 4n²c′ for n = 3, c′ = 1
    for seed in 0..50 {
        let sys = random_valid_system(3, seed, 15);
        let rigid = sys.rigidify(&one).unwrap();
        // (1) the output is a valid system
        assert!(rigid.validate().is_empty(), "seed {seed}: {:?}", rigid.validate());
        // (2) it is rigid of mesh c′/2 from the onset on
        assert!(rigid.is_rigid_from(&half, &onset), "seed {seed} is not rigid");
        assert_eq!(rigid.mesh, Some(half.clone()));
        // (3) it tracks the input within 4n²c′ on the shared window
        let mut q = onset.clone();
        for _ in 0..40 {
            let (Ok(l), Ok(r)) = (rigid.evaluate(&q), sys.evaluate(&q)) else {
                break;
            };
            for (a, b) in l.iter().zip(&r) {
                assert!(
                    (a - b).abs() <= bound,
                    "seed {seed}: tracking gap {} at q = {q}",
                    (a - b).abs()
                );
            }
            q += &half;
        }
        // (4) the bottom component rises with slope 1 right after q₀
        let at0 = rigid.evaluate(&rigid.q0).unwrap();
        let after = rigid.evaluate(&(&rigid.q0 + &half)).unwrap();
        assert_eq!(&after[0] - &at0[0], half);
    }

    println!("criterion 3 finished in {:?}", start.elapsed());
    assert!(start.elapsed() < Duration::from_secs(20));
}

// ---------------------------------------------------------------------------
// 4. the three-system identity

#[test]
fn criterion_04_identity_between_extreme_exponents() {
    let start = Instant::now();
    let two = ri(2);
    let one = ri(1);
    let mut qualifying = 0;
    let mut seed = 0;
    while qualifying < 100 {
        assert!(seed < 500, "not enough systems with an unbounded top gap");
        let sys = random_periodic_system(3, seed);
        seed += 1;
        let e = sys.exponents().unwrap();
        assert!(e.exact, "periodic exponents must be exact rationals");
        let top = &e.phi_upper[0];
        if !top.is_positive() {
            continue; // the identity's premise needs the first component unbounded
        }
        let bottom = &e.phi_lower[2];
        let lhs = (&one - &two * top) * (&one - &two * bottom);
        let rhs = top * bottom;
        assert_eq!(lhs, rhs, "identity fails exactly at seed {}", seed - 1);
        qualifying += 1;
    }

    println!("criterion 4 finished in {:?} ({seed} seeds scanned)", start.elapsed());
    assert!(start.elapsed() < Duration::from_secs(10));
}

// ---------------------------------------------------------------------------
// 5. oracle equivalence

#[test]
fn criterion_05_accelerated_profiles_match_the_box_oracle() {
    let start = Instant::now();

    // n = 2 targets on the full quarter grid up to q = 12
    for (label, bundle) in
        [("degenerate", degenerate_bundle()), ("golden", golden_bundle())]
    {
        let slow = oracle_profile(
            &rational_target(if label == "degenerate" {
                &["1", "0"]
            } else {
                &["1", "1.6180339887"]
            }),
            &ProfileForm::Grade(1),
            &bundle.grid,
        )
        .unwrap();
        assert!(bundle.point.exact, "{label}: the engine withdrew exactness");
        for i in 0..bundle.grid.len() {
            for j in 0..2 {
                let (a, b) = (bundle.point.values[i][j], slow.values[i][j]);
                assert!(
                    (a - b).abs() <= ORACLE_MATCH,
                    "{label}: routes disagree at q = {}: {a} vs {b}",
                    bundle.grid[i]
                );
            }
        }
    }

    // n = 3 cubic target up to q = 8
    let cubic = rational_target(&["1", "2^(1/3)", "2^(2/3)"]);
    let grid3 = q_grid(0.0, 8.0, 0.25);
    let fast3 =
        profile(&cubic, &ProfileForm::Grade(1), &grid3, &EnumerationBudget::default()).unwrap();
    let slow3 = oracle_profile(&cubic, &ProfileForm::Grade(1), &grid3).unwrap();
    for i in 0..grid3.len() {
        for j in 0..3 {
            let (a, b) = (fast3.values[i][j], slow3.values[i][j]);
            assert!(
                (a - b).abs() <= ORACLE_MATCH,
                "cubic: routes disagree at q = {}: {a} vs {b}",
                grid3[i]
            );
        }
    }

    println!("criterion 5 finished in {:?}", start.elapsed());
    assert!(start.elapsed() < Duration::from_secs(300));
}

// ---------------------------------------------------------------------------
// 6. parametric structure

#[test]
fn criterion_06_profile_structure_and_sum_rules() {
    let start = Instant::now();
    let b = golden_bundle();

    // 0 ≤ L₁ ≤ … ≤ L_n ≤ q everywhere
    assert!(b.point.violations().is_empty(), "{:?}", b.point.violations());
    assert!(b.star.violations().is_empty(), "{:?}", b.star.violations());
    for (i, row) in b.point.values.iter().enumerate() {
        assert!(row[0] >= -1e-12 && row[0] <= row[1] + 1e-12 && row[1] <= b.grid[i] + 1e-12);
    }

    // |ΣL_j − q| stays bounded and does not grow with the horizon
    let sum_gap = |upto: f64| -> f64 {
        let mut sup: f64 = 0.0;
        for (i, row) in b.point.values.iter().enumerate() {
            if b.grid[i] <= upto + 1e-9 {
                sup = sup.max((row.iter().sum::<f64>() - b.grid[i]).abs());
            }
        }
        sup
    };
    let (s6, s12) = (sum_gap(6.0), sum_gap(12.0));
    assert!(s12 <= SUM_RULE_CAP, "sum gap {s12} exceeds the calibrated cap");
    assert!(s12 <= s6 + HORIZON_GROWTH, "sum gap grew: {s6} → {s12}");

    // |L*_j + L_k − q| for j + k = n + 1, same cap and growth discipline
    let dual_gap = |upto: f64| -> f64 {
        let mut sup: f64 = 0.0;
        for (i, &q) in b.grid.iter().enumerate() {
            if q <= upto + 1e-9 {
                for j in 0..2 {
                    sup = sup.max((b.star.values[i][j] + b.point.values[i][1 - j] - q).abs());
                }
            }
        }
        sup
    };
    let (d6, d12) = (dual_gap(6.0), dual_gap(12.0));
    assert!(d12 <= SUM_RULE_CAP, "duality sum {d12} exceeds the calibrated cap");
    assert!(d12 <= d6 + HORIZON_GROWTH, "duality sum grew: {d6} → {d12}");
    // the library's own checker agrees with the manual scan
    assert!((duality_sum_check(&b.point, &b.star).unwrap() - d12).abs() < 1e-12);

    println!("criterion 6 finished in {:?} (sum {s12:.3}, duality {d12:.3})", start.elapsed());
    assert!(start.elapsed() < Duration::from_secs(120));
}

// ---------------------------------------------------------------------------
// 7. grade duality (runtime shared with criterion 5's bundles)

#[test]
fn criterion_07_top_grade_profile_equals_the_star_family() {
    // n = 2: grade n−1 = 1, so the point profile itself must match the star
    for (label, b) in [("golden", golden_bundle()), ("degenerate", degenerate_bundle())] {
        for i in 0..b.grid.len() {
            for j in 0..2 {
                let (a, s) = (b.point.values[i][j], b.star.values[i][j]);
                assert!(
                    (a - s).abs() <= GRADE_DUALITY,
                    "{label}: grade duality broke at q = {}: {a} vs {s}",
                    b.grid[i]
                );
            }
        }
    }

    // n = 3: the top-grade profile against the star family
    let cubic = rational_target(&["1", "2^(1/3)", "2^(2/3)"]);
    let grid = q_grid(0.0, 8.0, 0.25);
    let budget = EnumerationBudget::default();
    let top = profile(&cubic, &ProfileForm::Grade(2), &grid, &budget).unwrap();
    let star = profile(&cubic, &ProfileForm::Star, &grid, &budget).unwrap();
    for i in 0..grid.len() {
        for j in 0..3 {
            let (a, s) = (top.values[i][j], star.values[i][j]);
            assert!(
                (a - s).abs() <= GRADE_DUALITY,
                "cubic: grade duality broke at q = {}: {a} vs {s}",
                grid[i]
            );
        }
    }
}

// ---------------------------------------------------------------------------
// 8. the constructive chain

#[test]
fn criterion_08_chain_certificate_and_desk_scale_enumeration() {
    let start = Instant::now();
    let sys = template_system(3, &ri(1)).rigidify(&ri(1)).unwrap();
    let mesh = rq(1, 2);
    let from = NSystem::rigid_onset(3, &ri(1));

    // rigorous constants in dimension 3
    let c = ConstructionConstants::for_dimension(3).unwrap();
    assert_eq!(c.big_c, BigInt::from(34050), "the dimension-3 base changed");

    let s10 = derive_schedule(&sys, &mesh, &from, 10).unwrap();
    let ch10 = build_chain(&c, &s10, 256).unwrap();
    assert!(ch10.violations.is_empty(), "{:?}", ch10.violations);
    assert!(ch10.verify_invariants(&c).is_empty(), "{:?}", ch10.verify_invariants(&c));

    let point = synthesize_point(&c, &ch10, None).unwrap();
    let target = point.target().unwrap();
    let q_max = 0.8 * ch10.q_max();
    let rep10 =
        verify(&c, &sys, &mesh, &from, &ch10, &target, q_max, VerifyMode::Certificate).unwrap();
    assert!(rep10.passes, "certificate failed: sup {}", rep10.sup_gap);
    assert!(rep10.sup_gap <= c.c7(), "sandwich bound broke: {} > {}", rep10.sup_gap, c.c7());
    assert!(rep10.upper_excess <= 1e-9, "upper sandwich violated: {}", rep10.upper_excess);

    // two more steps must not degrade the certified window
    let s12 = derive_schedule(&sys, &mesh, &from, 12).unwrap();
    let ch12 = build_chain(&c, &s12, 256).unwrap();
    let p12 = synthesize_point(&c, &ch12, None).unwrap();
    let rep12 = verify(
        &c,
        &sys,
        &mesh,
        &from,
        &ch12,
        &p12.target().unwrap(),
        q_max,
        VerifyMode::Certificate,
    )
    .unwrap();
    assert!(rep12.passes);
    assert!(
        rep12.sup_gap <= rep10.sup_gap + 1e-9,
        "tracking worsened with more steps: {} vs {}",
        rep12.sup_gap,
        rep10.sup_gap
    );

    // desk-scale base: enumeration stays within the calibrated band on q ≤ 12
    let ch = ConstructionConstants::heuristic(3, 3).unwrap();
    let s8 = derive_schedule(&sys, &mesh, &from, 8).unwrap();
    let chain8 = build_chain(&ch, &s8, 64).unwrap();
    let p8 = synthesize_point(&ch, &chain8, None).unwrap();
    let qm = (0.8 * chain8.q_max()).min(12.0);
    let rep8 = verify(
        &ch,
        &sys,
        &mesh,
        &from,
        &chain8,
        &p8.target().unwrap(),
        qm,
        VerifyMode::Enumeration,
    )
    .unwrap();
    assert!(rep8.passes);
    assert!(
        rep8.sup_gap <= HEURISTIC_TRACKING,
        "desk-scale tracking gap {} exceeds the calibrated bound",
        rep8.sup_gap
    );

    println!(
        "criterion 8 finished in {:?} (cert sup {:.3}, desk sup {:.3})",
        start.elapsed(),
        rep10.sup_gap,
        rep8.sup_gap
    );
    assert!(start.elapsed() < Duration::from_secs(120));
}

// ---------------------------------------------------------------------------
// 9. profile transfer under extension of scalars

#[test]
fn criterion_09_profile_transfer_is_finite_and_horizon_stable() {
    let start = Instant::now();
    let xi: Vec<_> = ["1", "2^(1/4)"]
        .iter()
        .map(|s| parse_xi_expr(s).unwrap())
        .collect();
    let grid = q_grid(0.0, 8.0, 0.5);

    // degree-1 control: extending by the trivial basis changes nothing
    let trivial = ScalarExtension::rational();
    let control =
        verify_profile_transfer(&trivial, &xi, &grid, &EnumerationBudget::default()).unwrap();
    assert_eq!(control.sup_gap, 0.0, "the trivial extension moved a value");
    assert_eq!(control.sup_gap_dual, 0.0);
    for (_, g, gd) in &control.gaps {
        assert_eq!(*g, 0.0);
        assert_eq!(*gd, 0.0);
    }

    // ℚ(√2) with the integral basis (1, √2): both difference families
    // bounded, and the late-window sup must not outgrow the early one
    let ext = ScalarExtension::real_quadratic(2).unwrap();
    let budget = EnumerationBudget {
        max_candidates: 80_000_000,
        ..EnumerationBudget::default()
    };
    let report = verify_profile_transfer(&ext, &xi, &grid, &budget).unwrap();
    assert!(report.exact, "an inexact leg invalidates the comparison");
    assert!(report.sup_gap.is_finite() && report.sup_gap <= TRANSFER_CAP, "{}", report.sup_gap);
    assert!(
        report.sup_gap_dual.is_finite() && report.sup_gap_dual <= TRANSFER_CAP,
        "{}",
        report.sup_gap_dual
    );
    assert!(report.horizon_stable, "late-window sup outgrew the early window");

    println!(
        "criterion 9 finished in {:?} (sup {:.4}, dual {:.4})",
        start.elapsed(),
        report.sup_gap,
        report.sup_gap_dual
    );
    assert!(start.elapsed() < Duration::from_secs(600));
}

// ---------------------------------------------------------------------------
// 10. exponent transfer formulas

#[test]
fn criterion_10_exponent_transfer_and_extremal_pairs() {
    let start = Instant::now();

    // the classical pair (ω̂, λ̂) = (2, 1/2) transfers to (5, 1/5) at d = 2
    let quartet = ExponentQuartet {
        omega: ExtendedRational::from_int(2),
        omega_hat: ExtendedRational::from_int(2),
        lambda: ExtendedRational::parse("1/2").unwrap(),
        lambda_hat: ExtendedRational::parse("1/2").unwrap(),
    };
    let out = exponent_transfer(&quartet, 2);
    assert_eq!(out.omega_hat, ExtendedRational::from_int(5));
    assert_eq!(out.lambda_hat, ExtendedRational::parse("1/5").unwrap());
    // degree 1 is the identity
    let identity = exponent_transfer(&quartet, 1);
    assert_eq!(identity.omega_hat, quartet.omega_hat);
    assert_eq!(identity.lambda_hat, quartet.lambda_hat);
    // ∞ and 0 follow the limit conventions
    let degenerate = ExponentQuartet {
        omega: ExtendedRational::Infinite,
        omega_hat: ExtendedRational::Infinite,
        lambda: ExtendedRational::from_int(0),
        lambda_hat: ExtendedRational::from_int(0),
    };
    let image = exponent_transfer(&degenerate, 3);
    assert_eq!(image.omega, ExtendedRational::Infinite);
    assert_eq!(image.lambda, ExtendedRational::from_int(0));

    // the golden extremal pairs sit exactly on the transferred identity curve
    for d in 1..=3usize {
        let (omega_hat, lambda_hat) = golden_extremal_exponents(d);
        let exact = uniform_identity_residual(&omega_hat, &lambda_hat, d).unwrap();
        assert!(Scalar::is_zero(&exact), "exact residual nonzero at d = {d}");
        let resid =
            uniform_identity_residual_f64(omega_hat.approx_f64().unwrap(), lambda_hat.approx_f64().unwrap(), d).abs();
        assert!(resid <= 1e-12, "float residual {resid} at d = {d}");
    }
    // d = 1 reproduces the classical golden pair (γ², γ − 1)
    let (w1, l1) = golden_extremal_exponents(1);
    assert_eq!(w1, Quad::new(rq(3, 2), rq(1, 2), 5));
    assert_eq!(l1, Quad::new(rq(-1, 2), rq(1, 2), 5));

    println!("criterion 10 finished in {:?}", start.elapsed());
    assert!(start.elapsed() < Duration::from_secs(1));
}

// ---------------------------------------------------------------------------
// 11. pullback comparability

#[test]
fn criterion_11_pullback_minima_stay_comparable() {
    let start = Instant::now();
    let ext = ScalarExtension::real_quadratic(2).unwrap();
    let ladder = [0.0, 2.0, 4.0];
    let budget = EnumerationBudget::default();

    for coords in [vec!["1"], vec!["1", "2^(1/4)"]] {
        let xi: Vec<_> = coords.iter().map(|s| parse_xi_expr(s).unwrap()).collect();
        let report = pullback_comparability_check(&ext, &xi, &ladder, &budget).unwrap();
        let n = coords.len();
        for row in &report.rows {
            assert_eq!(row.lambda_pullback.len(), 2 * n);
            assert_eq!(row.lambda_field.len(), n);
        }
        assert!(report.ordered, "n = {n}: a minima list came back unsorted");
        assert!(
            report.sup_deviation.is_finite() && report.sup_deviation <= PULLBACK_CAP,
            "n = {n}: deviation {} escaped the calibrated band",
            report.sup_deviation
        );
        assert!(report.horizon_stable, "n = {n}: deviation grew up the ladder");
    }

    println!("criterion 11 finished in {:?}", start.elapsed());
    assert!(start.elapsed() < Duration::from_secs(180));
}
