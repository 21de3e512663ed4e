use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;
use parageo::nsystem::{random_periodic_system, random_valid_system, NSystem};
use std::time::Instant;

fn rq(n: i64, d: i64) -> BigRational { BigRational::new(BigInt::from(n), BigInt::from(d)) }

fn main() {
    let t0 = Instant::now();
    for seed in 0..50 {
        let s = random_valid_system(3, seed, 15);
        let r = s.rigidify(&rq(1, 1)).unwrap();
        assert!(r.validate().is_empty());
        assert!(r.is_rigid_from(&rq(1, 2), &NSystem::rigid_onset(3, &rq(1, 1))));
    }
    println!("rigidify 50: {:?}", t0.elapsed());

    let t0 = Instant::now();
    let mut qualifying = 0;
    let mut scanned = 0;
    for seed in 0..200 {
        scanned = seed + 1;
        let s = random_periodic_system(3, seed);
        let e = s.exponents().unwrap();
        assert!(e.exact);
        if e.phi_upper[0].is_positive() {
            let pu1 = &e.phi_upper[0];
            let pl3 = &e.phi_lower[2];
            let two = rq(2, 1);
            let one = rq(1, 1);
            let lhs = (&one - &two * pu1) * (&one - &two * pl3);
            let rhs = pu1 * pl3;
            assert_eq!(lhs, rhs, "seed {seed}");
            qualifying += 1;
        }
        if qualifying == 100 { break; }
    }
    println!("jarnik: 100 qualifying within {scanned} seeds: {:?}", t0.elapsed());

    let t0 = Instant::now();
    for seed in 0..50 {
        let n = 2 + (seed as usize % 3);
        let s = random_valid_system(n, seed, 12);
        assert_eq!(s.dual().dual(), s, "seed {seed}");
    }
    println!("dual involution 50: {:?}", t0.elapsed());

    let t0 = Instant::now();
    for seed in 0..20 {
        let s = random_valid_system(2, seed, 12);
        let d = s.dual();
        let mut q = s.q0.clone();
        for _ in 0..80 {
            assert_eq!(d.evaluate(&q).unwrap(), s.evaluate(&q).unwrap());
            q += rq(1, 4);
        }
    }
    println!("2-system self-duality 20 x 80 grid points: {:?}", t0.elapsed());
}
