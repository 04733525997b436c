mod common;

use common::*;
use phaselift::constructive::{
    coset_phase_flip, multi_shift_recover, recover, scrambling_mask, sense_triple, sense_triples, uniqueness_check,
    Uniqueness,
};
use phaselift::signal::apply_mask;
use phaselift::{Error, Shape, Shift, C64};

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[test]
fn triples_match_explicit_sums() {
    let x = random_signal(Shape::D2(3, 4), &mut rng(1));
    let fast = sense_triple(&x, Shift::D2(1, 3)).unwrap();
    let slow = oracle_triple(&x, Shift::D2(1, 3));
    assert!(max_abs_diff(&fast.i0, &slow.i0) < 1e-12);
    assert!(max_abs_diff(&fast.i_plus, &slow.i_plus) < 1e-12);
    assert!(max_abs_diff(&fast.i_minus_i, &slow.i_minus_i) < 1e-12);
}

#[test]
fn coprime_shift_recovers_up_to_global_phase() {
    let mut rng = rng(2);
    let x = random_signal(Shape::D1(5), &mut rng);
    let x_hat = recover(&[oracle_triple(&x, Shift::D1(2))], Shape::D1(5), None).unwrap();
    // Align the global phase, then compare entrywise.
    let c: C64 = x.data().iter().zip(x_hat.data()).map(|(a, b)| a.conj() * b).sum();
    let c = c / c.norm();
    for (a, b) in x.data().iter().zip(x_hat.data()) {
        assert!((c * a - b).norm() <= 1e-10);
    }
}

#[test]
fn scrambled_recovery_all_coprime_shifts() {
    let mut rng = rng(3);
    for n in [5usize, 8, 16, 64] {
        for s in (1..n).filter(|&s| gcd(s, n) == 1) {
            let x = random_signal(Shape::D1(n), &mut rng);
            let mask = scrambling_mask(Shape::D1(n), (n * 100 + s) as u64).unwrap();
            let triple = oracle_triple(&apply_mask(&x, &mask).unwrap(), Shift::D1(s));
            let x_hat = recover(&[triple], Shape::D1(n), Some(&mask)).unwrap();
            let mse = oracle_relative_mse(x.data(), x_hat.data());
            assert!(mse <= 1e-9, "n={n} s={s}: {mse}");
        }
    }
}

#[test]
fn shared_factor_is_rejected_with_witness() {
    let x = random_signal(Shape::D1(6), &mut rng(4));
    let triples = sense_triples(&x, &[Shift::D1(2)], None).unwrap();
    assert!(matches!(recover(&triples, Shape::D1(6), None), Err(Error::NotCoprime(_))));
    assert!(matches!(uniqueness_check(Shape::D1(6), &[Shift::D1(2)]).unwrap(), Uniqueness::NotUnique(_)));

    // n = 8, s = 2: flipping one coset's phase keeps all three patterns.
    let x = random_signal(Shape::D1(8), &mut rng(5));
    let y = coset_phase_flip(&x, 2, 1, C64::from_polar(1.0, 1.0)).unwrap();
    let (tx, ty) = (oracle_triple(&x, Shift::D1(2)), oracle_triple(&y, Shift::D1(2)));
    assert!(max_abs_diff(&tx.i0, &ty.i0) < 1e-12);
    assert!(max_abs_diff(&tx.i_plus, &ty.i_plus) < 1e-12);
    assert!(max_abs_diff(&tx.i_minus_i, &ty.i_minus_i) < 1e-12);
    assert!(oracle_relative_mse(x.data(), y.data()) > 1e-2);
}

#[test]
fn two_dimensional_cases() {
    let mut rng = rng(6);
    let shape = Shape::D2(8, 9);
    assert_eq!(uniqueness_check(shape, &[Shift::D2(3, 2)]).unwrap(), Uniqueness::Unique);
    let x = random_signal(shape, &mut rng);
    let mask = scrambling_mask(shape, 1).unwrap();
    let triples = sense_triples(&x, &[Shift::D2(3, 2)], Some(&mask)).unwrap();
    let x_hat = recover(&triples, shape, Some(&mask)).unwrap();
    assert!(oracle_relative_mse(x.data(), x_hat.data()) <= 1e-9);

    let shape = Shape::D2(4, 6);
    for s in [Shift::D2(1, 1), Shift::D2(1, 5), Shift::D2(3, 1)] {
        assert!(matches!(uniqueness_check(shape, &[s]).unwrap(), Uniqueness::NotUnique(_)));
    }
    let shifts = [Shift::D2(1, 0), Shift::D2(0, 1)];
    assert_eq!(uniqueness_check(shape, &shifts).unwrap(), Uniqueness::Unique);
    let x = random_signal(shape, &mut rng);
    let triples: Vec<_> = shifts.iter().map(|&s| oracle_triple(&x, s)).collect();
    let x_hat = multi_shift_recover(&triples, shape).unwrap();
    assert!(oracle_relative_mse(x.data(), x_hat.data()) <= 1e-9);
}

#[test]
fn vanishing_bins() {
    // A spectrum with one exact zero stays connected along the cycle.
    let n = 7;
    let mut spec = vec![C64::new(1.0, 0.5); n];
    spec[3] = C64::new(0.0, 0.0);
    let x = phaselift::signal::idft_unitary(&phaselift::signal::Spectrum::new(Shape::D1(n), spec).unwrap());
    let triples = sense_triples(&x, &[Shift::D1(1)], None).unwrap();
    let x_hat = recover(&triples, Shape::D1(n), None).unwrap();
    assert!(oracle_relative_mse(x.data(), x_hat.data()) <= 1e-9);
    // Two zeros split the cycle into unrelated arcs.
    let mut spec = vec![C64::new(1.0, 0.5); n];
    spec[1] = C64::new(0.0, 0.0);
    spec[4] = C64::new(0.0, 0.0);
    let x = phaselift::signal::idft_unitary(&phaselift::signal::Spectrum::new(Shape::D1(n), spec).unwrap());
    let triples = sense_triples(&x, &[Shift::D1(1)], None).unwrap();
    assert!(matches!(recover(&triples, Shape::D1(n), None), Err(Error::VanishingDft { .. })));
}
