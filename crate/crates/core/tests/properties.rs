mod common;

use common::*;
use phaselift::constructive::{recover, scrambling_mask, sense_triples};
use phaselift::experiments::pgm::{decode, encode};
use phaselift::metrics::relative_mse;
use phaselift::signal::{apply_mask, dft_unitary, make_masks, oversampled_dft};
use phaselift::{ComplexSignal, FactoredPsd, MaskKind, MeasurementEnsemble, Shape, Shift, C64};
use proptest::prelude::*;

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn shape_strategy() -> impl Strategy<Value = Shape> {
    prop_oneof![(1usize..24).prop_map(Shape::D1), (1usize..6, 1usize..6).prop_map(|(a, b)| Shape::D2(a, b))]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unitary_dft_preserves_energy(shape in shape_strategy(), seed in any::<u64>(), r in 1usize..4) {
        let x = random_signal(shape, &mut rng(seed));
        let e = x.norm_sqr();
        let f: f64 = dft_unitary(&x).data().iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((f - e).abs() <= 1e-12 * e.max(1.0));
        let g: f64 = oversampled_dft(&x, r).unwrap().data().iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((g - e).abs() <= 1e-12 * e.max(1.0));
    }

    #[test]
    fn relative_mse_ignores_global_phase(n in 1usize..32, seed in any::<u64>(), phase in 0.0f64..6.3) {
        let mut rng = rng(seed);
        let x0 = random_signal(Shape::D1(n), &mut rng);
        let x = random_signal(Shape::D1(n), &mut rng);
        let c = C64::from_polar(1.0, phase);
        prop_assert!(relative_mse(&x0, &x0.scale(c)).unwrap() <= 1e-12);
        let a = relative_mse(&x0, &x).unwrap();
        let b = relative_mse(&x0, &x.scale(c)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        prop_assert!((a - oracle_relative_mse(x0.data(), x.data())).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn intensities_are_phase_blind_and_lift_consistently(shape in shape_strategy(), seed in any::<u64>(), phase in 0.0f64..6.3, r in 1usize..3) {
        let masks = make_masks(shape, MaskKind::GaussianComplex, 2, seed).unwrap();
        let ens = MeasurementEnsemble::from_masks(shape, masks, r).unwrap();
        let x = random_signal(shape, &mut rng(seed));
        let b = ens.sense(&x).unwrap().values;
        let b_rot = ens.sense(&x.scale(C64::from_polar(1.0, phase))).unwrap().values;
        let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!(max_abs_diff(&b, &b_rot) <= 1e-12 * scale);
        let lifted = ens.apply_lifted(&FactoredPsd::rank_one(&x)).unwrap();
        prop_assert!(max_abs_diff(&b, &lifted) <= 1e-12 * scale);
        prop_assert!(b.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn adjoint_pairing(n in 2usize..9, seed in any::<u64>()) {
        let shape = Shape::D1(n);
        let ens = MeasurementEnsemble::from_masks(shape, make_masks(shape, MaskKind::Binary, 3, seed).unwrap(), 2).unwrap();
        let mut rng = rng(seed);
        let v = random_signal(shape, &mut rng);
        let w = random_signal(shape, &mut rng);
        let y: Vec<f64> = (0..ens.m()).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        // ⟨w, 𝒜*(y) v⟩ = Σ_k y_k ⟨w, r_k*⟩⟨r_k, v⟩ with explicit rows.
        let got = w.inner(&ens.apply_adjoint_action(&y, &v).unwrap());
        let want: C64 = sensing_rows(&ens)
            .iter()
            .zip(&y)
            .map(|(r, &yk)| {
                let rv: C64 = r.iter().zip(v.data()).map(|(a, b)| a * b).sum();
                let rw: C64 = r.iter().zip(w.data()).map(|(a, b)| a * b).sum();
                rw.conj() * rv * yk
            })
            .sum();
        prop_assert!((got - want).norm() <= 1e-10 * want.norm().max(1.0));
    }

    #[test]
    fn constructive_recovery_for_coprime_shifts(n in 2usize..40, s_raw in 1usize..40, seed in any::<u64>()) {
        let s = 1 + s_raw % (n - 1);
        prop_assume!(gcd(s, n) == 1);
        let shape = Shape::D1(n);
        let x = random_signal(shape, &mut rng(seed));
        let mask = scrambling_mask(shape, seed).unwrap();
        let triples = sense_triples(&x, &[Shift::D1(s)], Some(&mask)).unwrap();
        let x_hat = recover(&triples, shape, Some(&mask)).unwrap();
        prop_assert!(oracle_relative_mse(x.data(), x_hat.data()) <= 1e-9);
        // Masking is invertible for the scrambling pattern.
        prop_assert!(apply_mask(&x, &mask).unwrap().norm() > 0.0);
    }

    #[test]
    fn pgm_round_trip(rows in 1usize..12, cols in 1usize..12, seed in any::<u64>()) {
        let mut rng = rng(seed);
        let values: Vec<f64> = (0..rows * cols).map(|_| rand::Rng::random_range(&mut rng, 0.0..5.0)).collect();
        let shape = if rows == 1 { Shape::D1(cols) } else { Shape::D2(rows, cols) };
        let x = ComplexSignal::from_real(shape, &values).unwrap();
        let back = decode(&encode(&x)).unwrap();
        prop_assert_eq!(back.shape(), shape);
        let top = values.iter().copied().fold(0.0, f64::max);
        for (a, b) in back.data().iter().zip(&values) {
            prop_assert!((a.re - b).abs() <= top / 65535.0 * 0.5 + 1e-12 * top);
        }
    }
}
