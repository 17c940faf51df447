use baker_core::classical::{frobenius_perron_step, sloppy_map, ClassicalDensity, PhasePoint, SloppyParams};
use baker_core::numerics::{hermiticity_deviation, hermitian_eigenvalues, max_abs, C64};
use baker_core::phasespace::{husimi, CoherentFrame};
use baker_core::quantum::{apply_channel, random_pure_state, sloppy_channel, von_neumann_entropy, ShiftMode};
use baker_core::spectral::superoperator_matrix;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = usize> {
    prop_oneof![Just(4usize), Just(8), Just(16)]
}

/// Deltas with an integer momentum shift at every N in `dims()`.
fn deltas() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(0.5), Just(1.0)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn map_stays_on_torus(q in 0.0f64..1.0, p in 0.0f64..1.0, delta in 0.0f64..=1.0) {
        let y = sloppy_map(PhasePoint::new(q, p).unwrap(), SloppyParams::new(delta).unwrap());
        prop_assert!((0.0..1.0).contains(&y.q) && (0.0..1.0).contains(&y.p));
        // The image never reaches the band above 1 - delta/2.
        prop_assert!(y.p < 1.0 - delta / 2.0 + 1e-15);
    }

    #[test]
    fn frobenius_perron_conserves_mass(
        cells in prop::collection::vec(0.0f64..1.0, 64),
        k in 0usize..5,
    ) {
        let values = DMatrix::from_vec(8, 8, cells);
        prop_assume!(values.sum() > 1e-3);
        let delta = k as f64 / 4.0;
        let params = SloppyParams::new(delta).unwrap();
        let f = ClassicalDensity::normalized(values).unwrap();
        let g = frobenius_perron_step(&f, params).unwrap();
        prop_assert!((g.total_mass() - f.total_mass()).abs() < 1e-12);
        prop_assert!(g.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn channel_is_cptp_on_random_states(n in dims(), delta in deltas(), seed in any::<u64>()) {
        let ch = sloppy_channel(n, delta, ShiftMode::Strict).unwrap();
        prop_assert!(ch.completeness_residual() < 1e-12);
        let rho = random_pure_state(n, seed).unwrap();
        let out = ch.apply_matrix(rho.matrix()).unwrap();
        prop_assert!((out.trace() - C64::new(1.0, 0.0)).norm() < 1e-12);
        prop_assert!(hermiticity_deviation(&out) < 1e-12);
        prop_assert!(hermitian_eigenvalues(&out).unwrap()[0] > -1e-10);
    }

    #[test]
    fn entropy_never_exceeds_log_dimension(n in dims(), seed in any::<u64>()) {
        let ch = sloppy_channel(n, 0.5, ShiftMode::Strict).unwrap();
        let mut rho = random_pure_state(n, seed).unwrap();
        for _ in 0..4 {
            rho = apply_channel(&ch, &rho).unwrap();
            let s = von_neumann_entropy(&rho).unwrap();
            prop_assert!(s >= -1e-12 && s <= (n as f64).ln() + 1e-12);
        }
    }

    #[test]
    fn husimi_sum_rule(n in dims(), seed in any::<u64>()) {
        let frame = CoherentFrame::new(n).unwrap();
        let rho = random_pure_state(n, seed).unwrap();
        let grid = husimi(&rho, &frame).unwrap();
        prop_assert!((grid.sum() - n as f64).abs() < 1e-8 * n as f64);
        prop_assert!(grid.min() >= -1e-12 && grid.max() <= 1.0 + 1e-12);
    }

    #[test]
    fn superoperator_agrees_with_kraus_form(n in prop_oneof![Just(4usize), Just(8)], seed in any::<u64>()) {
        let ch = sloppy_channel(n, 0.5, ShiftMode::Strict).unwrap();
        let s = superoperator_matrix(&ch).unwrap();
        let rho = random_pure_state(n, seed).unwrap();
        let diff = s.apply(rho.matrix()).unwrap() - ch.apply_matrix(rho.matrix()).unwrap();
        prop_assert!(max_abs(&diff) < 1e-10);
    }
}
