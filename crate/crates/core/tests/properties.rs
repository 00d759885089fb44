use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use reaptomo::coupling::{build_coupling, CouplingOperator, CouplingSpec};
use reaptomo::measurement::{joint_probabilities, sample_counts, CountTable};
use reaptomo::mle::{run, CountWeights, MLConfig};
use reaptomo::statevec::{fidelity, random_state, Dims, StateVector};
use reaptomo::C64;

fn local(n: usize, theta: f64) -> CouplingOperator {
    build_coupling(CouplingSpec::local_x_sum(n, theta).unwrap()).unwrap()
}

fn max_abs(m: impl IntoIterator<Item = C64>) -> f64 {
    m.into_iter().map(|v| v.norm()).fold(0.0, f64::max)
}

fn amplitudes(len: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), len)
        .prop_map(|v| v.into_iter().map(|(re, im)| C64::new(re, im)).collect())
        .prop_filter("non-null", |v: &Vec<C64>| v.iter().any(|a| a.norm() > 1e-3))
}

fn state(n: usize) -> impl Strategy<Value = StateVector> {
    amplitudes(1 << n).prop_map(move |a| StateVector::new(Dims::qubits(n).unwrap(), a).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constructed_states_are_normalized(n in 1usize..7, seed in any::<u64>()) {
        let psi = random_state(Dims::qubits(n).unwrap(), seed);
        prop_assert!((psi.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_fix_is_idempotent_and_keeps_fidelity(psi in state(3), phi in 0.0f64..std::f64::consts::TAU) {
        let rotated = StateVector::new(
            psi.dims(),
            psi.amplitudes().iter().map(|a| a * C64::from_polar(1.0, phi)).collect(),
        ).unwrap();
        let once = rotated.phase_fix().unwrap();
        let twice = once.phase_fix().unwrap();
        prop_assert!(max_abs(once.amplitudes().iter().zip(twice.amplitudes()).map(|(a, b)| a - b)) < 1e-14);
        prop_assert!((fidelity(&once, &psi).unwrap() - 1.0).abs() < 1e-12);
        // Same ray, same canonical representative.
        let direct = psi.phase_fix().unwrap();
        prop_assert!(max_abs(once.amplitudes().iter().zip(direct.amplitudes()).map(|(a, b)| a - b)) < 1e-12);
    }

    #[test]
    fn couplings_are_unitary(n in 1usize..5, theta in 0.01f64..1.56) {
        for spec in [
            CouplingSpec::local_x_sum(n, theta).unwrap(),
            CouplingSpec::fourier(Dims::qubits(n).unwrap(), theta),
        ] {
            let op = build_coupling(spec).unwrap();
            let v = op.dense().unwrap();
            let id = DMatrix::<C64>::identity(op.size(), op.size());
            prop_assert!(max_abs((v.adjoint() * v - id).iter().copied()) < 1e-12);
        }
    }

    #[test]
    fn factored_action_matches_dense(n in 1usize..7, theta in 0.01f64..1.56, seed in any::<u64>()) {
        let op = local(n, theta);
        let psi = random_state(op.dims(), seed);
        let dense = op.dense().unwrap() * DVector::from_column_slice(psi.amplitudes());
        let fast = op.apply_v(psi.amplitudes()).unwrap();
        prop_assert!(max_abs(dense.iter().zip(&fast).map(|(a, b)| a - b)) < 1e-12);
        let back = op.apply_v_dagger(&fast).unwrap();
        prop_assert!(max_abs(back.iter().zip(psi.amplitudes()).map(|(a, b)| a - b)) < 1e-12);
    }

    #[test]
    fn tables_are_normalized_with_coherence_identity(psi in state(3), theta in 0.01f64..1.56) {
        let op = local(3, theta);
        let t = joint_probabilities(&psi, &op).unwrap();
        prop_assert!((t.total() - 1.0).abs() < 1e-12);
        prop_assert!(t.rows().iter().flatten().all(|&p| p >= 0.0));
        let beta = op.apply_v(psi.amplitudes()).unwrap();
        for x in 0..op.size() {
            let expected = psi.amplitudes()[x].conj() * beta[x] / 3.0;
            prop_assert!((t.coherence(x) - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn sampling_is_reproducible(seed in any::<u64>(), shots in 1u64..5000) {
        let op = local(2, 0.6);
        let t = joint_probabilities(&random_state(op.dims(), seed ^ 0x55), &op).unwrap();
        let a = sample_counts(&t, shots, seed).unwrap();
        let b = sample_counts(&t, shots, seed).unwrap();
        prop_assert_eq!(a.counts(), b.counts());
        prop_assert_eq!(a.total(), shots);
        let parsed = CountTable::from_csv(&a.to_csv(), op.dims()).unwrap();
        prop_assert_eq!(parsed.counts(), a.counts());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ml_keeps_estimates_normalized_and_raises_likelihood(seed in any::<u64>(), n in 1usize..4) {
        let op = local(n, 0.9);
        let truth = random_state(op.dims(), seed);
        let counts = sample_counts(&joint_probabilities(&truth, &op).unwrap(), 2000, seed).unwrap();
        let config = MLConfig { max_iters: 50, ..MLConfig::default() };
        let state = run(&CountWeights::from(&counts), &op, &config, None).unwrap();
        prop_assert!((state.estimate.norm() - 1.0).abs() < 1e-12);
        prop_assert!(state.final_log_likelihood() >= state.initial_log_likelihood - 1e-9);
    }
}
