//! Cross-checks against independently written reference computations.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};
use reaptomo::coupling::{build_coupling, CouplingOperator, CouplingSpec};
use reaptomo::exact::reconstruct;
use reaptomo::measurement::{empirical_frequencies, joint_probabilities, sample_counts};
use reaptomo::mle::{build_w_dense, iterate_once, log_likelihood, CountWeights, MLConfig, MLState};
use reaptomo::statevec::{fidelity, make_dicke, random_state, tfim_ground};
use reaptomo::C64;

fn local(n: usize, theta: f64) -> CouplingOperator {
    build_coupling(CouplingSpec::local_x_sum(n, theta).unwrap()).unwrap()
}

/// Cyclic Jacobi rotations; returns eigenvalues and eigenvectors (columns).
fn jacobi_eigen(mut a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() < 1e-13 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

/// `I ⊗ … ⊗ σ ⊗ … ⊗ I` with `σ` on bit `site` (bit 0 is the last Kronecker factor).
fn on_site(n: usize, site: usize, sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::<f64>::identity(1, 1);
    for k in (0..n).rev() {
        let factor = if k == site { sigma.clone() } else { DMatrix::identity(2, 2) };
        out = out.kronecker(&factor);
    }
    out
}

fn tfim_by_kronecker(n: usize, g: f64, j: f64) -> DMatrix<f64> {
    let x = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let z = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let size = 1 << n;
    let mut h = DMatrix::<f64>::zeros(size, size);
    for i in 0..n - 1 {
        h -= on_site(n, i, &z) * on_site(n, i + 1, &z) * j;
    }
    for i in 0..n {
        h -= on_site(n, i, &x) * g;
    }
    h
}

#[test]
fn tfim_ground_matches_jacobi_on_kronecker_hamiltonian() {
    for (n, g) in [(2, 0.5), (4, 0.5), (6, 0.5), (6, 1.3), (8, 0.5)] {
        let (values, vectors) = jacobi_eigen(tfim_by_kronecker(n, g, 1.0));
        let k = (0..values.len()).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
        let gs = tfim_ground(n, g, 1.0).unwrap();
        assert!(
            (gs.energy - values[k]).abs() < 1e-10,
            "n={n} g={g}: {} vs {}",
            gs.energy,
            values[k]
        );
        let overlap: f64 = gs
            .state
            .amplitudes()
            .iter()
            .zip(vectors.column(k).iter())
            .map(|(a, b)| a.re * b)
            .sum();
        assert!(overlap.abs() > 1.0 - 1e-9, "n={n} g={g}: overlap {overlap}");
    }
}

/// `P_{x,m} = |⟨m| (ψ_x, (Vψ)_x)⟩|² / 6` with literal pointer states.
fn pointer_bras() -> [[C64; 2]; 6] {
    let h = FRAC_1_SQRT_2;
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    [
        [one, zero],
        [zero, one],
        [C64::new(h, 0.0), C64::new(h, 0.0)],
        [C64::new(h, 0.0), C64::new(-h, 0.0)],
        [C64::new(h, 0.0), C64::new(0.0, -h)],
        [C64::new(h, 0.0), C64::new(0.0, h)],
    ]
}

/// Row vector `k_{x,m}` with `P_{x,m} = |k_{x,m} ψ|²`.
fn kraus_row(v: &DMatrix<C64>, x: usize, bra: &[C64; 2]) -> DVector<C64> {
    let s = 1.0 / 6.0f64.sqrt();
    DVector::from_fn(v.nrows(), |y, _| {
        let delta = if y == x { bra[0] } else { C64::new(0.0, 0.0) };
        (delta + bra[1] * v[(x, y)]) * s
    })
}

#[test]
fn dense_w_matches_povm_sum() {
    for n in 1..=3 {
        let op = local(n, 0.7);
        let v = op.dense().unwrap().clone();
        let truth = random_state(op.dims(), 11 + n as u64);
        let counts = sample_counts(&joint_probabilities(&truth, &op).unwrap(), 3000, 5).unwrap();
        let est = random_state(op.dims(), 90 + n as u64);
        let psi = DVector::from_column_slice(est.amplitudes());

        let mut oracle = DMatrix::<C64>::zeros(op.size(), op.size());
        let mut ll = 0.0;
        for x in 0..op.size() {
            for (m, bra) in pointer_bras().iter().enumerate() {
                let k = kraus_row(&v, x, bra);
                let p = k.dot(&psi).norm_sqr();
                let f = counts.counts()[x][m] as f64;
                if f > 0.0 {
                    oracle += (&k * k.adjoint()).map(|e| e * (6.0 * f / p));
                    ll += f * p.ln();
                }
            }
        }
        // The sum above is the transpose of k†k; conjugate to get k†k.
        let oracle = oracle.map(|e| e.conj());

        let probs = joint_probabilities(&est, &op).unwrap();
        let weights = CountWeights::from(&counts);
        let w = build_w_dense(&weights, &probs, &op, 1e-300).unwrap();
        let scale = oracle.iter().map(|e| e.norm()).fold(0.0, f64::max);
        let diff = (&w - &oracle).iter().map(|e| e.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-11 * scale, "n={n}: {diff:e} vs scale {scale:e}");
        let got = log_likelihood(&weights, &probs, 1e-300);
        assert!((got - ll).abs() < 1e-9 * ll.abs(), "n={n}: {got} vs {ll}");
    }
}

#[test]
fn sampled_exact_reconstruction_is_accurate_at_large_f() {
    let op = local(2, 0.6);
    let mut fids: Vec<f64> = (0..20u64)
        .map(|seed| {
            let truth = random_state(op.dims(), 300 + seed);
            let table = joint_probabilities(&truth, &op).unwrap();
            let counts = sample_counts(&table, 1_000_000, seed).unwrap();
            let r = reconstruct(&empirical_frequencies(&counts).unwrap(), &op).unwrap();
            fidelity(&r.state, &truth).unwrap()
        })
        .collect();
    fids.sort_by(f64::total_cmp);
    let median = 0.5 * (fids[9] + fids[10]);
    assert!(median >= 0.999, "median fidelity {median}");
}

#[test]
fn one_iteration_raises_dicke_likelihood() {
    let op = local(6, 0.9);
    let truth = make_dicke(6, 3).unwrap();
    let counts = sample_counts(&joint_probabilities(&truth, &op).unwrap(), 24000, 1).unwrap();
    let weights = CountWeights::from(&counts);
    let config = MLConfig::default();
    let start = reaptomo::mle::init_estimate(&weights, config.init_floor).unwrap();
    let state = MLState::new(start, &weights, &op, &config).unwrap();
    let before = state.initial_log_likelihood;
    let after = iterate_once(state, &weights, &op, &config).unwrap();
    assert!(after.final_log_likelihood() > before);
}
