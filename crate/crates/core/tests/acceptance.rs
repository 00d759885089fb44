//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fail.

use std::f64::consts::FRAC_1_SQRT_2;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use reaptomo::coupling::{
    build_coupling, check_dangerous_block_diagonal, check_dangerous_compatible,
    check_dangerous_degenerate_eigenstate, degenerate_signature, CouplingOperator, CouplingSpec,
    DEFAULT_THETA,
};
use reaptomo::exact::{reconstruct, ReconstructionWarning};
use reaptomo::measurement::{joint_probabilities, sample_counts, Outcome};
use reaptomo::mle::{apply_w_streamed, build_w_dense, iterate_once, run, CountWeights, MLConfig, MLState};
use reaptomo::statevec::{
    fidelity, make_dicke, make_ghz, make_tfim_ground, make_w, random_state, Dims, StateVector,
};
use reaptomo::{TomoError, C64};

type Outcome_ = Result<String, String>;

fn local(n: usize, theta: f64) -> CouplingOperator {
    build_coupling(CouplingSpec::local_x_sum(n, theta).unwrap()).unwrap()
}

fn plus_product(n: usize) -> StateVector {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    StateVector::product(n, &[h, h]).unwrap()
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// 1. Exact round trip over benchmark and random states, n = 2..6, θ = 0.6.
fn exact_round_trip() -> Outcome_ {
    let start = Instant::now();
    let mut worst = 1.0f64;
    let mut cases = 0;
    for n in 2..=6 {
        let op = local(n, 0.6);
        let mut states = vec![
            ("ghz".to_string(), make_ghz(n).unwrap()),
            ("w".to_string(), make_w(n).unwrap()),
            (format!("dicke(k={})", n / 2), make_dicke(n, n / 2).unwrap()),
        ];
        for i in 0..20 {
            states.push((format!("random#{i}"), random_state(op.dims(), 1000 * n as u64 + i)));
        }
        for (name, psi) in states {
            let table = joint_probabilities(&psi, &op).unwrap();
            let r = reconstruct(&table, &op).map_err(|e| format!("n={n} {name}: {e}"))?;
            let f = fidelity(&r.state, &psi).unwrap();
            ensure(f >= 1.0 - 1e-9, format!("n={n} {name}: fidelity {f}"))?;
            worst = worst.min(f);
            cases += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), format!("runtime {elapsed:?} >= 10 s"))?;
    Ok(format!("{cases} states, min fidelity 1 - {:.1e}, {elapsed:.2?}", 1.0 - worst))
}

/// 2. Normalization, coherence identity, eigenstate signature.
fn probability_identities() -> Outcome_ {
    let mut worst_norm = 0.0f64;
    let mut worst_coh = 0.0f64;
    for n in 1..=6 {
        let op = local(n, 0.6);
        let mut states: Vec<StateVector> =
            (0..5).map(|s| random_state(op.dims(), 77 * n as u64 + s)).collect();
        states.push(make_ghz(n).unwrap());
        states.push(make_w(n).unwrap());
        for psi in &states {
            let t = joint_probabilities(psi, &op).unwrap();
            worst_norm = worst_norm.max((t.total() - 1.0).abs());
            let beta = op.apply_v(psi.amplitudes()).unwrap();
            for x in 0..op.size() {
                let expected = psi.amplitudes()[x].conj() * beta[x] / 3.0;
                worst_coh = worst_coh.max((t.coherence(x) - expected).norm());
            }
        }
        let t = joint_probabilities(&plus_product(n), &op).unwrap();
        for x in 0..op.size() {
            let gap = (t.get(x, Outcome::Z0) - t.get(x, Outcome::Z1)).abs();
            ensure(gap <= 1e-12, format!("n={n} x={x}: |P_x0 - P_x1| = {gap:e}"))?;
        }
    }
    ensure(worst_norm <= 1e-12, format!("normalization error {worst_norm:e}"))?;
    ensure(worst_coh <= 1e-12, format!("coherence identity error {worst_coh:e}"))?;
    Ok(format!("max |sum P - 1| = {worst_norm:.1e}, max coherence error = {worst_coh:.1e}"))
}

/// 3. Dense W is Hermitian PSD, streamed application agrees, ideal limit is 6F·I.
fn w_operator_suite() -> Outcome_ {
    let mut worst_herm = 0.0f64;
    let mut min_eig = f64::INFINITY;
    let mut worst_stream = 0.0f64;
    let mut worst_ideal = 0.0f64;
    for n in 1..=3 {
        let op = local(n, 0.6);
        for seed in 0..5u64 {
            let truth = random_state(op.dims(), 500 + seed);
            let counts =
                sample_counts(&joint_probabilities(&truth, &op).unwrap(), 5000, seed).unwrap();
            let c = CountWeights::from(&counts);
            let est = random_state(op.dims(), 600 + seed);
            let p = joint_probabilities(&est, &op).unwrap();
            let w = build_w_dense(&c, &p, &op, 1e-12).unwrap();
            let wmax = w.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let herm = (&w - w.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max);
            worst_herm = worst_herm.max(herm / wmax);
            let eig = nalgebra::SymmetricEigen::new(w.clone());
            min_eig = min_eig.min(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min));

            let dense = &w * DVector::from_column_slice(est.amplitudes());
            let streamed = apply_w_streamed(&est, &c, &op, 1e-12).unwrap();
            let scale = dense.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let diff = dense
                .iter()
                .zip(&streamed)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            worst_stream = worst_stream.max(diff / scale);

            let f = 24000.0;
            let pt = joint_probabilities(&truth, &op).unwrap();
            let wi = build_w_dense(&CountWeights::ideal(&pt, f), &pt, &op, 1e-12).unwrap();
            let target = DMatrix::<C64>::identity(op.size(), op.size()) * C64::new(6.0 * f, 0.0);
            let dev = (wi - target).iter().map(|v| v.norm()).fold(0.0, f64::max);
            worst_ideal = worst_ideal.max(dev / (6.0 * f));
        }
    }
    ensure(worst_herm <= 1e-12, format!("|W - W^dagger| / |W| = {worst_herm:e}"))?;
    ensure(min_eig >= -1e-10, format!("eigenvalue {min_eig:e} < -1e-10"))?;
    ensure(worst_stream <= 1e-10, format!("streamed vs dense rel. error {worst_stream:e}"))?;
    ensure(worst_ideal <= 1e-8, format!("ideal W rel. deviation {worst_ideal:e}"))?;
    Ok(format!(
        "herm {worst_herm:.1e}, min eig {min_eig:.2e}, stream {worst_stream:.1e}, ideal {worst_ideal:.1e}"
    ))
}

/// 4. With F·P counts the true state is a fixed point of one iteration.
fn ml_fixed_point() -> Outcome_ {
    let config = MLConfig::default();
    let mut worst = 0.0f64;
    for n in 2..=6 {
        let op = local(n, 0.6);
        let states = [
            ("ghz", make_ghz(n).unwrap()),
            ("w", make_w(n).unwrap()),
            ("dicke", make_dicke(n, n / 2).unwrap()),
            ("tfim", make_tfim_ground(n, 0.5, 1.0).unwrap()),
        ];
        for (name, psi) in states {
            let c = CountWeights::ideal(&joint_probabilities(&psi, &op).unwrap(), 24000.0);
            let state = MLState::new(psi.clone(), &c, &op, &config).unwrap();
            let next = iterate_once(state, &c, &op, &config).map_err(|e| format!("{name}: {e}"))?;
            let inf = next.history[0].consec_infidelity;
            ensure(inf < 1e-12, format!("n={n} {name}: consecutive infidelity {inf:e}"))?;
            worst = worst.max(inf);
        }
    }
    Ok(format!("max consecutive infidelity {worst:.1e}"))
}

/// 5. n = 6, F = 24000 convergence and fidelity, seed majority (>= 8 of 10).
fn ml_benchmark_reproduction() -> Outcome_ {
    let op = local(6, DEFAULT_THETA);
    let cases = [
        ("dicke", make_dicke(6, 3).unwrap(), 500usize, true),
        ("w", make_w(6).unwrap(), 500, false),
        ("ghz", make_ghz(6).unwrap(), 1000, false),
        ("tfim", make_tfim_ground(6, 0.5, 1.0).unwrap(), 500, false),
    ];
    let mut summary = Vec::new();
    for (name, truth, max_iters, check_speed) in cases {
        let start = Instant::now();
        let table = joint_probabilities(&truth, &op).unwrap();
        let config = MLConfig {
            max_iters,
            ..MLConfig::default()
        };
        let mut passed = 0;
        let mut fids = Vec::new();
        for seed in 1..=10u64 {
            let counts = sample_counts(&table, 24000, seed).unwrap();
            let state = run(&CountWeights::from(&counts), &op, &config, Some(&truth))
                .map_err(|e| format!("{name} seed {seed}: {e}"))?;
            let f = fidelity(&state.estimate, &truth).unwrap();
            let fast = !check_speed || state.iterations_to(1e-5).is_some_and(|k| k <= 200);
            if f > 0.99 && fast {
                passed += 1;
            }
            fids.push(f);
        }
        let elapsed = start.elapsed();
        let min = fids.iter().copied().fold(1.0, f64::min);
        ensure(
            passed >= 8,
            format!("{name}: only {passed}/10 seeds pass (fidelities {fids:.4?})"),
        )?;
        ensure(
            elapsed < Duration::from_secs(120),
            format!("{name}: runtime {elapsed:?} >= 2 min"),
        )?;
        summary.push(format!("{name} {passed}/10 (min F {min:.4})"));
    }
    Ok(format!("theta = {DEFAULT_THETA}: {}", summary.join(", ")))
}

/// 6. Sampler frequencies within 5σ per cell at F = 10^6 in >= 95 of 100 seeds.
fn sampler_calibration() -> Outcome_ {
    let shots = 1_000_000u64;
    let mut summary = Vec::new();
    for n in 1..=2 {
        let op = local(n, 0.6);
        let table = joint_probabilities(&random_state(op.dims(), 31 + n as u64), &op).unwrap();
        let mut good = 0;
        for seed in 0..100u64 {
            let counts = sample_counts(&table, shots, seed).unwrap();
            let ok = (0..op.size()).all(|x| {
                Outcome::ALL.iter().all(|&m| {
                    let p = table.get(x, m);
                    let f = counts.get(x, m) as f64 / shots as f64;
                    if p == 0.0 {
                        counts.get(x, m) == 0
                    } else {
                        (f - p).abs() < 5.0 * (p * (1.0 - p) / shots as f64).sqrt()
                    }
                })
            });
            if ok {
                good += 1;
            }
        }
        ensure(good >= 95, format!("n={n}: {good}/100 seeds within 5 sigma"))?;
        summary.push(format!("n={n}: {good}/100"));
    }
    Ok(summary.join(", "))
}

/// 7. Dangerous-case detection.
fn dangerous_cases() -> Outcome_ {
    let dims = Dims::qubits(2).unwrap();
    let diag = DMatrix::from_diagonal(&DVector::from_iterator(
        4,
        (0..4).map(|k| C64::from_polar(1.0, 0.6 * k as f64)),
    ));
    let op = build_coupling(CouplingSpec::explicit(dims, diag)).unwrap();
    ensure(check_dangerous_compatible(&op).unwrap().flagged, "(i) diagonal V not flagged")?;
    let t = joint_probabilities(&random_state(dims, 1), &op).unwrap();
    ensure(
        matches!(reconstruct(&t, &op), Err(TomoError::CompatibleBasis)),
        "(i) reconstruct did not abort",
    )?;

    // Blocks {0, 2} and {1, 3}: block diagonal only after a permutation.
    let v = local(1, 0.6).dense().unwrap().clone();
    let mut m = DMatrix::<C64>::zeros(4, 4);
    for (a, b) in [(0usize, 0usize), (0, 1), (1, 0), (1, 1)] {
        m[(2 * a, 2 * b)] = v[(a, b)];
        m[(2 * a + 1, 2 * b + 1)] = v[(a, b)] * C64::from_polar(1.0, 0.3);
    }
    let op = build_coupling(CouplingSpec::explicit(dims, m)).unwrap();
    let report = check_dangerous_block_diagonal(&op).unwrap();
    ensure(report.flagged, "(ii) block unitary not flagged")?;
    ensure(
        report.components == vec![vec![0, 2], vec![1, 3]],
        format!("(ii) components {:?}", report.components),
    )?;
    let t = joint_probabilities(&random_state(dims, 2), &op).unwrap();
    ensure(
        matches!(reconstruct(&t, &op), Err(TomoError::BlockDiagonal { .. })),
        "(ii) reconstruct did not abort",
    )?;

    for n in 2..=4 {
        let op = local(n, 0.6);
        let t = joint_probabilities(&plus_product(n), &op).unwrap();
        let r = reconstruct(&t, &op).map_err(|e| format!("(iii) n={n}: {e}"))?;
        ensure(
            r.warnings
                .iter()
                .any(|w| matches!(w, ReconstructionWarning::DegenerateEigenstate { .. })),
            format!("(iii) n={n}: no warning"),
        )?;
        let counts = sample_counts(&t, 100_000, n as u64).unwrap();
        ensure(
            check_dangerous_degenerate_eigenstate(&counts).unwrap().flagged,
            format!("(iii) n={n}: sampled counts not flagged"),
        )?;
    }

    let op = local(6, 0.6);
    let t = joint_probabilities(&make_ghz(6).unwrap(), &op).unwrap();
    ensure(!check_dangerous_compatible(&op).unwrap().flagged, "GHZ: (i) false positive")?;
    ensure(!check_dangerous_block_diagonal(&op).unwrap().flagged, "GHZ: (ii) false positive")?;
    ensure(!degenerate_signature(&t).flagged, "GHZ: (iii) false positive (exact)")?;
    let counts = sample_counts(&t, 24000, 3).unwrap();
    ensure(
        !check_dangerous_degenerate_eigenstate(&counts).unwrap().flagged,
        "GHZ: (iii) false positive (sampled)",
    )?;
    let r = reconstruct(&t, &op).map_err(|e| format!("GHZ: {e}"))?;
    ensure(r.warnings.is_empty(), format!("GHZ: warnings {:?}", r.warnings))?;
    Ok("cases (i), (ii), (iii) detected; GHZ under theta = 0.6 clean".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome_); 7] = [
        ("1 exact round trip", exact_round_trip),
        ("2 probability-model identities", probability_identities),
        ("3 W-operator suite", w_operator_suite),
        ("4 exact-data ML fixed point", ml_fixed_point),
        ("5 n=6 F=24000 ML reproduction", ml_benchmark_reproduction),
        ("6 sampler calibration", sampler_calibration),
        ("7 dangerous-case detection", dangerous_cases),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("[FAIL] {name}: {detail}");
            }
        }
    }
    if failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    }
}
