//! Iterative maximum-likelihood estimation.
//!
//! The likelihood extremum satisfies `W[ψ]ψ ∝ ψ` with
//! `W_yz = Σ_x ⟨φ_xy| R_x |φ_xz⟩`, `|φ_xy⟩ = δ_xy|0⟩ + V_xy|1⟩` and the pointer
//! weight `R_x = Σ_m F_{x,m}/P_{x,m} |m⟩⟨m|`. The iteration applies `W[ψ^(k)]`
//! and renormalizes.

use nalgebra::{DMatrix, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::coupling::{CouplingOperator, DENSE_CAP};
use crate::error::{Result, TomoError};
use crate::measurement::{joint_probabilities, CountTable, Outcome, ProbabilityTable};
use crate::statevec::{fidelity, Dims, StateVector};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MLConfig {
    pub max_iters: usize,
    /// Stop once `1 − |⟨ψ^(k)|ψ^(k+1)⟩|²` drops below this.
    pub consec_infidelity_tol: f64,
    /// Floor on predicted probabilities for cells with nonzero counts.
    pub prob_floor: f64,
    /// Minimum amplitude of the initial estimate.
    pub init_floor: f64,
    /// Step dilution in `(0, 1]`; 1 is the plain update.
    pub dilution: f64,
}

impl Default for MLConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            consec_infidelity_tol: 1e-10,
            prob_floor: 1e-12,
            init_floor: 1e-6,
            dilution: 1.0,
        }
    }
}

impl MLConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.consec_infidelity_tol) || !positive(self.prob_floor) || !positive(self.init_floor) {
            return Err(TomoError::InvalidArgument(
                "ML tolerances and floors must be positive".into(),
            ));
        }
        if !(self.dilution > 0.0 && self.dilution <= 1.0) {
            return Err(TomoError::InvalidArgument(format!(
                "dilution {} outside (0, 1]",
                self.dilution
            )));
        }
        Ok(())
    }
}

/// Observed counts as real weights, so the ideal limit `F·P` can be fed in exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct CountWeights {
    dims: Dims,
    rows: Vec<[f64; 6]>,
    total: f64,
}

impl CountWeights {
    pub fn new(dims: Dims, rows: Vec<[f64; 6]>) -> Result<Self> {
        if rows.len() != dims.total() {
            return Err(TomoError::DimensionMismatch {
                expected: dims.total(),
                found: rows.len(),
            });
        }
        if rows.iter().flatten().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(TomoError::InvalidArgument("counts must be finite and non-negative".into()));
        }
        let total = rows.iter().flatten().sum();
        Ok(Self { dims, rows, total })
    }

    /// `F_{x,m} = shots · P_{x,m}`.
    pub fn ideal(table: &ProbabilityTable, shots: f64) -> Self {
        let rows = table.rows().iter().map(|r| r.map(|p| p * shots)).collect();
        let total = table.total() * shots;
        Self {
            dims: table.dims(),
            rows,
            total,
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn rows(&self) -> &[[f64; 6]] {
        &self.rows
    }

    pub fn total(&self) -> f64 {
        self.total
    }
}

impl From<&CountTable> for CountWeights {
    fn from(c: &CountTable) -> Self {
        Self {
            dims: c.dims(),
            rows: c.counts().iter().map(|r| r.map(|v| v as f64)).collect(),
            total: c.total() as f64,
        }
    }
}

/// One entry per completed iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub consec_infidelity: f64,
    pub log_likelihood: f64,
    pub fidelity_to_truth: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct MLState {
    pub estimate: StateVector,
    pub iter: usize,
    pub history: Vec<IterationRecord>,
    /// Log-likelihood of the initial estimate.
    pub initial_log_likelihood: f64,
    pub converged: bool,
    probs: ProbabilityTable,
}

impl MLState {
    pub fn new(estimate: StateVector, counts: &CountWeights, op: &CouplingOperator, config: &MLConfig) -> Result<Self> {
        let probs = joint_probabilities(&estimate, op)?;
        let initial_log_likelihood = log_likelihood(counts, &probs, config.prob_floor);
        Ok(Self {
            estimate,
            iter: 0,
            history: Vec::new(),
            initial_log_likelihood,
            converged: false,
            probs,
        })
    }

    /// Predicted probabilities of the current estimate.
    pub fn probabilities(&self) -> &ProbabilityTable {
        &self.probs
    }

    pub fn final_log_likelihood(&self) -> f64 {
        self.history
            .last()
            .map_or(self.initial_log_likelihood, |r| r.log_likelihood)
    }

    pub fn last_consec_infidelity(&self) -> Option<f64> {
        self.history.last().map(|r| r.consec_infidelity)
    }

    /// First iteration whose consecutive infidelity fell below `threshold`.
    pub fn iterations_to(&self, threshold: f64) -> Option<usize> {
        self.history
            .iter()
            .find(|r| r.consec_infidelity < threshold)
            .map(|r| r.iter)
    }
}

/// `ψ^(0) ∝ Σ_x max(√(F_{x,0}/F), floor) |x⟩`.
pub fn init_estimate(counts: &CountWeights, init_floor: f64) -> Result<StateVector> {
    if !(counts.total() > 0.0) {
        return Err(TomoError::EmptyCounts);
    }
    let amp = counts
        .rows()
        .iter()
        .map(|r| C64::new((r[Outcome::Z0.index()] / counts.total()).sqrt().max(init_floor), 0.0))
        .collect();
    StateVector::new(counts.dims(), amp)
}

/// `Σ_{x,m} F_{x,m} log max(P_{x,m}, ε)`, skipping empty cells.
pub fn log_likelihood(counts: &CountWeights, probs: &ProbabilityTable, prob_floor: f64) -> f64 {
    counts
        .rows()
        .iter()
        .zip(probs.rows())
        .flat_map(|(f, p)| f.iter().zip(p.iter()))
        .filter(|(f, _)| **f > 0.0)
        .map(|(f, p)| f * p.max(prob_floor).ln())
        .sum()
}

/// `R_x = Σ_m F_{x,m}/max(P_{x,m}, ε) |m⟩⟨m|` for every `x`; empty cells contribute nothing.
pub fn pointer_weights(
    counts: &CountWeights,
    probs: &ProbabilityTable,
    prob_floor: f64,
) -> Result<Vec<Matrix2<C64>>> {
    if counts.dims() != probs.dims() {
        return Err(TomoError::DimensionMismatch {
            expected: probs.rows().len(),
            found: counts.rows().len(),
        });
    }
    let projectors = Outcome::ALL.map(Outcome::projector);
    Ok(counts
        .rows()
        .iter()
        .zip(probs.rows())
        .map(|(f, p)| {
            let mut r = Matrix2::zeros();
            for m in 0..6 {
                if f[m] > 0.0 {
                    r += projectors[m] * C64::new(f[m] / p[m].max(prob_floor), 0.0);
                }
            }
            r
        })
        .collect())
}

fn check_dims(estimate: &StateVector, counts: &CountWeights, op: &CouplingOperator) -> Result<()> {
    for found in [estimate.dims(), counts.dims()] {
        if found != op.dims() {
            return Err(TomoError::DimensionMismatch {
                expected: op.size(),
                found: found.total(),
            });
        }
    }
    Ok(())
}

fn apply_w_with(
    estimate: &StateVector,
    weights: &[Matrix2<C64>],
    op: &CouplingOperator,
) -> Result<Vec<C64>> {
    let alpha = estimate.amplitudes();
    let beta = op.apply_v(alpha)?;
    let mut out = Vec::with_capacity(alpha.len());
    let mut beta_prime = Vec::with_capacity(alpha.len());
    for ((r, &a), &b) in weights.iter().zip(alpha).zip(&beta) {
        let v = r * Vector2::new(a, b);
        out.push(v[0]);
        beta_prime.push(v[1]);
    }
    let back = op.apply_v_dagger(&beta_prime)?;
    for (o, b) in out.iter_mut().zip(back) {
        *o += b;
    }
    Ok(out)
}

/// `W[ψ]·ψ` without forming `W`: split into pointer branches `(ψ, Vψ)`, apply
/// each `R_x`, then recombine as `α' + V†β'`.
pub fn apply_w_streamed(
    estimate: &StateVector,
    counts: &CountWeights,
    op: &CouplingOperator,
    prob_floor: f64,
) -> Result<Vec<C64>> {
    check_dims(estimate, counts, op)?;
    let probs = joint_probabilities(estimate, op)?;
    let weights = pointer_weights(counts, &probs, prob_floor)?;
    apply_w_with(estimate, &weights, op)
}

/// Dense `W = D₀₀ + D₀₁V + V†D₁₀ + V†D₁₁V` with `D_ab = diag_x (R_x)_ab`.
pub fn build_w_dense(
    counts: &CountWeights,
    probs: &ProbabilityTable,
    op: &CouplingOperator,
    prob_floor: f64,
) -> Result<DMatrix<C64>> {
    let size = op.size();
    if size > DENSE_CAP {
        return Err(TomoError::TooLarge {
            size,
            cap: DENSE_CAP,
        });
    }
    let weights = pointer_weights(counts, probs, prob_floor)?;
    let v = op.dense()?;
    let diag = |a: usize, b: usize| {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            size,
            weights.iter().map(|r| r[(a, b)]),
        ))
    };
    let vh = v.adjoint();
    Ok(diag(0, 0) + diag(0, 1) * v + &vh * diag(1, 0) + &vh * diag(1, 1) * v)
}

/// One update `ψ ← W[ψ]ψ / ‖W[ψ]ψ‖`, with optional dilution toward the current estimate.
pub fn iterate_once(
    mut state: MLState,
    counts: &CountWeights,
    op: &CouplingOperator,
    config: &MLConfig,
) -> Result<MLState> {
    check_dims(&state.estimate, counts, op)?;
    let weights = pointer_weights(counts, &state.probs, config.prob_floor)?;
    let mut candidate = apply_w_with(&state.estimate, &weights, op)?;
    if config.dilution < 1.0 {
        let mu = config.dilution;
        let scale = crate::statevec::norm(&candidate);
        for (c, e) in candidate.iter_mut().zip(state.estimate.amplitudes()) {
            *c = *c * mu + e * (scale * (1.0 - mu));
        }
    }
    let next = match StateVector::new(counts.dims(), candidate) {
        Ok(s) => s.phase_fix()?,
        Err(TomoError::NullVector) => return Err(TomoError::ZeroIterate { iter: state.iter + 1 }),
        Err(e) => return Err(e),
    };
    let consec_infidelity = (1.0 - fidelity(&state.estimate, &next)?).max(0.0);
    let probs = joint_probabilities(&next, op)?;
    state.iter += 1;
    state.history.push(IterationRecord {
        iter: state.iter,
        consec_infidelity,
        log_likelihood: log_likelihood(counts, &probs, config.prob_floor),
        fidelity_to_truth: None,
    });
    state.estimate = next;
    state.probs = probs;
    Ok(state)
}

/// Iterates from [`init_estimate`] until the consecutive infidelity drops below
/// the tolerance or `max_iters` is reached.
pub fn run(
    counts: &CountWeights,
    op: &CouplingOperator,
    config: &MLConfig,
    truth: Option<&StateVector>,
) -> Result<MLState> {
    config.validate()?;
    let start = init_estimate(counts, config.init_floor)?;
    run_from(start, counts, op, config, truth)
}

/// As [`run`], from a caller-supplied starting point.
pub fn run_from(
    start: StateVector,
    counts: &CountWeights,
    op: &CouplingOperator,
    config: &MLConfig,
    truth: Option<&StateVector>,
) -> Result<MLState> {
    config.validate()?;
    check_dims(&start, counts, op)?;
    let mut state = MLState::new(start, counts, op, config)?;
    while state.iter < config.max_iters {
        state = iterate_once(state, counts, op, config)?;
        if let Some(t) = truth {
            let f = fidelity(&state.estimate, t)?;
            if let Some(last) = state.history.last_mut() {
                last.fidelity_to_truth = Some(f);
            }
        }
        if state.last_consec_infidelity().is_some_and(|c| c < config.consec_infidelity_tol) {
            state.converged = true;
            break;
        }
    }
    Ok(state)
}

/// Convergence history as CSV: `iter,consec_infidelity,log_likelihood[,fidelity_to_truth]`.
pub fn history_csv(history: &[IterationRecord]) -> String {
    let with_truth = history.iter().any(|r| r.fidelity_to_truth.is_some());
    let mut out = String::from("iter,consec_infidelity,log_likelihood");
    if with_truth {
        out.push_str(",fidelity_to_truth");
    }
    out.push('\n');
    for r in history {
        out.push_str(&format!(
            "{},{:.16e},{:.16e}",
            r.iter, r.consec_infidelity, r.log_likelihood
        ));
        if with_truth {
            match r.fidelity_to_truth {
                Some(f) => out.push_str(&format!(",{f:.16e}")),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}
