//! Direct wavefunction reconstruction from pointer statistics.
//!
//! Each row `x` fixes the ratio `(Vψ)_x / ψ_x = √(P_{x,1}/P_{x,0}) e^{iφ_x}`.
//! Dividing through by a reference amplitude `ψ_r` turns the `N` ratios into
//! `N − 1` linear equations for `ψ_y / ψ_r`, which are solved by pivoted least squares.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::coupling::{
    check_dangerous_block_diagonal, check_dangerous_compatible, degenerate_signature,
    CouplingOperator,
};
use crate::error::{Result, TomoError};
use crate::linalg::solve_least_squares;
use crate::measurement::{Outcome, ProbabilityTable};
use crate::statevec::{fidelity, StateVector};
use crate::C64;

/// Below this magnitude the pointer coherence carries no usable phase.
pub const PHASE_MAGNITUDE_TOL: f64 = 1e-14;

/// Relative threshold on the pivoted-QR diagonal that defines numerical rank.
pub const RANK_TOL: f64 = 1e-10;

/// Rows whose branch weight is below this fraction of the heaviest row count as unsupported.
const SUPPORT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReconstructionWarning {
    /// Data carry the signature of an eigenstate of `P`; uniqueness is not guaranteed.
    DegenerateEigenstate { common_phase: Option<f64> },
    /// `ψ_0` had no support, so another amplitude served as the reference.
    ReferenceReindexed { reference: usize },
    /// Rows where the coherence is within three standard errors of zero.
    PhaseUnreliable { rows: Vec<usize> },
}

impl fmt::Display for ReconstructionWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DegenerateEigenstate { .. } => {
                write!(f, "degenerate-eigenstate signature: P_x0 = P_x1 with common phase on all rows")
            }
            Self::ReferenceReindexed { reference } => {
                write!(f, "psi_0 unsupported, reference amplitude moved to x = {reference}")
            }
            Self::PhaseUnreliable { rows } => {
                write!(f, "phase unreliable on {} rows", rows.len())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    /// Normalized, phase-fixed estimate.
    pub state: StateVector,
    pub residual: f64,
    pub condition_estimate: f64,
    pub reference: usize,
    pub warnings: Vec<ReconstructionWarning>,
}

#[derive(Debug, Serialize)]
struct ResultJson<'a> {
    amplitudes: Vec<[f64; 2]>,
    residual: f64,
    condition_estimate: f64,
    reference: usize,
    warnings: &'a [ReconstructionWarning],
    #[serde(skip_serializing_if = "Option::is_none")]
    fidelity_to_truth: Option<f64>,
}

impl ReconstructionResult {
    pub fn to_json(&self, truth: Option<&StateVector>) -> Result<String> {
        let fidelity_to_truth = truth.map(|t| fidelity(&self.state, t)).transpose()?;
        let doc = ResultJson {
            amplitudes: self.state.amplitudes().iter().map(|a| [a.re, a.im]).collect(),
            residual: self.residual,
            condition_estimate: self.condition_estimate,
            reference: self.reference,
            warnings: &self.warnings,
            fidelity_to_truth,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// `φ_x = arg[(P_{x,+} − P_{x,−}) + i(P_{x,L} − P_{x,R})]` in `(−π, π]`.
pub fn phase_angle(table: &ProbabilityTable, x: usize) -> Result<f64> {
    if x >= table.rows().len() {
        return Err(TomoError::InvalidArgument(format!("row {x} out of range")));
    }
    let c = table.coherence(x);
    if c.norm() < PHASE_MAGNITUDE_TOL {
        return Err(TomoError::PhaseUndefined {
            x,
            magnitude: c.norm(),
        });
    }
    let phi = c.arg();
    Ok(if phi <= -std::f64::consts::PI { std::f64::consts::PI } else { phi })
}

fn unit_phase(table: &ProbabilityTable, x: usize) -> C64 {
    let c = table.coherence(x);
    if c.norm() < PHASE_MAGNITUDE_TOL {
        C64::new(1.0, 0.0)
    } else {
        c / c.norm()
    }
}

fn branch_weight(row: &[f64; 6]) -> f64 {
    row[Outcome::Z0.index()] + row[Outcome::Z1.index()]
}

/// The linear system for `ψ_y/ψ_0`, `y = 1, …, N−1`.
pub fn build_linear_system(
    table: &ProbabilityTable,
    op: &CouplingOperator,
) -> Result<(DMatrix<C64>, DVector<C64>)> {
    if table.rows().first().map_or(0.0, |r| r[Outcome::Z0.index()]) <= 0.0 {
        return Err(TomoError::NoReference);
    }
    build_linear_system_with_reference(table, op, 0)
}

/// The linear system for `ψ_y/ψ_r` over all `y ≠ r`, rows and columns in ascending index order.
///
/// Rows with no branch weight at all are replaced by `ψ_x = 0`.
pub fn build_linear_system_with_reference(
    table: &ProbabilityTable,
    op: &CouplingOperator,
    reference: usize,
) -> Result<(DMatrix<C64>, DVector<C64>)> {
    let size = op.size();
    if table.dims() != op.dims() {
        return Err(TomoError::DimensionMismatch {
            expected: size,
            found: table.rows().len(),
        });
    }
    if reference >= size {
        return Err(TomoError::InvalidArgument(format!("reference {reference} out of range")));
    }
    let heaviest = table.rows().iter().map(branch_weight).fold(0.0, f64::max);
    let fill_scale = heaviest.sqrt();
    let slot = |x: usize| if x < reference { x } else { x - 1 };

    let mut a = DMatrix::<C64>::zeros(size - 1, size - 1);
    let mut b = DVector::<C64>::zeros(size - 1);
    for x in (0..size).filter(|&x| x != reference) {
        let row = &table.rows()[x];
        let i = slot(x);
        if branch_weight(row) <= SUPPORT_TOL * heaviest {
            a[(i, i)] = C64::new(fill_scale, 0.0);
            continue;
        }
        let sp0 = row[Outcome::Z0.index()].sqrt();
        let sp1 = row[Outcome::Z1.index()].sqrt();
        let v_row = op.row(x)?;
        for y in (0..size).filter(|&y| y != reference) {
            a[(i, slot(y))] = -v_row[y] * sp0;
        }
        a[(i, i)] += unit_phase(table, x) * sp1;
        b[i] = v_row[reference] * sp0;
    }
    Ok((a, b))
}

/// Reconstructs `ψ` from exact probabilities or empirical frequencies.
///
/// Fails on a computational-basis-compatible or block-diagonal coupling and on a
/// rank-deficient system. The eigenstate signature only adds a warning.
pub fn reconstruct(table: &ProbabilityTable, op: &CouplingOperator) -> Result<ReconstructionResult> {
    let size = op.size();
    if table.dims() != op.dims() {
        return Err(TomoError::DimensionMismatch {
            expected: size,
            found: table.rows().len(),
        });
    }
    if check_dangerous_compatible(op)?.flagged {
        return Err(TomoError::CompatibleBasis);
    }
    let blocks = check_dangerous_block_diagonal(op)?;
    if blocks.flagged {
        return Err(TomoError::BlockDiagonal {
            components: blocks.components,
        });
    }

    let mut warnings = Vec::new();
    let signature = degenerate_signature(table);
    if signature.flagged {
        warnings.push(ReconstructionWarning::DegenerateEigenstate {
            common_phase: signature.common_phase,
        });
    }

    let p0 = |x: usize| table.rows()[x][Outcome::Z0.index()];
    let (best, best_p0) = (0..size)
        .map(|x| (x, p0(x)))
        .fold((0, f64::MIN), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
    if !(best_p0 > 0.0) {
        return Err(TomoError::NoReference);
    }
    let threshold = match table.shots() {
        Some(f) => 1.0 / f as f64,
        None => 1e-10 * best_p0,
    };
    let reference = if p0(0) >= threshold { 0 } else { best };
    if reference != 0 {
        warnings.push(ReconstructionWarning::ReferenceReindexed { reference });
    }

    if let Some(f) = table.shots() {
        let f = f as f64;
        let rows: Vec<usize> = (0..size)
            .filter(|&x| {
                let r = &table.rows()[x];
                if r[Outcome::Z0.index()] == 0.0 || r[Outcome::Z1.index()] == 0.0 {
                    return false;
                }
                let spread: f64 = r[Outcome::XPlus.index()..].iter().sum();
                table.coherence(x).norm() < 3.0 * (spread / f).sqrt()
            })
            .collect();
        if !rows.is_empty() {
            warnings.push(ReconstructionWarning::PhaseUnreliable { rows });
        }
    }

    let (a, b) = build_linear_system_with_reference(table, op, reference)?;
    let ls = solve_least_squares(&a, &b, RANK_TOL);
    if ls.rank < size - 1 {
        return Err(TomoError::RankDeficient {
            rank: ls.rank,
            cols: size - 1,
            condition: ls.condition_estimate,
        });
    }

    let mut amp = Vec::with_capacity(size);
    let mut it = ls.solution.iter();
    for x in 0..size {
        if x == reference {
            amp.push(C64::new(1.0, 0.0));
        } else {
            amp.push(*it.next().expect("one unknown per non-reference index"));
        }
    }
    let state = StateVector::new(table.dims(), amp)?.phase_fix()?;
    Ok(ReconstructionResult {
        state,
        residual: ls.residual,
        condition_estimate: ls.condition_estimate,
        reference,
        warnings,
    })
}
