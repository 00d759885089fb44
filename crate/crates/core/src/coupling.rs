//! The pointer-controlled system unitary `V = exp(iθP)` and the structural
//! checks that rule out non-unique reconstructions.

use std::collections::VecDeque;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::error::{Result, TomoError};
use crate::measurement::{empirical_frequencies, CountTable, Outcome, ProbabilityTable};
use crate::statevec::Dims;
use crate::C64;

/// Largest `N` for which a dense `N × N` coupling matrix is materialized.
pub const DENSE_CAP: usize = 4096;

/// Entries with magnitude at or below this are treated as structural zeros.
pub const ZERO_ENTRY_TOL: f64 = 1e-12;

const UNITARY_TOL: f64 = 1e-10;

/// Default coupling angle in radians. Stays clear of π/4, where `cos θ = sin θ`
/// and the symmetric Dicke states lose phase information.
pub const DEFAULT_THETA: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub enum CouplingVariant {
    /// `P = Σ_j X_j` on qubits, so `V = v^{⊗n}` with `v = [[cosθ, i sinθ], [i sinθ, cosθ]]`.
    LocalXSum { theta: f64 },
    /// `P` diagonal in the discrete Fourier basis, `⟨x|p_k⟩ = N^{-1/2} e^{2πi x k/N}`.
    /// `eigenvalues[k]` is the `k`-th smallest eigenvalue; `None` means `p_k = k`.
    FourierBasis {
        theta: f64,
        eigenvalues: Option<Vec<f64>>,
    },
    ExplicitUnitary { matrix: DMatrix<C64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSpec {
    pub dims: Dims,
    pub variant: CouplingVariant,
}

impl CouplingSpec {
    pub fn local_x_sum(n: usize, theta: f64) -> Result<Self> {
        Ok(Self {
            dims: Dims::qubits(n)?,
            variant: CouplingVariant::LocalXSum { theta },
        })
    }

    pub fn fourier(dims: Dims, theta: f64) -> Self {
        Self {
            dims,
            variant: CouplingVariant::FourierBasis {
                theta,
                eigenvalues: None,
            },
        }
    }

    pub fn explicit(dims: Dims, matrix: DMatrix<C64>) -> Self {
        Self {
            dims,
            variant: CouplingVariant::ExplicitUnitary { matrix },
        }
    }

    /// Coupling angle, when the variant has one.
    pub fn theta(&self) -> Option<f64> {
        match &self.variant {
            CouplingVariant::LocalXSum { theta } | CouplingVariant::FourierBasis { theta, .. } => {
                Some(*theta)
            }
            CouplingVariant::ExplicitUnitary { .. } => None,
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self.variant {
            CouplingVariant::LocalXSum { .. } => "local_x_sum",
            CouplingVariant::FourierBasis { .. } => "fourier",
            CouplingVariant::ExplicitUnitary { .. } => "explicit",
        }
    }
}

/// `V` with Kronecker-factored access when available and a lazily built dense form.
#[derive(Debug, Clone)]
pub struct CouplingOperator {
    spec: CouplingSpec,
    factor: Option<DMatrix<C64>>,
    dense: OnceLock<DMatrix<C64>>,
}

/// Single-site factor of the local `X`-sum coupling.
pub fn local_factor(theta: f64) -> DMatrix<C64> {
    let c = C64::new(theta.cos(), 0.0);
    let s = C64::new(0.0, theta.sin());
    DMatrix::from_row_slice(2, 2, &[c, s, s, c])
}

fn unitarity_defect(m: &DMatrix<C64>) -> f64 {
    let id = DMatrix::<C64>::identity(m.ncols(), m.ncols());
    (m.adjoint() * m - id).iter().map(|v| v.norm()).fold(0.0, f64::max)
}

fn fourier_dense(size: usize, theta: f64, eigenvalues: &[f64]) -> DMatrix<C64> {
    // V is circulant: V_xy depends only on (x - y) mod N.
    let n = size as f64;
    let kernel: Vec<C64> = (0..size)
        .map(|delta| {
            eigenvalues
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    C64::from_polar(1.0, 2.0 * PI * ((delta * k) % size) as f64 / n + p * theta)
                })
                .sum::<C64>()
                / n
        })
        .collect();
    DMatrix::from_fn(size, size, |x, y| kernel[(x + size - y) % size])
}

/// Validates `spec` and builds the operator.
pub fn build_coupling(spec: CouplingSpec) -> Result<CouplingOperator> {
    let size = spec.dims.total();
    let dense = OnceLock::new();
    let mut factor = None;
    match &spec.variant {
        CouplingVariant::LocalXSum { theta } => {
            if spec.dims.d() != 2 {
                return Err(TomoError::InvalidDims(format!(
                    "local X-sum coupling needs qubits, got d = {}",
                    spec.dims.d()
                )));
            }
            if !(*theta > 0.0 && *theta < FRAC_PI_2) {
                return Err(TomoError::ThetaOutOfRange(*theta));
            }
            factor = Some(local_factor(*theta));
        }
        CouplingVariant::FourierBasis { theta, eigenvalues } => {
            if size > DENSE_CAP {
                return Err(TomoError::TooLarge {
                    size,
                    cap: DENSE_CAP,
                });
            }
            if !theta.is_finite() {
                return Err(TomoError::InvalidArgument(format!("theta = {theta}")));
            }
            let default: Vec<f64>;
            let eig = match eigenvalues {
                Some(e) => {
                    if e.len() != size {
                        return Err(TomoError::DimensionMismatch {
                            expected: size,
                            found: e.len(),
                        });
                    }
                    if e.windows(2).any(|w| !(w[0] <= w[1])) {
                        return Err(TomoError::InvalidArgument(
                            "Fourier eigenvalues must be finite and sorted ascending".into(),
                        ));
                    }
                    e.as_slice()
                }
                None => {
                    default = (0..size).map(|k| k as f64).collect();
                    &default
                }
            };
            let _ = dense.set(fourier_dense(size, *theta, eig));
        }
        CouplingVariant::ExplicitUnitary { matrix } => {
            if matrix.nrows() != size || matrix.ncols() != size {
                return Err(TomoError::DimensionMismatch {
                    expected: size,
                    found: matrix.nrows().max(matrix.ncols()),
                });
            }
            let defect = unitarity_defect(matrix);
            if !(defect <= UNITARY_TOL) {
                return Err(TomoError::NonUnitary(defect));
            }
            let _ = dense.set(matrix.clone());
        }
    }
    Ok(CouplingOperator {
        spec,
        factor,
        dense,
    })
}

impl CouplingOperator {
    pub fn spec(&self) -> &CouplingSpec {
        &self.spec
    }

    pub fn dims(&self) -> Dims {
        self.spec.dims
    }

    pub fn size(&self) -> usize {
        self.spec.dims.total()
    }

    /// Single-site factor `v` when `V = v^{⊗n}`.
    pub fn single_site_factor(&self) -> Option<&DMatrix<C64>> {
        self.factor.as_ref()
    }

    /// Dense `V`, built from the factor on first use. Refused above [`DENSE_CAP`].
    pub fn dense(&self) -> Result<&DMatrix<C64>> {
        if let Some(m) = self.dense.get() {
            return Ok(m);
        }
        let size = self.size();
        if size > DENSE_CAP {
            return Err(TomoError::TooLarge {
                size,
                cap: DENSE_CAP,
            });
        }
        let factor = self.factor.as_ref().expect("factored or dense form always present");
        Ok(self.dense.get_or_init(|| {
            let mut m = factor.clone();
            for _ in 1..self.spec.dims.n() {
                m = factor.kronecker(&m);
            }
            m
        }))
    }

    fn check_len(&self, vec: &[C64]) -> Result<()> {
        if vec.len() != self.size() {
            return Err(TomoError::DimensionMismatch {
                expected: self.size(),
                found: vec.len(),
            });
        }
        Ok(())
    }

    fn apply_factored(&self, factor: &DMatrix<C64>, vec: &[C64]) -> Vec<C64> {
        let d = self.spec.dims.d();
        let size = self.size();
        let mut out = vec.to_vec();
        let mut local = vec![C64::new(0.0, 0.0); d];
        let mut stride = 1;
        for _ in 0..self.spec.dims.n() {
            for base in (0..size).filter(|x| (x / stride) % d == 0) {
                for (a, slot) in local.iter_mut().enumerate() {
                    *slot = out[base + a * stride];
                }
                for a in 0..d {
                    out[base + a * stride] = (0..d).map(|b| factor[(a, b)] * local[b]).sum();
                }
            }
            stride *= d;
        }
        out
    }

    /// `V·vec`. The factored form is applied site by site without building `V`.
    pub fn apply_v(&self, vec: &[C64]) -> Result<Vec<C64>> {
        self.check_len(vec)?;
        if let Some(f) = &self.factor {
            return Ok(self.apply_factored(f, vec));
        }
        let m = self.dense()?;
        Ok((0..self.size())
            .map(|x| m.row(x).iter().zip(vec).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `V†·vec`.
    pub fn apply_v_dagger(&self, vec: &[C64]) -> Result<Vec<C64>> {
        self.check_len(vec)?;
        if let Some(f) = &self.factor {
            return Ok(self.apply_factored(&f.adjoint(), vec));
        }
        let m = self.dense()?;
        Ok((0..self.size())
            .map(|y| m.column(y).iter().zip(vec).map(|(a, b)| a.conj() * b).sum())
            .collect())
    }

    /// Row `x` of `V`. Streamed from the factored form when no dense matrix exists.
    pub fn row(&self, x: usize) -> Result<Vec<C64>> {
        if x >= self.size() {
            return Err(TomoError::InvalidArgument(format!("row {x} out of range")));
        }
        if let Some(m) = self.dense.get() {
            return Ok(m.row(x).iter().copied().collect());
        }
        let mut e = vec![C64::new(0.0, 0.0); self.size()];
        e[x] = C64::new(1.0, 0.0);
        // (V† e_x)_y = conj(V_xy)
        Ok(self.apply_v_dagger(&e)?.into_iter().map(|v| v.conj()).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatibleReport {
    pub flagged: bool,
    pub max_off_diagonal: f64,
}

/// Flags a coupling that is diagonal in the computational basis (`[X, P] = 0`).
pub fn check_dangerous_compatible(op: &CouplingOperator) -> Result<CompatibleReport> {
    let off_diag_max = |m: &DMatrix<C64>| {
        let mut worst = 0.0f64;
        for y in 0..m.ncols() {
            for x in 0..m.nrows() {
                if x != y {
                    worst = worst.max(m[(x, y)].norm());
                }
            }
        }
        worst
    };
    // A tensor power with nonzero diagonal is diagonal iff its factor is.
    let max_off_diagonal = match op.single_site_factor() {
        Some(f) if f.diagonal().iter().all(|v| v.norm() > ZERO_ENTRY_TOL) => off_diag_max(f),
        _ => off_diag_max(op.dense()?),
    };
    Ok(CompatibleReport {
        flagged: max_off_diagonal < ZERO_ENTRY_TOL,
        max_off_diagonal,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockReport {
    pub flagged: bool,
    /// Connected components of the support graph of `V`, each sorted ascending.
    pub components: Vec<Vec<usize>>,
}

/// Flags a coupling that splits into blocks under a simultaneous row/column permutation.
pub fn check_dangerous_block_diagonal(op: &CouplingOperator) -> Result<BlockReport> {
    let size = op.size();
    if let Some(f) = op.single_site_factor() {
        if f.iter().all(|v| v.norm() > ZERO_ENTRY_TOL) {
            return Ok(BlockReport {
                flagged: false,
                components: vec![(0..size).collect()],
            });
        }
    }
    let m = op.dense()?;
    let components = support_components(m);
    Ok(BlockReport {
        flagged: components.len() > 1,
        components,
    })
}

fn support_components(m: &DMatrix<C64>) -> Vec<Vec<usize>> {
    let size = m.nrows();
    let mut label = vec![usize::MAX; size];
    let mut components = Vec::new();
    for start in 0..size {
        if label[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = vec![start];
        label[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            for y in 0..size {
                if label[y] == usize::MAX
                    && (m[(x, y)].norm() > ZERO_ENTRY_TOL || m[(y, x)].norm() > ZERO_ENTRY_TOL)
                {
                    label[y] = id;
                    members.push(y);
                    queue.push_back(y);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateReport {
    pub flagged: bool,
    /// Common phase of the pointer coherence across supported rows, when one exists.
    pub common_phase: Option<f64>,
    pub supported_rows: usize,
}

/// Absolute tolerance used for tables without a shot count.
const EXACT_SIGNATURE_TOL: f64 = 1e-12;

/// Eigenstate signature on a probability table: on every supported row
/// `P_{x,0} = P_{x,1}` and the pointer coherence has an `x`-independent phase.
///
/// For empirical tables the per-row tolerance is three standard deviations of
/// the multinomial estimate.
pub fn degenerate_signature(table: &ProbabilityTable) -> DegenerateReport {
    let shots = table.shots().map(|f| f as f64);
    let tol = |var_sum: f64| match shots {
        Some(f) => 3.0 * (var_sum / f).sqrt(),
        None => EXACT_SIGNATURE_TOL,
    };
    let support_floor = match shots {
        Some(_) => 0.0,
        None => EXACT_SIGNATURE_TOL,
    };
    let rows: Vec<&[f64; 6]> = table
        .rows()
        .iter()
        .filter(|r| r[Outcome::Z0.index()] + r[Outcome::Z1.index()] > support_floor)
        .collect();
    if rows.is_empty() {
        return DegenerateReport {
            flagged: false,
            common_phase: None,
            supported_rows: 0,
        };
    }
    let coherence = |r: &[f64; 6]| {
        C64::new(
            r[Outcome::XPlus.index()] - r[Outcome::XMinus.index()],
            r[Outcome::YL.index()] - r[Outcome::YR.index()],
        )
    };
    let magnitudes_match = rows.iter().all(|r| {
        let (p0, p1) = (r[Outcome::Z0.index()], r[Outcome::Z1.index()]);
        (p0 - p1).abs() <= tol(p0 + p1)
    });
    let total: C64 = rows.iter().map(|r| coherence(r)).sum();
    let common = if total.norm() > 0.0 {
        Some(total / total.norm())
    } else {
        None
    };
    let phases_match = common.is_some_and(|u| {
        rows.iter().all(|r| {
            let c = coherence(r);
            let spread: f64 = r[Outcome::XPlus.index()..].iter().sum();
            (c - u * c.norm()).norm() <= tol(spread)
        })
    });
    DegenerateReport {
        flagged: magnitudes_match && phases_match,
        common_phase: common.map(|u| u.arg()),
        supported_rows: rows.len(),
    }
}

/// Eigenstate signature evaluated on observed counts.
pub fn check_dangerous_degenerate_eigenstate(counts: &CountTable) -> Result<DegenerateReport> {
    Ok(degenerate_signature(&empirical_frequencies(counts)?))
}
