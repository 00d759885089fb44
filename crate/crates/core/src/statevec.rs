//! Pure states of `n` qudits and the benchmark states used in the experiments.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::C64;

/// Amplitudes below this fraction of the largest magnitude are skipped when
/// choosing the phase reference.
pub const PHASE_REF_TOL: f64 = 1e-8;

/// Relative spectral gap below which a ground space counts as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

const NORM_TOL: f64 = 1e-12;

/// Particle count and local dimension of the register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    n: usize,
    d: usize,
}

impl Dims {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        if n < 1 {
            return Err(TomoError::InvalidDims(format!("n = {n}, need n >= 1")));
        }
        if d < 2 {
            return Err(TomoError::InvalidDims(format!("d = {d}, need d >= 2")));
        }
        let total = (d as u128).checked_pow(n as u32);
        match total {
            Some(t) if t <= (1u128 << 40) => Ok(Self { n, d }),
            _ => Err(TomoError::InvalidDims(format!("d^n overflows for n = {n}, d = {d}"))),
        }
    }

    pub fn qubits(n: usize) -> Result<Self> {
        Self::new(n, 2)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Total dimension `N = d^n`.
    pub fn total(&self) -> usize {
        self.d.pow(self.n as u32)
    }

    /// Base-`d` digits of `x`, particle 1 first.
    pub fn digits(&self, mut x: usize) -> Vec<usize> {
        (0..self.n)
            .map(|_| {
                let digit = x % self.d;
                x /= self.d;
                digit
            })
            .collect()
    }
}

/// A normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    dims: Dims,
    amp: Vec<C64>,
}

impl StateVector {
    /// Normalizes `amp` and wraps it. Fails on a length mismatch or a null vector.
    pub fn new(dims: Dims, amp: Vec<C64>) -> Result<Self> {
        if amp.len() != dims.total() {
            return Err(TomoError::DimensionMismatch {
                expected: dims.total(),
                found: amp.len(),
            });
        }
        let norm = norm(&amp);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(TomoError::NullVector);
        }
        let amp = amp.into_iter().map(|a| a / norm).collect();
        Ok(Self { dims, amp })
    }

    /// Computational basis state `|x⟩`.
    pub fn basis(dims: Dims, x: usize) -> Result<Self> {
        if x >= dims.total() {
            return Err(TomoError::InvalidArgument(format!(
                "basis index {x} out of range for N = {}",
                dims.total()
            )));
        }
        let mut amp = vec![C64::new(0.0, 0.0); dims.total()];
        amp[x] = C64::new(1.0, 0.0);
        Ok(Self { dims, amp })
    }

    /// Product state `|ψ⟩^{⊗n}` from a single-site state.
    pub fn product(n: usize, site: &[C64]) -> Result<Self> {
        let dims = Dims::new(n, site.len())?;
        let amp = (0..dims.total())
            .map(|x| dims.digits(x).into_iter().map(|j| site[j]).product())
            .collect();
        Self::new(dims, amp)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.amp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amp.is_empty()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amp
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amp
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amp)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dims != other.dims {
            return Err(TomoError::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(self
            .amp
            .iter()
            .zip(&other.amp)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Multiplies by a unit phase so the first non-negligible amplitude is real and positive.
    pub fn phase_fix(&self) -> Result<Self> {
        let max = self.amp.iter().map(|a| a.norm()).fold(0.0, f64::max);
        if !(max > 0.0) {
            return Err(TomoError::NullVector);
        }
        let pivot = self
            .amp
            .iter()
            .find(|a| a.norm() > PHASE_REF_TOL * max)
            .ok_or(TomoError::NullVector)?;
        let phase = pivot.conj() / pivot.norm();
        let mut amp: Vec<C64> = self.amp.iter().map(|a| a * phase).collect();
        // Drop the rounding residue so the reference is exactly real.
        if let Some(a) = amp.iter_mut().find(|a| a.norm() > PHASE_REF_TOL * max) {
            *a = C64::new(a.norm(), 0.0);
        }
        Ok(Self {
            dims: self.dims,
            amp,
        })
    }
}

pub(crate) fn norm(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// `|⟨a|b⟩|²`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().min(1.0))
}

pub fn phase_fix(a: &StateVector) -> Result<StateVector> {
    a.phase_fix()
}

fn check_qubits(n: usize) -> Result<Dims> {
    Dims::qubits(n)
}

fn uniform_over(dims: Dims, support: impl Iterator<Item = usize>) -> Result<StateVector> {
    let mut amp = vec![C64::new(0.0, 0.0); dims.total()];
    for x in support {
        amp[x] = C64::new(1.0, 0.0);
    }
    StateVector::new(dims, amp)
}

/// `(|0…0⟩ + |1…1⟩)/√2`.
pub fn make_ghz(n: usize) -> Result<StateVector> {
    let dims = check_qubits(n)?;
    uniform_over(dims, [0, dims.total() - 1].into_iter())
}

/// Equal superposition of the single-excitation basis states.
pub fn make_w(n: usize) -> Result<StateVector> {
    make_dicke(n, 1)
}

/// Symmetric Dicke state with `k` excitations among `n` qubits.
pub fn make_dicke(n: usize, k: usize) -> Result<StateVector> {
    let dims = check_qubits(n)?;
    if k > n {
        return Err(TomoError::InvalidArgument(format!(
            "Dicke excitation count k = {k} exceeds n = {n}"
        )));
    }
    uniform_over(
        dims,
        (0..dims.total()).filter(|x| x.count_ones() as usize == k),
    )
}

/// Ground state of the open transverse-field Ising chain.
#[derive(Debug, Clone)]
pub struct TfimGround {
    pub state: StateVector,
    pub energy: f64,
    /// `E_1 - E_0`.
    pub gap: f64,
}

/// Dense `H = -j Σ Z_i Z_{i+1} - g Σ X_i` with open boundary.
pub fn tfim_hamiltonian(n: usize, g: f64, j_coupling: f64) -> Result<DMatrix<f64>> {
    let dims = check_qubits(n)?;
    let size = dims.total();
    let mut h = DMatrix::zeros(size, size);
    for x in 0..size {
        let spin = |i: usize| if (x >> i) & 1 == 0 { 1.0 } else { -1.0 };
        let bond: f64 = (0..n - 1).map(|i| spin(i) * spin(i + 1)).sum();
        h[(x, x)] = -j_coupling * bond;
        for i in 0..n {
            h[(x ^ (1 << i), x)] -= g;
        }
    }
    Ok(h)
}

/// Lowest eigenpair of the transverse-field Ising chain, with the spectral gap.
///
/// Fails with [`TomoError::DegenerateGround`] when `E_1 - E_0 < 1e-9·|E_0|`.
pub fn tfim_ground(n: usize, g: f64, j_coupling: f64) -> Result<TfimGround> {
    if n < 2 {
        return Err(TomoError::InvalidArgument(format!("TFIM needs n >= 2, got {n}")));
    }
    if !(g >= 0.0) || !g.is_finite() || !j_coupling.is_finite() {
        return Err(TomoError::InvalidArgument(format!(
            "TFIM parameters must be finite with g >= 0 (g = {g}, j = {j_coupling})"
        )));
    }
    let h = tfim_hamiltonian(n, g, j_coupling)?;
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, 0)
        .ok_or_else(|| TomoError::Eigensolver("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energy = eig.eigenvalues[order[0]];
    let gap = eig.eigenvalues[order[1]] - energy;
    if gap < DEGENERACY_TOL * energy.abs().max(f64::MIN_POSITIVE) {
        return Err(TomoError::DegenerateGround { energy, gap });
    }
    let column = eig.eigenvectors.column(order[0]);
    let amp = column.iter().map(|&a| C64::new(a, 0.0)).collect();
    let state = StateVector::new(Dims::qubits(n)?, amp)?.phase_fix()?;
    Ok(TfimGround { state, energy, gap })
}

pub fn make_tfim_ground(n: usize, g: f64, j_coupling: f64) -> Result<StateVector> {
    tfim_ground(n, g, j_coupling).map(|gs| gs.state)
}

/// Normalized vector of independent standard complex Gaussians, deterministic in `seed`.
pub fn random_state(dims: Dims, seed: u64) -> StateVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = (0..dims.total())
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            C64::new(re, im)
        })
        .collect();
    // A Gaussian vector is null with probability zero.
    StateVector::new(dims, amp).expect("gaussian vector is nonzero")
}

/// On-disk representation: `{n, d, amplitudes: [[re, im], …]}` in index order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateJson {
    pub n: usize,
    pub d: usize,
    pub amplitudes: Vec<[f64; 2]>,
}

impl From<&StateVector> for StateJson {
    fn from(s: &StateVector) -> Self {
        Self {
            n: s.dims.n,
            d: s.dims.d,
            amplitudes: s.amp.iter().map(|a| [a.re, a.im]).collect(),
        }
    }
}

impl TryFrom<StateJson> for StateVector {
    type Error = TomoError;

    fn try_from(j: StateJson) -> Result<Self> {
        let dims = Dims::new(j.n, j.d)?;
        let amp: Vec<C64> = j.amplitudes.iter().map(|a| C64::new(a[0], a[1])).collect();
        let state = StateVector::new(dims, amp)?;
        Ok(state)
    }
}

impl StateVector {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&StateJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: StateJson = serde_json::from_str(text)?;
        raw.try_into()
    }

    /// True when the stored vector has unit norm within 1e-12.
    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() < NORM_TOL
    }
}
