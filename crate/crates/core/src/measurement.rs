//! Joint outcome statistics of the system readout `x` and the pointer readout `m`.

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use crate::coupling::CouplingOperator;
use crate::error::{Result, TomoError};
use crate::statevec::{Dims, StateVector};
use crate::C64;

/// Tolerance on `Σ P = 1` accepted by the sampler.
pub const TABLE_NORM_TOL: f64 = 1e-9;

/// Pointer readout: eigenstates of `σ^z`, `σ^x` and `σ^y`.
///
/// `|L⟩ = (|0⟩ + i|1⟩)/√2` and `|R⟩ = (|0⟩ − i|1⟩)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Z0,
    Z1,
    XPlus,
    XMinus,
    YL,
    YR,
}

impl Outcome {
    pub const ALL: [Outcome; 6] = [
        Outcome::Z0,
        Outcome::Z1,
        Outcome::XPlus,
        Outcome::XMinus,
        Outcome::YL,
        Outcome::YR,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Outcome::Z0 => "0",
            Outcome::Z1 => "1",
            Outcome::XPlus => "+",
            Outcome::XMinus => "-",
            Outcome::YL => "L",
            Outcome::YR => "R",
        }
    }

    /// Pointer state `|m⟩` as `(⟨0|m⟩, ⟨1|m⟩)`.
    pub fn pointer_state(self) -> [C64; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (a, b) = match self {
            Outcome::Z0 => (C64::new(1.0, 0.0), C64::new(0.0, 0.0)),
            Outcome::Z1 => (C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
            Outcome::XPlus => (C64::new(h, 0.0), C64::new(h, 0.0)),
            Outcome::XMinus => (C64::new(h, 0.0), C64::new(-h, 0.0)),
            Outcome::YL => (C64::new(h, 0.0), C64::new(0.0, h)),
            Outcome::YR => (C64::new(h, 0.0), C64::new(0.0, -h)),
        };
        [a, b]
    }

    /// `|m⟩⟨m|`.
    pub fn projector(self) -> Matrix2<C64> {
        let [a, b] = self.pointer_state();
        Matrix2::new(a * a.conj(), a * b.conj(), b * a.conj(), b * b.conj())
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Outcome::ALL
            .into_iter()
            .find(|m| m.symbol() == s)
            .ok_or_else(|| format!("unknown pointer outcome {s:?} (expected one of 0,1,+,-,L,R)"))
    }
}

/// `P_{x,m}` over the `N × 6` outcome grid.
///
/// `shots` is set when the table holds empirical frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    dims: Dims,
    rows: Vec<[f64; 6]>,
    shots: Option<u64>,
}

impl ProbabilityTable {
    pub fn new(dims: Dims, rows: Vec<[f64; 6]>) -> Result<Self> {
        if rows.len() != dims.total() {
            return Err(TomoError::DimensionMismatch {
                expected: dims.total(),
                found: rows.len(),
            });
        }
        if rows.iter().flatten().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(TomoError::InvalidTable("entries must be finite and non-negative".into()));
        }
        Ok(Self {
            dims,
            rows,
            shots: None,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn rows(&self) -> &[[f64; 6]] {
        &self.rows
    }

    pub fn get(&self, x: usize, m: Outcome) -> f64 {
        self.rows[x][m.index()]
    }

    pub fn shots(&self) -> Option<u64> {
        self.shots
    }

    pub fn total(&self) -> f64 {
        self.rows.iter().flatten().sum()
    }

    /// `(P_{x,+} − P_{x,−}) + i(P_{x,L} − P_{x,R})`, equal to `α*_x β_x / 3` for exact tables.
    pub fn coherence(&self, x: usize) -> C64 {
        let r = &self.rows[x];
        C64::new(
            r[Outcome::XPlus.index()] - r[Outcome::XMinus.index()],
            r[Outcome::YL.index()] - r[Outcome::YR.index()],
        )
    }
}

/// Observed counts `F_{x,m}` with total `F`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    dims: Dims,
    counts: Vec<[u64; 6]>,
    total: u64,
}

impl CountTable {
    pub fn new(dims: Dims, counts: Vec<[u64; 6]>) -> Result<Self> {
        if counts.len() != dims.total() {
            return Err(TomoError::DimensionMismatch {
                expected: dims.total(),
                found: counts.len(),
            });
        }
        let total = counts.iter().flatten().sum();
        Ok(Self {
            dims,
            counts,
            total,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn counts(&self) -> &[[u64; 6]] {
        &self.counts
    }

    pub fn get(&self, x: usize, m: Outcome) -> u64 {
        self.counts[x][m.index()]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of cells with a nonzero count.
    pub fn occupied_cells(&self) -> usize {
        self.counts.iter().flatten().filter(|&&c| c > 0).count()
    }

    /// CSV with header `x,m,count` and one row per nonzero cell in `(x, m)` order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,m,count\n");
        for (x, row) in self.counts.iter().enumerate() {
            for m in Outcome::ALL {
                let c = row[m.index()];
                if c > 0 {
                    out.push_str(&format!("{x},{m},{c}\n"));
                }
            }
        }
        out
    }

    /// Parses the CSV written by [`CountTable::to_csv`]. Errors carry 1-based line numbers.
    pub fn from_csv(text: &str, dims: Dims) -> Result<Self> {
        let parse_err = |line: usize, msg: String| TomoError::Parse { line, msg };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, "x,m,count")) => {}
            Some((line, other)) => {
                return Err(parse_err(line, format!("expected header `x,m,count`, found {other:?}")))
            }
            None => return Err(parse_err(1, "empty file".into())),
        }
        let mut counts = vec![[0u64; 6]; dims.total()];
        for (line, raw) in lines {
            if raw.is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(parse_err(line, format!("expected 3 fields, found {}", fields.len())));
            }
            let x: usize = fields[0]
                .parse()
                .map_err(|e| parse_err(line, format!("bad x {:?}: {e}", fields[0])))?;
            if x >= dims.total() {
                return Err(parse_err(line, format!("x = {x} out of range for N = {}", dims.total())));
            }
            let m: Outcome = fields[1].parse().map_err(|e| parse_err(line, e))?;
            let c: u64 = fields[2]
                .parse()
                .map_err(|e| parse_err(line, format!("bad count {:?}: {e}", fields[2])))?;
            let cell = &mut counts[x][m.index()];
            if *cell != 0 {
                return Err(parse_err(line, format!("duplicate cell ({x},{m})")));
            }
            *cell = c;
        }
        Self::new(dims, counts)
    }
}

/// Exact `P_{x,m}` from the pointer branch amplitudes `α = ψ`, `β = Vψ`.
pub fn joint_probabilities(psi: &StateVector, op: &CouplingOperator) -> Result<ProbabilityTable> {
    if psi.dims() != op.dims() {
        return Err(TomoError::DimensionMismatch {
            expected: op.size(),
            found: psi.len(),
        });
    }
    let alpha = psi.amplitudes();
    let beta = op.apply_v(alpha)?;
    let i = C64::new(0.0, 1.0);
    let rows = alpha
        .iter()
        .zip(&beta)
        .map(|(&a, &b)| {
            [
                a.norm_sqr() / 6.0,
                b.norm_sqr() / 6.0,
                (a + b).norm_sqr() / 12.0,
                (a - b).norm_sqr() / 12.0,
                (a - i * b).norm_sqr() / 12.0,
                (a + i * b).norm_sqr() / 12.0,
            ]
        })
        .collect();
    ProbabilityTable::new(psi.dims(), rows)
}

/// Same table computed by building the joint system–pointer state after the
/// interaction and projecting onto `(1/3)|x⟩⟨x| ⊗ |m⟩⟨m|`. Slow; kept as a cross-check.
pub fn joint_probabilities_from_joint_state(
    psi: &StateVector,
    op: &CouplingOperator,
) -> Result<ProbabilityTable> {
    let size = op.size();
    let dense = op.dense()?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    // joint[2x + b]: system |x⟩, pointer |b⟩
    let mut joint = vec![C64::new(0.0, 0.0); 2 * size];
    for x in 0..size {
        for y in 0..size {
            let delta = if x == y { 1.0 } else { 0.0 };
            joint[2 * x] += h * delta * psi.amplitudes()[y];
            joint[2 * x + 1] += h * dense[(x, y)] * psi.amplitudes()[y];
        }
    }
    let rows = (0..size)
        .map(|x| {
            let mut row = [0.0; 6];
            for m in Outcome::ALL {
                let [a, b] = m.pointer_state();
                let amp = a.conj() * joint[2 * x] + b.conj() * joint[2 * x + 1];
                row[m.index()] = amp.norm_sqr() / 3.0;
            }
            row
        })
        .collect();
    ProbabilityTable::new(psi.dims(), rows)
}

/// One multinomial draw of `shots` trials over the `6N` cells, deterministic in `seed`.
pub fn sample_counts(table: &ProbabilityTable, shots: u64, seed: u64) -> Result<CountTable> {
    if shots == 0 {
        return Err(TomoError::InvalidArgument("shot count must be at least 1".into()));
    }
    let total = table.total();
    if (total - 1.0).abs() > TABLE_NORM_TOL {
        return Err(TomoError::InvalidTable(format!("probabilities sum to {total}")));
    }
    let weights: Vec<f64> = table.rows().iter().flatten().copied().collect();
    let alias = WeightedAliasIndex::new(weights)
        .map_err(|e| TomoError::InvalidTable(format!("alias table: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![[0u64; 6]; table.dims().total()];
    for _ in 0..shots {
        let cell = alias.sample(&mut rng);
        counts[cell / 6][cell % 6] += 1;
    }
    CountTable::new(table.dims(), counts)
}

/// `F_{x,m}/F`, tagged with the shot count.
pub fn empirical_frequencies(counts: &CountTable) -> Result<ProbabilityTable> {
    if counts.total() == 0 {
        return Err(TomoError::EmptyCounts);
    }
    let f = counts.total() as f64;
    let rows = counts
        .counts()
        .iter()
        .map(|r| r.map(|c| c as f64 / f))
        .collect();
    let mut table = ProbabilityTable::new(counts.dims(), rows)?;
    table.shots = Some(counts.total());
    Ok(table)
}
