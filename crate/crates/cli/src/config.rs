//! Run configuration, loaded from TOML and overridden by command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};

use reaptomo::coupling::{build_coupling, CouplingOperator, CouplingSpec, CouplingVariant, DEFAULT_THETA};
use reaptomo::mle::MLConfig;
use reaptomo::statevec::{make_dicke, make_ghz, make_tfim_ground, make_w, random_state, Dims, StateVector};
use reaptomo::C64;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Synthetic ensemble size used for ML when `shots = "inf"`.
pub const IDEAL_SHOTS: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateConfig {
    Ghz,
    W,
    /// `k` defaults to `n / 2`.
    Dicke {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k: Option<usize>,
    },
    Tfim {
        #[serde(default = "default_g")]
        g: f64,
        #[serde(default = "default_j")]
        j: f64,
    },
    /// `seed` defaults to the run seed.
    Random {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// State JSON `{n, d, amplitudes}`.
    File { path: PathBuf },
}

fn default_g() -> f64 {
    0.5
}

fn default_j() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    LocalXSum,
    Fourier,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    #[serde(default = "default_variant")]
    pub variant: VariantName,
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Fourier variant only: the eigenvalues `p_k`, ascending. Defaults to `0..N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
    /// Explicit variant only: JSON array of rows, each an array of `[re, im]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix_file: Option<PathBuf>,
}

fn default_variant() -> VariantName {
    VariantName::LocalXSum
}

fn default_theta() -> f64 {
    DEFAULT_THETA
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self {
            variant: default_variant(),
            theta: default_theta(),
            eigenvalues: None,
            matrix_file: None,
        }
    }
}

/// Ensemble size `F`, or `"inf"` to use exact probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shots {
    Finite(u64),
    Infinite,
}

impl fmt::Display for Shots {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shots::Finite(n) => write!(f, "{n}"),
            Shots::Infinite => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for Shots {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "inf" | "infinite" | "∞" => Ok(Shots::Infinite),
            other => other
                .parse::<u64>()
                .map(Shots::Finite)
                .map_err(|_| format!("shots must be a positive integer or \"inf\", got {other:?}")),
        }
    }
}

impl Serialize for Shots {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Shots::Finite(n) => s.serialize_u64(*n),
            Shots::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Shots {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(n) => Ok(Shots::Finite(n)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Ml,
    Both,
}

impl Mode {
    pub fn exact(self) -> bool {
        matches!(self, Mode::Exact | Mode::Both)
    }

    pub fn ml(self) -> bool {
        matches!(self, Mode::Ml | Mode::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    #[serde(default = "default_d")]
    pub d: usize,
    /// Truth state. Optional when estimating from measured counts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateConfig>,
    #[serde(default)]
    pub coupling: CouplingConfig,
    #[serde(default = "default_shots")]
    pub shots: Shots,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub ml: MLConfig,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_d() -> usize {
    2
}

fn default_shots() -> Shots {
    Shots::Finite(24000)
}

fn default_seed() -> u64 {
    1
}

fn default_mode() -> Mode {
    Mode::Both
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            d: default_d(),
            state: None,
            coupling: CouplingConfig::default(),
            shots: default_shots(),
            seed: default_seed(),
            ml: MLConfig::default(),
            mode: default_mode(),
            output_dir: default_output_dir(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: Self = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // Relative paths inside the file resolve against the file's directory.
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(StateConfig::File { path }) = &mut config.state {
            *path = base.join(&*path);
        }
        if let Some(m) = &mut config.coupling.matrix_file {
            *m = base.join(&*m);
        }
        config.output_dir = base.join(&config.output_dir);
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    pub fn dims(&self) -> Result<Dims, CliError> {
        Dims::new(self.n, self.d).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Checks everything that does not require reading referenced files.
    pub fn validate(&self) -> Result<(), CliError> {
        self.dims()?;
        if self.shots == Shots::Finite(0) {
            return Err(CliError::Config("shots must be at least 1".into()));
        }
        self.ml.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(StateConfig::File { path }) = &self.state {
            if !path.is_file() {
                return Err(CliError::Config(format!("state file {} not found", path.display())));
            }
        }
        match self.coupling.variant {
            VariantName::Explicit => match &self.coupling.matrix_file {
                None => {
                    return Err(CliError::Config(
                        "coupling.variant = \"explicit\" needs coupling.matrix_file".into(),
                    ))
                }
                Some(p) if !p.is_file() => {
                    return Err(CliError::Config(format!("matrix file {} not found", p.display())))
                }
                Some(_) => {}
            },
            VariantName::LocalXSum if self.d != 2 => {
                return Err(CliError::Config(format!(
                    "local_x_sum coupling needs qubits (d = 2), got d = {}",
                    self.d
                )))
            }
            _ => {}
        }
        if let Some(StateConfig::Ghz | StateConfig::W | StateConfig::Dicke { .. } | StateConfig::Tfim { .. }) =
            &self.state
        {
            if self.d != 2 {
                return Err(CliError::Config(format!(
                    "benchmark states are qubit states; use kind = \"random\" or \"file\" for d = {}",
                    self.d
                )));
            }
        }
        Ok(())
    }

    pub fn coupling_spec(&self) -> Result<CouplingSpec, CliError> {
        let dims = self.dims()?;
        let theta = self.coupling.theta;
        let variant = match self.coupling.variant {
            VariantName::LocalXSum => CouplingVariant::LocalXSum { theta },
            VariantName::Fourier => CouplingVariant::FourierBasis {
                theta,
                eigenvalues: self.coupling.eigenvalues.clone(),
            },
            VariantName::Explicit => {
                let path = self.coupling.matrix_file.as_ref().ok_or_else(|| {
                    CliError::Config("explicit coupling needs coupling.matrix_file".into())
                })?;
                CouplingVariant::ExplicitUnitary {
                    matrix: read_matrix(path, dims.total())?,
                }
            }
        };
        Ok(CouplingSpec { dims, variant })
    }

    pub fn coupling(&self) -> Result<CouplingOperator, CliError> {
        build_coupling(self.coupling_spec()?).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn truth(&self) -> Result<Option<StateVector>, CliError> {
        let Some(state) = &self.state else {
            return Ok(None);
        };
        let n = self.n;
        let built = match state {
            StateConfig::Ghz => make_ghz(n),
            StateConfig::W => make_w(n),
            StateConfig::Dicke { k } => make_dicke(n, k.unwrap_or(n / 2)),
            StateConfig::Tfim { g, j } => make_tfim_ground(n, *g, *j),
            StateConfig::Random { seed } => Ok(random_state(self.dims()?, seed.unwrap_or(self.seed))),
            StateConfig::File { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                let s = StateVector::from_json(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                if s.dims() != self.dims()? {
                    return Err(CliError::Config(format!(
                        "state file {} has n = {}, d = {}; config has n = {}, d = {}",
                        path.display(),
                        s.dims().n(),
                        s.dims().d(),
                        self.n,
                        self.d
                    )));
                }
                Ok(s)
            }
        };
        built.map(Some).map_err(|e| CliError::Config(e.to_string()))
    }
}

fn read_matrix(path: &Path, size: usize) -> Result<nalgebra::DMatrix<C64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let rows: Vec<Vec<[f64; 2]>> = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if rows.len() != size || rows.iter().any(|r| r.len() != size) {
        return Err(CliError::Config(format!(
            "{}: expected a {size} x {size} matrix",
            path.display()
        )));
    }
    Ok(nalgebra::DMatrix::from_fn(size, size, |i, j| {
        C64::new(rows[i][j][0], rows[i][j][1])
    }))
}

/// Command-line overrides; `None` leaves the config field alone.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Truth state kind: ghz, w, dicke, tfim, random, file
    #[arg(long)]
    pub state: Option<String>,
    /// Excitation number for --state dicke
    #[arg(long)]
    pub k: Option<usize>,
    /// Transverse field for --state tfim
    #[arg(long)]
    pub g: Option<f64>,
    /// State JSON for --state file
    #[arg(long)]
    pub state_file: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Ensemble size, or "inf" for exact probabilities
    #[arg(long)]
    pub shots: Option<Shots>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Consecutive-infidelity stopping tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, mut config: RunConfig) -> Result<RunConfig, CliError> {
        if let Some(n) = self.n {
            config.n = n;
        }
        if let Some(kind) = &self.state {
            config.state = Some(match kind.as_str() {
                "ghz" => StateConfig::Ghz,
                "w" => StateConfig::W,
                "dicke" => StateConfig::Dicke { k: self.k },
                "tfim" => StateConfig::Tfim {
                    g: self.g.unwrap_or(default_g()),
                    j: default_j(),
                },
                "random" => StateConfig::Random { seed: None },
                "file" => StateConfig::File {
                    path: self.state_file.clone().ok_or_else(|| {
                        CliError::Config("--state file needs --state-file".into())
                    })?,
                },
                other => {
                    return Err(CliError::Config(format!(
                        "unknown state kind {other:?} (expected ghz, w, dicke, tfim, random or file)"
                    )))
                }
            });
        } else {
            match (&mut config.state, self.k, self.g) {
                (Some(StateConfig::Dicke { k }), Some(new), _) => *k = Some(new),
                (Some(StateConfig::Tfim { g, .. }), _, Some(new)) => *g = new,
                _ => {}
            }
        }
        if let Some(theta) = self.theta {
            config.coupling.theta = theta;
        }
        if let Some(shots) = self.shots {
            config.shots = shots;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(m) = self.max_iters {
            config.ml.max_iters = m;
        }
        if let Some(t) = self.tol {
            config.ml.consec_infidelity_tol = t;
        }
        if let Some(mode) = self.mode {
            config.mode = mode;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        Ok(config)
    }
}
