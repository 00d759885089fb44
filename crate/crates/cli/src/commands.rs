use std::path::{Path, PathBuf};
use std::time::Instant;

use reaptomo::coupling::{
    check_dangerous_block_diagonal, check_dangerous_compatible, check_dangerous_degenerate_eigenstate,
    degenerate_signature,
};
use reaptomo::exact::{reconstruct, ReconstructionWarning};
use reaptomo::measurement::{empirical_frequencies, joint_probabilities, sample_counts, CountTable, ProbabilityTable};
use reaptomo::mle::{history_csv, run, CountWeights, MLState};
use reaptomo::statevec::{fidelity, StateVector};
use reaptomo::{CouplingOperator, TomoError};
use serde::Serialize;

use crate::config::{Mode, RunConfig, Shots, StateConfig, IDEAL_SHOTS};
use crate::CliError;

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Threshold reported alongside the stopping tolerance in summaries.
pub const REPORT_THRESHOLD: f64 = 1e-5;

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    command: &'a str,
    version: &'a str,
    n: usize,
    d: usize,
    theta: Option<f64>,
    coupling: &'a str,
    #[serde(rename = "F")]
    shots: Shots,
    seed: u64,
    config: &'a RunConfig,
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_metadata(config: &RunConfig, command: &str, name: &str) -> Result<PathBuf, CliError> {
    let meta = Metadata {
        command,
        version: VERSION,
        n: config.n,
        d: config.d,
        theta: match config.coupling.variant {
            crate::config::VariantName::Explicit => None,
            _ => Some(config.coupling.theta),
        },
        coupling: match config.coupling.variant {
            crate::config::VariantName::LocalXSum => "local_x_sum",
            crate::config::VariantName::Fourier => "fourier",
            crate::config::VariantName::Explicit => "explicit",
        },
        shots: config.shots,
        seed: config.seed,
        config,
    };
    let path = config.output_dir.join(name);
    write_file(&path, &to_json(&meta))?;
    Ok(path)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("summary types serialize");
    s.push('\n');
    s
}

fn require_truth(config: &RunConfig, what: &str) -> Result<StateVector, CliError> {
    config
        .truth()?
        .ok_or_else(|| CliError::Config(format!("{what} needs a [state] section or --state")))
}

fn require_finite(config: &RunConfig) -> Result<u64, CliError> {
    match config.shots {
        Shots::Finite(f) => Ok(f),
        Shots::Infinite => Err(CliError::Config(
            "shots = \"inf\" has no counts to sample; give a finite ensemble size".into(),
        )),
    }
}

#[derive(Debug)]
pub struct SimulateOutput {
    pub counts_path: PathBuf,
    pub metadata_path: PathBuf,
    pub counts: CountTable,
}

/// Samples `F` shots from the configured state and writes `counts.csv` plus `counts.meta.json`.
pub fn simulate(config: &RunConfig) -> Result<SimulateOutput, CliError> {
    config.validate()?;
    let shots = require_finite(config)?;
    let truth = require_truth(config, "simulate")?;
    let op = config.coupling()?;
    let counts = sample_counts(&joint_probabilities(&truth, &op)?, shots, config.seed)?;
    prepare_dir(&config.output_dir)?;
    let counts_path = config.output_dir.join("counts.csv");
    write_file(&counts_path, &counts.to_csv())?;
    let metadata_path = write_metadata(config, "simulate", "counts.meta.json")?;
    Ok(SimulateOutput {
        counts_path,
        metadata_path,
        counts,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactSummary {
    pub fidelity_to_truth: Option<f64>,
    pub residual: f64,
    pub condition_estimate: f64,
    pub reference: usize,
    pub warnings: Vec<ReconstructionWarning>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MlSummary {
    pub fidelity_to_truth: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub final_consec_infidelity: Option<f64>,
    /// First iteration with consecutive infidelity below [`REPORT_THRESHOLD`].
    pub iterations_to_1e_5: Option<usize>,
    pub initial_log_likelihood: f64,
    pub final_log_likelihood: f64,
}

impl MlSummary {
    fn new(state: &MLState, truth: Option<&StateVector>) -> Result<Self, CliError> {
        Ok(Self {
            fidelity_to_truth: truth.map(|t| fidelity(&state.estimate, t)).transpose()?,
            iterations: state.iter,
            converged: state.converged,
            final_consec_infidelity: state.last_consec_infidelity(),
            iterations_to_1e_5: state.iterations_to(REPORT_THRESHOLD),
            initial_log_likelihood: state.initial_log_likelihood,
            final_log_likelihood: state.final_log_likelihood(),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateSummary {
    pub n: usize,
    pub d: usize,
    pub mode: Mode,
    /// Total shots in the data; `"inf"` for exact probabilities.
    #[serde(rename = "F")]
    pub shots: Shots,
    pub seed: u64,
    pub counts_file: Option<PathBuf>,
    pub warnings: Vec<String>,
    pub exact: Option<ExactSummary>,
    pub ml: Option<MlSummary>,
    pub wall_time_s: f64,
}

impl EstimateSummary {
    /// True when the ML path ran and stopped on the iteration cap.
    pub fn not_converged(&self) -> bool {
        self.ml.as_ref().is_some_and(|m| !m.converged)
    }
}

enum Data {
    Counts(CountTable),
    Exact(ProbabilityTable),
}

fn read_counts(path: &Path, config: &RunConfig) -> Result<CountTable, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    CountTable::from_csv(&text, config.dims()?).map_err(|e| match e {
        TomoError::Parse { line, msg } => CliError::Tomo(TomoError::Parse {
            line,
            msg: format!("{}: {msg}", path.display()),
        }),
        other => other.into(),
    })
}

fn check_structure(op: &CouplingOperator) -> Result<(), CliError> {
    if check_dangerous_compatible(op)?.flagged {
        return Err(CliError::Dangerous(TomoError::CompatibleBasis));
    }
    let blocks = check_dangerous_block_diagonal(op)?;
    if blocks.flagged {
        return Err(CliError::Dangerous(TomoError::BlockDiagonal {
            components: blocks.components,
        }));
    }
    Ok(())
}

/// Reconstructs from `counts` (or from the configured state when absent) and
/// writes estimates, `convergence.csv`, `summary.json` and `run.meta.json`.
///
/// Without a counts file, finite `shots` are sampled from the configured state
/// and `shots = "inf"` uses its exact probabilities.
pub fn estimate(config: &RunConfig, counts: Option<&Path>) -> Result<EstimateSummary, CliError> {
    let start = Instant::now();
    config.validate()?;
    let op = config.coupling()?;
    let truth = config.truth()?;
    check_structure(&op)?;
    prepare_dir(&config.output_dir)?;

    let data = match counts {
        Some(path) => Data::Counts(read_counts(path, config)?),
        None => {
            let truth = truth.as_ref().ok_or_else(|| {
                CliError::Config("estimate needs --counts or a [state] section to simulate from".into())
            })?;
            let table = joint_probabilities(truth, &op)?;
            match config.shots {
                Shots::Infinite => Data::Exact(table),
                Shots::Finite(f) => {
                    let c = sample_counts(&table, f, config.seed)?;
                    write_file(&config.output_dir.join("counts.csv"), &c.to_csv())?;
                    Data::Counts(c)
                }
            }
        }
    };
    let (table, weights, shots) = match &data {
        Data::Counts(c) => (
            empirical_frequencies(c)?,
            CountWeights::from(c),
            Shots::Finite(c.total()),
        ),
        Data::Exact(t) => (t.clone(), CountWeights::ideal(t, IDEAL_SHOTS), Shots::Infinite),
    };

    let mut warnings = Vec::new();
    let degenerate = match &data {
        Data::Counts(c) => check_dangerous_degenerate_eigenstate(c)?.flagged,
        Data::Exact(t) => degenerate_signature(t).flagged,
    };
    if degenerate {
        warnings.push(
            "dangerous case (iii): data match a degenerate eigenstate of the coupling generator; \
             the estimate may not be unique"
                .to_string(),
        );
    }

    let exact = if config.mode.exact() {
        let r = reconstruct(&table, &op)?;
        write_file(
            &config.output_dir.join("exact_estimate.json"),
            &(r.to_json(truth.as_ref())? + "\n"),
        )?;
        warnings.extend(r.warnings.iter().map(|w| format!("exact: {w}")));
        Some(ExactSummary {
            fidelity_to_truth: truth.as_ref().map(|t| fidelity(&r.state, t)).transpose()?,
            residual: r.residual,
            condition_estimate: r.condition_estimate,
            reference: r.reference,
            warnings: r.warnings,
        })
    } else {
        None
    };

    let ml = if config.mode.ml() {
        let state = run(&weights, &op, &config.ml, truth.as_ref())?;
        write_file(&config.output_dir.join("ml_estimate.json"), &(state.estimate.to_json()? + "\n"))?;
        write_file(&config.output_dir.join("convergence.csv"), &history_csv(&state.history))?;
        let s = MlSummary::new(&state, truth.as_ref())?;
        if !s.converged {
            warnings.push(format!(
                "ml: consecutive infidelity did not reach {:e} within {} iterations",
                config.ml.consec_infidelity_tol, config.ml.max_iters
            ));
        }
        Some(s)
    } else {
        None
    };

    let summary = EstimateSummary {
        n: config.n,
        d: config.d,
        mode: config.mode,
        shots,
        seed: config.seed,
        counts_file: counts.map(Path::to_path_buf),
        warnings,
        exact,
        ml,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    write_file(&config.output_dir.join("summary.json"), &to_json(&summary))?;
    write_metadata(config, "estimate", "run.meta.json")?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig3Row {
    pub state: String,
    pub fidelity_to_truth: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_consec_infidelity: Option<f64>,
    pub iterations_to_1e_5: Option<usize>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig3Summary {
    pub n: usize,
    #[serde(rename = "F")]
    pub shots: u64,
    pub seed: u64,
    pub theta: f64,
    pub rows: Vec<Fig3Row>,
}

impl Fig3Summary {
    pub fn not_converged(&self) -> bool {
        self.rows.iter().any(|r| !r.converged)
    }

    fn csv(&self) -> String {
        let mut out = String::from(
            "state,fidelity_to_truth,iterations,converged,final_consec_infidelity,iterations_to_1e-5\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.16e},{},{},{},{}\n",
                r.state,
                r.fidelity_to_truth,
                r.iterations,
                r.converged,
                r.final_consec_infidelity.map_or(String::new(), |v| format!("{v:.16e}")),
                r.iterations_to_1e_5.map_or(String::new(), |v| v.to_string()),
            ));
        }
        out
    }
}

/// The four benchmark states at `n = 6`, `F = 24000`: ML histories per state
/// and a combined summary. `config` supplies the coupling, seed, ML settings
/// and output directory; its state, `n` and shots are replaced.
pub fn reproduce_fig3(config: &RunConfig) -> Result<Fig3Summary, CliError> {
    const SHOTS: u64 = 24000;
    let mut base = config.clone();
    base.n = 6;
    base.d = 2;
    base.shots = Shots::Finite(SHOTS);
    base.mode = Mode::Ml;
    base.state = None;
    base.validate()?;
    let op = base.coupling()?;
    check_structure(&op)?;
    prepare_dir(&base.output_dir)?;

    let states = [
        ("w", StateConfig::W),
        ("dicke", StateConfig::Dicke { k: Some(3) }),
        ("ghz", StateConfig::Ghz),
        ("tfim", StateConfig::Tfim { g: 0.5, j: 1.0 }),
    ];
    let mut rows = Vec::new();
    for (name, state) in states {
        let start = Instant::now();
        let mut cfg = base.clone();
        cfg.state = Some(state);
        let truth = require_truth(&cfg, "reproduce-fig3")?;
        let counts = sample_counts(&joint_probabilities(&truth, &op)?, SHOTS, cfg.seed)?;
        let result = run(&CountWeights::from(&counts), &op, &cfg.ml, Some(&truth))?;
        let dir = &base.output_dir;
        write_file(&dir.join(format!("counts_{name}.csv")), &counts.to_csv())?;
        write_file(&dir.join(format!("convergence_{name}.csv")), &history_csv(&result.history))?;
        write_file(&dir.join(format!("estimate_{name}.json")), &(result.estimate.to_json()? + "\n"))?;
        let s = MlSummary::new(&result, Some(&truth))?;
        rows.push(Fig3Row {
            state: name.to_string(),
            fidelity_to_truth: s.fidelity_to_truth.unwrap_or(f64::NAN),
            iterations: s.iterations,
            converged: s.converged,
            final_consec_infidelity: s.final_consec_infidelity,
            iterations_to_1e_5: s.iterations_to_1e_5,
            wall_time_s: start.elapsed().as_secs_f64(),
        });
    }
    let summary = Fig3Summary {
        n: 6,
        shots: SHOTS,
        seed: base.seed,
        theta: base.coupling.theta,
        rows,
    };
    write_file(&base.output_dir.join("summary.json"), &to_json(&summary))?;
    write_file(&base.output_dir.join("summary.csv"), &summary.csv())?;
    write_metadata(&base, "reproduce-fig3", "run.meta.json")?;
    Ok(summary)
}
