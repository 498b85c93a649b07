//! Run configuration and the staged prepare → measure → correlate → fit
//! pipeline behind the command-line front end.
//!
//! A run is described by a TOML document with fixed sections; unknown keys
//! are rejected so typos fail loudly before any computation:
//!
//! ```toml
//! seed = 7
//! output_dir = "out"
//!
//! [model]
//! preset = "ising"            # or give omega/delta/v1/v2 explicitly
//!
//! [geometry]
//! length = 16
//! boundary = "periodic"       # open | periodic
//! constraint = "hard"         # hard | penalty
//!
//! [solver]
//! backend = "auto"            # auto | dense | lanczos | dmrg
//!
//! [measurement]               # optional
//! pattern = "n[2j]=0"
//! kind = "projective"         # projective | weak | generalized
//!
//! [analysis]                  # optional
//! operator = "sigma_n"        # sigma | epsilon | sigma_n | epsilon_n | epsilon_z2
//! fit = "power-law"           # power-law | obc-sine | obc-derivative
//! window = 0.8
//!
//! [sampling]                  # optional: emulate the shot protocol too
//! n_shots = 100000
//! ```
//!
//! Every run writes a manifest recording the configuration hash, seed,
//! package version, and wall time, so any output file can be regenerated
//! from the manifest alone. Reruns with the same config and seed produce
//! byte-identical data files.

use crate::basis::{BlockadedBasis, Boundary, ChainGeometry, ConstraintMode};
use crate::checkpoint::{save_series, save_shots, save_wavefunction};
use crate::dmrg::{dmrg_ground_state, DmrgConfig};
use crate::error::{Error, Result};
use crate::hamiltonian::{build_hamiltonian, critical_preset, HamiltonianParams, Model};
use crate::measure::{
    classify_sector, conditional_probabilities, expand_pattern, generalized_measure,
    parse_pattern, project, sector_probability, weak_measure, OutcomeSector,
};
use crate::mpo::build_mpo;
use crate::observables::{
    build_epsilon_n, build_epsilon_z2, build_sigma_n, connected_correlator, one_point_profile,
    Coordinate, CorrelatorSeries, DiagonalObservable,
};
use crate::scaling::{fit_obc_derivative, fit_obc_sine, fit_power_law, two_cell_average, FitResult};
use crate::shots::{estimate_connected, filter_sector, sample_shots, DEFAULT_SHOT_FLOOR};
use crate::solve::{auto_ground_state, ground_state_dense, ground_state_lanczos, LanczosOptions};
use crate::wavefunction::Wavefunction;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

/// Environment variable reserved for capping worker threads. All current
/// kernels are single-threaded; the value is validated and recorded in the
/// manifest so configurations stay portable to parallel builds.
pub const THREADS_ENV: &str = "RYDCRIT_THREADS";

// ---------------------------------------------------------------- sections

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Named critical point; mutually exclusive with explicit couplings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Model>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v2: Option<f64>,
    /// Compensate open-chain edges by shifting their detuning by `-V2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_detuning_shift: Option<bool>,
}

impl ModelSection {
    pub fn resolve(&self) -> Result<HamiltonianParams> {
        let explicit = [self.omega, self.delta, self.v1, self.v2];
        match self.preset {
            Some(model) => {
                if explicit.iter().any(Option::is_some) {
                    return Err(Error::InvalidInput(
                        "model: give either a preset or explicit couplings, not both".into(),
                    ));
                }
                let mut params = critical_preset(model);
                if let Some(shift) = self.edge_detuning_shift {
                    params.edge_detuning_shift = shift;
                }
                Ok(params)
            }
            None => {
                let [omega, delta, v1, v2] = explicit.map(|v| v.unwrap_or(f64::NAN));
                if explicit.iter().any(Option::is_none) {
                    return Err(Error::InvalidInput(
                        "model: without a preset, omega, delta, v1 and v2 are all required"
                            .into(),
                    ));
                }
                let mut params = HamiltonianParams::new(omega, delta, v1, v2);
                if let Some(shift) = self.edge_detuning_shift {
                    params.edge_detuning_shift = shift;
                }
                Ok(params)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub length: usize,
    pub boundary: Boundary,
    #[serde(default = "default_constraint")]
    pub constraint: ConstraintMode,
}

fn default_constraint() -> ConstraintMode {
    ConstraintMode::HardBlockade
}

impl GeometrySection {
    pub fn resolve(&self) -> Result<ChainGeometry> {
        ChainGeometry::new(self.length, self.boundary, self.constraint)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverBackend {
    Auto,
    Dense,
    Lanczos,
    Dmrg,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_backend")]
    pub backend: SolverBackend,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_sweeps: Option<usize>,
}

fn default_backend() -> SolverBackend {
    SolverBackend::Auto
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            backend: SolverBackend::Auto,
            chi_max: None,
            max_sweeps: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementKind {
    Projective,
    Weak,
    Generalized,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSection {
    #[serde(default = "default_kind")]
    pub kind: MeasurementKind,
    /// Outcome pattern, required for projective and weak measurements.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    /// Measurement strength β (weak and generalized kinds).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Sublattice mixing angle θ/π (generalized kind only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_over_pi: Option<f64>,
}

fn default_kind() -> MeasurementKind {
    MeasurementKind::Projective
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// Staggered bond order parameter on the unmeasured chain.
    Sigma,
    /// Uniform bond occupation on the unmeasured chain.
    Epsilon,
    /// Per-cell order parameter over a measurement sector.
    SigmaN,
    /// Per-cell thermal operator over a measurement sector.
    EpsilonN,
    /// Symmetry-resolved three-site thermal operator (period-3 patterns).
    EpsilonZ2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitForm {
    PowerLaw,
    ObcSine,
    ObcDerivative,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    pub operator: OperatorKind,
    pub fit: FitForm,
    #[serde(default = "default_window")]
    pub window: f64,
    /// Average adjacent points before fitting (cancels a two-cell
    /// staggered component).
    #[serde(default)]
    pub two_cell: bool,
}

fn default_window() -> f64 {
    0.8
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub n_shots: usize,
    #[serde(default = "default_floor")]
    pub floor: usize,
}

fn default_floor() -> usize {
    DEFAULT_SHOT_FLOOR
}

/// Complete run description. See the module docs for the TOML layout.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub model: ModelSection,
    pub geometry: GeometrySection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement: Option<MeasurementSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingSection>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::InvalidInput(format!("config serialization: {e}")))
    }

    /// Semantic validation beyond the type structure.
    pub fn validate(&self) -> Result<()> {
        self.model.resolve()?;
        self.geometry.resolve()?;
        if let Some(m) = &self.measurement {
            match m.kind {
                MeasurementKind::Projective => {
                    if m.pattern.is_none() {
                        return Err(Error::InvalidInput(
                            "measurement: projective kind needs a pattern".into(),
                        ));
                    }
                    if m.beta.is_some() || m.theta_over_pi.is_some() {
                        return Err(Error::InvalidInput(
                            "measurement: projective kind takes no beta or theta".into(),
                        ));
                    }
                }
                MeasurementKind::Weak => {
                    if m.pattern.is_none() || m.beta.is_none() {
                        return Err(Error::InvalidInput(
                            "measurement: weak kind needs a pattern and beta".into(),
                        ));
                    }
                    if m.theta_over_pi.is_some() {
                        return Err(Error::InvalidInput(
                            "measurement: theta applies to the generalized kind only".into(),
                        ));
                    }
                }
                MeasurementKind::Generalized => {
                    if m.beta.is_none() || m.theta_over_pi.is_none() {
                        return Err(Error::InvalidInput(
                            "measurement: generalized kind needs beta and theta_over_pi".into(),
                        ));
                    }
                    if m.pattern.is_some() {
                        return Err(Error::InvalidInput(
                            "measurement: the generalized kind weights sublattices; it takes no pattern"
                                .into(),
                        ));
                    }
                }
            }
        }
        if let Some(a) = &self.analysis {
            if !(0.0 < a.window && a.window <= 1.0) {
                return Err(Error::InvalidInput(format!(
                    "analysis: window must lie in (0, 1], got {}",
                    a.window
                )));
            }
            let sector_op = matches!(
                a.operator,
                OperatorKind::SigmaN | OperatorKind::EpsilonN | OperatorKind::EpsilonZ2
            );
            let has_sector = self
                .measurement
                .as_ref()
                .is_some_and(|m| m.pattern.is_some());
            if sector_op && !has_sector {
                return Err(Error::InvalidInput(
                    "analysis: sector operators need a measurement pattern".into(),
                ));
            }
        }
        if let Some(s) = &self.sampling {
            if s.n_shots == 0 {
                return Err(Error::InvalidInput("sampling: n_shots must be positive".into()));
            }
        }
        Ok(())
    }

    /// Hash of the canonical (serialized) configuration, independent of key
    /// order and formatting in the source document.
    pub fn canonical_hash(&self) -> Result<String> {
        let canonical = self.to_toml()?;
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        Ok(hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect())
    }
}

// ----------------------------------------------------------------- reports

#[derive(Debug, Clone, Serialize)]
pub struct GroundReport {
    pub backend: &'static str,
    pub length: usize,
    pub boundary: Boundary,
    pub constraint: ConstraintMode,
    /// Hilbert-space dimension, when it fits a machine word.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension: Option<u64>,
    pub energy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_bond: Option<usize>,
    pub state_id: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SectorReport {
    pub kind: MeasurementKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_over_pi: Option<f64>,
    /// Born probability of the outcome (projective kind only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_forbidden: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bond_reflection: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured_sites: Option<usize>,
    pub state_id: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub operator: OperatorKind,
    pub form: FitForm,
    pub exponent: f64,
    pub stderr: f64,
    pub window: f64,
    pub n_points: usize,
    pub rms_residual: f64,
    pub convention: String,
}

impl FitReport {
    fn new(operator: OperatorKind, form: FitForm, fit: &FitResult) -> Self {
        FitReport {
            operator,
            form,
            exponent: fit.exponent,
            stderr: fit.stderr,
            window: fit.window,
            n_points: fit.n_points,
            rms_residual: fit.rms_residual,
            convention: fit.convention.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SamplingReport {
    pub n_shots: usize,
    pub retained: usize,
    pub retention: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sector_probability: Option<f64>,
    pub seed: u64,
}

/// Run provenance: everything needed to regenerate the outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub package: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub artifacts: Vec<String>,
}

/// Validate the thread-count variable if present (kernels are currently
/// single-threaded; see [`THREADS_ENV`]).
pub fn thread_budget() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(text) => {
            let n: usize = text.trim().parse().map_err(|_| {
                Error::InvalidInput(format!("{THREADS_ENV} must be a positive integer, got {text:?}"))
            })?;
            if n == 0 {
                return Err(Error::InvalidInput(format!("{THREADS_ENV} must be positive")));
            }
            Ok(Some(n))
        }
    }
}

// ------------------------------------------------------------------ stages

/// Solve for the ground state with the configured backend.
pub fn solve_ground(
    params: &HamiltonianParams,
    geometry: ChainGeometry,
    solver: &SolverSection,
    seed: u64,
) -> Result<(Wavefunction, GroundReport)> {
    let mut report = GroundReport {
        backend: "",
        length: geometry.length,
        boundary: geometry.boundary,
        constraint: geometry.constraint,
        dimension: u64::try_from(geometry.dimension()).ok(),
        energy: f64::NAN,
        sweeps: None,
        converged: None,
        max_bond: None,
        state_id: String::new(),
    };
    let state = match solver.backend {
        SolverBackend::Dmrg => {
            let mpo = build_mpo(geometry, params)?;
            let mut cfg = DmrgConfig::default();
            cfg.seed = seed;
            if let Some(chi) = solver.chi_max {
                cfg.chi_max = chi;
            }
            if let Some(sweeps) = solver.max_sweeps {
                cfg.max_sweeps = sweeps;
            }
            let outcome = dmrg_ground_state(&mpo, &cfg)?;
            report.backend = "dmrg";
            report.energy = outcome.energy;
            report.sweeps = Some(outcome.sweeps);
            report.converged = Some(outcome.converged);
            report.max_bond = Some(outcome.max_bond_reached);
            Wavefunction::Mps(outcome.state)
        }
        backend => {
            let basis = Arc::new(BlockadedBasis::enumerate(geometry)?);
            let h = build_hamiltonian(&basis, params)?;
            let opts = LanczosOptions::default();
            let (state, energy) = match backend {
                SolverBackend::Dense => {
                    report.backend = "dense";
                    ground_state_dense(&h, &basis)?
                }
                SolverBackend::Lanczos => {
                    report.backend = "lanczos";
                    ground_state_lanczos(&h, &basis, &opts)?
                }
                _ => {
                    report.backend = "auto";
                    auto_ground_state(&h, &basis, &opts)?
                }
            };
            report.energy = energy;
            Wavefunction::Dense(state)
        }
    };
    report.state_id = state.content_id();
    Ok((state, report))
}

/// Expand and apply the configured measurement; returns the measured state,
/// the sector (when the kind defines one), and a report.
pub fn apply_measurement(
    state: &Wavefunction,
    section: &MeasurementSection,
) -> Result<(Wavefunction, Option<OutcomeSector>, SectorReport)> {
    let mut report = SectorReport {
        kind: section.kind,
        pattern: section.pattern.clone(),
        beta: section.beta,
        theta_over_pi: section.theta_over_pi,
        probability: None,
        period: None,
        sigma_forbidden: None,
        bond_reflection: None,
        measured_sites: None,
        state_id: String::new(),
    };
    let (measured, sector) = match section.kind {
        MeasurementKind::Projective | MeasurementKind::Weak => {
            let pattern_text = section.pattern.as_deref().ok_or_else(|| {
                Error::InvalidInput("measurement pattern missing".into())
            })?;
            let pattern = parse_pattern(pattern_text)?;
            let sector = expand_pattern(&pattern, state.geometry())?;
            let class = classify_sector(&sector);
            report.period = Some(sector.period());
            report.sigma_forbidden = Some(class.sigma_forbidden);
            report.bond_reflection = Some(class.bond_reflection);
            report.measured_sites = Some(sector.measured().len());
            let out = match section.kind {
                MeasurementKind::Projective => {
                    let (projected, probability) = project(state, &sector)?;
                    report.probability = Some(probability);
                    projected
                }
                _ => weak_measure(state, &sector, section.beta.unwrap())?,
            };
            (out, Some(sector))
        }
        MeasurementKind::Generalized => {
            let beta = section.beta.unwrap();
            let theta = section.theta_over_pi.unwrap() * std::f64::consts::PI;
            (generalized_measure(state, beta, theta)?, None)
        }
    };
    report.state_id = measured.content_id();
    Ok((measured, sector, report))
}

/// Plain bond operators for the unmeasured chain: the staggered order
/// parameter `σ̂_{j+1/2}` or the uniform bond occupation `ε̂_{j+1/2}`.
pub fn bond_observables(
    geometry: ChainGeometry,
    staggered: bool,
) -> Result<Vec<DiagonalObservable>> {
    let length = geometry.length;
    let bonds = match geometry.boundary {
        Boundary::Periodic => length,
        Boundary::Open => length.saturating_sub(1),
    };
    if bonds == 0 {
        return Err(Error::InvalidInput("chain has no bonds".into()));
    }
    let label = if staggered { "sigma" } else { "epsilon" };
    let mut out = Vec::with_capacity(bonds);
    for j in 0..bonds {
        let next = (j + 1) % length;
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let terms = if staggered {
            vec![(j, 0.5 * sign), (next, -0.5 * sign)]
        } else {
            vec![(j, 0.5), (next, 0.5)]
        };
        out.push(DiagonalObservable::new(
            terms,
            label,
            Coordinate::new(2 * j as i64 + 1, 2),
        )?);
    }
    Ok(out)
}

/// Build the configured operator family over the state's chain.
pub fn resolve_operators(
    operator: OperatorKind,
    geometry: ChainGeometry,
    sector: Option<&OutcomeSector>,
) -> Result<Vec<DiagonalObservable>> {
    match operator {
        OperatorKind::Sigma => bond_observables(geometry, true),
        OperatorKind::Epsilon => bond_observables(geometry, false),
        sector_kind => {
            let sector = sector.ok_or_else(|| {
                Error::InvalidInput(
                    "sector operators need a measurement pattern to define their cells".into(),
                )
            })?;
            match sector_kind {
                OperatorKind::SigmaN => build_sigma_n(sector),
                OperatorKind::EpsilonN => build_epsilon_n(sector),
                _ => build_epsilon_z2(sector),
            }
        }
    }
}

/// All ordered index pairs over an operator family (overlapping supports
/// are dropped downstream).
pub fn all_pairs(count: usize) -> Vec<(usize, usize)> {
    (0..count)
        .flat_map(|a| ((a + 1)..count).map(move |b| (a, b)))
        .collect()
}

/// Evaluate the exact series the configured fit consumes: a one-point
/// profile for the open-boundary fits, connected correlators otherwise.
pub fn exact_series(
    state: &Wavefunction,
    operators: &[DiagonalObservable],
    form: FitForm,
    sector: Option<&OutcomeSector>,
) -> Result<CorrelatorSeries> {
    let mut series = match form {
        FitForm::PowerLaw => {
            connected_correlator(state, operators, &all_pairs(operators.len()))?
        }
        _ => one_point_profile(state, operators)?,
    };
    series.sector = sector.map(|s| s.source().to_string());
    Ok(series)
}

/// Apply the configured fit form to a series.
pub fn run_fit(series: &CorrelatorSeries, analysis: &AnalysisSection) -> Result<FitResult> {
    let prepared;
    let series = if analysis.two_cell {
        prepared = two_cell_average(series)?;
        &prepared
    } else {
        series
    };
    match analysis.fit {
        FitForm::PowerLaw => fit_power_law(series, analysis.window),
        FitForm::ObcSine => fit_obc_sine(series, analysis.window),
        FitForm::ObcDerivative => fit_obc_derivative(series, analysis.window),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("report encoding: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn push_artifact(artifacts: &mut Vec<String>, path: &Path) {
    artifacts.push(path.file_name().unwrap_or_default().to_string_lossy().into_owned());
}

/// Execute the full staged pipeline described by `config`, writing all
/// artifacts into its output directory and returning the manifest (which is
/// also written there as `manifest.json`).
pub fn run_pipeline(config: &RunConfig) -> Result<Manifest> {
    config.validate()?;
    let started = Instant::now();
    let threads = thread_budget()?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir)?;
    let mut artifacts: Vec<String> = Vec::new();

    // Stage 1: prepare the ground state.
    let params = config.model.resolve()?;
    let geometry = config.geometry.resolve()?;
    let (ground, ground_report) = solve_ground(&params, geometry, &config.solver, config.seed)?;
    let ground_path = dir.join("ground.rcwf");
    save_wavefunction(&ground, &ground_path)?;
    push_artifact(&mut artifacts, &ground_path);
    let report_path = dir.join("ground.json");
    write_json(&report_path, &ground_report)?;
    push_artifact(&mut artifacts, &report_path);

    // Stage 2: measure.
    let mut analyzed = ground.clone();
    let mut sector: Option<OutcomeSector> = None;
    if let Some(section) = &config.measurement {
        let (measured, s, sector_report) = apply_measurement(&ground, section)?;
        let measured_path = dir.join("measured.rcwf");
        save_wavefunction(&measured, &measured_path)?;
        push_artifact(&mut artifacts, &measured_path);
        let sector_path = dir.join("sector.json");
        write_json(&sector_path, &sector_report)?;
        push_artifact(&mut artifacts, &sector_path);
        analyzed = measured;
        sector = s;
    }

    // Stage 3: correlate and fit.
    if let Some(analysis) = &config.analysis {
        let operators = resolve_operators(analysis.operator, geometry, sector.as_ref())?;
        let series = exact_series(&analyzed, &operators, analysis.fit, sector.as_ref())?;
        let series_path = dir.join("correlator.csv");
        save_series(&series, &series_path)?;
        push_artifact(&mut artifacts, &series_path);

        let fit = run_fit(&series, analysis)?;
        let fit_path = dir.join("fit.json");
        write_json(&fit_path, &FitReport::new(analysis.operator, analysis.fit, &fit))?;
        push_artifact(&mut artifacts, &fit_path);

        // Stage 4: emulate the shot protocol against the same analysis.
        if let Some(sampling) = &config.sampling {
            let shots = sample_shots(&ground, sampling.n_shots, config.seed)?;
            let kept = match &sector {
                Some(s) => filter_sector(&shots, s)?,
                None => shots.clone(),
            };
            let shots_path = dir.join("shots.txt");
            save_shots(&kept, &shots_path)?;
            push_artifact(&mut artifacts, &shots_path);

            let sampling_report = SamplingReport {
                n_shots: sampling.n_shots,
                retained: kept.len(),
                retention: kept.len() as f64 / sampling.n_shots as f64,
                sector_probability: match &sector {
                    Some(s) => Some(sector_probability(&ground, s)?),
                    None => None,
                },
                seed: config.seed,
            };
            let sampling_path = dir.join("sampling.json");
            write_json(&sampling_path, &sampling_report)?;
            push_artifact(&mut artifacts, &sampling_path);

            if analysis.fit == FitForm::PowerLaw {
                let estimated = estimate_connected(
                    &kept,
                    &operators,
                    &all_pairs(operators.len()),
                    sampling.floor,
                )?;
                let estimate_path = dir.join("estimate.csv");
                save_series(&estimated, &estimate_path)?;
                push_artifact(&mut artifacts, &estimate_path);
            }
        }
    }

    let manifest = Manifest {
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config_hash: config.canonical_hash()?,
        seed: config.seed,
        wall_time_s: started.elapsed().as_secs_f64(),
        threads,
        artifacts,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Sector probability with conditional factors, the `prob` stage's payload.
#[derive(Debug, Clone, Serialize)]
pub struct ProbabilityReport {
    pub pattern: String,
    pub length: usize,
    pub probability: f64,
    pub conditionals: Vec<f64>,
}

/// Evaluate P_n and the per-site conditional chain for one state.
pub fn probability_report(
    state: &Wavefunction,
    pattern_text: &str,
) -> Result<ProbabilityReport> {
    let pattern = parse_pattern(pattern_text)?;
    let sector = expand_pattern(&pattern, state.geometry())?;
    let conditionals = conditional_probabilities(state, &sector)?;
    Ok(ProbabilityReport {
        pattern: pattern_text.to_string(),
        length: state.length(),
        probability: sector_probability(state, &sector)?,
        conditionals,
    })
}
