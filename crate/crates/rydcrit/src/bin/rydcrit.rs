//! Command-line front end for the measurement-altered-criticality toolkit.
//!
//! The staged workflow mirrors an experiment: prepare a critical ground
//! state (`ground`), measure a periodic subset of sites (`measure`), pull
//! out post-measurement correlators (`correlate`), and fit scaling
//! dimensions (`fit`). `run` drives all stages from one TOML config;
//! dedicated subcommands expose each stage plus the scan tools
//! (`critical-point`, `sweep-theta`, `prob`) and the shot-level emulation
//! (`sample`, `estimate`). Results print as JSON on stdout; every failure
//! prints a machine-readable error object on stderr and exits with a
//! stable per-class code (2 config, 3 solver, 4 zero-probability sector,
//! 5 fit).
//!
//! Data files are gnuplot-ready: CSV tables with one header row, plus JSON
//! sidecars carrying the metadata (`<file>.json`).

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use rydcrit::basis::{BlockadedBasis, Boundary, ChainGeometry, ConstraintMode};
use rydcrit::checkpoint::{load_series, load_shots, load_wavefunction, save_series, save_shots,
    save_wavefunction};
use rydcrit::error::{Error, Result};
use rydcrit::hamiltonian::{critical_preset, HamiltonianParams, Model};
use rydcrit::measure::{expand_pattern, parse_pattern};
use rydcrit::observables::{connected_correlator, one_point_profile};
use rydcrit::pipeline::{
    all_pairs, apply_measurement, probability_report, resolve_operators, run_fit, run_pipeline,
    solve_ground, AnalysisSection, FitForm, GeometrySection, MeasurementKind, MeasurementSection,
    ModelSection, OperatorKind, RunConfig, SolverBackend, SolverSection,
};
use rydcrit::scaling::{
    find_curve_crossing, fit_probability_decay, scan_detuning, sweep_theta, CurveFamily,
};
use rydcrit::shots::{estimate_connected, filter_sector, sample_shots, DEFAULT_SHOT_FLOOR};
use rydcrit::wavefunction::Wavefunction;

#[derive(Parser)]
#[command(
    name = "rydcrit",
    version,
    about = "Measurement-altered criticality in blockaded Rydberg chains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Constrained-space dimensions for one or more chain lengths.
    Basis(BasisArgs),
    /// Solve a ground state and write its checkpoint.
    Ground(GroundArgs),
    /// Locate the critical detuning by finite-size curve crossing.
    CriticalPoint(CriticalPointArgs),
    /// Apply a projective, weak, or generalized measurement to a state.
    Measure(MeasureArgs),
    /// Sector probabilities: single-state report or multi-size decay scan.
    Prob(ProbArgs),
    /// Exact correlator series or boundary profile of a state.
    Correlate(CorrelateArgs),
    /// Fit a scaling dimension to a saved series.
    Fit(FitArgs),
    /// Sweep the generalized-measurement angle and find its fixed point.
    SweepTheta(SweepThetaArgs),
    /// Draw Born-rule shots from a state, optionally post-selected.
    Sample(SampleArgs),
    /// Estimate connected correlators from a shot file.
    Estimate(EstimateArgs),
    /// Run the full prepare -> measure -> correlate -> fit pipeline.
    Run(RunArgs),
}

fn parse_boundary(text: &str) -> std::result::Result<Boundary, String> {
    match text {
        "open" => Ok(Boundary::Open),
        "periodic" => Ok(Boundary::Periodic),
        other => Err(format!("unknown boundary {other:?} (open | periodic)")),
    }
}

fn parse_constraint(text: &str) -> std::result::Result<ConstraintMode, String> {
    match text {
        "hard" => Ok(ConstraintMode::HardBlockade),
        "penalty" => Ok(ConstraintMode::Penalty),
        other => Err(format!("unknown constraint {other:?} (hard | penalty)")),
    }
}

fn parse_model(text: &str) -> std::result::Result<Model, String> {
    match text {
        "ising" => Ok(Model::Ising),
        "tci" => Ok(Model::Tci),
        other => Err(format!("unknown model {other:?} (ising | tci)")),
    }
}

fn parse_backend(text: &str) -> std::result::Result<SolverBackend, String> {
    match text {
        "auto" => Ok(SolverBackend::Auto),
        "dense" => Ok(SolverBackend::Dense),
        "lanczos" => Ok(SolverBackend::Lanczos),
        "dmrg" => Ok(SolverBackend::Dmrg),
        other => Err(format!(
            "unknown backend {other:?} (auto | dense | lanczos | dmrg)"
        )),
    }
}

fn parse_operator(text: &str) -> std::result::Result<OperatorKind, String> {
    match text {
        "sigma" => Ok(OperatorKind::Sigma),
        "epsilon" => Ok(OperatorKind::Epsilon),
        "sigma_n" => Ok(OperatorKind::SigmaN),
        "epsilon_n" => Ok(OperatorKind::EpsilonN),
        "epsilon_z2" => Ok(OperatorKind::EpsilonZ2),
        other => Err(format!(
            "unknown operator {other:?} (sigma | epsilon | sigma_n | epsilon_n | epsilon_z2)"
        )),
    }
}

fn parse_form(text: &str) -> std::result::Result<FitForm, String> {
    match text {
        "power-law" => Ok(FitForm::PowerLaw),
        "obc-sine" => Ok(FitForm::ObcSine),
        "obc-derivative" => Ok(FitForm::ObcDerivative),
        other => Err(format!(
            "unknown fit form {other:?} (power-law | obc-sine | obc-derivative)"
        )),
    }
}

#[derive(Args)]
struct BasisArgs {
    /// Chain lengths, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    lengths: Vec<usize>,
    #[arg(long, default_value = "periodic", value_parser = parse_boundary)]
    boundary: Boundary,
    #[arg(long, default_value = "hard", value_parser = parse_constraint)]
    constraint: ConstraintMode,
    /// Verify each dimension against a brute-force enumeration (L <= 20).
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct ModelFlags {
    /// Critical-point preset (ising | tci).
    #[arg(long, value_parser = parse_model)]
    model: Option<Model>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    #[arg(long)]
    v1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    v2: Option<f64>,
}

impl ModelFlags {
    fn section(&self) -> Option<ModelSection> {
        if self.model.is_none()
            && self.omega.is_none()
            && self.delta.is_none()
            && self.v1.is_none()
            && self.v2.is_none()
        {
            return None;
        }
        Some(ModelSection {
            preset: self.model,
            omega: self.omega,
            delta: self.delta,
            v1: self.v1,
            v2: self.v2,
            edge_detuning_shift: None,
        })
    }

    /// Preset with individual coupling overrides applied on top.
    fn template(&self) -> Result<HamiltonianParams> {
        let mut params = match self.model {
            Some(model) => critical_preset(model),
            None => {
                let all = [self.omega, self.delta, self.v1, self.v2];
                if all.iter().any(Option::is_none) {
                    return Err(Error::InvalidInput(
                        "without --model, all of --omega --delta --v1 --v2 are required".into(),
                    ));
                }
                HamiltonianParams::new(
                    self.omega.unwrap(),
                    self.delta.unwrap(),
                    self.v1.unwrap(),
                    self.v2.unwrap(),
                )
            }
        };
        if self.model.is_some() {
            if let Some(v) = self.omega {
                params.omega = v;
            }
            if let Some(v) = self.delta {
                params.delta = v;
            }
            if let Some(v) = self.v1 {
                params.v1 = v;
            }
            if let Some(v) = self.v2 {
                params.v2 = v;
            }
        }
        Ok(params)
    }
}

#[derive(Args)]
struct GroundArgs {
    /// TOML run config supplying defaults; explicit flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long)]
    length: Option<usize>,
    #[arg(long, value_parser = parse_boundary)]
    boundary: Option<Boundary>,
    #[arg(long, value_parser = parse_constraint)]
    constraint: Option<ConstraintMode>,
    #[arg(long, value_parser = parse_backend)]
    backend: Option<SolverBackend>,
    #[arg(long)]
    chi_max: Option<usize>,
    #[arg(long)]
    max_sweeps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Checkpoint path to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CriticalPointArgs {
    #[command(flatten)]
    model: ModelFlags,
    /// Odd open-chain lengths, comma separated, increasing.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    /// Detuning grid start.
    #[arg(long, allow_hyphen_values = true)]
    from: f64,
    /// Detuning grid end.
    #[arg(long, allow_hyphen_values = true)]
    to: f64,
    /// Grid points (>= 2).
    #[arg(long, default_value_t = 21)]
    steps: usize,
    /// Directory for curves.csv and crossing.json.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct MeasureArgs {
    /// Input state checkpoint.
    #[arg(long)]
    state: PathBuf,
    /// Outcome pattern, e.g. "n[2j]=0" (projective and weak kinds).
    #[arg(long)]
    pattern: Option<String>,
    #[arg(long, default_value = "projective")]
    kind: String,
    #[arg(long)]
    beta: Option<f64>,
    /// Generalized-measurement angle in units of pi.
    #[arg(long)]
    theta_over_pi: Option<f64>,
    /// Post-measurement checkpoint to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProbArgs {
    /// Outcome pattern.
    #[arg(long)]
    pattern: String,
    /// Single-state mode: checkpoint to analyze.
    #[arg(long)]
    state: Option<PathBuf>,
    #[command(flatten)]
    model: ModelFlags,
    /// Scan mode: chain lengths to solve and evaluate.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    #[arg(long, default_value = "periodic", value_parser = parse_boundary)]
    boundary: Boundary,
    /// Extrapolate the fitted decay to this length.
    #[arg(long)]
    extrapolate: Option<f64>,
    /// CSV output path for the (length, probability) table.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CorrelateArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long, value_parser = parse_operator)]
    operator: OperatorKind,
    /// Pattern defining the sector cells (sector operators only).
    #[arg(long)]
    pattern: Option<String>,
    /// Emit the one-point profile instead of connected correlators.
    #[arg(long)]
    profile: bool,
    /// CSV path to write (sidecar written alongside).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Series CSV (with sidecar) to fit.
    #[arg(long)]
    series: PathBuf,
    #[arg(long, value_parser = parse_form)]
    form: FitForm,
    #[arg(long, default_value_t = 0.8)]
    window: f64,
    /// Average adjacent points first (cancels staggered components).
    #[arg(long)]
    two_cell: bool,
    /// Optional JSON output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepThetaArgs {
    #[command(flatten)]
    model: ModelFlags,
    /// Even periodic lengths, comma separated, increasing.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long)]
    beta: f64,
    /// Angle grid start, in units of pi.
    #[arg(long, default_value_t = 0.10)]
    from: f64,
    /// Angle grid end, in units of pi.
    #[arg(long, default_value_t = 0.35)]
    to: f64,
    #[arg(long, default_value_t = 26)]
    steps: usize,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    shots: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Post-select on this pattern before writing.
    #[arg(long)]
    pattern: Option<String>,
    /// Shot file to write (sidecar written alongside).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Shot file (with sidecar) to analyze.
    #[arg(long)]
    shots: PathBuf,
    /// Pattern defining the sector; also filters unfiltered files.
    #[arg(long)]
    pattern: String,
    #[arg(long, value_parser = parse_operator)]
    operator: OperatorKind,
    #[arg(long, default_value_t = DEFAULT_SHOT_FLOOR)]
    floor: usize,
    /// CSV path for the estimated series.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the chain length.
    #[arg(long)]
    length: Option<usize>,
    /// Override the measurement pattern.
    #[arg(long)]
    pattern: Option<String>,
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(value) => {
            println!("{}", serde_json::to_string_pretty(&value).expect("JSON output"));
        }
        Err(err) => {
            let payload = json!({
                "error": {
                    "kind": err.kind(),
                    "message": err.to_string(),
                    "exit_code": err.exit_code(),
                }
            });
            eprintln!("{payload}");
            std::process::exit(err.exit_code());
        }
    }
}

fn dispatch(command: Command) -> Result<Value> {
    match command {
        Command::Basis(args) => cmd_basis(args),
        Command::Ground(args) => cmd_ground(args),
        Command::CriticalPoint(args) => cmd_critical_point(args),
        Command::Measure(args) => cmd_measure(args),
        Command::Prob(args) => cmd_prob(args),
        Command::Correlate(args) => cmd_correlate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::SweepTheta(args) => cmd_sweep_theta(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Run(args) => cmd_run(args),
    }
}

fn to_value(v: impl serde::Serialize) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::InvalidInput(format!("report encoding: {e}")))
}

/// Count blockade-satisfying configurations by direct enumeration.
fn brute_force_dimension(geometry: ChainGeometry) -> Result<u64> {
    if geometry.length > 20 {
        return Err(Error::Capacity(
            "brute-force dimension checks are capped at 20 sites".into(),
        ));
    }
    let mut count = 0u64;
    for config in 0u64..(1 << geometry.length) {
        let ok = match geometry.constraint {
            ConstraintMode::Penalty => true,
            ConstraintMode::HardBlockade => geometry.blockade_satisfied(config),
        };
        count += u64::from(ok);
    }
    Ok(count)
}

fn cmd_basis(args: BasisArgs) -> Result<Value> {
    let mut rows = Vec::new();
    for &length in &args.lengths {
        let geometry = ChainGeometry::new(length, args.boundary, args.constraint)?;
        let dimension = geometry.dimension();
        let mut row = json!({
            "length": length,
            "boundary": args.boundary,
            "constraint": args.constraint,
            "dimension": dimension.to_string(),
        });
        if args.check {
            let counted = brute_force_dimension(geometry)?;
            if u128::from(counted) != dimension {
                return Err(Error::InvalidInput(format!(
                    "dimension mismatch at L={length}: closed form {dimension}, enumeration {counted}"
                )));
            }
            row["verified"] = json!(true);
        }
        rows.push(row);
    }
    Ok(json!({ "dimensions": rows }))
}

fn cmd_ground(args: GroundArgs) -> Result<Value> {
    // Start from the config when given, then let flags win field by field.
    let (mut model, mut geometry, mut solver, mut seed) = match &args.config {
        Some(path) => {
            let config = RunConfig::from_toml(&std::fs::read_to_string(path)?)?;
            (
                config.model,
                Some(config.geometry),
                config.solver,
                config.seed,
            )
        }
        None => (
            ModelSection {
                preset: None,
                omega: None,
                delta: None,
                v1: None,
                v2: None,
                edge_detuning_shift: None,
            },
            None,
            SolverSection::default(),
            0,
        ),
    };
    if let Some(section) = args.model.section() {
        model = section;
    }
    if let Some(length) = args.length {
        let boundary = args
            .boundary
            .or(geometry.as_ref().map(|g| g.boundary))
            .unwrap_or(Boundary::Periodic);
        let constraint = args
            .constraint
            .or(geometry.as_ref().map(|g| g.constraint))
            .unwrap_or(ConstraintMode::HardBlockade);
        geometry = Some(GeometrySection {
            length,
            boundary,
            constraint,
        });
    } else if let Some(g) = geometry.as_mut() {
        if let Some(b) = args.boundary {
            g.boundary = b;
        }
        if let Some(c) = args.constraint {
            g.constraint = c;
        }
    }
    let geometry = geometry.ok_or_else(|| {
        Error::InvalidInput("ground: give --length (and friends) or --config".into())
    })?;
    if let Some(b) = args.backend {
        solver.backend = b;
    }
    if let Some(chi) = args.chi_max {
        solver.chi_max = Some(chi);
    }
    if let Some(sweeps) = args.max_sweeps {
        solver.max_sweeps = Some(sweeps);
    }
    if let Some(s) = args.seed {
        seed = s;
    }

    let params = model.resolve()?;
    let (state, report) = solve_ground(&params, geometry.resolve()?, &solver, seed)?;
    save_wavefunction(&state, &args.out)?;
    let mut value = to_value(report)?;
    value["checkpoint"] = json!(args.out.display().to_string());
    Ok(value)
}

fn write_family(dir: &Option<PathBuf>, family: &CurveFamily, crossing: &Value) -> Result<()> {
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("curves.csv"), family.csv())?;
        std::fs::write(
            dir.join("crossing.json"),
            serde_json::to_string_pretty(crossing)
                .map_err(|e| Error::InvalidInput(format!("report encoding: {e}")))?
                + "\n",
        )?;
    }
    Ok(())
}

fn cmd_critical_point(args: CriticalPointArgs) -> Result<Value> {
    let template = args.model.template()?;
    let grid = linspace(args.from, args.to, args.steps)?;
    let family = scan_detuning(&args.sizes, &grid, &template)?;
    let crossing = find_curve_crossing(&family)?;
    let value = json!({
        "delta_c": crossing.abscissa,
        "sizes": crossing.sizes,
        "spread": crossing.spread,
        "pair_crossings": crossing.pair_crossings,
        "grid": { "from": args.from, "to": args.to, "steps": args.steps },
    });
    write_family(&args.out_dir, &family, &value)?;
    Ok(value)
}

fn linspace(from: f64, to: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(Error::InvalidInput("a grid needs at least 2 steps".into()));
    }
    if !(from < to) {
        return Err(Error::InvalidInput(format!(
            "empty grid: from {from} must lie below to {to}"
        )));
    }
    let h = (to - from) / (steps - 1) as f64;
    Ok((0..steps).map(|k| from + h * k as f64).collect())
}

fn cmd_measure(args: MeasureArgs) -> Result<Value> {
    let kind = match args.kind.as_str() {
        "projective" => MeasurementKind::Projective,
        "weak" => MeasurementKind::Weak,
        "generalized" => MeasurementKind::Generalized,
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown measurement kind {other:?} (projective | weak | generalized)"
            )))
        }
    };
    let section = MeasurementSection {
        kind,
        pattern: args.pattern,
        beta: args.beta,
        theta_over_pi: args.theta_over_pi,
    };
    let state = load_wavefunction(&args.state)?;
    let (measured, _, report) = apply_measurement(&state, &section)?;
    save_wavefunction(&measured, &args.out)?;
    let mut value = to_value(report)?;
    value["checkpoint"] = json!(args.out.display().to_string());
    Ok(value)
}

fn cmd_prob(args: ProbArgs) -> Result<Value> {
    if let Some(path) = &args.state {
        if !args.sizes.is_empty() {
            return Err(Error::InvalidInput(
                "prob: --state and --sizes are mutually exclusive".into(),
            ));
        }
        let state = load_wavefunction(path)?;
        return to_value(probability_report(&state, &args.pattern)?);
    }

    if args.sizes.len() < 2 {
        return Err(Error::InvalidInput(
            "prob: give --state for one report or at least two --sizes to scan".into(),
        ));
    }
    let template = args.model.template()?;
    let mut points: Vec<(usize, f64)> = Vec::new();
    for &length in &args.sizes {
        let geometry =
            ChainGeometry::new(length, args.boundary, ConstraintMode::HardBlockade)?;
        let basis = Arc::new(BlockadedBasis::enumerate(geometry)?);
        let h = rydcrit::hamiltonian::build_hamiltonian(&basis, &template)?;
        let (state, _) = rydcrit::solve::auto_ground_state(
            &h,
            &basis,
            &rydcrit::solve::LanczosOptions::default(),
        )?;
        let state = Wavefunction::Dense(state);
        let sector = expand_pattern(&parse_pattern(&args.pattern)?, geometry)?;
        let p = rydcrit::measure::sector_probability(&state, &sector)?;
        points.push((length, p));
    }

    if let Some(path) = &args.out {
        let mut csv = String::from("length,probability\n");
        for &(l, p) in &points {
            csv.push_str(&format!("{l},{p:.17e}\n"));
        }
        std::fs::write(path, csv)?;
    }

    let mut value = json!({
        "pattern": args.pattern,
        "points": points
            .iter()
            .map(|&(l, p)| json!({ "length": l, "probability": p }))
            .collect::<Vec<_>>(),
    });
    if points.len() >= 4 {
        let decay = fit_probability_decay(&points)?;
        value["decay_rate"] = json!(decay.fit.exponent);
        value["decay_stderr"] = json!(decay.fit.stderr);
        if let Some(at) = args.extrapolate {
            value["extrapolated"] = json!({ "length": at, "probability": decay.predict(at) });
        }
    } else if args.extrapolate.is_some() {
        return Err(Error::FitFailure(
            "extrapolation needs a decay fit, which needs at least 4 sizes".into(),
        ));
    }
    Ok(value)
}

fn cmd_correlate(args: CorrelateArgs) -> Result<Value> {
    let state = load_wavefunction(&args.state)?;
    let sector = match &args.pattern {
        Some(text) => Some(expand_pattern(&parse_pattern(text)?, state.geometry())?),
        None => None,
    };
    let operators = resolve_operators(args.operator, state.geometry(), sector.as_ref())?;
    let mut series = if args.profile {
        one_point_profile(&state, &operators)?
    } else {
        connected_correlator(&state, &operators, &all_pairs(operators.len()))?
    };
    series.sector = args.pattern.clone();
    save_series(&series, &args.out)?;
    Ok(json!({
        "label": series.label,
        "points": series.points.len(),
        "profile": args.profile,
        "csv": args.out.display().to_string(),
    }))
}

fn cmd_fit(args: FitArgs) -> Result<Value> {
    let series = load_series(&args.series)?;
    let analysis = AnalysisSection {
        // The operator tag is cosmetic here; the series carries its label.
        operator: OperatorKind::Sigma,
        fit: args.form,
        window: args.window,
        two_cell: args.two_cell,
    };
    let fit = run_fit(&series, &analysis)?;
    let mut value = to_value(&fit)?;
    value["label"] = json!(series.label);
    value["form"] = to_value(args.form)?;
    if let Some(path) = &args.out {
        std::fs::write(
            path,
            serde_json::to_string_pretty(&value)
                .map_err(|e| Error::InvalidInput(format!("report encoding: {e}")))?
                + "\n",
        )?;
    }
    Ok(value)
}

fn cmd_sweep_theta(args: SweepThetaArgs) -> Result<Value> {
    let template = args.model.template()?;
    let mut states = Vec::with_capacity(args.sizes.len());
    for &length in &args.sizes {
        let geometry =
            ChainGeometry::new(length, Boundary::Periodic, ConstraintMode::HardBlockade)?;
        let basis = Arc::new(BlockadedBasis::enumerate(geometry)?);
        let h = rydcrit::hamiltonian::build_hamiltonian(&basis, &template)?;
        let (state, _) = rydcrit::solve::auto_ground_state(
            &h,
            &basis,
            &rydcrit::solve::LanczosOptions::default(),
        )?;
        states.push(Wavefunction::Dense(state));
    }
    let grid: Vec<f64> = linspace(args.from, args.to, args.steps)?
        .into_iter()
        .map(|t| t * std::f64::consts::PI)
        .collect();
    let (family, crossing) = sweep_theta(&states, args.beta, &grid)?;
    let value = json!({
        "theta_c_over_pi": crossing.abscissa / std::f64::consts::PI,
        "spread_over_pi": crossing.spread / std::f64::consts::PI,
        "sizes": crossing.sizes,
        "beta": args.beta,
        "pair_crossings_over_pi": crossing
            .pair_crossings
            .iter()
            .map(|&(a, b, x)| json!([a, b, x / std::f64::consts::PI]))
            .collect::<Vec<_>>(),
    });
    write_family(&args.out_dir, &family, &value)?;
    Ok(value)
}

fn cmd_sample(args: SampleArgs) -> Result<Value> {
    let state = load_wavefunction(&args.state)?;
    let shots = sample_shots(&state, args.shots, args.seed)?;
    let written = match &args.pattern {
        Some(text) => {
            let sector = expand_pattern(&parse_pattern(text)?, state.geometry())?;
            filter_sector(&shots, &sector)?
        }
        None => shots,
    };
    save_shots(&written, &args.out)?;
    Ok(json!({
        "drawn": args.shots,
        "written": written.len(),
        "seed": args.seed,
        "state_id": written.source(),
        "sector": written.sector(),
        "file": args.out.display().to_string(),
    }))
}

fn cmd_estimate(args: EstimateArgs) -> Result<Value> {
    let shots = load_shots(&args.shots)?;
    let sector = expand_pattern(&parse_pattern(&args.pattern)?, shots.geometry())?;
    let kept = match shots.sector() {
        // Already post-selected: require the same pattern rather than
        // silently re-filtering data from a different sector.
        Some(existing) => {
            if existing != args.pattern {
                return Err(Error::InvalidInput(format!(
                    "shot file was post-selected on {existing:?}, not {:?}",
                    args.pattern
                )));
            }
            shots
        }
        None => filter_sector(&shots, &sector)?,
    };
    let operators = resolve_operators(args.operator, kept.geometry(), Some(&sector))?;
    let series = estimate_connected(&kept, &operators, &all_pairs(operators.len()), args.floor)?;
    save_series(&series, &args.out)?;
    Ok(json!({
        "label": series.label,
        "points": series.points.len(),
        "retained": kept.len(),
        "csv": args.out.display().to_string(),
    }))
}

fn cmd_run(args: RunArgs) -> Result<Value> {
    let mut config = RunConfig::from_toml(&std::fs::read_to_string(&args.config)?)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(dir) = args.output_dir {
        config.output_dir = dir;
    }
    if let Some(length) = args.length {
        config.geometry.length = length;
    }
    if let Some(pattern) = args.pattern {
        match config.measurement.as_mut() {
            Some(m) => m.pattern = Some(pattern),
            None => {
                return Err(Error::InvalidInput(
                    "--pattern override needs a [measurement] section in the config".into(),
                ))
            }
        }
    }
    config.validate()?;
    let manifest = run_pipeline(&config)?;
    to_value(manifest)
}
