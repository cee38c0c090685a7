//! Command-line front end.
//!
//! Exit codes: 0 success, 1 semantic failure (not CPTP, equivalence check
//! failed, invalid parameters), 2 I/O or format error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::channel::{
    fmo_initial_state, fmo_trajectory, unvalidated_kraus_set, validate_cptp, ChannelError, FmoParams, KrausSet,
    FMO_DIM, FMO_SITES,
};
use crate::circuit::{
    assemble_simulation_circuit, export_circuit, sidecar_json, ExportFormat, MixMode, SynthesisError,
};
use crate::costmodel::{combined_cost, sweep_group_sizes, to_csv, CostReport};
use crate::dilation::DilationMethod;
use crate::formats::{parse_kraus_json, parse_state_json};
use crate::simulator::{self, verify_equivalence, SimulationError};
use crate::state::DensityMatrix;

pub const EXIT_OK: i32 = 0;
pub const EXIT_SEMANTIC: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "chansynth",
    version,
    about = "Synthesize and verify circuits for Kraus-operator channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check that a Kraus set is trace preserving.
    Validate {
        kraus: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Build the simulation circuit and write it with its matrices and metrics.
    Synth {
        kraus: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Circuit output path.
        #[arg(long)]
        out: PathBuf,
        /// Opaque-matrix sidecar path (default: `<out>.matrices.json`).
        #[arg(long)]
        sidecar: Option<PathBuf>,
        /// Metrics JSON path.
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FormatArg::NativeText)]
        format: FormatArg,
        /// Accept Kraus sets that fail the CPTP check.
        #[arg(long)]
        no_validate: bool,
    },
    /// Simulate the synthesized circuit and compare with the Kraus oracle.
    Simulate {
        kraus: PathBuf,
        /// Input state; random trials are used when omitted.
        state: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 8)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Iterate the FMO exciton-transfer channel and write site populations.
    Fmo {
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = FmoParams::default().dt)]
        dt: f64,
        #[arg(long, default_value_t = FmoParams::default().alpha)]
        alpha: f64,
        #[arg(long, default_value_t = FmoParams::default().beta)]
        beta: f64,
        #[arg(long, default_value_t = FmoParams::default().gamma)]
        gamma: f64,
        /// `superposition`, `ground`, `site<k>` for k in 0..=4, or a state JSON path.
        #[arg(long, default_value = "superposition")]
        init: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytic costs, optionally swept over group sizes.
    Cost {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, value_enum, default_value_t = MethodArg::Sznagy)]
        method: MethodArg,
        #[arg(long, default_value_t = 1)]
        group: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Shared)]
        mode: ModeArg,
        /// Emit one row per group size 1, 2, 4, …, m.
        #[arg(long)]
        sweep_groups: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct PipelineArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Svd)]
    method: MethodArg,
    /// Kraus operators per dilation branch (power of two, at most m).
    #[arg(long, default_value_t = 1)]
    group: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Shared)]
    mode: ModeArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Stinespring,
    Sznagy,
    Svd,
}

impl From<MethodArg> for DilationMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Stinespring => Self::Stinespring,
            MethodArg::Sznagy => Self::SzNagy,
            MethodArg::Svd => Self::Svd,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Shared,
    Fanout,
}

impl From<ModeArg> for MixMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Shared => Self::Shared,
            ModeArg::Fanout => Self::Fanout,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    NativeText,
    QasmElementary,
}

#[derive(Debug)]
enum CliError {
    Io(String),
    Semantic(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            Self::Io(_) => EXIT_IO,
            Self::Semantic(_) => EXIT_SEMANTIC,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Io(m) | Self::Semantic(m) => m,
        }
    }
}

impl From<ChannelError> for CliError {
    fn from(e: ChannelError) -> Self {
        match e {
            ChannelError::DimensionMismatch(_) | ChannelError::NotPowerOfTwo(_) | ChannelError::Empty => {
                Self::Io(e.to_string())
            }
            _ => Self::Semantic(e.to_string()),
        }
    }
}

impl From<SynthesisError> for CliError {
    fn from(e: SynthesisError) -> Self {
        match e {
            SynthesisError::Channel(c) => c.into(),
            other => Self::Semantic(other.to_string()),
        }
    }
}

impl From<SimulationError> for CliError {
    fn from(e: SimulationError) -> Self {
        match e {
            SimulationError::DimensionMismatch(_) => Self::Io(e.to_string()),
            SimulationError::Synthesis(s) => s.into(),
            SimulationError::Channel(c) => c.into(),
            other => Self::Semantic(other.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_operators(path: &Path) -> Result<Vec<crate::linalg::CMatrix>, CliError> {
    parse_kraus_json(&read(path)?).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_kraus(path: &Path, tol: f64) -> Result<KrausSet, CliError> {
    Ok(validate_cptp(load_operators(path)?, tol)?)
}

fn load_state(path: &Path) -> Result<DensityMatrix, CliError> {
    parse_state_json(&read(path)?).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct ValidateReport {
    valid: bool,
    deviation: f64,
    tol: f64,
    m: usize,
    d: usize,
}

#[derive(Serialize)]
struct Metrics {
    p_success: f64,
    expected_shots: f64,
    measured_depth: u64,
    measured_cnot: u64,
    qubits: usize,
    branches: usize,
    active_branches: usize,
    stinespring_dominates: bool,
    model: CostReport,
}

#[derive(Serialize)]
struct SimulateReport {
    method: DilationMethod,
    group_size: usize,
    mode: MixMode,
    trials: usize,
    worst_residual: f64,
    measured_success_probability: f64,
    expected_success_probability: f64,
    tol: f64,
    pass: bool,
}

fn cmd_validate(kraus: &Path, tol: f64, out: &mut dyn Write) -> Result<i32, CliError> {
    let ops = load_operators(kraus)?;
    let k = unvalidated_kraus_set(ops)?;
    let valid = k.deviation() <= tol;
    let report = ValidateReport {
        valid,
        deviation: k.deviation(),
        tol,
        m: k.len(),
        d: k.dim(),
    };
    emit(out, &to_json(&report))?;
    Ok(if valid { EXIT_OK } else { EXIT_SEMANTIC })
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    kraus: &Path,
    p: &PipelineArgs,
    out_path: &Path,
    sidecar: Option<&Path>,
    metrics: Option<&Path>,
    format: FormatArg,
    no_validate: bool,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let k = if no_validate {
        unvalidated_kraus_set(load_operators(kraus)?)?
    } else {
        load_kraus(kraus, crate::channel::DEFAULT_CPTP_TOL)?
    };
    let method = DilationMethod::from(p.method);
    let mode = MixMode::from(p.mode);
    let synth = assemble_simulation_circuit(&k, method, p.group, mode)?;
    let fmt = match format {
        FormatArg::NativeText => ExportFormat::NativeText,
        FormatArg::QasmElementary => ExportFormat::QasmElementary,
    };
    let text = export_circuit(&synth.circuit, fmt).map_err(|e| CliError::Semantic(e.to_string()))?;
    write(out_path, &text)?;
    let sidecar_path = sidecar.map(Path::to_path_buf).unwrap_or_else(|| {
        let mut s = out_path.as_os_str().to_owned();
        s.push(".matrices.json");
        PathBuf::from(s)
    });
    write(&sidecar_path, &sidecar_json(&synth.circuit))?;

    let model = combined_cost(method, k.num_qubits(), k.len(), synth.group_size, mode);
    let m = Metrics {
        p_success: synth.expected_success_probability,
        expected_shots: 1.0 / synth.expected_success_probability,
        measured_depth: synth.circuit.depth(),
        measured_cnot: synth.circuit.cnot_count(),
        qubits: synth.circuit.num_qubits(),
        branches: synth.branches,
        active_branches: synth.active_branches,
        stinespring_dominates: synth.stinespring_dominates,
        model,
    };
    let json = to_json(&m);
    match metrics {
        Some(path) => write(path, &json)?,
        None => emit(out, &json)?,
    }
    Ok(EXIT_OK)
}

fn cmd_simulate(
    kraus: &Path,
    state: Option<&Path>,
    p: &PipelineArgs,
    tol: f64,
    trials: usize,
    seed: u64,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let k = load_kraus(kraus, crate::channel::DEFAULT_CPTP_TOL)?;
    let method = DilationMethod::from(p.method);
    let mode = MixMode::from(p.mode);
    let report = match state {
        Some(path) => {
            let rho = load_state(path)?;
            if rho.dim() != k.dim() {
                return Err(CliError::Io(format!(
                    "state has dimension {}, channel acts on dimension {}",
                    rho.dim(),
                    k.dim()
                )));
            }
            let synth = assemble_simulation_circuit(&k, method, p.group, mode)?;
            let res = simulator::run(&synth.circuit, &rho)?;
            let oracle = crate::channel::apply_channel(&k, &rho)?;
            let residual = res.rho.matrix().max_abs_diff(oracle.matrix());
            SimulateReport {
                method,
                group_size: synth.group_size,
                mode,
                trials: 1,
                worst_residual: residual,
                measured_success_probability: res.success_probability,
                expected_success_probability: synth.expected_success_probability,
                tol,
                pass: residual <= tol,
            }
        }
        None => match verify_equivalence(&k, method, p.group, mode, trials, tol, seed) {
            Ok(r) => SimulateReport {
                method,
                group_size: r.group_size,
                mode,
                trials,
                worst_residual: r.worst_residual,
                measured_success_probability: r.measured_success_probability,
                expected_success_probability: r.expected_success_probability,
                tol,
                pass: true,
            },
            Err(SimulationError::EquivalenceFailure { seed, residual, .. }) => {
                return Err(CliError::Semantic(format!(
                    "residual {residual:.3e} exceeds {tol:.1e} on trial seed {seed}"
                )))
            }
            Err(e) => return Err(e.into()),
        },
    };
    emit(out, &to_json(&report))?;
    Ok(if report.pass { EXIT_OK } else { EXIT_SEMANTIC })
}

fn fmo_init(init: &str) -> Result<DensityMatrix, CliError> {
    match init {
        "superposition" => Ok(fmo_initial_state()),
        "ground" => Ok(DensityMatrix::basis(3, 0)),
        s if s.starts_with("site") && s[4..].parse::<usize>().is_ok() => {
            let site: usize = s[4..].parse().expect("checked");
            if site >= FMO_SITES {
                return Err(CliError::Semantic(format!("site {site} outside 0..{FMO_SITES}")));
            }
            Ok(DensityMatrix::basis(3, site))
        }
        path => {
            let rho = load_state(Path::new(path))?;
            if rho.dim() != FMO_DIM {
                return Err(CliError::Io(format!(
                    "FMO state must be 3 qubits, got {}",
                    rho.num_qubits()
                )));
            }
            Ok(rho)
        }
    }
}

fn cmd_fmo(
    p: FmoParams,
    steps: usize,
    init: &str,
    out_path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let rho0 = fmo_init(init)?;
    let traj = fmo_trajectory(&p, &rho0, steps)?;
    let mut csv = String::from("step,time_fs,p_site0,p_site1,p_site2,p_site3,p_site4,trace\n");
    for pt in &traj {
        let _ = write!(csv, "{},{:.16e}", pt.step, pt.time_fs);
        for pop in pt.populations {
            let _ = write!(csv, ",{pop:.16e}");
        }
        let _ = writeln!(csv, ",{:.16e}", pt.trace);
    }
    match out_path {
        Some(path) => write(path, &csv)?,
        None => emit(out, &csv)?,
    }
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn cmd_cost(
    n: usize,
    m: usize,
    method: DilationMethod,
    group: usize,
    mode: MixMode,
    sweep: bool,
    out_path: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    if m == 0 {
        return Err(CliError::Semantic("m must be at least 1".into()));
    }
    let padded = m.next_power_of_two();
    if padded != m {
        let _ = writeln!(
            err,
            "warning: m = {m} is not a power of two; padded to {padded} with zero operators"
        );
    }
    let rows = if sweep {
        sweep_group_sizes(method, n, padded, mode).rows
    } else {
        if !crate::linalg::is_power_of_two(group) || group > padded {
            return Err(CliError::Semantic(format!(
                "invalid group size {group} for {padded} operators (must be a power of two in 1..=m)"
            )));
        }
        vec![combined_cost(method, n, padded, group, mode)]
    };
    let csv = to_csv(&rows);
    match out_path {
        Some(path) => write(path, &csv)?,
        None => emit(out, &csv)?,
    }
    Ok(EXIT_OK)
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    match cli.command {
        Command::Validate { kraus, tol } => cmd_validate(&kraus, tol, out),
        Command::Synth {
            kraus,
            pipeline,
            out: out_path,
            sidecar,
            metrics,
            format,
            no_validate,
        } => cmd_synth(
            &kraus,
            &pipeline,
            &out_path,
            sidecar.as_deref(),
            metrics.as_deref(),
            format,
            no_validate,
            out,
        ),
        Command::Simulate {
            kraus,
            state,
            pipeline,
            tol,
            trials,
            seed,
        } => cmd_simulate(&kraus, state.as_deref(), &pipeline, tol, trials, seed, out),
        Command::Fmo {
            steps,
            dt,
            alpha,
            beta,
            gamma,
            init,
            out: out_path,
        } => cmd_fmo(
            FmoParams { alpha, beta, gamma, dt },
            steps,
            &init,
            out_path.as_deref(),
            out,
        ),
        Command::Cost {
            n,
            m,
            method,
            group,
            mode,
            sweep_groups,
            out: out_path,
        } => cmd_cost(
            n,
            m,
            method.into(),
            group,
            mode.into(),
            sweep_groups,
            out_path.as_deref(),
            out,
            err,
        ),
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_IO } else { EXIT_OK };
            let _ = write!(err, "{}", e.render());
            if !e.use_stderr() {
                let _ = write!(out, "{}", e.render());
            }
            return code;
        }
    };
    match dispatch(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.code()
        }
    }
}
