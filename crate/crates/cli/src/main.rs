//! `ccphase`: batch front end for synthesis, calibration, benchmarking,
//! decomposition and QAOA sweeps.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 failed numerical check.

use std::f64::consts::PI;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use ccphase_core::backend::Backend;
use ccphase_core::benchmarking::{benchmark_decomposition, cycle_benchmark_gate, qpt, CBConfig};
use ccphase_core::calibration::{calibrate, corrected_fidelity, CalibrationSettings};
use ccphase_core::decompose::{
    decompose_ccphase, estimate_fidelity, lower_to_native, toffoli_from_ccphase, GateNoiseModel, DEFAULT_F1Q,
    DEFAULT_F2Q,
};
use ccphase_core::device::{total_ccphase_time, DeviceModel};
use ccphase_core::linalg::{ComputationalEmbedding, Superoperator};
use ccphase_core::noise::{ModulationDephasingPolicy, NoiseOptions};
use ccphase_core::pulse::PulseImperfection;
use ccphase_core::qaoa::{
    compare_landscapes, grid_configs, landscape, random_configs, BackendKind, Clause, Landscape, QaoaBackend,
    SatInstance,
};
use ccphase_core::synth::{
    chain_validity, combo_allowed, combo_label, format_term, parse_combo, synthesize, synthesize_on, target_unitary,
    truth_table, unchecked_sequence, verify, Combo, ALL_COMBOS,
};
use ccphase_core::Error;

#[derive(Parser, Debug)]
#[command(name = "ccphase", version, about = "Doubly-controlled phase gates from qutrit flux pulses")]
struct Cli {
    /// Device model JSON; the built-in three-qubit model when absent.
    #[arg(long, global = true, env = "CCPHASE_DEVICE")]
    device: Option<PathBuf>,
    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Scale T2 of flux-modulated qubits during their pulses (0.5 when given without a value).
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "0.5", value_name = "FACTOR")]
    modulation_dephasing: Option<f64>,
    /// Only decohere the qubits a pulse acts on.
    #[arg(long, global = true)]
    no_idle_decoherence: bool,
    /// Primary output file (stdout when absent); a `.log` sidecar is written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a pulse sequence and verify it.
    Synth(SynthArgs),
    /// Basis-state trajectories through the four pulses, as CSV.
    TruthTable(TruthTableArgs),
    /// Calibrate correction phases against injected imperfections.
    Calibrate(CalibrateArgs),
    /// Cycle benchmarking or process tomography.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Reference decomposition into two-qubit gates.
    Decompose(DecomposeArgs),
    /// QAOA landscapes for MAX-3-SAT.
    #[command(subcommand)]
    Qaoa(QaoaCommand),
    /// Device model inspection.
    #[command(subcommand)]
    Device(DeviceCommand),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, allow_hyphen_values = true)]
    theta: f64,
    /// Edge types, e.g. `20,02`; taken from the device chain when absent.
    #[arg(long)]
    combo: Option<String>,
    /// Device chain, e.g. `10,11,12`.
    #[arg(long, value_delimiter = ',')]
    chain: Option<Vec<u32>>,
}

#[derive(Args, Debug)]
struct TruthTableArgs {
    /// One combo, e.g. `02,20`; all four when absent.
    #[arg(long)]
    combo: Option<String>,
    #[arg(long, default_value_t = PI / 2.0, allow_hyphen_values = true)]
    theta: f64,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[arg(long, default_value_t = PI, allow_hyphen_values = true)]
    theta: f64,
    /// Injected per-site phases on level 1, radians (`C,D,E` sites).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.0, 0.0, 0.0])]
    stray: Vec<f64>,
    /// Injected conditional phase error on `|11x>`.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    conditional: f64,
    #[arg(long, default_value_t = 8192)]
    shots: u64,
    #[arg(long, default_value_t = 2)]
    passes: usize,
    #[arg(long, default_value_t = 16)]
    points: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NoiseKind {
    Ideal,
    Device,
    Depolarizing,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GateKind {
    Native,
    Decomposition,
}

#[derive(Args, Debug)]
struct ChannelArgs {
    #[arg(long, default_value_t = PI, allow_hyphen_values = true)]
    theta: f64,
    #[arg(long, value_enum, default_value_t = NoiseKind::Device)]
    noise: NoiseKind,
    /// Depolarizing strength for `--noise depolarizing`.
    #[arg(long, default_value_t = 0.05)]
    p: f64,
    #[arg(long, value_enum, default_value_t = GateKind::Native)]
    gate: GateKind,
}

#[derive(Subcommand, Debug)]
enum BenchCommand {
    /// Cycle benchmarking; JSON report, optional decay CSV.
    Cb {
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [2usize, 4, 8])]
        depths: Vec<usize>,
        #[arg(long, default_value_t = 30)]
        randomizations: usize,
        /// Shots per circuit; 0 uses exact expectations.
        #[arg(long, default_value_t = 1000)]
        shots: u64,
        /// Comma-separated Pauli labels; all 64 when absent.
        #[arg(long, value_delimiter = ',')]
        terms: Option<Vec<String>>,
        /// Benchmark G(theta) G(2 pi - theta).
        #[arg(long)]
        composite: bool,
        #[arg(long)]
        decay_csv: Option<PathBuf>,
    },
    /// Process tomography; JSON report.
    Qpt {
        #[command(flatten)]
        channel: ChannelArgs,
        /// Shots per setting; 0 uses exact probabilities.
        #[arg(long, default_value_t = 10_000)]
        shots: u64,
    },
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    #[arg(long, default_value_t = PI, allow_hyphen_values = true)]
    theta: f64,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    level: u8,
    /// Emit the Toffoli built from the native gate instead.
    #[arg(long)]
    toffoli: bool,
    #[arg(long, default_value_t = DEFAULT_F1Q)]
    f1q: f64,
    #[arg(long, default_value_t = DEFAULT_F2Q)]
    f2q: f64,
}

#[derive(Subcommand, Debug)]
enum QaoaCommand {
    /// Sweep (beta, gamma); CSV columns beta, gamma, expectation, shots.
    Landscape {
        /// Clause such as `x0|~x1|x2`; repeatable.
        #[arg(long, default_values_t = ["x0|x1|x2".to_string()])]
        clause: Vec<String>,
        #[arg(long, default_value = "ideal")]
        backend: String,
        /// Grid points per axis over [-pi, pi].
        #[arg(long, default_value_t = 101)]
        grid: usize,
        /// Random configurations instead of a grid.
        #[arg(long)]
        random: Option<usize>,
        /// Shots per configuration; 0 gives exact expectations.
        #[arg(long, default_value_t = 2500)]
        shots: u64,
        /// Run native/compiled separators without decoherence.
        #[arg(long)]
        noiseless: bool,
    },
    /// Pearson correlation and minima of two landscape CSVs.
    Compare { a: PathBuf, b: PathBuf },
}

#[derive(Subcommand, Debug)]
enum DeviceCommand {
    /// Print the device parameters.
    Show {
        #[arg(long)]
        json: bool,
    },
}

/// Process outcome mapped to an exit code.
#[derive(Debug)]
enum Failure {
    Validation(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

struct Ctx {
    model: DeviceModel,
    options: NoiseOptions,
    seed: u64,
    out: Option<PathBuf>,
}

impl Ctx {
    fn emit(&self, text: &str) -> CmdResult {
        match &self.out {
            Some(p) => fs::write(p, text)?,
            None => io::stdout().write_all(text.as_bytes())?,
        }
        Ok(())
    }

    fn emit_json(&self, value: &impl serde::Serialize) -> CmdResult {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.emit(&s)
    }

    fn chain(&self) -> Result<[u32; 3], Failure> {
        Ok(self.model.default_chain()?)
    }
}

fn shots_opt(n: u64) -> Option<u64> {
    (n > 0).then_some(n)
}

fn run(cli: Cli) -> CmdResult {
    let model = match &cli.device {
        Some(p) => DeviceModel::load(p)?,
        None => DeviceModel::default_model(),
    };
    let modulation = cli.modulation_dephasing.map(ModulationDephasingPolicy::new).transpose()?;
    let options = NoiseOptions { modulation, idle_decoherence: !cli.no_idle_decoherence };
    let ctx = Ctx { model, options, seed: cli.seed, out: cli.out.clone() };
    match cli.command {
        Command::Synth(a) => cmd_synth(&ctx, a),
        Command::TruthTable(a) => cmd_truth_table(&ctx, a),
        Command::Calibrate(a) => cmd_calibrate(&ctx, a),
        Command::Bench(b) => cmd_bench(&ctx, b),
        Command::Decompose(a) => cmd_decompose(&ctx, a),
        Command::Qaoa(q) => cmd_qaoa(&ctx, q),
        Command::Device(DeviceCommand::Show { json }) => cmd_device_show(&ctx, json),
    }
}

fn cmd_synth(ctx: &Ctx, a: SynthArgs) -> CmdResult {
    let seq = match (&a.combo, &a.chain) {
        (Some(c), _) => synthesize(a.theta, parse_combo(c)?)?,
        (None, Some(chain)) => synthesize_on(a.theta, &ctx.model, chain)?,
        (None, None) => synthesize_on(a.theta, &ctx.model, &ctx.chain()?)?,
    };
    let v = verify(&seq)?;
    if v.max_deviation > 1e-9 || v.leakage > 1e-10 {
        return Err(Failure::Numerical(format!(
            "synthesis residual {:.3e} / leakage {:.3e} above tolerance",
            v.max_deviation, v.leakage
        )));
    }
    let phases: Vec<f64> = seq.pulses.iter().map(|p| p.flux_phase).collect();
    ctx.emit_json(&json!({ "sequence": seq, "flux_phases": phases, "verification": v }))
}

fn cmd_truth_table(ctx: &Ctx, a: TruthTableArgs) -> CmdResult {
    let combos: Vec<Combo> = match &a.combo {
        Some(c) => vec![parse_combo(c)?],
        None => ALL_COMBOS.to_vec(),
    };
    let inputs = [4usize, 12, 13]; // |011>, |110>, |111>
    let mut out = String::from("combo,status,input,t1,t2,t3,t4,flag\n");
    for combo in combos {
        let rule = combo_allowed(combo);
        let status = if rule.allowed { "ALLOWED" } else { "FORBIDDEN" };
        if !rule.allowed {
            eprintln!("{}: FORBIDDEN ({})", combo_label(combo), rule.diagnosis.as_deref().unwrap_or_default());
        }
        let seq = unchecked_sequence(a.theta, combo);
        for t in truth_table(&seq, &inputs)? {
            let cells: Vec<String> = t.checkpoints.iter().map(|&(s, z)| format_term(s, z)).collect();
            let flag = if t.is_erroneous(a.theta, 1e-9) { "ERROR" } else { "" };
            out.push_str(&format!(
                "\"{},{}\",{status},{},{},{flag}\n",
                combo.0.short(),
                combo.1.short(),
                format_term(t.input, ccphase_core::linalg::c64(1.0, 0.0)),
                cells.join(",")
            ));
        }
    }
    ctx.emit(&out)
}

fn cmd_calibrate(ctx: &Ctx, a: CalibrateArgs) -> CmdResult {
    let stray: [f64; 3] = a
        .stray
        .as_slice()
        .try_into()
        .map_err(|_| Failure::Validation("--stray takes exactly three phases".into()))?;
    let backend = Backend::with_imperfection(PulseImperfection::single_qubit(stray, a.conditional))?;
    let seq = synthesize_on(a.theta, &ctx.model, &ctx.chain()?)?;
    let settings = CalibrationSettings { shots: shots_opt(a.shots), passes: a.passes, scan_points: a.points, seed: ctx.seed };
    let before = corrected_fidelity(&seq, &backend)?;
    let result = calibrate(&seq, &backend, &settings)?;
    let after = corrected_fidelity(&result.sequence, &backend)?;
    ctx.emit_json(&json!({ "calibration": result, "fidelity_before": before, "fidelity_after": after }))
}

fn native_channel(ctx: &Ctx, noise: NoiseKind, p: f64, theta: f64) -> Result<Superoperator, Failure> {
    let chain = ctx.chain()?;
    let seq = synthesize_on(theta, &ctx.model, &chain)?;
    let emb = ComputationalEmbedding::new(3);
    Ok(match noise {
        NoiseKind::Ideal => Backend::ideal().sequence_circuit(&seq)?.restricted_superoperator(&emb),
        NoiseKind::Device => Backend::noisy(ctx.model.clone(), chain, ctx.options)?
            .sequence_circuit(&seq)?
            .restricted_superoperator(&emb),
        NoiseKind::Depolarizing => {
            Superoperator::from_unitary(&target_unitary(theta)).then(&Superoperator::depolarizing(8, p))
        }
    })
}

fn cmd_bench(ctx: &Ctx, b: BenchCommand) -> CmdResult {
    match b {
        BenchCommand::Cb { channel, depths, randomizations, shots, terms, composite, decay_csv } => {
            let mut config = CBConfig { depths, randomizations, shots: shots_opt(shots), composite, seed: ctx.seed, ..Default::default() };
            if let Some(t) = terms {
                config.pauli_terms = t;
            }
            let report = match channel.gate {
                GateKind::Native => cycle_benchmark_gate(
                    |t| native_channel(ctx, channel.noise, channel.p, t).map_err(failure_to_error),
                    channel.theta,
                    &config,
                )?,
                GateKind::Decomposition => {
                    let noise = match channel.noise {
                        NoiseKind::Device => Some(GateNoiseModel::new(ctx.model.clone(), ctx.chain()?, ctx.options)?),
                        NoiseKind::Ideal => None,
                        NoiseKind::Depolarizing => {
                            return Err(Failure::Validation("depolarizing noise applies to the native gate only".into()))
                        }
                    };
                    benchmark_decomposition(channel.theta, noise.as_ref(), &config)?
                }
            };
            if let Some(path) = decay_csv {
                report.write_decay_csv(fs::File::create(path)?)?;
            }
            ctx.emit_json(&report)
        }
        BenchCommand::Qpt { channel, shots } => {
            let (sup, target) = match channel.gate {
                GateKind::Native => (native_channel(ctx, channel.noise, channel.p, channel.theta)?, target_unitary(channel.theta)),
                GateKind::Decomposition => {
                    let list = lower_to_native(&decompose_ccphase(channel.theta))?;
                    let target = ccphase_core::decompose::ccphase_111(channel.theta);
                    let sup = match channel.noise {
                        NoiseKind::Ideal => Superoperator::from_unitary(&list.unitary()?),
                        NoiseKind::Device => ccphase_core::decompose::decomposition_channel(
                            channel.theta,
                            &GateNoiseModel::new(ctx.model.clone(), ctx.chain()?, ctx.options)?,
                        )?,
                        NoiseKind::Depolarizing => Superoperator::from_unitary(&target).then(&Superoperator::depolarizing(8, channel.p)),
                    };
                    (sup, target)
                }
            };
            let report = qpt(&sup, &target, shots_opt(shots), ctx.seed)?;
            ctx.emit_json(&report)?;
            if report.flagged {
                return Err(Failure::Numerical(format!(
                    "reconstruction residual {:.4} above threshold {:.4}",
                    report.residual, report.residual_threshold
                )));
            }
            Ok(())
        }
    }
}

fn failure_to_error(f: Failure) -> Error {
    match f {
        Failure::Validation(m) => Error::InvalidArgument(m),
        Failure::Numerical(m) => Error::Invariant { constraint: "numerical check".into(), detail: m },
    }
}

fn cmd_decompose(ctx: &Ctx, a: DecomposeArgs) -> CmdResult {
    let list = if a.toffoli {
        toffoli_from_ccphase()
    } else {
        let l1 = decompose_ccphase(a.theta);
        if a.level == 1 {
            l1
        } else {
            lower_to_native(&l1)?
        }
    };
    let counts = list.counts();
    let lowered = if a.level == 2 || a.toffoli { counts } else { lower_to_native(&list)?.counts() };
    let estimate = estimate_fidelity(lowered, a.f1q, a.f2q)?;
    let summary = format!(
        "two_qubit={} one_qubit_nontrivial={} cphase={} cnot={} estimated_fidelity={:.4}\n",
        counts.two_qubit,
        counts.one_qubit_nontrivial,
        list.count("CPHASE"),
        list.count("CNOT"),
        estimate
    );
    if ctx.out.is_some() {
        ctx.emit_json(&list)?;
        print!("{summary}");
    } else {
        ctx.emit_json(&json!({ "gates": list, "counts": counts, "estimated_fidelity": estimate }))?;
        eprint!("{summary}");
    }
    Ok(())
}

fn cmd_qaoa(ctx: &Ctx, q: QaoaCommand) -> CmdResult {
    match q {
        QaoaCommand::Landscape { clause, backend, grid, random, shots, noiseless } => {
            let clauses = clause.iter().map(|c| c.parse::<Clause>()).collect::<Result<Vec<_>, _>>()?;
            let inst = SatInstance::from_clauses(clauses)?;
            let kind: BackendKind = backend.parse()?;
            let qb = if kind == BackendKind::Ideal || noiseless {
                QaoaBackend { kind, noise: None }
            } else {
                QaoaBackend::noisy(kind, ctx.model.clone(), ctx.chain()?, ctx.options)
            };
            let configs = match random {
                Some(n) => random_configs(n, ctx.seed),
                None => grid_configs(grid),
            };
            let l = landscape(&inst, &configs, &qb, shots_opt(shots), ctx.seed)?;
            let mut buf = Vec::new();
            l.write_csv(&mut buf)?;
            ctx.emit(&String::from_utf8_lossy(&buf))?;
            if let Some(m) = l.min_point() {
                eprintln!("min <C> = {:.4} at beta = {:.4}, gamma = {:.4}", m.expectation, m.beta, m.gamma);
            }
            Ok(())
        }
        QaoaCommand::Compare { a, b } => {
            let la = Landscape::read_csv(fs::File::open(&a)?, BackendKind::Ideal)?;
            let lb = Landscape::read_csv(fs::File::open(&b)?, BackendKind::Ideal)?;
            ctx.emit_json(&compare_landscapes(&la, &lb)?)
        }
    }
}

fn cmd_device_show(ctx: &Ctx, as_json: bool) -> CmdResult {
    let m = &ctx.model;
    if as_json {
        let mut s = m.to_json_string()?;
        s.push('\n');
        return ctx.emit(&s);
    }
    let mut out = format!("device {}\n\n", m.name.as_deref().unwrap_or("(unnamed)"));
    out.push_str(
        "qubit  f01 GHz  f12 GHz  T1(1->0) us   T1(2->1) us   T2*(0-1) us   T2*(1-2) us   flux-tunable\n",
    );
    let pm = |v: f64, e: Option<f64>| match e {
        Some(e) => format!("{v} ± {e}"),
        None => format!("{v}"),
    };
    for q in &m.qubits {
        out.push_str(&format!(
            "{:<6} {:<8} {:<8} {:<13} {:<13} {:<13} {:<13} {}\n",
            q.id,
            q.f01_ghz,
            q.f12_ghz,
            pm(q.t1_1_us, q.t1_1_us_err),
            pm(q.t1_2_us, q.t1_2_us_err),
            pm(q.t2_01_us, q.t2_01_us_err),
            pm(q.t2_12_us, q.t2_12_us_err),
            q.flux_tunable
        ));
    }
    out.push_str("\nedge      type    pulse ns  CPHASE ns  CPHASE fidelity\n");
    for e in &m.edges {
        out.push_str(&format!(
            "{:<9} {:<7} {:<9} {:<10} {}\n",
            format!("{}-{}", e.pair.0, e.pair.1),
            e.interaction.to_string(),
            e.pulse_ns,
            e.total_cphase_ns,
            pm(e.cphase_fidelity, e.cphase_fidelity_err)
        ));
    }
    if let Ok(chain) = m.default_chain() {
        let validity = chain_validity(&m.edge_types(), &chain)?;
        out.push_str(&format!(
            "\nchain {:?}: {}, CCPHASE exposure {} ns\n",
            chain,
            if validity.valid { "valid" } else { "forbidden" },
            total_ccphase_time(m, &chain)?
        ));
    }
    ctx.emit(&out)
}

fn write_sidecar(out: &Path, args: &[String], started: u64, code: u8) {
    let finished = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut name = out.as_os_str().to_owned();
    name.push(".log");
    let text = format!("started {started}\nfinished {finished}\nargs {}\nexit {code}\n", args.join(" "));
    if let Err(e) = fs::write(PathBuf::from(name), text) {
        log::warn!("could not write sidecar log: {e}");
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().collect();
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::from(1);
        }
    }
    let out = cli.out.clone();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            1
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical check failed: {m}");
            2
        }
    };
    if let Some(p) = out {
        write_sidecar(&p, &args, started, code);
    }
    ExitCode::from(code)
}
