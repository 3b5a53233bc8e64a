use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use spinctrl::pulse::bundled_library;
use spinctrl::Waveform;

mod config;
mod run;

use config::Config;
use run::{Failure, EXIT_NUMERICAL, EXIT_SCHEMA, EXIT_USAGE};

#[derive(Parser)]
#[command(name = "spinctrl", version, about = "Robust pulse synthesis and crosstalk experiments for exchange-coupled spin qubits")]
struct Cli {
    /// Worker threads (falls back to SPINCTRL_THREADS, then all cores).
    #[arg(long, global = true, env = "SPINCTRL_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if absent.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overwrite existing result files.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Optimize a robust pulse.
    Synthesize(RunArgs),
    /// Noiseless infidelity against the exchange coupling.
    SweepCoupling(RunArgs),
    /// Error distance against peak amplitude at fixed area.
    SweepAmplitude(RunArgs),
    /// Infidelity under 1/f qubit-frequency noise.
    #[command(name = "noise-1f")]
    Noise1f(RunArgs),
    /// Parallel single-qubit gates on a lattice.
    Multiqubit(RunArgs),
    /// Conditional-phase gate from the always-on coupling.
    ZzGate(RunArgs),
    /// Entanglement entropy of random single-qubit circuits.
    Entropy(RunArgs),
    /// Inspect the bundled pulse library.
    Library {
        #[command(subcommand)]
        action: LibraryCmd,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
}

#[derive(Subcommand)]
enum LibraryCmd {
    /// One line per entry.
    List,
    /// Full coefficients of one entry (index from `list`).
    Show { index: usize },
}

fn read_config(path: &Path) -> Result<(Vec<u8>, Config), Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure { code: EXIT_SCHEMA, message: format!("cannot read {}: {e}", path.display()) })?;
    let text = String::from_utf8_lossy(&bytes);
    let base = path.parent().unwrap_or(Path::new("."));
    let cfg = config::parse(&text, base).map_err(|v| Failure {
        code: EXIT_SCHEMA,
        message: v.iter().map(|x| format!("{}: {x}", path.display())).collect::<Vec<_>>().join("\n"),
    })?;
    Ok((bytes, cfg))
}

fn run_experiment(command: &str, args: &RunArgs) -> Result<(), Failure> {
    let (bytes, mut cfg) = read_config(&args.config)?;
    if cfg.command() != command {
        return Err(Failure {
            code: EXIT_SCHEMA,
            message: format!("{}: /schema: config is for `{}`, not `{command}`", args.config.display(), cfg.command()),
        });
    }
    if let Some(seed) = args.seed {
        cfg.set_seed(seed);
    }
    let base = args.config.parent().unwrap_or(Path::new("."));
    let start = Instant::now();
    let outputs = match run::execute(&cfg, base) {
        Ok(o) => o,
        Err(e) => {
            let dump_body = run::diagnostic(&cfg, &e);
            let f = Failure::from(e);
            if f.code == EXIT_NUMERICAL {
                let _ = std::fs::create_dir_all(&args.out);
                let dump = args.out.join("diagnostic.json");
                let _ = std::fs::write(&dump, serde_json::to_string_pretty(&dump_body).unwrap_or_default() + "\n");
                return Err(Failure { code: f.code, message: format!("{} (diagnostic written to {})", f.message, dump.display()) });
            }
            return Err(f);
        }
    };
    let first = run::write_outputs(&args.out, &outputs, &cfg, &args.config, &bytes, args.force)?;
    println!("{command}: {} in {:.1} s -> {}", outputs.summary, start.elapsed().as_secs_f64(), first.display());
    Ok(())
}

fn library(action: &LibraryCmd) -> Result<(), Failure> {
    let lib = bundled_library();
    match action {
        LibraryCmd::List => {
            println!("{:>3}  {:<5} {:>6}  {:>12}  {:>10}", "idx", "gate", "T_ns", "Omega_m/dEz", "peak");
            for (k, e) in lib.iter().enumerate() {
                println!("{k:>3}  {:<5} {:>6}  {:>12}  {:>10.4}", e.gate.label(), e.params.t_gate, e.relative_amplitude, e.params.peak());
            }
        }
        LibraryCmd::Show { index } => {
            let e = lib.get(*index).ok_or_else(|| Failure::usage(format!("no entry {index}; the library has {} entries", lib.len())))?;
            let v = serde_json::json!({
                "gate": e.gate, "relative_amplitude": e.relative_amplitude, "params": e.params,
                "peak": e.params.peak(), "area": e.params.area(), "angle": run::angle_label(e.gate.angle()),
            });
            println!("{}", serde_json::to_string_pretty(&v).expect("entry serializes"));
        }
    }
    Ok(())
}

fn validate(path: &Path) -> Result<(), Failure> {
    let (_, cfg) = read_config(path)?;
    println!("{}: ok ({})", path.display(), cfg.command());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("error: invalid thread count {n}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    }
    let result = match &cli.command {
        Cmd::Synthesize(a) => run_experiment("synthesize", a),
        Cmd::SweepCoupling(a) => run_experiment("sweep-coupling", a),
        Cmd::SweepAmplitude(a) => run_experiment("sweep-amplitude", a),
        Cmd::Noise1f(a) => run_experiment("noise-1f", a),
        Cmd::Multiqubit(a) => run_experiment("multiqubit", a),
        Cmd::ZzGate(a) => run_experiment("zz-gate", a),
        Cmd::Entropy(a) => run_experiment("entropy", a),
        Cmd::Library { action } => library(action),
        Cmd::Validate { config } => validate(config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
