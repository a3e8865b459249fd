use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use hafactor_core::adiabatic::{spectrum_trace, Schedule};
use hafactor_core::equations::bit_length;
use hafactor_core::pipeline::{factor, FactorResult, Mode, PipelineConfig};
use hafactor_core::{build_equations, BitSplit, Error};

#[derive(Parser)]
#[command(name = "hafactor", version, about = "Factor biprimes with classical simplification and a simulated adiabatic processor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Factor n and report the factors.
    Factor {
        n: u64,
        #[command(flatten)]
        run: RunArgs,
        /// Write the column equations of the successful split as JSON.
        #[arg(long, value_name = "P")]
        dump_equations: Option<PathBuf>,
        /// Write the residual system as JSON.
        #[arg(long, value_name = "P")]
        dump_residual: Option<PathBuf>,
        /// Write the final Hamiltonian as JSON.
        #[arg(long, value_name = "P")]
        dump_hamiltonian: Option<PathBuf>,
        /// Write the per-step evolution trace as CSV.
        #[arg(long, value_name = "P.csv")]
        trace: Option<PathBuf>,
        /// Print the result as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Sample the instantaneous spectrum of the Hamiltonian that factors n.
    Spectrum {
        n: u64,
        #[command(flatten)]
        run: RunArgs,
        /// Number of evenly spaced points on [0, 1].
        #[arg(long, default_value_t = 101)]
        samples: usize,
        #[arg(long, value_name = "P.csv")]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Number of evolution steps.
    #[arg(long = "steps", value_name = "M", default_value_t = 20)]
    steps: usize,
    /// Total anneal time.
    #[arg(long = "total-time", value_name = "T", default_value_t = 3.5)]
    total_time: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Hybrid)]
    mode: ModeArg,
    /// Only try this split of bit lengths.
    #[arg(long, value_name = "LP,LQ", value_parser = parse_split)]
    split: Option<(u32, u32)>,
    /// Largest register the simulator accepts.
    #[arg(long, default_value_t = hafactor_core::hamiltonian::DEFAULT_QUBIT_CAP)]
    qubit_cap: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Hybrid,
    Peng,
}

fn parse_split(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s.split_once(',').ok_or("expected LP,LQ")?;
    let parse = |x: &str| x.trim().parse::<u32>().map_err(|e| format!("{x:?}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

impl RunArgs {
    fn config(&self, n: u64) -> Result<PipelineConfig> {
        let split_override = self
            .split
            .map(|(lp, lq)| BitSplit::new(bit_length(n), lp, lq))
            .transpose()?;
        Ok(PipelineConfig {
            schedule: Schedule::new(self.total_time, self.steps)?,
            qubit_cap: self.qubit_cap,
            split_override,
            mode: match self.mode {
                ModeArg::Hybrid => Mode::Hybrid,
                ModeArg::Peng => Mode::Peng,
            },
            ..PipelineConfig::default()
        })
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value)
        .with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn skipped(what: &str, path: &Path) {
    eprintln!("note: no {what} for this result; {} not written", path.display());
}

fn print_human(res: &FactorResult) {
    println!("{} = {} x {}", res.n, res.p, res.q);
    let split = res
        .split
        .map_or_else(|| "none".to_owned(), |s| format!("({}, {})", s.p_bits, s.q_bits));
    println!(
        "method {:?}, split {split}, {} residual variables on {} qubits",
        res.method, res.residual_vars, res.qubits
    );
    if let Some(f) = res.final_fidelity {
        println!("final fidelity {f:.6}");
    }
    println!("verified: {}", res.verified);
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Factor { n, run, dump_equations, dump_residual, dump_hamiltonian, trace, json } => {
            let res = factor(n, &run.config(n)?)?;
            if let Some(path) = dump_equations {
                match res.split {
                    Some(split) => write_json(&path, &build_equations(n, split)?.to_json())?,
                    None => skipped("equation system", &path),
                }
            }
            if let Some(path) = dump_residual {
                match &res.residual {
                    Some(r) => write_json(&path, &r.to_json())?,
                    None => skipped("residual system", &path),
                }
            }
            if let Some(path) = dump_hamiltonian {
                match &res.hamiltonian {
                    Some(h) => write_json(&path, &h.to_json())?,
                    None => skipped("Hamiltonian", &path),
                }
            }
            if let Some(path) = trace {
                match &res.trace {
                    Some(t) => t.write_csv(create(&path)?)?,
                    None => skipped("adiabatic trace", &path),
                }
            }
            if json {
                println!("{}", serde_json::to_string_pretty(&res.summary())?);
            } else {
                print_human(&res);
            }
        }
        Command::Spectrum { n, run, samples, out } => {
            let res = factor(n, &run.config(n)?)?;
            let h = res.hamiltonian.as_ref().ok_or(Error::NothingToEncode)?;
            let spec = spectrum_trace(h, samples)?;
            spec.write_csv(create(&out)?)?;
            println!(
                "{} samples over {} qubits, minimum gap {:.6} at s = {:.3}",
                spec.samples.len(),
                spec.num_qubits,
                spec.min_gap,
                spec.min_gap_at
            );
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::PrimeOrNotBiprime(_)) => 2,
        Some(Error::CapExceeded { .. }) => 3,
        Some(Error::InvalidInput(_) | Error::InfeasibleSplit { .. } | Error::NothingToEncode) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(4),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
