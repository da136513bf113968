use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser)]
#[command(
    name = "rcs",
    version,
    about = "Random circuit sampling: generation, simulation and fidelity estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write random grid circuits as canonical JSON.
    Generate(GenerateArgs),
    /// Write two-qubit calibration circuits for one coupler.
    Coupler(CouplerArgs),
    /// Write a randomly miscalibrated calibration map for a circuit.
    Miscalibrate(MiscalibrateArgs),
    /// Simulate a circuit and write its amplitudes.
    Simulate(SimulateArgs),
    /// Draw noisy samples from a circuit.
    Sample(SampleArgs),
    /// Estimate F_XEB of a sample file or of every manifest entry.
    Xeb(XebArgs),
    /// Evaluate the product-formula fidelity prediction.
    Predict(PredictArgs),
    /// Per-level Fourier-Walsh fidelities as CSV.
    Spectral(SpectralArgs),
    /// Fit native fSim parameters from coupler-circuit samples.
    Calfit(CalfitArgs),
    /// Total variation distance between samples and the mixture model.
    Distance(DistanceArgs),
    /// Blind challenge / respond / verify exchange.
    #[command(subcommand)]
    Blind(BlindCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum Pattern {
    Efgh,
    Abcdcdab,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Full,
    Elided,
    Patch,
}

#[derive(Args)]
struct CircuitShape {
    #[arg(long)]
    n: usize,
    /// Number of cycles.
    #[arg(long)]
    m: usize,
    #[arg(long, value_enum, default_value = "efgh")]
    pattern: Pattern,
    #[arg(long, value_enum, default_value = "full")]
    variant: VariantArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    count: u64,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    shape: CircuitShape,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CouplerArgs {
    /// Coupler as `row,col:row,col`.
    #[arg(long)]
    edge: String,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    count: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MiscalibrateArgs {
    #[arg(long)]
    circuit: PathBuf,
    /// Largest angle offset in radians.
    #[arg(long)]
    magnitude: f64,
    #[arg(long, value_enum, default_value = "uniform")]
    offsets: Offsets,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CircuitInput {
    #[arg(long)]
    circuit: PathBuf,
    /// Calibration to apply before simulating.
    #[arg(long)]
    calibration: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    input: CircuitInput,
    /// Write only the amplitudes of these samples, one line per sample.
    #[arg(long)]
    samples: Option<PathBuf>,
    /// Write the full table in the binary dump format.
    #[arg(long, conflicts_with = "samples")]
    binary: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SampleNoise {
    Mixture,
    Pauli,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    input: CircuitInput,
    #[arg(long, value_enum, default_value = "mixture")]
    noise: SampleNoise,
    /// Mixture fidelity.
    #[arg(long, default_value_t = 1.0)]
    phi: f64,
    /// Symmetric readout flip rate applied after mixture sampling.
    #[arg(long, default_value_t = 0.0)]
    readout: f64,
    #[command(flatten)]
    rates: RateArgs,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RateArgs {
    #[arg(long, default_value_t = 0.0016)]
    e1: f64,
    #[arg(long, default_value_t = 0.0062)]
    e2: f64,
    #[arg(long, default_value_t = 0.038)]
    eq: f64,
}

#[derive(Args)]
struct XebArgs {
    #[arg(long, conflicts_with_all = ["circuit", "samples", "amplitudes"])]
    manifest: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    circuit: Option<PathBuf>,
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    samples: Option<PathBuf>,
    /// Per-sample amplitudes; without it the circuit is simulated.
    #[arg(long)]
    amplitudes: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Use averaged rates with explicit counts instead of a circuit file.
    #[arg(long, requires_all = ["n", "g1", "g2"], conflicts_with = "circuit")]
    averaged: bool,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    g1: Option<usize>,
    #[arg(long)]
    g2: Option<usize>,
    #[arg(long, required_unless_present = "averaged")]
    circuit: Option<PathBuf>,
    #[command(flatten)]
    rates: RateArgs,
}

#[derive(Args)]
struct SpectralArgs {
    #[command(flatten)]
    input: CircuitInput,
    #[arg(long)]
    samples: PathBuf,
    /// Bootstrap replicates for the error bands (0 disables them).
    #[arg(long, default_value_t = 200)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fit levels `lo..=hi` for the secondary fidelity, as `lo:hi`.
    #[arg(long)]
    fit: Option<String>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalfitArgs {
    /// Coupler circuit files, paired in order with `--samples`.
    #[arg(long, required = true, num_args = 1..)]
    circuit: Vec<PathBuf>,
    #[arg(long, required = true, num_args = 1..)]
    samples: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
}

#[derive(Args)]
struct DistanceArgs {
    #[command(flatten)]
    input: CircuitInput,
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    phi: f64,
}

#[derive(Subcommand)]
enum BlindCommand {
    /// Write challenge circuits (no amplitudes).
    Challenge(ChallengeArgs),
    /// Play the device: sample every challenge circuit.
    Respond(RespondArgs),
    /// Score a response against its challenge.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    Before,
    After,
}

#[derive(Args)]
struct ChallengeArgs {
    #[command(flatten)]
    shape: CircuitShape,
    /// Samples requested per circuit.
    #[arg(long)]
    samples: usize,
    /// Whether the prover publishes calibration before or after sampling.
    #[arg(long, value_enum, default_value = "before")]
    calibration_order: Order,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProverNoiseArg {
    Mixture,
    Uniform,
    Pauli,
}

#[derive(Clone, Copy, ValueEnum)]
enum Offsets {
    Uniform,
    Fixed,
}

#[derive(Clone, Copy, ValueEnum)]
enum Publish {
    Actual,
    Standard,
}

#[derive(Args)]
struct RespondArgs {
    #[arg(long)]
    challenge: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "mixture")]
    noise: ProverNoiseArg,
    #[arg(long, default_value_t = 1.0)]
    phi: f64,
    #[arg(long, default_value_t = 0.0)]
    readout: f64,
    #[command(flatten)]
    rates: RateArgs,
    /// Largest deviation of the device's gates from the standard ones.
    #[arg(long, default_value_t = 0.0)]
    miscalibration: f64,
    #[arg(long, value_enum, default_value = "uniform")]
    offsets: Offsets,
    #[arg(long, default_value_t = 0)]
    miscalibration_seed: u64,
    #[arg(long, value_enum, default_value = "actual")]
    publish: Publish,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    challenge: PathBuf,
    #[arg(long)]
    response: PathBuf,
    /// Fidelity threshold; defaults to half the averaged prediction.
    #[arg(long)]
    threshold: Option<f64>,
}

const EXIT_USAGE: u8 = 64;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
