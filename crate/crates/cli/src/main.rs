//! `sigma2`: exact and numeric checks of the σ₂-curvature functional.
//!
//! Exit status: 0 when every check in the command passed, 1 when a check
//! failed (the report is still printed), 2 on usage or input errors.

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod exact_cmds;
mod numeric_cmds;
mod report;

use report::{CliError, Format, Outcome};

#[derive(Parser)]
#[command(name = "sigma2", version, about = "σ₂-curvature geometry engine and verification suite")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Print a JSON report (see schemas/report.schema.json).
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    /// Print CSV for commands that produce tables.
    #[arg(long, global = true)]
    csv: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Reproduce the (S²)⁴ counterexample family with exact rationals.
    Counterexample,
    /// Run a named variation check (prop3.1 … prop3.6, eq3.1, dvol, d2vol, dr, dric, dsigma2).
    Verify(VerifyArgs),
    /// Pointwise curvature at a chart point.
    Curvature(CurvatureArgs),
    /// Volume, ∫σ₂ and H by quadrature, with exact values when available.
    Functional(FunctionalArgs),
    /// σ₂-versus-volume comparison along a metric family.
    Comparison(ComparisonArgs),
    /// Sign of the Einstein operator on parallel TT directions.
    StabilityProbe(ProbeArgs),
    /// Lichnerowicz–Obata deficit of scalar fields on a round sphere.
    Obata(ObataArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// Check name.
    check: String,
    #[arg(long, default_value = "sphere3")]
    background: String,
    /// Perturbation: zero, metric, velocity, parallel:…, conformal:harmonic:…, conformal:fourier:…
    #[arg(long = "h")]
    h: Option<String>,
    #[arg(long)]
    resolution: Option<usize>,
    /// Spatial finite-difference step for integrated checks.
    #[arg(long)]
    step: Option<f64>,
    /// Number of t-steps in the Richardson schedule (1e-2 halved each time).
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Seed for sampled directions.
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct CurvatureArgs {
    #[arg(long, default_value = "sphere3")]
    background: String,
    /// Comma-separated chart coordinates; defaults to an interior point.
    #[arg(long, allow_hyphen_values = true)]
    point: Option<String>,
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    /// Family parameter (family backgrounds only), e.g. 1/10.
    #[arg(long, allow_hyphen_values = true)]
    t: Option<String>,
}

#[derive(Args)]
struct FunctionalArgs {
    #[arg(long, default_value = "sphere3")]
    background: String,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long, default_value_t = 5e-3)]
    step: f64,
    /// Order of the exact H series.
    #[arg(long, default_value_t = 4)]
    order: usize,
    /// Family parameter (family backgrounds only).
    #[arg(long, allow_hyphen_values = true)]
    t: Option<String>,
    /// Also evaluate at the rescaled metric c²·g and check invariance of H.
    #[arg(long)]
    scale: Option<String>,
    /// Relative tolerance for numeric-versus-exact agreement.
    #[arg(long, default_value_t = 1e-7)]
    tolerance: f64,
}

#[derive(Args)]
struct ComparisonArgs {
    /// `counterexample`, `trivial`, a family JSON file, or
    /// `conformal:base=sphere3,f=harmonic:k=2`.
    #[arg(long, default_value = "counterexample")]
    family: String,
    /// Comma-separated parameter values.
    #[arg(long, default_value = "0,0.05,0.1", allow_hyphen_values = true)]
    t: String,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long, default_value_t = 5e-3)]
    step: f64,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long, default_value = "product:s2x4")]
    background: String,
    /// Parallel TT direction whose image under Δ_E to report.
    #[arg(long = "h")]
    h: Option<String>,
}

#[derive(Args)]
struct ObataArgs {
    #[arg(long, default_value = "sphere2")]
    background: String,
    /// Single field: constant, harmonic:k=…[,axis=…], or random:seed=….
    #[arg(long)]
    u: Option<String>,
    /// Number of random harmonic combinations when --u is absent.
    #[arg(long, default_value_t = 50)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Counterexample => exact_cmds::counterexample(),
        Command::Verify(a) => numeric_cmds::verify(a),
        Command::Curvature(a) => numeric_cmds::curvature(a),
        Command::Functional(a) => numeric_cmds::functional(a),
        Command::Comparison(a) => exact_cmds::comparison(a),
        Command::StabilityProbe(a) => exact_cmds::stability_probe(a),
        Command::Obata(a) => numeric_cmds::obata(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = match (cli.json, cli.csv) {
        (true, _) => Format::Json,
        (_, true) => Format::Csv,
        _ => Format::Text,
    };
    match run(&cli) {
        Ok(outcome) => {
            print!("{}", outcome.render(format));
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
