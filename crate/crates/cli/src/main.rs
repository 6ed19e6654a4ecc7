//! `caufrac`: causal-fraction analysis of empirical models and the
//! phrase-annotation pipeline.
//!
//! Exit codes: 0 success, 1 input error, 2 internal/solver error. The
//! `CAUFRAC_LOG` environment variable sets the log level (error, warn,
//! info, debug).

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::{
    cmd_fractions, cmd_pipeline, cmd_plot, cmd_report, cmd_validate, ArithmeticChoice,
    FractionsOpts, MethodChoice, PipelineOpts,
};

#[derive(Parser)]
#[command(
    name = "caufrac",
    version,
    about = "Causal fractions of empirical models, from reference tables or phrase annotations"
)]
struct Cli {
    /// Worker threads for batch computation (default: logical CPUs).
    /// Outputs are byte-identical for every setting.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArithmeticArg {
    /// Infer from the file: fraction strings stay exact, decimals go float.
    Auto,
    Rational,
    Float,
}

impl From<ArithmeticArg> for ArithmeticChoice {
    fn from(value: ArithmeticArg) -> Self {
        match value {
            ArithmeticArg::Auto => ArithmeticChoice::Auto,
            ArithmeticArg::Rational => ArithmeticChoice::Rational,
            ArithmeticArg::Float => ArithmeticChoice::Float,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    /// Closed form for two-event chains, LP for no-signalling.
    Auto,
    /// Closed form only; the no-signalling fraction is omitted.
    Closed,
    /// Exact LP for every order.
    Lp,
    /// Marginal-difference upper bounds only.
    Bound,
}

impl From<MethodArg> for MethodChoice {
    fn from(value: MethodArg) -> Self {
        match value {
            MethodArg::Auto => MethodChoice::Auto,
            MethodArg::Closed => MethodChoice::Closed,
            MethodArg::Lp => MethodChoice::Lp,
            MethodArg::Bound => MethodChoice::Bound,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Schema-validate scenario/model JSON and annotation/phrase/spec CSV
    /// files; machine-readable diagnostics on stderr.
    Validate {
        /// Files to check; CSV kinds are sniffed from their headers.
        files: Vec<PathBuf>,
    },
    /// Compute causal fractions for each model file (all three two-event
    /// orders) into report.json.
    Fractions {
        /// Model files (JSON or table CSV).
        files: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "auto")]
        method: MethodArg,
        #[arg(long, value_enum, default_value = "auto")]
        arithmetic: ArithmeticArg,
        /// Embed the witness model attaining each fraction.
        #[arg(long)]
        witness: bool,
        /// Float-mode row normalization tolerance (default 1e-9).
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Full run: aggregate annotations, build models, compute fractions,
    /// summarize, correlate, and plot.
    Pipeline {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        phrases: PathBuf,
        #[arg(long)]
        specs: PathBuf,
        /// Exclude neutral-grade scores from the averages.
        #[arg(long)]
        drop_neutral: bool,
        #[arg(long, value_enum, default_value = "float")]
        arithmetic: ArithmeticArg,
        /// Share-above threshold for the fraction summaries.
        #[arg(long, default_value_t = 0.7)]
        threshold: f64,
        #[arg(long)]
        tolerance: Option<f64>,
        /// One-sided p-values (default two-sided).
        #[arg(long)]
        one_sided: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Summaries and correlations from an existing fractions report.
    Report {
        #[arg(long)]
        fractions: PathBuf,
        #[arg(long, default_value_t = 0.7)]
        threshold: f64,
        #[arg(long)]
        one_sided: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Histogram and scatter files from an existing fractions report.
    Plot {
        #[arg(long)]
        fractions: PathBuf,
        #[arg(long, default_value_t = 0.7)]
        threshold: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CAUFRAC_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
        {
            log::warn!("thread pool setup failed, using defaults: {e}");
        }
    }
    let result = match cli.command {
        Command::Validate { files } => cmd_validate(&files),
        Command::Fractions {
            files,
            method,
            arithmetic,
            witness,
            tolerance,
            out,
        } => cmd_fractions(
            &files,
            &FractionsOpts {
                method: method.into(),
                arithmetic: arithmetic.into(),
                witness,
                tolerance,
                out,
            },
        ),
        Command::Pipeline {
            annotations,
            phrases,
            specs,
            drop_neutral,
            arithmetic,
            threshold,
            tolerance,
            one_sided,
            out,
        } => cmd_pipeline(
            &annotations,
            &phrases,
            &specs,
            &PipelineOpts {
                drop_neutral,
                arithmetic: arithmetic.into(),
                threshold,
                tolerance,
                one_sided,
                out,
            },
        ),
        Command::Report {
            fractions,
            threshold,
            one_sided,
            out,
        } => cmd_report(&fractions, threshold, one_sided, &out),
        Command::Plot {
            fractions,
            threshold,
            out,
        } => cmd_plot(&fractions, threshold, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!(
                "{}",
                serde_json::json!({"status": "error", "error": err.message()})
            );
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
