use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use cmtrace_cli::commands::{self, Outcome};
use cmtrace_cli::{default_cache_dir, Format, RunConfig, CACHE_ENV};

#[derive(Parser, Debug)]
#[command(name = "cmtrace", version, about = "Partition numbers from traces of singular moduli")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Working precision in bits (default: chosen per point)
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    prec_bits: Option<u64>,

    /// Series truncation order M (default: chosen from the growth bound)
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    terms: Option<u64>,

    #[arg(long, global = true, default_value_t = 32)]
    guard_bits: usize,

    /// Directory of the coefficient cache
    #[arg(long, global = true, env = CACHE_ENV)]
    cache_dir: Option<PathBuf>,

    /// Disable the on-disk coefficient cache
    #[arg(long, global = true)]
    no_cache: bool,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Move CM points toward the cusp with Atkin-Lehner involutions
    #[arg(long, global = true)]
    relocation: bool,

    /// Sum in a fixed order (pass `false` for a parallel reduction)
    #[arg(
        long,
        global = true,
        action = ArgAction::Set,
        num_args = 0..=1,
        default_value_t = true,
        default_missing_value = "true"
    )]
    deterministic_sum: bool,

    /// -v for progress, -vv for debug output
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certified p(n) and the trace Tr(n)
    Pn {
        #[arg(value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
    },
    /// The polynomial H_n with exact rational coefficients
    Poly {
        #[arg(value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
    },
    /// Heegner forms and CM points for discriminant -(24n - 1)
    Forms {
        #[arg(value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
    },
    /// Compare p(a..b) against the pentagonal recurrence
    Verify {
        #[arg(value_parser = parse_range)]
        range: (u64, u64),
        /// Flip one bit of the first trace (self-test of the comparison)
        #[arg(long, hide = true)]
        perturb: bool,
    },
    /// Evaluate P at the CM point of the form [a, b, c]
    #[command(allow_negative_numbers = true)]
    Eval { a: i64, b: i64, c: i64 },
}

fn parse_range(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected <a>..<b>, got {s:?}"))?;
    let a: u64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    if a == 0 || b < a {
        return Err(format!("range must satisfy 1 <= a <= b, got {a}..{b}"));
    }
    Ok((a, b))
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let explicit = cli.cache_dir.is_some();
    let mut config = RunConfig {
        precision_bits: cli.prec_bits.map(|v| v as usize),
        terms: cli.terms.map(|v| v as usize),
        guard_bits: cli.guard_bits,
        cache_dir: if cli.no_cache {
            None
        } else {
            cli.cache_dir.or_else(default_cache_dir)
        },
        format: cli.format,
        relocation: cli.relocation,
        deterministic_sum: cli.deterministic_sum,
    };
    if let Err(e) = config.validate() {
        if explicit || config.cache_dir.is_none() {
            return Err(e);
        }
        log::warn!("{e}; running without a cache");
        config.cache_dir = None;
        config.validate()?;
    }
    match cli.command {
        Command::Pn { n } => commands::cmd_pn(n, &config),
        Command::Poly { n } => commands::cmd_poly(n, &config),
        Command::Forms { n } => commands::cmd_forms(n, &config),
        Command::Verify {
            range: (a, b),
            perturb,
        } => commands::cmd_verify(a, b, perturb, &config),
        Command::Eval { a, b, c } => commands::cmd_eval(a, b, c, &config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(out) => {
            print!("{}", out.body);
            if out.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
