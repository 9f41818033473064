use capcmk_cli::commands::{self, Context};
use capcmk_cli::{Code, Failure};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "capcmk", version, about = "Capillary Christoffel-Minkowski solver")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Only print warnings and errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve sigma_k(W(h)) = f for the configured problem.
    Solve,
    /// Evaluate f = sigma_k(W(h)) for a support function file.
    Forward {
        h: PathBuf,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Check the invariants of a solved directory.
    Verify { dir: PathBuf },
    /// Capillary area measures of a solved body.
    Measures {
        dir: PathBuf,
        /// Measure orders, comma separated (default 0..=n).
        #[arg(long, value_delimiter = ',')]
        orders: Vec<usize>,
        /// File of node indices restricting the measures.
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Steiner parameters s, comma separated.
        #[arg(long, value_delimiter = ',')]
        steiner: Vec<f64>,
    },
    /// Export the reconstructed body.
    Export {
        dir: PathBuf,
        /// obj or csv.
        #[arg(long, default_value = "obj")]
        format: String,
    },
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("CAPCMK_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::invalid(format!("CAPCMK_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::invalid(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<Code, Failure> {
    configure_threads()?;
    let ctx = Context { config: cli.config, out: cli.out, quiet: cli.quiet };
    match cli.command {
        Command::Solve => commands::solve_cmd(&ctx),
        Command::Forward { h, k } => commands::forward_cmd(&ctx, &h, k),
        Command::Verify { dir } => commands::verify_cmd(&ctx, &dir),
        Command::Measures { dir, orders, mask, steiner } => {
            commands::measures_cmd(&ctx, &dir, &orders, mask.as_deref(), &steiner)
        }
        Command::Export { dir, format } => commands::export_cmd(&ctx, &dir, &format),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors are invalid input; exit 2 is reserved for warnings
            return ExitCode::from(if e.use_stderr() { Code::InvalidData as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
