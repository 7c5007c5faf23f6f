use std::path::PathBuf;

use clap::{Parser, Subcommand};
use coherent_youla::cli::{self, Options};

/// Coherent quantum controller synthesis via the Youla-Kucera parameterization.
#[derive(Parser)]
#[command(name = "qyk", version)]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
    /// Number of points of the evaluation grid (overrides the file).
    #[arg(long, global = true)]
    grid_points: Option<usize>,
    /// Pass/fail tolerance of the command's main check.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Seed for randomized runs; currently no command is randomized.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print a single JSON object instead of text.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Physical realizability of the plant in FILE.
    CheckPr { file: PathBuf },
    /// Doubly coprime factors of the plant in FILE.
    Factorize {
        file: PathBuf,
        /// Also write factors.toml here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Weighted H2 synthesis by projected gradient descent.
    SynthesizeH2 {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Weighted H-infinity norm of the closed loop for a given Q.
    EvalHinf {
        file: PathBuf,
        #[arg(long)]
        q_from: Option<PathBuf>,
        /// Directory for hinf_profile.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Assemble K(Q), close the loop and report stability.
    ClosedLoop {
        file: PathBuf,
        #[arg(long)]
        q_from: PathBuf,
    },
}

fn main() {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { cli::EXIT_INPUT } else { cli::EXIT_PASS };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let opts = Options { grid_points: args.grid_points, tol: args.tol, seed: args.seed, json: args.json };
    let (mut out, mut err) = (std::io::stdout().lock(), std::io::stderr().lock());
    let code = match &args.cmd {
        Cmd::CheckPr { file } => cli::check_pr(file, &opts, &mut out, &mut err),
        Cmd::Factorize { file, out: dir } => cli::factorize_cmd(file, dir.as_deref(), &opts, &mut out, &mut err),
        Cmd::SynthesizeH2 { file, out: dir } => cli::synthesize_h2(file, dir, &opts, &mut out, &mut err),
        Cmd::EvalHinf { file, q_from, out: dir } => cli::eval_hinf(file, q_from.as_deref(), dir, &opts, &mut out, &mut err),
        Cmd::ClosedLoop { file, q_from } => cli::closed_loop(file, q_from, &opts, &mut out, &mut err),
    };
    std::process::exit(code);
}
