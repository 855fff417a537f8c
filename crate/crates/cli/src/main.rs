//! `swmodel`: simulate the switch model, check traces, exercise the format
//! codecs and generate workloads.
//!
//! Exit status: 0 pass, 1 property failure, 2 usage or configuration
//! error, 3 runtime fault.

mod check;
mod fmt;
mod sim;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use swmodel::gen::{generate, Profile};

pub const PROPERTY: u8 = 1;
pub const USAGE: u8 = 2;
pub const FAULT: u8 = 3;

/// An error carrying the exit status it maps to.
#[derive(Debug)]
pub struct Fail(pub u8, pub anyhow::Error);

pub type CmdResult = Result<(), Fail>;

pub trait OrExit<T> {
    fn or_exit(self, code: u8) -> Result<T, Fail>;
}

impl<T, E: Into<anyhow::Error>> OrExit<T> for Result<T, E> {
    fn or_exit(self, code: u8) -> Result<T, Fail> {
        self.map_err(|e| Fail(code, e.into()))
    }
}

pub fn fail(code: u8, msg: impl std::fmt::Display) -> Fail {
    Fail(code, anyhow::anyhow!("{msg}"))
}

/// Writes to stdout, ignoring a closed pipe.
pub fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

pub fn read_file(path: &PathBuf) -> Result<String, Fail> {
    std::fs::read_to_string(path).map_err(|e| fail(USAGE, format!("cannot read {}: {e}", path.display())))
}

#[derive(Parser)]
#[command(name = "swmodel", version, about = "Switch data-plane model and trace checker")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the switch and write a JSON-lines trace.
    Sim(sim::SimArgs),
    /// Check a trace against the step axioms or an application property.
    Check(check::CheckArgs),
    /// Encode, decode or match packets against header types and formats.
    Fmt {
        #[arg(value_enum)]
        op: FmtOp,
        /// Schema JSON file with `types` and `format`, or `std` for the
        /// built-in types and the standard packet format.
        #[arg(long, default_value = "std")]
        schema: String,
        /// Header values (encode) or hex packet (decode, match).
        #[arg(long)]
        data: PathBuf,
        /// Header types to decode, in order.
        #[arg(long = "header")]
        headers: Vec<String>,
    },
    /// Generate a reproducible input stream.
    Gen {
        #[arg(long, default_value_t = 16)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// tcp, udp, mixed or malformed:<rate>
        #[arg(long, default_value = "mixed")]
        profile: Profile,
        /// Comma-separated ingress ports to draw from.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        ports: Vec<u16>,
        /// Output file; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the clause registry document.
    Clauses,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum FmtOp {
    Encode,
    Decode,
    Match,
}

fn dispatch(cmd: Cmd) -> CmdResult {
    match cmd {
        Cmd::Sim(a) => sim::run(a),
        Cmd::Check(a) => check::run(a),
        Cmd::Fmt {
            op,
            schema,
            data,
            headers,
        } => fmt::run(op, &schema, &data, &headers),
        Cmd::Gen {
            count,
            seed,
            profile,
            ports,
            out,
        } => {
            let stream = generate(count, seed, profile, &ports);
            let text = serde_json::to_string_pretty(&stream).or_exit(USAGE)? + "\n";
            match out {
                Some(p) => std::fs::write(&p, text).or_exit(USAGE),
                None => {
                    emit(&text);
                    Ok(())
                }
            }
        }
        Cmd::Clauses => {
            emit(&swmodel::checker::clause::registry_doc());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail(code, e)) => {
            eprintln!("swmodel: {e}");
            ExitCode::from(code)
        }
    }
}
