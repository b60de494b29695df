use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use neurograph_cli::logging::Logger;
use neurograph_cli::{run_cli, thread_cap, Cli, CliError, EXIT_INVALID, EXIT_OK};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn code(n: i32) -> ExitCode {
    ExitCode::from(n as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => code(EXIT_OK),
                _ => code(EXIT_INVALID),
            };
        }
    };
    let log = Logger::new(cli.quiet, cli.verbose);
    let fail = |e: CliError| {
        log.error("cli", &e.to_string());
        code(e.exit_code())
    };
    match thread_cap() {
        Ok(Some(n)) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log.error("setup", &e.to_string());
            }
        }
        Ok(None) => {}
        Err(e) => return fail(e),
    }
    match run_cli(cli) {
        Ok(()) => code(EXIT_OK),
        Err(e) => fail(e),
    }
}
