mod args;
mod commands;
mod record;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Multiply(a) => commands::multiply(a),
        Command::Analyze(a) => commands::analyze_cmd(a),
        Command::Bench(a) => commands::bench(a),
        Command::EstEval(a) => commands::est_eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, commands::Failure::Usage(_)) {
                eprintln!("run `hllgemm --help` for usage");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
