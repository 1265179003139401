use std::process::ExitCode;

use clap::Parser;
use rare::cli::{run, Cli, RunConfig};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RARE_LOG", "info")).init();
    let cli = Cli::parse();
    let outcome = RunConfig::resolve(&cli.flags).and_then(|config| run(cli.command, &config));
    match outcome {
        Ok(artifacts) => {
            for path in artifacts {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
