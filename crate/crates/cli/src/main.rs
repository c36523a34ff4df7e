mod args;
mod error;
mod output;
mod plots;
mod run;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::{Cli, Command, Job};
use crate::error::{CliError, Result};

fn dispatch(cli: Cli) -> Result<()> {
    let mut job = match cli.command {
        Command::Rerun(r) => {
            let mut job = run::read_manifest(&r.manifest)?.job;
            if let Some(input) = r.input {
                job.replace_input(input)?;
            }
            job
        }
        Command::Synth(a) => Job::Synth(a),
        Command::Ingest(c) => Job::Ingest(c),
        Command::Fit(c) => Job::Fit(c),
        Command::Sweep(c) => Job::Sweep(c),
        Command::Analyze(c) => Job::Analyze(c),
    };
    job.resolve_paths()?;
    run::execute(&job, &cli.out_dir)
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let err = CliError::validation(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            std::process::exit(err.kind.exit_code());
        }
    };
    if let Err(e) = dispatch(cli) {
        eprintln!("{}", e.to_json());
        std::process::exit(e.kind.exit_code());
    }
}
