use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use madprompts_cli::args::{Cli, Command, PromptsCommand};
use madprompts_cli::{cmd_embed, cmd_eval, cmd_metrics, prompts_dump, CliError};

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Embed(args) => {
            let summary = cmd_embed(&args.resolve()?)?;
            log::info!(
                "wrote {} embeddings (dim {}), {} skipped",
                summary.written,
                summary.dim,
                summary.failed.len()
            );
        }
        Command::Eval(args) => {
            for out in cmd_eval(&args.resolve()?)? {
                println!("== {} ({})", out.key, out.json_path.display());
                print!("{}", out.report.to_table());
            }
        }
        Command::Prompts(PromptsCommand::Dump(args)) => {
            let (selector, label, dot) = args.resolve()?;
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(prompts_dump(selector, label, dot).as_bytes())
                .map_err(CliError::io("<stdout>"))?;
        }
        Command::Metrics(args) => {
            let report = cmd_metrics(&args.scores)?;
            if args.json {
                print!("{}", report.to_json());
            } else {
                print!("{}", report.to_table());
            }
        }
    }
    Ok(())
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
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
