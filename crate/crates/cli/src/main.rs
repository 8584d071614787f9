use std::process::ExitCode;

use clap::Parser;

use entrokit_cli::{run, Cli, RunConfig, RunError};

fn configure_threads() -> Result<(), RunError> {
    let Ok(raw) = std::env::var("ENTROKIT_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| RunError {
            kind: "config".into(),
            message: format!("ENTROKIT_THREADS must be a positive integer, got `{raw}`"),
            exit_code: 1,
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| RunError {
            kind: "config".into(),
            message: e.to_string(),
            exit_code: 1,
        })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("ERROR:config: {}", e.render().to_string().trim_end());
            return ExitCode::from(1);
        }
    };
    let result = configure_threads()
        .and_then(|()| RunConfig::from_cli(cli).map_err(RunError::from))
        .and_then(|cfg| run(&cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code)
        }
    }
}
