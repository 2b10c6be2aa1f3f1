use std::process::ExitCode;

use tsf_cli::{configure_threads, dispatch, parse_config, CliError};

fn run() -> Result<i32, CliError> {
    configure_threads(std::env::var("TSF_THREADS").ok().as_deref())?;
    let config = parse_config(std::env::args_os())?;
    dispatch(&config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let code = match run() {
        Ok(code) => code,
        Err(CliError::Help(text)) => {
            println!("{text}");
            0
        }
        Err(e @ CliError::Usage(_)) => {
            eprintln!("{e}");
            e.exit_code()
        }
        Err(e) => {
            eprintln!("tsf: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
