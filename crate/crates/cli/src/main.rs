use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(sdesim_cli::run(std::env::args_os()))
}
