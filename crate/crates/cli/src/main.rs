use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(nlinterf_cli::run(std::env::args_os(), std::env::vars().collect()))
}
