use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(drro::cli::execute(std::env::args_os()))
}
