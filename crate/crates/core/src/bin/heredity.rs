use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(heredity::cli::run(std::env::args_os()))
}
