use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(diqkd_core::cli::run(std::env::args_os()))
}
