use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(keepaugment_cli::run(std::env::args_os()))
}
