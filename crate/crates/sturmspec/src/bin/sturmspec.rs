use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(sturmspec::cli::run(std::env::args_os().skip(1)) as u8)
}
