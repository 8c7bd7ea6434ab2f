use std::process::ExitCode;

fn main() -> ExitCode {
    let code = mvbayes::cli::run(std::env::args_os());
    ExitCode::from(code as u8)
}
