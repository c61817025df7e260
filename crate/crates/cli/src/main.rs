use std::process::ExitCode;

fn main() -> ExitCode {
    mfsim::cli::main_with_args(std::env::args_os())
}
