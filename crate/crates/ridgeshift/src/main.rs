use std::process::ExitCode;

fn main() -> ExitCode {
    ridgeshift::cli::main_with_args(std::env::args_os())
}
