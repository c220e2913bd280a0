use std::process::ExitCode;

fn main() -> ExitCode {
    oam_qkd::cli::main_with_args(std::env::args_os())
}
