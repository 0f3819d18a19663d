use std::process::ExitCode;

fn main() -> ExitCode {
    npu::cli::main_with_args(std::env::args_os())
}
