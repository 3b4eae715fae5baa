use std::process::ExitCode;

fn main() -> ExitCode {
    slowfast_game::cli::main_with_args(std::env::args_os())
}
