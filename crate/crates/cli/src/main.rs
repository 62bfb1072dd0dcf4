use std::process::ExitCode;

fn main() -> ExitCode {
    nbwrangle_cli::app::init_logging();
    nbwrangle_cli::app::run(std::env::args_os())
}
