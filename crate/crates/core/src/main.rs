use std::process::ExitCode;

fn main() -> ExitCode {
    corebench::cli::main_entry()
}
