use clap::Parser;

fn main() -> std::process::ExitCode {
    chemoplan::cli::main_with(chemoplan::cli::Cli::parse())
}
