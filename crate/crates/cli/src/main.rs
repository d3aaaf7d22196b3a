use clap::Parser;

fn main() {
    std::process::exit(orbitflow_cli::run(orbitflow_cli::Cli::parse()));
}
