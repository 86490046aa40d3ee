use clap::Parser;
use finsler_cli::args::Cli;

fn main() {
    let cli = Cli::parse();
    std::process::exit(finsler_cli::execute(&cli));
}
