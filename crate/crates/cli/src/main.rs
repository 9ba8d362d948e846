use clap::Parser;
use isbft_cli::{execute, Cli};

fn main() {
    // Usage errors from clap already exit with code 2.
    let cli = Cli::parse();
    std::process::exit(execute(&cli));
}
