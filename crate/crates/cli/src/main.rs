use clap::Parser;
use raf_lab_cli::{run_cli, Cli};

fn main() {
    let cli = Cli::parse();
    std::process::exit(run_cli(&cli));
}
