use clap::Parser;

use upad::cli::{execute, Cli};

fn main() {
    if let Err(e) = execute(Cli::parse()) {
        eprintln!("upad: {e}");
        std::process::exit(e.exit_code());
    }
}
