use clap::Parser;

use multilambda::cli::{run, Args};

fn main() {
    let args = Args::parse();
    if let Err(e) = run(&args) {
        eprintln!("{}", e.diagnostic());
        std::process::exit(e.exit_code());
    }
}
