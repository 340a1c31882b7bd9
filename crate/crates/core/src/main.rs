use clap::Parser;

use volterra_dispatch::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
