use clap::Parser;

use cabs_cli::{configure_threads, run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CABS_LOG", "info")).init();
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse_from(&argv);
    configure_threads(cli.threads);
    if let Err(e) = run(&cli, &argv) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
