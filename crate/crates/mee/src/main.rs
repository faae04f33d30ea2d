use clap::Parser;

use mee::cli::{dispatch, Cli};

fn main() {
    let cli = Cli::parse();
    let level = if cli.quiet { "off" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}
