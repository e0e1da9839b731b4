use clap::Parser;
use levy_spread::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PRICER_LOG", "warn")).init();
    std::process::exit(run(Cli::parse()));
}
