use clap::Parser;
use nordwatch_gateway::cli::{Cli, Command};
use nordwatch_gateway::{commands, serve};

fn main() {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let result = match cli.command {
        Command::Calibrate(args) => commands::calibrate(&args),
        Command::Run(args) => commands::run(&args),
        Command::Serve(args) => serve::serve(&args),
        Command::Report(args) => commands::report(&args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
