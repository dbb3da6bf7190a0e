use clap::Parser;

fn main() -> std::process::ExitCode {
    let cli = dsa::cli::Cli::parse();
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    std::process::ExitCode::from(dsa::cli::execute(&cli))
}
