use clap::Parser;

fn main() {
    let cli = lifeplan::cli::Cli::parse();
    std::process::exit(lifeplan::cli::run(cli));
}
