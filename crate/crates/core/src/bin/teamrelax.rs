use clap::Parser;

fn main() {
    let config = teamrelax::cli::RunConfig::parse();
    std::process::exit(teamrelax::cli::run(&config));
}
