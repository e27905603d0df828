use clap::Parser;

fn main() {
    let cli = adapted_ot::cli::Cli::parse();
    std::process::exit(adapted_ot::cli::run(cli));
}
