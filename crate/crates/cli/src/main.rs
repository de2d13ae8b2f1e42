use clap::Parser;

fn main() {
    let cli = bcross_cli::Cli::parse();
    std::process::exit(bcross_cli::run(&cli));
}
