use clap::Parser;

fn main() {
    let cli = lapdde::cli::Cli::parse();
    std::process::exit(lapdde::cli::main_with(cli));
}
