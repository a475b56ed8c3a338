use clap::Parser;

fn main() {
    let cli = nrqfl_cli::Cli::parse();
    std::process::exit(nrqfl_cli::execute(&cli));
}
