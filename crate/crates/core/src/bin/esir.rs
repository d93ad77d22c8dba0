use clap::Parser;
use esir::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("esir: {e}");
        std::process::exit(e.exit_code());
    }
}
