use clap::Parser;

use hypdelay::cli::{init_threads, run, Cli};

fn main() {
    let cli = Cli::parse();
    init_threads();
    match run(&cli) {
        Ok(m) => {
            if !m.files.is_empty() {
                eprintln!("wrote {} files", m.files.len());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
