use clap::Parser;

use cwgan::cli::{exit_code, run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("CWGAN_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("warning: CWGAN_THREADS ignored: {e}");
            }
        }
    }
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(exit_code(&e));
    }
}
