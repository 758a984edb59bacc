use clap::Parser;
use membrane_bm::cli::{run, Cli, EXIT_USAGE};

fn main() {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("MEMBRANE_BM_THREADS") {
        let threads = match v.parse::<usize>() {
            Ok(n) if n >= 1 => n,
            _ => {
                eprintln!("membrane-bm: MEMBRANE_BM_THREADS must be a positive integer, got '{v}'");
                std::process::exit(EXIT_USAGE);
            }
        };
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .expect("thread pool is built once");
    }
    std::process::exit(run(cli));
}
