use std::process::ExitCode;

use clap::Parser;
use spikec::files::canonicalize;
use spikec::{run, Cli, EXIT_OK};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(threads) = std::env::var("SPIKEC_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::warn!("ignoring SPIKEC_THREADS: {e}");
        }
    }
    let cli = Cli::parse();
    let (body, code) = match run(&cli) {
        Ok(value) => (value, EXIT_OK),
        Err(e) => (e.body, e.code),
    };
    print!("{}", canonicalize(&body));
    ExitCode::from(code as u8)
}
