use clap::Parser;
use rydtomo_cli::{run, thread_cap, Cli, CliError, THREADS_ENV};

fn init_threads() -> Result<(), CliError> {
    let cap = thread_cap(std::env::var(THREADS_ENV).ok().as_deref())?;
    #[cfg(feature = "parallel")]
    if let Some(n) = cap {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = cap;
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| run(&cli, &mut std::io::stdout().lock()));
    if let Err(e) = result {
        eprintln!("rydtomo: {e}");
        std::process::exit(e.exit_code());
    }
}
