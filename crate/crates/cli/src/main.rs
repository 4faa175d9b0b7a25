use clap::Parser;
use spectral_portrait::{init_threads, run, Cli};
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(64);
        }
    };
    let outcome = init_threads().map_err(Into::into).and_then(|_| cli.resolve().map_err(Into::into)).and_then(|cfg| run(&cfg));
    match outcome {
        Ok(o) => {
            for f in &o.files {
                println!("wrote {}", f.display());
            }
            println!("{}", o.summary);
            ExitCode::from(o.status as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
