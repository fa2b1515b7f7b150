mod config;
mod dispatch;
mod error;

use std::path::Path;
use std::process::ExitCode;

use crate::error::CliError;

fn main() -> ExitCode {
    let cfg = match config::parse_config(std::env::args_os()) {
        Ok(cfg) => cfg,
        Err(CliError::Usage(e)) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&e, None),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build() {
        Ok(pool) => pool,
        Err(e) => return fail(&CliError::config("workers", e.to_string()), Some(&cfg.out)),
    };
    match pool.install(|| dispatch::dispatch(&cfg)) {
        Ok(summary) => {
            println!(
                "{}: {} ({} files in {})",
                serde_json::to_value(cfg.command).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                summary.status,
                summary.files.len(),
                cfg.out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e, Some(&cfg.out)),
    }
}

fn fail(e: &CliError, out: Option<&Path>) -> ExitCode {
    if let CliError::Usage(u) = e {
        let _ = u.print();
    }
    let record = e.record();
    let json = serde_json::to_string(&record).expect("error records serialize");
    eprintln!("{json}");
    if let Some(dir) = out {
        if std::fs::create_dir_all(dir).is_ok() {
            let _ = std::fs::write(dir.join("error.json"), json + "\n");
        }
    }
    ExitCode::from(record.exit_code as u8)
}
