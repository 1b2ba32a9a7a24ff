use std::path::PathBuf;
use std::process::ExitCode;

fn usage() -> ! {
    eprintln!(
        "Usage: mfwh <config.toml> [--mode fpi|gmres|direct|analyze|verify] [--out DIR]

Runs the multi-frequency WaveHoltz solver driven by a TOML config.
Flags override the corresponding config keys."
    );
    std::process::exit(1);
}

fn main() -> ExitCode {
    let mut args = std::env::args().skip(1);
    let mut config: Option<PathBuf> = None;
    let mut mode: Option<String> = None;
    let mut out: Option<PathBuf> = None;
    while let Some(a) = args.next() {
        match a.as_str() {
            "--mode" => mode = Some(args.next().unwrap_or_else(|| usage())),
            "--out" => out = Some(PathBuf::from(args.next().unwrap_or_else(|| usage()))),
            "-h" | "--help" => usage(),
            _ if config.is_none() && !a.starts_with('-') => config = Some(PathBuf::from(a)),
            _ => usage(),
        }
    }
    let Some(config) = config else { usage() };
    match mfwh::runner::run(&config, mode.as_deref(), out.as_deref()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
