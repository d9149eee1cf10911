use clap::Parser;
use powerctl_cli::args::Cli;
use powerctl_cli::error::EXIT_INTERNAL;

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    if let Some(dir) = &cli.common.out {
        if let Err(e) = std::fs::create_dir_all(dir) {
            eprintln!("powerctl: cannot create {}: {e}", dir.display());
            std::process::exit(EXIT_INTERNAL);
        }
    }
    let report = powerctl_cli::execute(&cli, argv);
    if let Some(err) = &report.error {
        eprintln!("powerctl {}: {err}", report.command);
    }
    if let Err(e) = powerctl_cli::emit(&cli, &report) {
        eprintln!("powerctl: {e}");
        std::process::exit(e.exit_code());
    }
    std::process::exit(report.exit_code);
}
