use clap::error::ErrorKind;
use clap::Parser;

fn main() {
    // Usage errors exit 1; code 2 is reserved for infeasibility.
    let cli = match rddp::cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            std::process::exit(0);
        }
        Err(e) => {
            let _ = e.print();
            std::process::exit(rddp::cli::EXIT_ERROR);
        }
    };
    std::process::exit(rddp::cli::run(cli));
}
