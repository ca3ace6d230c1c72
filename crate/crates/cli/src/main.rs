use clap::error::ErrorKind;
use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match tdas_cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let err = anyhow::Error::new(e);
            eprintln!("{}", tdas_cli::usage_error_line(&err));
            std::process::exit(1);
        }
    };
    if let Err(err) = tdas_cli::run(cli) {
        eprintln!("{}", tdas_cli::error_line(&err));
        std::process::exit(tdas_cli::exit_code(&err));
    }
}
