use clap::Parser;

fn main() {
    let cli = qsfe_cli::Cli::parse();
    match qsfe_cli::execute(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
