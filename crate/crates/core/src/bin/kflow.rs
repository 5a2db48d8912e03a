use clap::Parser;

fn main() {
    let cli = kflow::cli_io::Cli::parse();
    let code = kflow::cli_io::run(&cli, &mut std::io::stdout().lock(), &mut std::io::stderr());
    std::process::exit(code);
}
