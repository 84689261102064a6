use clap::Parser;

fn main() {
    let cli = tlab_cli::Cli::parse();
    if let Err(e) = tlab_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
