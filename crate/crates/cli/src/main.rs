use clap::Parser;

fn main() {
    let cli = symfield::cli::Cli::parse();
    if let Err(e) = symfield::commands::run(cli) {
        if e.is_broken_pipe() {
            return;
        }
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
