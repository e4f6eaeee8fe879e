use clap::Parser;

use paperprint_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{}", out.stdout);
            std::process::exit(out.code);
        }
        Err(e) => {
            eprintln!("paperprint: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
