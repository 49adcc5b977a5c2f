use clap::Parser;

fn main() {
    let cli = ionsim::cli::Cli::parse();
    match ionsim::cli::run(&cli) {
        Ok(dirs) => {
            for d in dirs {
                println!("wrote {}", d.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
