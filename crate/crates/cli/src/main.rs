use clap::Parser;

fn main() {
    if let Err(e) = mrcm_cli::run(mrcm_cli::Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
