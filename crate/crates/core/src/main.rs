use clap::Parser;

fn main() {
    let args = nbe_core::cli::Args::parse();
    std::process::exit(nbe_core::cli::main_with_args(args));
}
