//! Command-line entry point; see `enray --help`.

fn main() {
    std::process::exit(enray::cli::run(std::env::args_os()));
}
