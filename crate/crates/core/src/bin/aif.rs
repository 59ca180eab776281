//! `aif` command-line tool.

fn main() {
    std::process::exit(aif_core::cli::cli_main(std::env::args_os()));
}
