fn main() {
    std::process::exit(dirac_index::cli::run(std::env::args_os()));
}
