fn main() {
    std::process::exit(qsde::cli::run(std::env::args_os()));
}
