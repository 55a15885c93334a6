fn main() {
    std::process::exit(rsgd_core::cli::run(std::env::args_os()));
}
