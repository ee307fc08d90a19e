fn main() {
    std::process::exit(qwp_core::cli::run(std::env::args_os()));
}
