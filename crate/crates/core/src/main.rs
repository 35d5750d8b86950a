fn main() {
    std::process::exit(plus_core::cli::run(std::env::args_os()));
}
