fn main() {
    std::process::exit(expsum::cli::run(std::env::args_os()));
}
