fn main() {
    std::process::exit(thomas::cli::run(std::env::args_os()));
}
