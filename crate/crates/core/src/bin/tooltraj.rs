fn main() {
    std::process::exit(tooltraj::cli::run(std::env::args_os()));
}
