fn main() {
    std::process::exit(hiercast::cli::run(std::env::args_os()));
}
