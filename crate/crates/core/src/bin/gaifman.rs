fn main() {
    std::process::exit(gaifman::cli::run(std::env::args_os()));
}
