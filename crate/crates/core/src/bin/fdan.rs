fn main() {
    std::process::exit(fdan::cli::run(std::env::args_os()));
}
