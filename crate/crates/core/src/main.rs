fn main() {
    std::process::exit(cutproject::cli::run(std::env::args_os()));
}
