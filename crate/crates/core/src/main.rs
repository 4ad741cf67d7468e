fn main() {
    std::process::exit(activegsa::harness::cli::main_with(std::env::args_os()));
}
