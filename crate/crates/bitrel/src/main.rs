fn main() {
    std::process::exit(bitrel::cli::run_main());
}
