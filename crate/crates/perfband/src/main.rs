fn main() {
    std::process::exit(perfband::cli::run());
}
