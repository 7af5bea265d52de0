fn main() {
    std::process::exit(verigen::cli::run());
}
