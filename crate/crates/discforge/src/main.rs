fn main() {
    std::process::exit(discforge::cli::run());
}
