fn main() {
    std::process::exit(binno::cli::run());
}
