fn main() {
    std::process::exit(indll::cli::run());
}
