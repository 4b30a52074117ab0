fn main() {
    std::process::exit(prefopt::cli::run());
}
