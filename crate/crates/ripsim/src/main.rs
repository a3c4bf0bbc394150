fn main() {
    std::process::exit(ripsim::cli::run());
}
