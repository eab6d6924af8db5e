fn main() {
    std::process::exit(latentsna_cli::run());
}
