fn main() {
    std::process::exit(insertrank_cli::run());
}
