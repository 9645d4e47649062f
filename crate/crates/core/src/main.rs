fn main() {
    std::process::exit(sparselow::cli::main());
}
