fn main() {
    std::process::exit(ftni::cli::main());
}
