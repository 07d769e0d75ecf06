fn main() {
    std::process::exit(mml::cli::main());
}
