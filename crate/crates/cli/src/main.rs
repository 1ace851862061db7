fn main() {
    std::process::exit(normsol_cli::run(std::env::args_os()));
}
