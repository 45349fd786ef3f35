fn main() {
    std::process::exit(critrep::cli::main_with_args(std::env::args_os()));
}
