fn main() {
    std::process::exit(equiders::cli::main_with_args(std::env::args_os()));
}
