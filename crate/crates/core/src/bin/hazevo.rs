fn main() {
    std::process::exit(hazevo::cli::main_with_args(std::env::args_os()));
}
