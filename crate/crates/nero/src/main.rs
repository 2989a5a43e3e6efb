fn main() {
    std::process::exit(nero::cli::main_with_args(std::env::args_os()));
}
