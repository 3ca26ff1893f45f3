fn main() {
    std::process::exit(uqforge::cli::main_with_args(std::env::args_os()));
}
