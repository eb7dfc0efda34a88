fn main() {
    std::process::exit(sqht::cli::main_with_args(std::env::args_os()));
}
