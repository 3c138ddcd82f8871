fn main() {
    std::process::exit(vibrocal::cli::main_with_args(std::env::args_os()));
}
