fn main() {
    std::process::exit(finkey::cli::main_with_args(std::env::args_os()));
}
