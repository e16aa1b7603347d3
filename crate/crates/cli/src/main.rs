fn main() {
    std::process::exit(pfedlia_cli::main_with_args(std::env::args_os()));
}
