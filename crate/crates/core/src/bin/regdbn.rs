fn main() {
    std::process::exit(regdbn::cli::main_with_args(std::env::args_os()));
}
