fn main() {
    std::process::exit(memmon::cli::main_with_args(std::env::args_os()));
}
