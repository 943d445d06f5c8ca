fn main() {
    std::process::exit(selrel_cli::main_with_args(std::env::args_os()));
}
