fn main() {
    std::process::exit(skyport_cli::main_with_args(std::env::args_os()));
}
