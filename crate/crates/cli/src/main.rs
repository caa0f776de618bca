fn main() {
    std::process::exit(hyperlangevin_cli::main_with_args(std::env::args_os()));
}
