fn main() {
    std::process::exit(slelab_cli::main_with(std::env::args_os()));
}
