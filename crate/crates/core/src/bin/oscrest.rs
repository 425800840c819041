fn main() {
    std::process::exit(oscrest::cli::main_with(std::env::args_os()));
}
