fn main() {
    std::process::exit(mehom::cli::main_with(std::env::args_os()));
}
