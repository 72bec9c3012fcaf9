fn main() {
    std::process::exit(evsim::cli::main_with(std::env::args_os()));
}
