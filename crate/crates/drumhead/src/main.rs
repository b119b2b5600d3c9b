fn main() {
    std::process::exit(drumhead::cli::main_with(std::env::args_os()));
}
